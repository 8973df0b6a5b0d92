#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "matchfn/config.hpp"

namespace matchfn::pipeline {

/// Collects a command's files in a hidden directory next to the target and
/// moves them into place only on commit(), so a failed command leaves the
/// output directory as it was.
class OutputStage {
 public:
  explicit OutputStage(std::filesystem::path target);
  ~OutputStage();
  OutputStage(const OutputStage&) = delete;
  OutputStage& operator=(const OutputStage&) = delete;

  /// Staging location for `relative`; parent directories are created.
  std::filesystem::path path(const std::filesystem::path& relative) const;
  void write(const std::filesystem::path& relative, const std::string& content);
  /// Moves every staged entry into the target, replacing existing ones.
  std::vector<std::filesystem::path> commit();

 private:
  std::filesystem::path target_;
  std::filesystem::path staging_;
};

/// One market to process. `subdir` is empty for a single-market input.
struct MarketInput {
  std::string name;
  std::filesystem::path subdir;
  MarketPanel panel;
};

/// Reads config.input; splits by the market column when present. Markets below
/// the minimum length are skipped with a warning.
std::vector<MarketInput> load_markets(const RunConfig& config, std::vector<std::string>& warnings);

struct CommandReport {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> warnings;
  std::vector<std::string> notes;  // short human-readable results
};

CommandReport cmd_simulate(const RunConfig& config);
CommandReport cmd_estimate(const RunConfig& config);
CommandReport cmd_elasticity(const RunConfig& config);
CommandReport cmd_report(const RunConfig& config);
CommandReport cmd_validate(const RunConfig& config);

// ---------------------------------------------------------------------------
// Monte Carlo validation

struct ReplicationResult {
  double alpha = 0.0;
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  std::size_t flagged = 0;
  double mard = 0.0;            // mean |A_hat - A| / A, both 100 at the base period
  double eta_seekers = 0.0;     // time averages of the global quadratic fit
  double eta_vacancies = 0.0;
  double returns_to_scale = 0.0;
  double roundtrip_median = 0.0;
  // Noise-free replicate with the same seed; NaN when disabled.
  double roundtrip_median_noise_free = 0.0;
  double ray_max_error = 0.0;   // worst CRS-ray relative error over the middle 80% of H/H0
  std::string status = "ok";    // or the failure message
};

/// Replication r for alpha uses seed + r. Replications run in parallel with
/// single-threaded estimation inside, so results do not depend on `threads`.
std::vector<ReplicationResult> run_validation(const ValidationSettings& settings,
                                              const identify::EstimationConfig& estimation,
                                              const elasticity::PenaltyConfig& penalty,
                                              std::uint64_t seed, int threads);

/// Worst relative CRS-ray error of the identified m over `points` values of psi
/// spanning the middle 80% of the observed H/H0 range.
double ray_check(const MarketPanel& panel, const identify::EstimationConfig& estimation,
                 std::size_t points);

std::string validation_csv(const std::vector<ReplicationResult>& rows);
/// Per-alpha means of the replication columns.
std::string validation_summary_csv(const std::vector<ReplicationResult>& rows);

}  // namespace matchfn::pipeline
