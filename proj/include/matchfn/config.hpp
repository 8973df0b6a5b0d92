#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "matchfn/dgp.hpp"
#include "matchfn/elasticity.hpp"
#include "matchfn/identify.hpp"
#include "matchfn/panel.hpp"

namespace matchfn {

/// Monte Carlo settings used by `validate`.
struct ValidationSettings {
  std::vector<double> alphas = {0.5, 0.3};
  std::size_t replications = 20;
  double noise_sd = 0.05;
  /// Also run each replication without noise (round-trip and CRS-ray checks).
  bool noise_free_checks = true;
  std::size_t ray_points = 41;
};

struct RunConfig {
  std::filesystem::path input;
  std::filesystem::path output = "out";
  ColumnSchema schema;

  identify::EstimationConfig estimation;
  std::size_t base_index = 0;
  double normalization = 100.0;
  std::size_t surface_psi_points = 41;
  std::size_t surface_lambda_points = 21;

  elasticity::PenaltyConfig penalty;
  std::size_t rolling_window = 24;
  elasticity::Denominator denominator = elasticity::Denominator::fitted;

  dgp::DgpSpec dgp;
  ValidationSettings validation;

  int threads = 0;
  std::uint64_t seed = 0;

  /// Throws InputError on the first invalid field.
  void validate() const;
};

/// Parses INI text: `[section]` headers, `key = value` lines, `;` or `#` comments
/// (whole-line, or trailing after whitespace).
/// Unknown sections or keys are errors.
RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Thread count from MATCHFN_THREADS, if set. Throws InputError when malformed.
std::optional<int> threads_from_environment();

/// The documented keys with their default values, as INI text.
std::string default_config_text();

}  // namespace matchfn
