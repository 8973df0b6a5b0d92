#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace matchfn {

/// Minimum number of periods required before a panel may be estimated.
inline constexpr std::size_t kMinEstimationLength = 10;

/// Months since year 0; "2014-01" maps to 2014 * 12.
using PeriodIndex = int;

PeriodIndex parse_period(const std::string& label);
std::string format_period(PeriodIndex period);

struct Observation {
  PeriodIndex period = 0;
  double hires = 0.0;
  double seekers = 0.0;
  double vacancies = 0.0;
};

/// Time-ordered (H, U, V) observations for one market. Immutable once built.
///
/// Construction enforces strictly increasing periods, U > 0, V > 0 and H >= 0.
/// Panels shorter than kMinEstimationLength are representable (a grouped load
/// may produce them) but are rejected by require_estimable().
class MarketPanel {
 public:
  MarketPanel() = default;
  /// Rows are sorted by period before validation.
  MarketPanel(std::string market_id, std::vector<Observation> observations);

  const std::string& market_id() const { return market_id_; }
  std::span<const Observation> observations() const { return observations_; }
  std::size_t size() const { return observations_.size(); }
  const Observation& operator[](std::size_t i) const { return observations_[i]; }

  std::vector<std::string> period_labels() const;
  std::vector<double> hires() const;
  std::vector<double> seekers() const;
  std::vector<double> vacancies() const;

  /// Calendar gaps and hires exceeding seekers or vacancies. Informational only.
  const std::vector<std::string>& warnings() const { return warnings_; }

  bool meets_minimum_length() const { return size() >= kMinEstimationLength; }
  /// Throws InputError naming the market when the panel is too short.
  void require_estimable() const;

  /// Position of the observation with the given period, or size() if absent.
  std::size_t find_period(PeriodIndex period) const;

 private:
  std::string market_id_;
  std::vector<Observation> observations_;
  std::vector<std::string> warnings_;
};

struct RateSeries {
  std::vector<double> tightness;            // V / U
  std::vector<double> job_finding_rate;     // H / U
  std::vector<double> worker_finding_rate;  // H / V
};

RateSeries derived_rates(const MarketPanel& panel);

// ---------------------------------------------------------------------------
// CSV input

struct ColumnSchema {
  std::string period = "period";
  std::string hires = "hires";
  std::string seekers = "seekers";
  std::string vacancies = "vacancies";
  std::string market = "market";  // optional; ignored when absent from the header
};

struct LabeledObservation {
  std::string market;
  Observation observation;
};

/// Parsed rows before grouping. `has_market_column` reports whether the
/// schema's market column was present in the header.
struct PanelRows {
  std::vector<LabeledObservation> rows;
  bool has_market_column = false;
};

PanelRows read_panel_rows(const std::filesystem::path& path, const ColumnSchema& schema = {});

/// Loads a single-market panel. Any market column is ignored.
MarketPanel load_panel(const std::filesystem::path& path, const ColumnSchema& schema = {});

struct GroupedPanels {
  std::map<std::string, MarketPanel> panels;
  /// Markets whose panel is shorter than kMinEstimationLength.
  std::vector<std::string> below_minimum;
};

/// Partitions rows by market label; each group is validated independently and
/// failures are reported with the group name.
GroupedPanels group_by_market(std::span<const LabeledObservation> rows);

/// Writes period,hires,seekers,vacancies using shortest round-trip formatting.
void write_panel_csv(const MarketPanel& panel, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Estimation-space scaling

enum class ScalingMode { identity, min_max, log_min_max };

ScalingMode parse_scaling_mode(const std::string& name);
std::string to_string(ScalingMode mode);

/// Monotone map of one coordinate onto the unit interval.
class CoordinateMap {
 public:
  CoordinateMap() = default;
  /// Fits the map to the observed values. Throws InputError on degenerate support.
  CoordinateMap(ScalingMode mode, std::span<const double> values, const std::string& name);

  double forward(double raw) const;
  double inverse(double scaled) const;
  ScalingMode mode() const { return mode_; }

 private:
  ScalingMode mode_ = ScalingMode::identity;
  double lo_ = 0.0;
  double width_ = 1.0;
};

struct ScaledPoint {
  double u = 0.0;
  double v = 0.0;
};

/// A panel together with its coordinates in the space where the kernel
/// bandwidth is measured.
class ScaledPanel {
 public:
  ScaledPanel(MarketPanel source, ScalingMode mode = ScalingMode::log_min_max);

  const MarketPanel& source() const { return source_; }
  std::size_t size() const { return points_.size(); }
  std::span<const ScaledPoint> points() const { return points_; }
  std::span<const double> hires() const { return hires_; }

  /// Observation indices ordered by hires (stable on ties).
  std::span<const std::size_t> hires_order() const { return hires_order_; }
  /// Observed hires in ascending order (with repeats), aligned with hires_order().
  std::span<const double> sorted_hires() const { return sorted_hires_; }
  /// Sorted distinct observed hires.
  std::span<const double> hires_support() const { return hires_support_; }

  const CoordinateMap& seeker_map() const { return seeker_map_; }
  const CoordinateMap& vacancy_map() const { return vacancy_map_; }
  ScaledPoint forward(double seekers, double vacancies) const {
    return {seeker_map_.forward(seekers), vacancy_map_.forward(vacancies)};
  }

 private:
  MarketPanel source_;
  CoordinateMap seeker_map_;
  CoordinateMap vacancy_map_;
  std::vector<ScaledPoint> points_;
  std::vector<double> hires_;
  std::vector<std::size_t> hires_order_;
  std::vector<double> sorted_hires_;
  std::vector<double> hires_support_;
};

inline ScaledPanel scale_to_estimation_space(const MarketPanel& panel,
                                             ScalingMode mode = ScalingMode::log_min_max) {
  return ScaledPanel(panel, mode);
}

}  // namespace matchfn
