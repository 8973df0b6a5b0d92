#include "matchfn/panel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "matchfn/error.hpp"
#include "matchfn/io.hpp"

namespace matchfn {

PeriodIndex parse_period(const std::string& label) {
  // YYYY-MM
  if (label.size() != 7 || label[4] != '-') {
    throw InputError("period '" + label + "' is not in YYYY-MM format");
  }
  for (std::size_t i : {0, 1, 2, 3, 5, 6}) {
    if (label[i] < '0' || label[i] > '9') {
      throw InputError("period '" + label + "' is not in YYYY-MM format");
    }
  }
  int year = std::stoi(label.substr(0, 4));
  int month = std::stoi(label.substr(5, 2));
  if (month < 1 || month > 12) throw InputError("period '" + label + "' has month out of range");
  return year * 12 + (month - 1);
}

std::string format_period(PeriodIndex period) {
  int year = period / 12;
  int month = period % 12 + 1;
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

MarketPanel::MarketPanel(std::string market_id, std::vector<Observation> observations)
    : market_id_(std::move(market_id)), observations_(std::move(observations)) {
  std::stable_sort(observations_.begin(), observations_.end(),
                   [](const Observation& a, const Observation& b) { return a.period < b.period; });

  const std::string where = market_id_.empty() ? std::string() : " in market '" + market_id_ + "'";
  std::size_t excess = 0;
  std::string first_excess;
  for (std::size_t i = 0; i < observations_.size(); ++i) {
    const auto& o = observations_[i];
    const std::string row = format_period(o.period) + where;
    if (!std::isfinite(o.hires) || o.hires < 0.0) {
      throw InputError("period " + row + ": field hires must be >= 0");
    }
    if (!std::isfinite(o.seekers) || o.seekers <= 0.0) {
      throw InputError("period " + row + ": field seekers must be > 0");
    }
    if (!std::isfinite(o.vacancies) || o.vacancies <= 0.0) {
      throw InputError("period " + row + ": field vacancies must be > 0");
    }
    if (i > 0) {
      const auto& prev = observations_[i - 1];
      if (prev.period == o.period) throw InputError("duplicate period " + row);
      if (o.period - prev.period > 1) {
        warnings_.push_back("gap of " + std::to_string(o.period - prev.period - 1) +
                            " month(s) before " + row);
      }
    }
    if (o.hires > o.seekers || o.hires > o.vacancies) {
      if (excess++ == 0) first_excess = format_period(o.period);
    }
  }
  if (excess > 0) {
    warnings_.push_back("hires exceed seekers or vacancies in " + std::to_string(excess) + " of " +
                        std::to_string(observations_.size()) + " periods" + where + " (first " +
                        first_excess + ")");
  }
}

std::vector<std::string> MarketPanel::period_labels() const {
  std::vector<std::string> out;
  out.reserve(size());
  for (const auto& o : observations_) out.push_back(format_period(o.period));
  return out;
}

std::vector<double> MarketPanel::hires() const {
  std::vector<double> out;
  out.reserve(size());
  for (const auto& o : observations_) out.push_back(o.hires);
  return out;
}

std::vector<double> MarketPanel::seekers() const {
  std::vector<double> out;
  out.reserve(size());
  for (const auto& o : observations_) out.push_back(o.seekers);
  return out;
}

std::vector<double> MarketPanel::vacancies() const {
  std::vector<double> out;
  out.reserve(size());
  for (const auto& o : observations_) out.push_back(o.vacancies);
  return out;
}

void MarketPanel::require_estimable() const {
  if (!meets_minimum_length()) {
    throw InputError("market '" + market_id_ + "' has " + std::to_string(size()) +
                     " observations; at least " + std::to_string(kMinEstimationLength) +
                     " are required for estimation");
  }
}

std::size_t MarketPanel::find_period(PeriodIndex period) const {
  auto it = std::lower_bound(observations_.begin(), observations_.end(), period,
                             [](const Observation& o, PeriodIndex p) { return o.period < p; });
  if (it == observations_.end() || it->period != period) return size();
  return static_cast<std::size_t>(it - observations_.begin());
}

RateSeries derived_rates(const MarketPanel& panel) {
  RateSeries r;
  r.tightness.reserve(panel.size());
  r.job_finding_rate.reserve(panel.size());
  r.worker_finding_rate.reserve(panel.size());
  for (const auto& o : panel.observations()) {
    r.tightness.push_back(o.vacancies / o.seekers);
    r.job_finding_rate.push_back(o.hires / o.seekers);
    r.worker_finding_rate.push_back(o.hires / o.vacancies);
  }
  return r;
}

// ---------------------------------------------------------------------------

PanelRows read_panel_rows(const std::filesystem::path& path, const ColumnSchema& schema) {
  auto table = io::read_csv(path);
  auto require = [&](const std::string& name) {
    auto c = table.column(name);
    if (c == table.header.size()) {
      throw InputError(path.string() + ": missing column '" + name + "'");
    }
    return c;
  };
  const auto c_period = require(schema.period);
  const auto c_hires = require(schema.hires);
  const auto c_seekers = require(schema.seekers);
  const auto c_vacancies = require(schema.vacancies);
  const auto c_market = schema.market.empty() ? table.header.size() : table.column(schema.market);

  PanelRows out;
  out.has_market_column = c_market != table.header.size();
  out.rows.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cells = table.rows[r];
    const std::string at = path.string() + ":" + std::to_string(table.line_numbers[r]);
    try {
      LabeledObservation row;
      if (out.has_market_column) row.market = cells[c_market];
      row.observation.period = parse_period(cells[c_period]);
      row.observation.hires = io::parse_number(cells[c_hires], schema.hires);
      row.observation.seekers = io::parse_number(cells[c_seekers], schema.seekers);
      row.observation.vacancies = io::parse_number(cells[c_vacancies], schema.vacancies);
      out.rows.push_back(std::move(row));
    } catch (const InputError& e) {
      throw InputError(at + ": " + e.what());
    }
  }
  return out;
}

namespace {

MarketPanel build_panel(std::string market, std::vector<Observation> obs,
                        const std::filesystem::path& source) {
  try {
    return MarketPanel(std::move(market), std::move(obs));
  } catch (const InputError& e) {
    throw InputError(source.string() + ": " + e.what());
  }
}

}  // namespace

MarketPanel load_panel(const std::filesystem::path& path, const ColumnSchema& schema) {
  auto rows = read_panel_rows(path, schema);
  std::vector<Observation> obs;
  obs.reserve(rows.rows.size());
  for (const auto& r : rows.rows) obs.push_back(r.observation);
  return build_panel(path.stem().string(), std::move(obs), path);
}

GroupedPanels group_by_market(std::span<const LabeledObservation> rows) {
  std::map<std::string, std::vector<Observation>> buckets;
  for (const auto& r : rows) buckets[r.market].push_back(r.observation);

  GroupedPanels out;
  for (auto& [market, obs] : buckets) {
    try {
      MarketPanel panel(market, std::move(obs));
      if (!panel.meets_minimum_length()) out.below_minimum.push_back(market);
      out.panels.emplace(market, std::move(panel));
    } catch (const InputError& e) {
      throw InputError("market '" + market + "': " + e.what());
    }
  }
  return out;
}

void write_panel_csv(const MarketPanel& panel, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "period,hires,seekers,vacancies\n";
  for (const auto& o : panel.observations()) {
    out << format_period(o.period) << ',' << io::format_number(o.hires) << ','
        << io::format_number(o.seekers) << ',' << io::format_number(o.vacancies) << '\n';
  }
  io::write_file_atomic(path, out.str());
}

// ---------------------------------------------------------------------------

ScalingMode parse_scaling_mode(const std::string& name) {
  if (name == "identity") return ScalingMode::identity;
  if (name == "min-max" || name == "min_max") return ScalingMode::min_max;
  if (name == "log-min-max" || name == "log_min_max") return ScalingMode::log_min_max;
  throw InputError("unknown scaling mode '" + name + "'");
}

std::string to_string(ScalingMode mode) {
  switch (mode) {
    case ScalingMode::identity: return "identity";
    case ScalingMode::min_max: return "min-max";
    case ScalingMode::log_min_max: return "log-min-max";
  }
  return "?";
}

CoordinateMap::CoordinateMap(ScalingMode mode, std::span<const double> values,
                             const std::string& name)
    : mode_(mode) {
  if (values.empty()) throw InputError("cannot scale an empty " + name + " column");
  double lo = mode_ == ScalingMode::log_min_max ? std::log(values.front()) : values.front();
  double hi = lo;
  for (double x : values) {
    double y = mode_ == ScalingMode::log_min_max ? std::log(x) : x;
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  if (!(hi > lo)) {
    throw InputError("degenerate support: " + name +
                     " is constant, a constant-column panel cannot be estimated");
  }
  if (mode_ == ScalingMode::identity) return;
  lo_ = lo;
  width_ = hi - lo;
}

double CoordinateMap::forward(double raw) const {
  switch (mode_) {
    case ScalingMode::identity: return raw;
    case ScalingMode::min_max: return (raw - lo_) / width_;
    case ScalingMode::log_min_max: return (std::log(raw) - lo_) / width_;
  }
  return raw;
}

double CoordinateMap::inverse(double scaled) const {
  switch (mode_) {
    case ScalingMode::identity: return scaled;
    case ScalingMode::min_max: return lo_ + scaled * width_;
    case ScalingMode::log_min_max: return std::exp(lo_ + scaled * width_);
  }
  return scaled;
}

ScaledPanel::ScaledPanel(MarketPanel source, ScalingMode mode) : source_(std::move(source)) {
  const auto seekers = source_.seekers();
  const auto vacancies = source_.vacancies();
  seeker_map_ = CoordinateMap(mode, seekers, "seekers");
  vacancy_map_ = CoordinateMap(mode, vacancies, "vacancies");

  points_.reserve(source_.size());
  for (std::size_t i = 0; i < source_.size(); ++i) {
    points_.push_back({seeker_map_.forward(seekers[i]), vacancy_map_.forward(vacancies[i])});
  }
  hires_ = source_.hires();

  hires_order_.resize(hires_.size());
  std::iota(hires_order_.begin(), hires_order_.end(), std::size_t{0});
  std::stable_sort(hires_order_.begin(), hires_order_.end(),
                   [&](std::size_t a, std::size_t b) { return hires_[a] < hires_[b]; });
  for (auto i : hires_order_) {
    sorted_hires_.push_back(hires_[i]);
    if (hires_support_.empty() || hires_support_.back() != hires_[i]) {
      hires_support_.push_back(hires_[i]);
    }
  }
}

}  // namespace matchfn
