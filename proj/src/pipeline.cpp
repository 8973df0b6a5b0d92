#include "matchfn/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "matchfn/dgp.hpp"
#include "matchfn/elasticity.hpp"
#include "matchfn/error.hpp"
#include "matchfn/identify.hpp"
#include "matchfn/io.hpp"
#include "matchfn/parallel.hpp"
#include "matchfn/svg.hpp"

namespace matchfn::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median(std::vector<double> v) {
  std::erase_if(v, [](double x) { return !std::isfinite(x); });
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Market names become directory names.
std::string directory_name(const std::string& market) {
  std::string out;
  for (char c : market) {
    const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += safe ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

identify::BasePoint base_for(const RunConfig& config, const MarketPanel& panel) {
  if (config.base_index >= panel.size()) {
    throw InputError("identify.base_index " + std::to_string(config.base_index) + " is past the end of market '" +
                     panel.market_id() + "' (" + std::to_string(panel.size()) + " periods)");
  }
  return identify::BasePoint::at(panel, config.base_index, config.normalization);
}

fs::path result_dir(const RunConfig& config, const MarketInput& m) { return config.output / m.subdir; }

void require_file(const fs::path& path, const char* produced_by) {
  if (!fs::exists(path)) {
    throw InputError("missing " + path.string() + " (run `" + produced_by + "` first)");
  }
}

std::string clean_message(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

OutputStage::OutputStage(fs::path target) : target_(std::move(target)) {
  static std::atomic<unsigned> counter{0};
  fs::create_directories(target_);
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  staging_ = target_ / (".staging-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" +
                        std::to_string(counter++));
  fs::create_directories(staging_);
}

OutputStage::~OutputStage() {
  std::error_code ec;
  fs::remove_all(staging_, ec);
}

fs::path OutputStage::path(const fs::path& relative) const {
  const auto p = staging_ / relative;
  fs::create_directories(p.parent_path());
  return p;
}

void OutputStage::write(const fs::path& relative, const std::string& content) {
  io::write_file_atomic(path(relative), content);
}

std::vector<fs::path> OutputStage::commit() {
  std::vector<fs::path> moved;
  // Files are moved one by one so that a market subdirectory written by an
  // earlier command keeps the files this command does not produce.
  for (auto it = fs::recursive_directory_iterator(staging_); it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    const auto rel = fs::relative(it->path(), staging_);
    const auto dest = target_ / rel;
    fs::create_directories(dest.parent_path());
    moved.push_back(dest);
  }
  std::sort(moved.begin(), moved.end());
  for (const auto& dest : moved) fs::rename(staging_ / fs::relative(dest, target_), dest);
  return moved;
}

// ---------------------------------------------------------------------------

std::vector<MarketInput> load_markets(const RunConfig& config, std::vector<std::string>& warnings) {
  if (config.input.empty()) throw InputError("no input panel given (--input or [input] path)");
  auto parsed = read_panel_rows(config.input, config.schema);
  std::vector<MarketInput> out;
  if (!parsed.has_market_column) {
    std::vector<Observation> obs;
    obs.reserve(parsed.rows.size());
    for (auto& r : parsed.rows) obs.push_back(r.observation);
    MarketPanel panel(config.input.stem().string(), std::move(obs));
    for (const auto& w : panel.warnings()) warnings.push_back(w);
    out.push_back({panel.market_id(), {}, std::move(panel)});
    return out;
  }
  auto grouped = group_by_market(parsed.rows);
  for (const auto& name : grouped.below_minimum) {
    warnings.push_back("market '" + name + "' has fewer than " + std::to_string(kMinEstimationLength) +
                       " periods and is skipped");
  }
  for (auto& [name, panel] : grouped.panels) {
    if (!panel.meets_minimum_length()) continue;
    for (const auto& w : panel.warnings()) warnings.push_back("market '" + name + "': " + w);
    out.push_back({name, directory_name(name), std::move(panel)});
  }
  if (out.empty()) throw InputError("no market in " + config.input.string() + " has enough periods to estimate");
  return out;
}

// ---------------------------------------------------------------------------

CommandReport cmd_simulate(const RunConfig& config) {
  auto spec = config.dgp;
  spec.seed = config.seed;
  dgp::validate(spec);
  const auto truth = dgp::simulate(spec);

  OutputStage stage(config.output);
  write_panel_csv(truth.panel, stage.path("panel.csv"));
  dgp::write_truth_csv(truth, stage.path("truth.csv"));
  CommandReport report;
  report.notes.push_back("simulated " + std::to_string(truth.panel.size()) + " periods of " +
                         dgp::describe(spec.technology) + " with seed " + std::to_string(spec.seed));
  report.written = stage.commit();
  return report;
}

CommandReport cmd_estimate(const RunConfig& config) {
  CommandReport report;
  const auto markets = load_markets(config, report.warnings);
  OutputStage stage(config.output);
  for (const auto& m : markets) {
    m.panel.require_estimable();
    const auto base = base_for(config, m.panel);
    // Throws DegradedError when too many periods are clamped; nothing is committed then.
    const auto eff = identify::recover_efficiency(m.panel, base, config.estimation, config.threads);
    const auto fitted = identify::reconstruct_matching(m.panel, eff, config.estimation, config.threads);

    const ScaledPanel scaled(m.panel, config.estimation.scaling);
    const auto [psi_lo, psi_hi] = identify::psi_bracket(scaled, base, config.estimation.solve.bracket_expansion);
    double lam_lo = std::numeric_limits<double>::infinity();
    double lam_hi = 0.0;
    for (const auto& o : m.panel.observations()) {
      lam_lo = std::min(lam_lo, o.seekers / base.seekers);
      lam_hi = std::max(lam_hi, o.seekers / base.seekers);
    }
    const auto surface = identify::trace_F(scaled, base, identify::log_grid(psi_lo, psi_hi, config.surface_psi_points),
                                           identify::log_grid(lam_lo, lam_hi, config.surface_lambda_points),
                                           config.estimation.kernel, config.threads);

    identify::write_efficiency_csv(eff, stage.path(m.subdir / "efficiency.csv"));
    identify::write_fitted_csv(m.panel, fitted, stage.path(m.subdir / "fitted.csv"));
    identify::write_fsurface_csv(surface, stage.path(m.subdir / "fsurface.csv"));

    std::ostringstream note;
    note << "market '" << m.name << "': " << m.panel.size() << " periods, " << eff.flagged_count()
         << " edge-flagged, median |H_hat - H| / H = " << io::format_number(median(fitted.relative_error));
    report.notes.push_back(note.str());
    if (eff.flagged_count() > 0) {
      report.warnings.push_back("market '" + m.name + "': " + std::to_string(eff.flagged_count()) +
                                " periods clamped to the edge of the traced support");
    }
  }
  report.written = stage.commit();
  return report;
}

CommandReport cmd_elasticity(const RunConfig& config) {
  CommandReport report;
  const auto markets = load_markets(config, report.warnings);
  OutputStage stage(config.output);
  for (const auto& m : markets) {
    m.panel.require_estimable();
    const auto eff_path = result_dir(config, m) / "efficiency.csv";
    require_file(eff_path, "estimate");
    const auto eff = identify::read_efficiency_csv(eff_path);

    const auto features = elasticity::build_features(m.panel, eff);
    for (const auto& w : features.warnings) report.warnings.push_back("market '" + m.name + "': " + w);
    const auto fit = elasticity::lasso_fit(features, m.panel.hires(), config.penalty, config.threads);
    const auto global = elasticity::elasticity_series(m.panel, eff, fit, config.denominator);
    elasticity::write_elasticity_csv(global, stage.path(m.subdir / "elasticity.csv"));
    elasticity::write_fit_csv(fit, stage.path(m.subdir / "fit.csv"));

    if (m.panel.size() >= config.rolling_window) {
      const auto rolling = elasticity::rolling_elasticities(m.panel, eff, config.rolling_window, config.penalty,
                                                            config.denominator, config.threads);
      elasticity::write_elasticity_csv(rolling, stage.path(m.subdir / "elasticity_rolling.csv"));
    } else {
      report.warnings.push_back("market '" + m.name + "': " + std::to_string(m.panel.size()) +
                                " periods is shorter than the rolling window of " +
                                std::to_string(config.rolling_window) + "; rolling fit skipped");
    }

    const auto avg = global.time_average();
    std::ostringstream note;
    note << "market '" << m.name << "': eta_AU = " << io::format_number(avg[0])
         << ", eta_V = " << io::format_number(avg[1]) << ", rts = " << io::format_number(avg[2])
         << " (penalty " << io::format_number(fit.penalty) << ", R^2 " << io::format_number(fit.r_squared) << ")";
    report.notes.push_back(note.str());
  }
  report.written = stage.commit();
  return report;
}

namespace {

std::string summary_text(const MarketInput& m, const identify::EfficiencySeries& eff,
                         const elasticity::ElasticityReport& global,
                         const std::optional<elasticity::ElasticityReport>& rolling) {
  const auto line = [](const char* what, const elasticity::ElasticityReport& r) {
    const auto avg = r.time_average();
    std::size_t defined = 0;
    for (bool d : r.defined) defined += d ? 1 : 0;
    std::ostringstream out;
    out << what << " (" << defined << " periods): eta_AU = " << io::format_number(avg[0])
        << ", eta_V = " << io::format_number(avg[1]) << ", rts = " << io::format_number(avg[2]) << '\n';
    return out.str();
  };
  std::ostringstream out;
  out << "market: " << m.name << '\n';
  out << "periods: " << m.panel.size() << " (" << format_period(m.panel[0].period) << " to "
      << format_period(m.panel[m.panel.size() - 1].period) << ")\n";
  out << "efficiency base: " << format_period(eff.periods[eff.base.index]) << " = "
      << io::format_number(eff.base.normalization) << '\n';
  out << "edge-flagged periods: " << eff.flagged_count() << '\n';
  out << "time-averaged elasticities\n";
  out << line("  global", global);
  if (rolling) out << line("  rolling", *rolling);
  return out.str();
}

}  // namespace

CommandReport cmd_report(const RunConfig& config) {
  CommandReport report;
  const auto markets = load_markets(config, report.warnings);
  OutputStage stage(config.output);
  for (const auto& m : markets) {
    const auto dir = result_dir(config, m);
    require_file(dir / "efficiency.csv", "estimate");
    require_file(dir / "elasticity.csv", "elasticity");
    const auto eff = identify::read_efficiency_csv(dir / "efficiency.csv");
    const auto global = elasticity::read_elasticity_csv(dir / "elasticity.csv");
    std::optional<elasticity::ElasticityReport> rolling;
    if (fs::exists(dir / "elasticity_rolling.csv")) {
      rolling = elasticity::read_elasticity_csv(dir / "elasticity_rolling.csv");
    }
    if (eff.values.size() != m.panel.size() || global.periods.size() != m.panel.size()) {
      throw InputError("results in " + dir.string() + " do not match the input panel; rerun estimate");
    }

    const auto labels = m.panel.period_labels();
    const auto rates = derived_rates(m.panel);
    svg::LineChart rc;
    rc.title = "Tightness and finding rates: " + m.name;
    rc.y_label = "ratio";
    rc.x_labels = labels;
    rc.series = {{"V/U", rates.tightness, "#1f77b4"},
                 {"H/U", rates.job_finding_rate, "#ff7f0e"},
                 {"H/V", rates.worker_finding_rate, "#2ca02c"}};
    stage.write(m.subdir / "rates.svg", svg::render(rc));

    svg::LineChart ec;
    ec.title = "Matching efficiency: " + m.name;
    ec.y_label = "A (base = " + io::format_number(eff.base.normalization) + ")";
    ec.x_labels = labels;
    ec.series = {{"A", eff.values, "#1f77b4"}};
    ec.reference = eff.base.normalization;
    ec.marker = svg::Marker{eff.base.index, eff.values[eff.base.index], "base"};
    stage.write(m.subdir / "efficiency.svg", svg::render(ec));

    svg::LineChart lc;
    lc.title = "Matching elasticities: " + m.name;
    lc.y_label = "elasticity";
    lc.x_labels = labels;
    lc.reference = 1.0;
    const auto masked = [](const std::vector<double>& v, const std::vector<bool>& defined) {
      auto out = v;
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (!defined[i]) out[i] = kNaN;
      }
      return out;
    };
    lc.series = {{"eta_AU (global)", masked(global.eta_seekers, global.defined), "#1f77b4"},
                 {"eta_V (global)", masked(global.eta_vacancies, global.defined), "#ff7f0e"},
                 {"rts (global)", masked(global.returns_to_scale, global.defined), "#2ca02c"}};
    if (rolling) {
      // Rolling estimates start at the end of the first window; align by period.
      std::vector<double> au(labels.size(), kNaN);
      std::vector<double> v(labels.size(), kNaN);
      for (std::size_t k = 0; k < rolling->periods.size(); ++k) {
        const auto t = m.panel.find_period(rolling->periods[k]);
        if (t < labels.size() && rolling->defined[k]) {
          au[t] = rolling->eta_seekers[k];
          v[t] = rolling->eta_vacancies[k];
        }
      }
      lc.series.push_back({"eta_AU (rolling)", au, "#9467bd"});
      lc.series.push_back({"eta_V (rolling)", v, "#8c564b"});
    }
    stage.write(m.subdir / "elasticity.svg", svg::render(lc));

    stage.write(m.subdir / "summary.txt", summary_text(m, eff, global, rolling));
    report.notes.push_back("market '" + m.name + "': report written");
  }
  report.written = stage.commit();
  return report;
}

// ---------------------------------------------------------------------------

double ray_check(const MarketPanel& panel, const identify::EstimationConfig& estimation, std::size_t points) {
  const auto base = identify::BasePoint::at(panel, 0);
  const ScaledPanel scaled(panel, estimation.scaling);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& o : panel.observations()) {
    lo = std::min(lo, o.hires / base.hires);
    hi = std::max(hi, o.hires / base.hires);
  }
  const double a = lo + 0.1 * (hi - lo);
  const double b = hi - 0.1 * (hi - lo);
  double worst = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    const double psi = a + (b - a) * static_cast<double>(k) / static_cast<double>(points - 1);
    try {
      const double m = identify::matching_on_ray(scaled, base, psi, estimation.kernel);
      worst = std::max(worst, std::abs(m - psi * base.hires) / (psi * base.hires));
    } catch (const SupportError&) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return worst;
}

std::vector<ReplicationResult> run_validation(const ValidationSettings& settings,
                                              const identify::EstimationConfig& estimation,
                                              const elasticity::PenaltyConfig& penalty, std::uint64_t seed,
                                              int threads) {
  const std::size_t R = settings.replications;
  std::vector<ReplicationResult> rows(settings.alphas.size() * R);
  auto est = estimation;
  est.max_flagged_share = 1.0;  // flagged periods are reported, not fatal, in a Monte Carlo

  parallel_for(rows.size(), threads, [&](std::size_t i) {
    auto& row = rows[i];
    row.alpha = settings.alphas[i / R];
    row.replication = i % R;
    row.seed = seed + row.replication;
    row.roundtrip_median_noise_free = kNaN;
    row.ray_max_error = kNaN;
    try {
      auto spec = dgp::default_validation_spec(row.alpha, row.seed);
      spec.noise_sd = settings.noise_sd;
      const auto truth = dgp::simulate(spec);
      const auto& panel = truth.panel;
      const auto base = identify::BasePoint::at(panel, 0);
      const auto eff = identify::recover_efficiency(panel, base, est, 1);
      row.flagged = eff.flagged_count();
      double dev = 0.0;
      for (std::size_t t = 0; t < panel.size(); ++t) {
        const double a_true = truth.efficiency[t] / truth.efficiency[0] * base.normalization;
        dev += std::abs(eff.values[t] - a_true) / a_true;
      }
      row.mard = dev / static_cast<double>(panel.size());

      const auto features = elasticity::build_features(panel, eff);
      const auto fit = elasticity::lasso_fit(features, panel.hires(), penalty, 1);
      const auto avg = elasticity::elasticity_series(panel, eff, fit).time_average();
      row.eta_seekers = avg[0];
      row.eta_vacancies = avg[1];
      row.returns_to_scale = avg[2];
      row.roundtrip_median = median(identify::reconstruct_matching(panel, eff, est, 1).relative_error);

      if (settings.noise_free_checks) {
        spec.noise_sd = 0.0;
        const auto clean = dgp::simulate(spec);
        const auto clean_eff = identify::recover_efficiency(clean.panel, identify::BasePoint::at(clean.panel, 0), est, 1);
        row.roundtrip_median_noise_free =
            median(identify::reconstruct_matching(clean.panel, clean_eff, est, 1).relative_error);
        row.ray_max_error = ray_check(clean.panel, est, settings.ray_points);
      }
    } catch (const std::exception& e) {
      row.status = clean_message(e.what());
    }
  });
  return rows;
}

std::string validation_csv(const std::vector<ReplicationResult>& rows) {
  const auto f = io::format_number;
  std::ostringstream out;
  out << "alpha,replication,seed,flagged,mard,eta_AU,eta_V,rts,roundtrip_median,roundtrip_median_noise_free,"
         "ray_max_error,status\n";
  for (const auto& r : rows) {
    out << f(r.alpha) << ',' << r.replication << ',' << r.seed << ',' << r.flagged << ',' << f(r.mard) << ','
        << f(r.eta_seekers) << ',' << f(r.eta_vacancies) << ',' << f(r.returns_to_scale) << ','
        << f(r.roundtrip_median) << ',' << f(r.roundtrip_median_noise_free) << ',' << f(r.ray_max_error) << ','
        << r.status << '\n';
  }
  return out.str();
}

std::string validation_summary_csv(const std::vector<ReplicationResult>& rows) {
  struct Acc {
    std::size_t total = 0;
    std::size_t ok = 0;
    double mard = 0, eta_au = 0, eta_v = 0, rts = 0, rt = 0, rt_clean = 0, ray = 0;
  };
  std::vector<double> order;
  std::map<double, Acc> by_alpha;
  for (const auto& r : rows) {
    if (!by_alpha.count(r.alpha)) order.push_back(r.alpha);
    auto& a = by_alpha[r.alpha];
    ++a.total;
    if (r.status != "ok") continue;
    ++a.ok;
    a.mard += r.mard;
    a.eta_au += r.eta_seekers;
    a.eta_v += r.eta_vacancies;
    a.rts += r.returns_to_scale;
    a.rt += r.roundtrip_median;
    a.rt_clean += r.roundtrip_median_noise_free;
    a.ray = std::max(a.ray, r.ray_max_error);
  }
  const auto f = io::format_number;
  std::ostringstream out;
  out << "alpha,replications,ok,mean_mard,mean_eta_AU,mean_eta_V,mean_rts,mean_roundtrip_median,"
         "mean_roundtrip_median_noise_free,max_ray_error\n";
  for (double alpha : order) {
    const auto& a = by_alpha[alpha];
    const double n = a.ok > 0 ? static_cast<double>(a.ok) : kNaN;
    out << f(alpha) << ',' << a.total << ',' << a.ok << ',' << f(a.mard / n) << ',' << f(a.eta_au / n) << ','
        << f(a.eta_v / n) << ',' << f(a.rts / n) << ',' << f(a.rt / n) << ',' << f(a.rt_clean / n) << ','
        << f(a.ok > 0 ? a.ray : kNaN) << '\n';
  }
  return out.str();
}

CommandReport cmd_validate(const RunConfig& config) {
  const auto rows = run_validation(config.validation, config.estimation, config.penalty, config.seed, config.threads);
  OutputStage stage(config.output);
  stage.write("validation.csv", validation_csv(rows));
  const auto summary = validation_summary_csv(rows);
  stage.write("validation_summary.csv", summary);
  CommandReport report;
  for (const auto& r : rows) {
    if (r.status != "ok") {
      report.warnings.push_back("alpha " + io::format_number(r.alpha) + " replication " +
                                std::to_string(r.replication) + ": " + r.status);
    }
  }
  report.notes.push_back(summary);
  report.written = stage.commit();
  return report;
}

}  // namespace matchfn::pipeline
