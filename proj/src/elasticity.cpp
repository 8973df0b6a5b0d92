#include "matchfn/elasticity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "matchfn/error.hpp"
#include "matchfn/io.hpp"
#include "matchfn/parallel.hpp"

namespace matchfn::elasticity {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

/// Gaussian elimination with partial pivoting on a small dense system.
/// Returns false when the matrix is numerically singular.
bool solve_dense(std::vector<std::vector<double>> a, std::vector<double> b, std::vector<double>& x) {
  const std::size_t n = b.size();
  double scale = 0.0;
  for (const auto& row : a) {
    for (double e : row) scale = std::max(scale, std::abs(e));
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) <= 1e-13 * scale) return false;
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return true;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::array<double, kFeatureCount> raw_features(double x, double v) {
  return {x, v, x * x, v * v, x * v};
}

FeatureMatrix build_features(std::span<const PeriodIndex> periods, std::span<const double> x,
                             std::span<const double> v) {
  if (x.size() != v.size() || x.size() != periods.size()) {
    throw InputError("feature columns have different lengths");
  }
  FeatureMatrix fm;
  fm.periods.assign(periods.begin(), periods.end());
  fm.x.assign(x.begin(), x.end());
  fm.v.assign(v.begin(), v.end());
  const std::size_t n = x.size();
  if (n == 0) return fm;

  std::vector<std::array<double, kFeatureCount>> raw(n);
  for (std::size_t i = 0; i < n; ++i) raw[i] = raw_features(x[i], v[i]);

  auto& st = fm.standardization;
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    double m = 0.0;
    for (const auto& r : raw) m += r[j];
    m /= static_cast<double>(n);
    double ss = 0.0;
    for (const auto& r : raw) ss += (r[j] - m) * (r[j] - m);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    st.mean[j] = m;
    st.scale[j] = sd;
    st.active[j] = sd > 1e-12 * std::max(1.0, std::abs(m));
    if (!st.active[j]) {
      fm.warnings.push_back(std::string("feature '") + kFeatureNames[j] +
                            "' has zero variance in the fitting window and was dropped");
    }
  }
  fm.rows.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      fm.rows[i][j] = st.active[j] ? (raw[i][j] - st.mean[j]) / st.scale[j] : 0.0;
    }
  }
  return fm;
}

FeatureMatrix build_features(const MarketPanel& panel, const identify::EfficiencySeries& efficiency,
                             std::size_t first, std::size_t count) {
  if (efficiency.values.size() != panel.size() || efficiency.periods.size() != panel.size()) {
    throw InputError("efficiency series has " + std::to_string(efficiency.values.size()) +
                     " periods but the panel has " + std::to_string(panel.size()));
  }
  if (first > panel.size()) throw InputError("feature window starts past the panel end");
  const std::size_t last = count == SIZE_MAX ? panel.size() : std::min(panel.size(), first + count);
  std::vector<PeriodIndex> periods;
  std::vector<double> x;
  std::vector<double> v;
  for (std::size_t t = first; t < last; ++t) {
    if (efficiency.periods[t] != panel[t].period) {
      throw InputError("efficiency period " + format_period(efficiency.periods[t]) +
                       " misaligned with panel period " + format_period(panel[t].period));
    }
    periods.push_back(panel[t].period);
    x.push_back(efficiency.values[t] * panel[t].seekers);
    v.push_back(panel[t].vacancies);
  }
  return build_features(periods, x, v);
}

// ---------------------------------------------------------------------------

double max_penalty(std::span<const std::vector<double>> columns, std::span<const double> y) {
  const double n = static_cast<double>(y.size());
  const double ybar = mean_of(y);
  double best = 0.0;
  for (const auto& col : columns) {
    const double xbar = mean_of(col);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (col[i] - xbar) * (y[i] - ybar);
    best = std::max(best, std::abs(s) / n);
  }
  return best;
}

LassoResult coordinate_descent(std::span<const std::vector<double>> columns, std::span<const double> y,
                               double penalty, double tolerance, std::size_t max_iterations) {
  const std::size_t n = y.size();
  const std::size_t p = columns.size();
  if (n == 0) throw InputError("lasso: no rows");
  if (!(penalty >= 0.0)) throw InputError("lasso: penalty must be nonnegative");
  for (const auto& c : columns) {
    if (c.size() != n) throw InputError("lasso: column length differs from target length");
  }
  const double nn = static_cast<double>(n);

  // Work in units of sd(y) so the tolerance is scale free.
  const double ybar = mean_of(y);
  double yss = 0.0;
  for (double v : y) yss += (v - ybar) * (v - ybar);
  const double ysd = yss > 0.0 ? std::sqrt(yss / nn) : 1.0;
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] / ysd;
  const double lam = penalty / ysd;

  std::vector<double> sq(p);
  for (std::size_t j = 0; j < p; ++j) {
    double s = 0.0;
    for (double v : columns[j]) s += v * v;
    sq[j] = s / nn;
  }

  std::vector<double> beta(p, 0.0);
  double b0 = mean_of(ys);
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = ys[i] - b0;

  std::vector<double> xbar(p);
  for (std::size_t j = 0; j < p; ++j) xbar[j] = mean_of(columns[j]);
  const double ysbar = mean_of(ys);

  const auto objective = [&](const std::vector<double>& res, const std::vector<double>& b) {
    double s = 0.0;
    for (double v : res) s += v * v;
    double l1 = 0.0;
    for (double v : b) l1 += std::abs(v);
    return 0.5 * s / nn + lam * l1;
  };

  // On the active set with signs fixed the stationarity conditions are linear.
  // Returns false when the system is singular or the solution flips a sign.
  const auto polish = [&](std::vector<double>& pb, double& pb0, std::vector<double>& res) {
    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < p; ++j) {
      if (beta[j] != 0.0) active.push_back(j);
    }
    if (active.empty()) return false;
    const std::size_t k = active.size();
    std::vector<std::vector<double>> gram(k, std::vector<double>(k));
    std::vector<double> rhs(k);
    for (std::size_t a = 0; a < k; ++a) {
      const auto& xa = columns[active[a]];
      for (std::size_t b = a; b < k; ++b) {
        const auto& xb = columns[active[b]];
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += (xa[i] - xbar[active[a]]) * (xb[i] - xbar[active[b]]);
        gram[a][b] = gram[b][a] = s / nn;
      }
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (xa[i] - xbar[active[a]]) * (ys[i] - ysbar);
      rhs[a] = s / nn - lam * (beta[active[a]] > 0.0 ? 1.0 : -1.0);
    }
    std::vector<double> sol;
    if (!solve_dense(gram, rhs, sol)) return false;
    for (std::size_t a = 0; a < k; ++a) {
      if ((sol[a] > 0.0) != (beta[active[a]] > 0.0) || sol[a] == 0.0) return false;
    }
    pb.assign(p, 0.0);
    for (std::size_t a = 0; a < k; ++a) pb[active[a]] = sol[a];
    pb0 = ysbar;
    for (std::size_t j = 0; j < p; ++j) pb0 -= pb[j] * xbar[j];
    res.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double f = pb0;
      for (std::size_t j = 0; j < p; ++j) f += pb[j] * columns[j][i];
      res[i] = ys[i] - f;
    }
    return true;
  };

  // Near-collinear quadratic features make plain coordinate descent crawl, so
  // every few hundred sweeps the active-set solution is tried as a jump and
  // kept when it lowers the objective. The sweeps still decide convergence.
  constexpr std::size_t kPolishEvery = 200;
  std::size_t sweep = 0;
  bool converged = false;
  while (sweep < max_iterations) {
    ++sweep;
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (sq[j] == 0.0) continue;
      const auto& xj = columns[j];
      double rho = 0.0;
      for (std::size_t i = 0; i < n; ++i) rho += xj[i] * r[i];
      rho = rho / nn + sq[j] * beta[j];
      const double updated = soft_threshold(rho, lam) / sq[j];
      const double d = updated - beta[j];
      if (d != 0.0) {
        for (std::size_t i = 0; i < n; ++i) r[i] -= d * xj[i];
        beta[j] = updated;
        max_change = std::max(max_change, std::abs(d));
      }
    }
    const double d0 = mean_of(r);
    if (d0 != 0.0) {
      b0 += d0;
      for (double& v : r) v -= d0;
      max_change = std::max(max_change, std::abs(d0));
    }
    if (max_change < tolerance) {
      converged = true;
      break;
    }
    if (sweep % kPolishEvery == 0) {
      std::vector<double> pb;
      std::vector<double> res;
      double pb0 = 0.0;
      if (polish(pb, pb0, res) && objective(res, pb) < objective(r, beta)) {
        beta = std::move(pb);
        b0 = pb0;
        r = std::move(res);
      }
    }
  }
  if (!converged) {
    throw ConvergenceError("lasso coordinate descent did not converge in " +
                           std::to_string(max_iterations) + " sweeps");
  }

  // Final polish removes the last tolerance-sized error when it is the exact
  // optimum: signs kept and the inactive coordinates inside their subgradient bound.
  {
    std::vector<double> pb;
    std::vector<double> res;
    double pb0 = 0.0;
    if (polish(pb, pb0, res)) {
      bool ok = true;
      for (std::size_t j = 0; j < p && ok; ++j) {
        if (pb[j] != 0.0 || sq[j] == 0.0) continue;
        double g = 0.0;
        for (std::size_t i = 0; i < n; ++i) g += columns[j][i] * res[i];
        ok = std::abs(g / nn) <= lam * (1.0 + 1e-9) + 1e-12;
      }
      if (ok) {
        beta = std::move(pb);
        b0 = pb0;
      }
    }
  }

  LassoResult out;
  out.intercept = b0 * ysd;
  out.coefficients.resize(p);
  for (std::size_t j = 0; j < p; ++j) out.coefficients[j] = beta[j] * ysd;
  out.iterations = sweep;
  return out;
}

// ---------------------------------------------------------------------------

double QuadraticFit::predict(double x, double v) const {
  const auto f = raw_features(x, v);
  double h = intercept;
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    if (standardization.active[j]) {
      h += coefficients[j] * (f[j] - standardization.mean[j]) / standardization.scale[j];
    }
  }
  return h;
}

std::array<double, 2> QuadraticFit::gradient(double x, double v) const {
  const std::array<double, kFeatureCount> dx = {1.0, 0.0, 2.0 * x, 0.0, v};
  const std::array<double, kFeatureCount> dv = {0.0, 1.0, 0.0, 2.0 * v, x};
  double gx = 0.0;
  double gv = 0.0;
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    if (!standardization.active[j]) continue;
    const double w = coefficients[j] / standardization.scale[j];
    gx += w * dx[j];
    gv += w * dv[j];
  }
  return {gx, gv};
}

namespace {

struct Design {
  std::vector<std::size_t> feature;        // active feature index per column
  std::vector<std::vector<double>> columns;
};

Design make_design(const FeatureMatrix& fm, std::span<const std::size_t> rows) {
  Design d;
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    if (!fm.standardization.active[j]) continue;
    d.feature.push_back(j);
    std::vector<double> col;
    col.reserve(rows.size());
    for (auto i : rows) col.push_back(fm.rows[i][j]);
    d.columns.push_back(std::move(col));
  }
  return d;
}

std::vector<double> penalty_grid(double lambda_max, const PenaltyConfig& config) {
  std::vector<double> grid;
  if (!(lambda_max > 0.0)) return {0.0};
  const std::size_t m = std::max<std::size_t>(config.grid_size, 1);
  for (std::size_t k = 0; k < m; ++k) {
    const double frac = m == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(m - 1);
    grid.push_back(lambda_max * std::pow(config.grid_ratio, frac));
  }
  return grid;
}

}  // namespace

QuadraticFit lasso_fit(const FeatureMatrix& features, std::span<const double> targets,
                       const PenaltyConfig& config, int threads) {
  const std::size_t n = features.size();
  if (targets.size() != n) throw InputError("lasso: target count differs from feature rows");
  if (n < kMinEstimationLength) {
    throw InputError("lasso: at least " + std::to_string(kMinEstimationLength) +
                     " rows are required, got " + std::to_string(n));
  }

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Design full = make_design(features, all);

  double penalty = config.penalty;
  if (config.mode == PenaltyConfig::Mode::cross_validated) {
    const auto grid = penalty_grid(max_penalty(full.columns, targets), config);
    const std::size_t folds = std::max<std::size_t>(config.folds, 2);
    std::vector<std::vector<double>> sse(folds, std::vector<double>(grid.size(), 0.0));
    std::vector<std::size_t> tested(folds, 0);

    parallel_for(folds, threads, [&](std::size_t k) {
      std::vector<std::size_t> train;
      std::vector<std::size_t> test;
      for (std::size_t i = 0; i < n; ++i) {
        const auto fold = static_cast<std::size_t>(((features.periods[i] % static_cast<int>(folds)) +
                                                    static_cast<int>(folds)) %
                                                   static_cast<int>(folds));
        (fold == k ? test : train).push_back(i);
      }
      if (test.empty() || train.size() < 2) return;
      const Design d = make_design(features, train);
      std::vector<double> y;
      for (auto i : train) y.push_back(targets[i]);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto fit =
            coordinate_descent(d.columns, y, grid[g], config.tolerance, config.max_iterations);
        double s = 0.0;
        for (auto i : test) {
          double f = fit.intercept;
          for (std::size_t c = 0; c < d.feature.size(); ++c) {
            f += fit.coefficients[c] * features.rows[i][d.feature[c]];
          }
          s += (targets[i] - f) * (targets[i] - f);
        }
        sse[k][g] = s;
      }
      tested[k] = test.size();
    });

    std::size_t best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      double s = 0.0;
      std::size_t m = 0;
      for (std::size_t k = 0; k < folds; ++k) {
        if (tested[k] == 0) continue;
        s += sse[k][g];
        m += tested[k];
      }
      const double err = m > 0 ? s / static_cast<double>(m) : 0.0;
      if (err < best_err) {
        best_err = err;
        best = g;
      }
    }
    penalty = grid[best];
  }

  const auto fit = coordinate_descent(full.columns, targets, penalty, config.tolerance,
                                      config.max_iterations);
  QuadraticFit out;
  out.intercept = fit.intercept;
  for (std::size_t c = 0; c < full.feature.size(); ++c) {
    out.coefficients[full.feature[c]] = fit.coefficients[c];
  }
  out.standardization = features.standardization;
  out.penalty = penalty;
  out.iterations = fit.iterations;
  out.window_first = features.periods.front();
  out.window_last = features.periods.back();

  const double ybar = mean_of(targets);
  double sst = 0.0;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double f = out.intercept;
    for (std::size_t j = 0; j < kFeatureCount; ++j) f += out.coefficients[j] * features.rows[i][j];
    sse += (targets[i] - f) * (targets[i] - f);
    sst += (targets[i] - ybar) * (targets[i] - ybar);
  }
  out.r_squared = sst > 0.0 ? 1.0 - sse / sst : 1.0;
  return out;
}

// ---------------------------------------------------------------------------

std::array<double, 3> ElasticityReport::time_average() const {
  std::array<double, 3> sum{};
  std::size_t m = 0;
  for (std::size_t t = 0; t < periods.size(); ++t) {
    if (!defined[t]) continue;
    sum[0] += eta_seekers[t];
    sum[1] += eta_vacancies[t];
    sum[2] += returns_to_scale[t];
    ++m;
  }
  if (m == 0) return {kNaN, kNaN, kNaN};
  for (double& s : sum) s /= static_cast<double>(m);
  return sum;
}

namespace {

void append_point(ElasticityReport& report, const QuadraticFit& fit, PeriodIndex period, double x,
                  double v, double observed, Denominator denominator) {
  const double fitted = fit.predict(x, v);
  const double denom = denominator == Denominator::fitted ? fitted : observed;
  report.periods.push_back(period);
  report.fitted_hires.push_back(fitted);
  if (denom > 0.0) {
    const auto g = fit.gradient(x, v);
    const double eu = g[0] * x / denom;
    const double ev = g[1] * v / denom;
    report.eta_seekers.push_back(eu);
    report.eta_vacancies.push_back(ev);
    report.returns_to_scale.push_back(eu + ev);
    report.defined.push_back(true);
  } else {
    report.eta_seekers.push_back(kNaN);
    report.eta_vacancies.push_back(kNaN);
    report.returns_to_scale.push_back(kNaN);
    report.defined.push_back(false);
  }
}

}  // namespace

ElasticityReport elasticity_series(const MarketPanel& panel, const identify::EfficiencySeries& efficiency,
                                   const QuadraticFit& fit, Denominator denominator) {
  if (efficiency.values.size() != panel.size()) {
    throw InputError("efficiency series does not match the panel length");
  }
  ElasticityReport report;
  report.label = "global";
  report.r_squared = fit.r_squared;
  report.penalty = fit.penalty;
  for (std::size_t t = 0; t < panel.size(); ++t) {
    const auto& o = panel[t];
    append_point(report, fit, o.period, efficiency.values[t] * o.seekers, o.vacancies, o.hires,
                 denominator);
  }
  return report;
}

ElasticityReport rolling_elasticities(const MarketPanel& panel, const identify::EfficiencySeries& efficiency,
                                      std::size_t window_length, const PenaltyConfig& config,
                                      Denominator denominator, int threads) {
  if (window_length < kMinEstimationLength) {
    throw InputError("rolling window must span at least " + std::to_string(kMinEstimationLength) +
                     " periods");
  }
  if (window_length > panel.size()) throw InputError("rolling window longer than the panel");
  const std::size_t windows = panel.size() - window_length + 1;
  std::vector<QuadraticFit> fits(windows);
  parallel_for(windows, threads, [&](std::size_t w) {
    const auto fm = build_features(panel, efficiency, w, window_length);
    std::vector<double> y;
    for (std::size_t t = w; t < w + window_length; ++t) y.push_back(panel[t].hires);
    fits[w] = lasso_fit(fm, y, config, 1);
  });

  ElasticityReport report;
  report.label = "rolling";
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t t = w + window_length - 1;
    const auto& o = panel[t];
    append_point(report, fits[w], o.period, efficiency.values[t] * o.seekers, o.vacancies, o.hires,
                 denominator);
  }
  if (!fits.empty()) {
    report.r_squared = fits.back().r_squared;
    report.penalty = fits.back().penalty;
  }
  return report;
}

// ---------------------------------------------------------------------------

void write_elasticity_csv(const ElasticityReport& report, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "period,eta_AU,eta_V,rts,flag,method\n";
  for (std::size_t t = 0; t < report.periods.size(); ++t) {
    const bool ok = report.defined[t];
    out << format_period(report.periods[t]) << ','
        << (ok ? io::format_number(report.eta_seekers[t]) : "nan") << ','
        << (ok ? io::format_number(report.eta_vacancies[t]) : "nan") << ','
        << (ok ? io::format_number(report.returns_to_scale[t]) : "nan") << ','
        << (ok ? "defined" : "undefined") << ',' << report.label << '\n';
  }
  io::write_file_atomic(path, out.str());
}

ElasticityReport read_elasticity_csv(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  const auto col = [&](const char* name) {
    auto c = table.column(name);
    if (c == table.header.size()) throw InputError(path.string() + ": missing column '" + name + "'");
    return c;
  };
  const auto c_period = col("period");
  const auto c_au = col("eta_AU");
  const auto c_v = col("eta_V");
  const auto c_rts = col("rts");
  const auto c_flag = col("flag");
  const auto c_method = table.column("method");
  ElasticityReport r;
  for (const auto& row : table.rows) {
    r.periods.push_back(parse_period(row[c_period]));
    const bool ok = row[c_flag] == "defined";
    r.defined.push_back(ok);
    r.eta_seekers.push_back(ok ? io::parse_number(row[c_au], "eta_AU") : kNaN);
    r.eta_vacancies.push_back(ok ? io::parse_number(row[c_v], "eta_V") : kNaN);
    r.returns_to_scale.push_back(ok ? io::parse_number(row[c_rts], "rts") : kNaN);
    r.fitted_hires.push_back(kNaN);
    if (c_method < row.size()) r.label = row[c_method];
  }
  return r;
}

void write_fit_csv(const QuadraticFit& fit, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "term,value,feature_mean,feature_scale\n";
  out << "intercept," << io::format_number(fit.intercept) << ",,\n";
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    out << kFeatureNames[j] << ',' << io::format_number(fit.coefficients[j]) << ','
        << io::format_number(fit.standardization.mean[j]) << ','
        << io::format_number(fit.standardization.scale[j]) << '\n';
  }
  out << "penalty," << io::format_number(fit.penalty) << ",,\n";
  out << "r_squared," << io::format_number(fit.r_squared) << ",,\n";
  io::write_file_atomic(path, out.str());
}

}  // namespace matchfn::elasticity
