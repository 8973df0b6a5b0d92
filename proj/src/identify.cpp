#include "matchfn/identify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "matchfn/error.hpp"
#include "matchfn/io.hpp"
#include "matchfn/parallel.hpp"

namespace matchfn::identify {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

BasePoint BasePoint::at(const MarketPanel& panel, std::size_t index, double normalization) {
  if (index >= panel.size()) {
    throw InputError("base index " + std::to_string(index) + " outside a panel of " +
                     std::to_string(panel.size()) + " periods");
  }
  if (!(normalization > 0.0)) throw InputError("normalization A0 must be positive");
  const auto& o = panel[index];
  if (!(o.hires > 0.0)) {
    throw InputError("base period " + format_period(o.period) + " has zero hires");
  }
  return BasePoint{index, o.hires, o.seekers, o.vacancies, normalization};
}

std::string to_string(SupportFlag flag) {
  switch (flag) {
    case SupportFlag::interior: return "interior";
    case SupportFlag::lower_edge: return "lower_edge";
    case SupportFlag::upper_edge: return "upper_edge";
  }
  return "?";
}

std::optional<double> traced_cdf(const ScaledPanel& panel, const BasePoint& base, double psi,
                                 double lambda, const kernel::KernelConfig& config) {
  const auto at = panel.forward(lambda * base.seekers, lambda * psi * base.vacancies);
  auto local = kernel::LocalDistribution::try_make(panel, at, config);
  if (!local) return std::nullopt;
  return local->cdf(lambda * psi * base.hires);
}

std::vector<double> log_grid(double lo, double hi, std::size_t points) {
  std::vector<double> g(points);
  if (points == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log(lo);
  const double step = (std::log(hi) - a) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) g[i] = std::exp(a + step * static_cast<double>(i));
  g.front() = lo;
  g.back() = hi;
  return g;
}

std::pair<double, double> psi_bracket(const ScaledPanel& panel, const BasePoint& base,
                                      double expansion) {
  const auto support = panel.hires_support();
  double lo = support.front() / base.hires;
  const double hi = support.back() / base.hires * (1.0 + expansion);
  lo *= 1.0 - expansion;
  if (!(lo > 0.0)) lo = hi * 1e-3;  // zero-hire periods
  return {lo, hi};
}

// ---------------------------------------------------------------------------

FSurface trace_F(const ScaledPanel& panel, const BasePoint& base, std::span<const double> psi_grid,
                 std::span<const double> lambda_grid, const kernel::KernelConfig& config,
                 int threads) {
  for (double x : psi_grid) {
    if (!(x > 0.0)) throw InputError("psi grid values must be positive");
  }
  for (double x : lambda_grid) {
    if (!(x > 0.0)) throw InputError("lambda grid values must be positive");
  }
  FSurface s;
  s.psi_grid.assign(psi_grid.begin(), psi_grid.end());
  s.lambda_grid.assign(lambda_grid.begin(), lambda_grid.end());
  s.values.assign(lambda_grid.size(), std::vector<double>(psi_grid.size(), kNaN));
  s.in_support.assign(lambda_grid.size(), std::vector<bool>(psi_grid.size(), false));

  std::vector<std::vector<double>> raw(lambda_grid.size(), std::vector<double>(psi_grid.size(), kNaN));
  parallel_for(lambda_grid.size(), threads, [&](std::size_t l) {
    for (std::size_t p = 0; p < psi_grid.size(); ++p) {
      if (auto f = traced_cdf(panel, base, psi_grid[p], lambda_grid[l], config)) raw[l][p] = *f;
    }
  });

  bool any = false;
  for (std::size_t l = 0; l < lambda_grid.size(); ++l) {
    std::vector<double> column;
    for (double f : raw[l]) {
      if (!std::isnan(f)) column.push_back(f);
    }
    if (column.empty()) continue;
    any = true;
    const auto fitted = kernel::isotonic_fit(column);
    std::size_t k = 0;
    for (std::size_t p = 0; p < psi_grid.size(); ++p) {
      if (std::isnan(raw[l][p])) continue;
      s.values[l][p] = std::clamp(fitted[k++], 0.0, 1.0);
      s.in_support[l][p] = true;
    }
  }
  if (!any) throw SupportError("every (psi, lambda) cell lies outside the data support");
  return s;
}

// ---------------------------------------------------------------------------

PsiSolution solve_psi(const ScaledPanel& panel, const BasePoint& base, double target_p,
                      double at_seekers, const kernel::KernelConfig& config,
                      const SolveOptions& options,
                      std::optional<std::pair<double, double>> bracket) {
  if (!(target_p >= 0.0 && target_p <= 1.0)) throw InputError("target probability outside [0, 1]");
  if (!(at_seekers > 0.0)) throw InputError("seekers must be positive");
  const double lambda = at_seekers / base.seekers;
  const auto [lo, hi] = bracket ? *bracket : psi_bracket(panel, base, options.bracket_expansion);
  const auto grid = log_grid(lo, hi, std::max<std::size_t>(options.grid_points, 2));

  std::vector<double> psi;
  std::vector<double> raw;
  for (double x : grid) {
    if (auto f = traced_cdf(panel, base, x, lambda, config)) {
      psi.push_back(x);
      raw.push_back(*f);
    }
  }
  if (psi.empty()) {
    throw SupportError("no psi in [" + io::format_number(lo) + ", " + io::format_number(hi) +
                       "] keeps the traced query inside the data support");
  }
  const auto col = kernel::isotonic_fit(raw);

  if (target_p < col.front()) return {psi.front(), SupportFlag::lower_edge, col.front()};
  if (target_p >= col.back()) return {psi.back(), SupportFlag::upper_edge, col.back()};

  // Last grid point whose rearranged value does not exceed the target.
  const auto k = static_cast<std::size_t>(std::upper_bound(col.begin(), col.end(), target_p) -
                                          col.begin()) - 1;
  const double f_lo = col[k];
  const double f_hi = col[k + 1];
  const double log_a = std::log(psi[k]);
  const double log_b = std::log(psi[k + 1]);

  // Within the cell, the kernel column clamped to the rearranged endpoints.
  auto column = [&](double x) {
    if (auto f = traced_cdf(panel, base, x, lambda, config)) return std::clamp(*f, f_lo, f_hi);
    const double w = (std::log(x) - log_a) / (log_b - log_a);
    return f_lo + w * (f_hi - f_lo);
  };

  double a = psi[k];
  double b = psi[k + 1];
  while (b - a > options.tolerance * a) {
    const double mid = std::sqrt(a * b);
    if (!(mid > a && mid < b)) break;
    if (column(mid) <= target_p) {
      a = mid;
    } else {
      b = mid;
    }
  }
  return {a, SupportFlag::interior, target_p};
}

// ---------------------------------------------------------------------------

std::size_t EfficiencySeries::flagged_count() const {
  return static_cast<std::size_t>(
      std::count_if(flags.begin(), flags.end(), [](SupportFlag f) { return f != SupportFlag::interior; }));
}

namespace {

EfficiencySeries recover_impl(const MarketPanel& panel, const BasePoint& base,
                              const EstimationConfig& config, int threads) {
  panel.require_estimable();
  config.kernel.validate();
  if (base.index >= panel.size()) throw InputError("base index outside the panel");

  const ScaledPanel scaled(panel, config.scaling);
  const std::size_t T = panel.size();
  const auto bracket = psi_bracket(scaled, base, config.solve.bracket_expansion);

  EfficiencySeries out;
  out.base = base;
  out.periods.resize(T);
  out.values.resize(T);
  out.psi.resize(T);
  out.target_probability.resize(T);
  out.column_value.resize(T);
  out.flags.resize(T, SupportFlag::interior);

  parallel_for(T, threads, [&](std::size_t t) {
    const auto& o = panel[t];
    out.periods[t] = o.period;
    // The query sits on an observation, so its own weight keeps the mass above the floor.
    const double p = kernel::conditional_cdf(scaled, o.hires, scaled.points()[t], config.kernel);
    out.target_probability[t] = p;
    if (t == base.index) {
      out.psi[t] = 1.0;
      out.column_value[t] = p;
      out.values[t] = base.normalization;
      return;
    }
    // Widen the bracket to reach psi at which the traced query coincides with
    // observation t, so at least one grid cell is in support.
    const double lambda = o.seekers / base.seekers;
    const double psi_self = o.vacancies / (lambda * base.vacancies);
    const std::pair<double, double> b{std::min(bracket.first, psi_self / 1.01),
                                      std::max(bracket.second, psi_self * 1.01)};
    const auto sol = solve_psi(scaled, base, p, o.seekers, config.kernel, config.solve, b);
    out.psi[t] = sol.psi;
    out.column_value[t] = sol.column_value;
    out.flags[t] = sol.flag;
    out.values[t] = sol.psi * base.normalization;
  });

  const auto flagged = out.flagged_count();
  if (static_cast<double>(flagged) > config.max_flagged_share * static_cast<double>(T)) {
    throw DegradedError(std::to_string(flagged) + " of " + std::to_string(T) +
                        " periods in market '" + panel.market_id() +
                        "' were clamped to the edge of the traced support");
  }
  return out;
}

}  // namespace

EfficiencySeries recover_efficiency(const MarketPanel& panel, const BasePoint& base,
                                    const EstimationConfig& config, int threads) {
  return recover_impl(panel, base, config, threads);
}

EfficiencySeries recover_efficiency_serial(const MarketPanel& panel, const BasePoint& base,
                                           const EstimationConfig& config) {
  return recover_impl(panel, base, config, 1);
}

FittedHires reconstruct_matching(const MarketPanel& panel, const EfficiencySeries& efficiency,
                                 const EstimationConfig& config, int threads) {
  if (efficiency.periods.size() != panel.size()) {
    throw InputError("efficiency series does not match the panel length");
  }
  const ScaledPanel scaled(panel, config.scaling);
  FittedHires out;
  out.fitted.resize(panel.size());
  out.relative_error.resize(panel.size());
  parallel_for(panel.size(), threads, [&](std::size_t t) {
    const auto& o = panel[t];
    if (efficiency.periods[t] != o.period) {
      throw InputError("efficiency period " + format_period(efficiency.periods[t]) +
                       " misaligned with panel period " + format_period(o.period));
    }
    kernel::LocalDistribution local(scaled, scaled.points()[t], config.kernel);
    const double h = kernel::conditional_quantile(local.to_cdf(), efficiency.column_value[t]);
    out.fitted[t] = h;
    out.relative_error[t] = o.hires > 0.0 ? std::abs(h - o.hires) / o.hires : kNaN;
  });
  return out;
}

double matching_on_ray(const ScaledPanel& panel, const BasePoint& base, double psi,
                       const kernel::KernelConfig& config) {
  // Along lambda: F(psi A0 / lambda | lambda U0) = G(psi H0 | lambda U0, psi V0),
  // and m is G^{-1} of that at the same conditioning point.
  std::optional<kernel::LocalDistribution> best;
  for (double u : panel.source().seekers()) {
    auto local = kernel::LocalDistribution::try_make(panel, panel.forward(u, psi * base.vacancies), config);
    if (local && (!best || local->total_mass() > best->total_mass())) best = std::move(local);
  }
  if (!best) {
    throw SupportError("no seeker level puts the ray point psi = " + io::format_number(psi) +
                       " inside the data support");
  }
  const auto cdf = best->to_cdf();
  return kernel::conditional_quantile(cdf, kernel::interpolated_cdf(cdf, psi * base.hires));
}

// ---------------------------------------------------------------------------

void write_efficiency_csv(const EfficiencySeries& s, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "period,A,edge_flag,p,psi,F\n";
  for (std::size_t t = 0; t < s.values.size(); ++t) {
    out << format_period(s.periods[t]) << ',' << io::format_number(s.values[t]) << ','
        << to_string(s.flags[t]) << ',' << io::format_number(s.target_probability[t]) << ','
        << io::format_number(s.psi[t]) << ',' << io::format_number(s.column_value[t]) << '\n';
  }
  io::write_file_atomic(path, out.str());
}

EfficiencySeries read_efficiency_csv(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  const auto col = [&](const char* name) {
    auto c = table.column(name);
    if (c == table.header.size()) throw InputError(path.string() + ": missing column '" + name + "'");
    return c;
  };
  const auto c_period = col("period");
  const auto c_a = col("A");
  const auto c_flag = col("edge_flag");
  const auto c_p = col("p");
  const auto c_psi = table.column("psi");
  const auto c_f = table.column("F");

  EfficiencySeries s;
  bool have_base = false;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    s.periods.push_back(parse_period(row[c_period]));
    s.values.push_back(io::parse_number(row[c_a], "A"));
    const auto& flag = row[c_flag];
    s.flags.push_back(flag == "interior"     ? SupportFlag::interior
                      : flag == "lower_edge" ? SupportFlag::lower_edge
                      : flag == "upper_edge" ? SupportFlag::upper_edge
                                             : throw InputError(path.string() + ": unknown edge_flag '" + flag + "'"));
    s.target_probability.push_back(io::parse_number(row[c_p], "p"));
    const double psi = c_psi < row.size() ? io::parse_number(row[c_psi], "psi") : kNaN;
    s.psi.push_back(psi);
    s.column_value.push_back(c_f < row.size() ? io::parse_number(row[c_f], "F")
                                              : s.target_probability.back());
    if (!have_base && psi == 1.0) {
      s.base.index = r;
      s.base.normalization = s.values.back();
      have_base = true;
    }
  }
  return s;
}

void write_fitted_csv(const MarketPanel& panel, const FittedHires& fitted,
                      const std::filesystem::path& path) {
  std::ostringstream out;
  out << "period,H,H_hat,relative_error\n";
  for (std::size_t t = 0; t < panel.size(); ++t) {
    out << format_period(panel[t].period) << ',' << io::format_number(panel[t].hires) << ','
        << io::format_number(fitted.fitted[t]) << ','
        << io::format_number(fitted.relative_error[t]) << '\n';
  }
  io::write_file_atomic(path, out.str());
}

void write_fsurface_csv(const FSurface& s, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "psi,lambda,F,in_support\n";
  for (std::size_t l = 0; l < s.lambda_grid.size(); ++l) {
    for (std::size_t p = 0; p < s.psi_grid.size(); ++p) {
      out << io::format_number(s.psi_grid[p]) << ',' << io::format_number(s.lambda_grid[l]) << ','
          << (s.in_support[l][p] ? io::format_number(s.values[l][p]) : std::string("nan")) << ','
          << (s.in_support[l][p] ? 1 : 0) << '\n';
    }
  }
  io::write_file_atomic(path, out.str());
}

}  // namespace matchfn::identify
