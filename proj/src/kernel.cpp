#include "matchfn/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "matchfn/error.hpp"
#include "matchfn/io.hpp"
#include "matchfn/parallel.hpp"

namespace matchfn::kernel {

TieRule parse_tie_rule(const std::string& name) {
  if (name == "strict-less" || name == "strict_less") return TieRule::strict_less;
  if (name == "less-or-equal" || name == "less_or_equal") return TieRule::less_or_equal;
  throw InputError("unknown tie rule '" + name + "'");
}

std::string to_string(TieRule rule) {
  return rule == TieRule::strict_less ? "strict-less" : "less-or-equal";
}

void KernelConfig::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw InputError("kernel.bandwidth must be positive");
  }
  if (!(vacancy_bandwidth >= 0.0) || !std::isfinite(vacancy_bandwidth)) {
    throw InputError("kernel.vacancy_bandwidth must be nonnegative");
  }
  if (!(min_effective_weight > 0.0)) {
    throw InputError("kernel.min_effective_weight must be positive");
  }
}

double kernel_weight(ScaledPoint p, ScaledPoint q, const KernelConfig& config) {
  const double zu = (p.u - q.u) / config.seeker_bw();
  const double zv = (p.v - q.v) / config.vacancy_bw();
  return std::exp(-0.5 * (zu * zu + zv * zv)) * (0.5 * std::numbers::inv_pi);
}

// ---------------------------------------------------------------------------

LocalDistribution::LocalDistribution(const ScaledPanel& panel, ScaledPoint at,
                                     const KernelConfig& config, std::nullptr_t)
    : panel_(&panel), at_(at), tie_rule_(config.tie_rule) {
  const auto points = panel.points();
  const auto order = panel.hires_order();
  cumulative_.resize(order.size() + 1);
  cumulative_[0] = 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    sum += kernel_weight(points[order[k]], at, config);
    cumulative_[k + 1] = sum;
  }
}

LocalDistribution::LocalDistribution(const ScaledPanel& panel, ScaledPoint at,
                                     const KernelConfig& config)
    : LocalDistribution(panel, at, config, nullptr) {
  if (!(total_mass() >= config.min_effective_weight)) {
    throw SupportError("kernel mass " + io::format_number(total_mass()) + " at (" +
                       io::format_number(at.u) + ", " + io::format_number(at.v) +
                       ") is below the floor; the query lies outside the data support");
  }
}

std::optional<LocalDistribution> LocalDistribution::try_make(const ScaledPanel& panel,
                                                             ScaledPoint at,
                                                             const KernelConfig& config) {
  LocalDistribution d(panel, at, config, nullptr);
  if (!(d.total_mass() >= config.min_effective_weight)) return std::nullopt;
  return d;
}

double LocalDistribution::cdf(double hires) const {
  const auto sorted = panel_->sorted_hires();
  auto it = tie_rule_ == TieRule::strict_less
                ? std::lower_bound(sorted.begin(), sorted.end(), hires)
                : std::upper_bound(sorted.begin(), sorted.end(), hires);
  const auto below = static_cast<std::size_t>(it - sorted.begin());
  // Numerator is a prefix of the same running sum, so the ratio never exceeds 1.
  return cumulative_[below] / cumulative_.back();
}

ConditionalCdf LocalDistribution::to_cdf() const {
  ConditionalCdf out;
  out.query = at_;
  const auto support = panel_->hires_support();
  out.support.assign(support.begin(), support.end());
  out.probabilities.reserve(support.size());
  for (double h : support) out.probabilities.push_back(cdf(h));
  return out;
}

double conditional_cdf(const ScaledPanel& panel, double hires, ScaledPoint at,
                       const KernelConfig& config) {
  return LocalDistribution(panel, at, config).cdf(hires);
}

// ---------------------------------------------------------------------------

std::vector<double> isotonic_fit(std::span<const double> values) {
  // Blocks of pooled values: (mean, count).
  std::vector<double> mean;
  std::vector<std::size_t> count;
  mean.reserve(values.size());
  count.reserve(values.size());
  for (double y : values) {
    mean.push_back(y);
    count.push_back(1);
    while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
      const auto n1 = count[count.size() - 2];
      const auto n2 = count.back();
      const double merged = (mean[mean.size() - 2] * static_cast<double>(n1) +
                             mean.back() * static_cast<double>(n2)) /
                            static_cast<double>(n1 + n2);
      mean.pop_back();
      count.pop_back();
      mean.back() = merged;
      count.back() = n1 + n2;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (std::size_t b = 0; b < mean.size(); ++b) out.insert(out.end(), count[b], mean[b]);
  return out;
}

ConditionalCdf monotone_rearrange(std::span<const double> hires, std::span<const double> probs) {
  if (hires.size() != probs.size() || hires.empty()) {
    throw InputError("monotone_rearrange needs equally sized, nonempty samples");
  }
  std::vector<std::size_t> order(hires.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return hires[a] < hires[b]; });

  ConditionalCdf out;
  std::vector<double> raw;
  raw.reserve(order.size());
  double top = 0.0;
  for (auto i : order) {
    out.support.push_back(hires[i]);
    raw.push_back(probs[i]);
    top = std::max(top, probs[i]);
  }
  out.probabilities = isotonic_fit(raw);
  for (double& p : out.probabilities) p = std::clamp(p, 0.0, 1.0);
  out.probabilities.back() = std::clamp(top, 0.0, 1.0);
  return out;
}

double conditional_quantile(const ConditionalCdf& cdf, double p) {
  const auto& h = cdf.support;
  const auto& c = cdf.probabilities;
  if (h.empty()) throw InputError("conditional_quantile on an empty CDF");
  auto it = std::lower_bound(c.begin(), c.end(), p);  // first c_k >= p
  if (it == c.end()) return h.back();
  const auto k = static_cast<std::size_t>(it - c.begin());
  if (k == 0) return h.front();
  const double gap = c[k] - c[k - 1];
  const double frac = gap > 0.0 ? (p - c[k - 1]) / gap : 1.0;
  return h[k - 1] + frac * (h[k] - h[k - 1]);
}

double interpolated_cdf(const ConditionalCdf& cdf, double hires) {
  const auto& h = cdf.support;
  const auto& c = cdf.probabilities;
  if (h.empty()) throw InputError("interpolated_cdf on an empty CDF");
  if (hires <= h.front()) return c.front();
  if (hires >= h.back()) return c.back();
  const auto k = static_cast<std::size_t>(std::upper_bound(h.begin(), h.end(), hires) - h.begin());
  const double frac = (hires - h[k - 1]) / (h[k] - h[k - 1]);
  return c[k - 1] + frac * (c[k] - c[k - 1]);
}

// ---------------------------------------------------------------------------

std::vector<double> conditional_cdf_batch(const ScaledPanel& panel, std::span<const CdfQuery> queries,
                                          const KernelConfig& config, int threads) {
  std::vector<double> out(queries.size(), std::numeric_limits<double>::quiet_NaN());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    if (auto d = LocalDistribution::try_make(panel, queries[i].at, config)) {
      out[i] = d->cdf(queries[i].hires);
    }
  });
  return out;
}

namespace reference {

namespace {

double normal_density(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

double conditional_cdf(const ScaledPanel& panel, double hires, ScaledPoint at,
                       const KernelConfig& config) {
  const auto points = panel.points();
  const auto h = panel.hires();
  double numerator = 0.0;
  double mass = 0.0;
  for (std::size_t t = 0; t < points.size(); ++t) {
    const double w = normal_density((points[t].u - at.u) / config.seeker_bw()) *
                     normal_density((points[t].v - at.v) / config.vacancy_bw());
    const bool below = config.tie_rule == TieRule::strict_less ? h[t] < hires : h[t] <= hires;
    if (below) numerator += w;
    mass += w;
  }
  if (!(mass >= config.min_effective_weight)) {
    throw SupportError("kernel mass below the floor at the query point");
  }
  return std::min(1.0, numerator / mass);
}

std::vector<double> conditional_cdf_batch(const ScaledPanel& panel, std::span<const CdfQuery> queries,
                                          const KernelConfig& config) {
  std::vector<double> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    try {
      out.push_back(reference::conditional_cdf(panel, q.hires, q.at, config));
    } catch (const SupportError&) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return out;
}

}  // namespace reference

}  // namespace matchfn::kernel
