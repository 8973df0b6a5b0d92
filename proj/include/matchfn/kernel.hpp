#pragma once

#include <optional>
#include <span>
#include <vector>

#include "matchfn/panel.hpp"

namespace matchfn::kernel {

/// How an observation with hires exactly equal to the threshold is counted.
enum class TieRule {
  strict_less,    // 1(H_t < h)
  less_or_equal,  // 1(H_t <= h)
};

TieRule parse_tie_rule(const std::string& name);
std::string to_string(TieRule rule);

struct KernelConfig {
  double bandwidth = 0.1;
  /// Separate bandwidth for the vacancy coordinate; 0 means "same as bandwidth".
  double vacancy_bandwidth = 0.0;
  TieRule tie_rule = TieRule::strict_less;
  /// Queries whose total kernel mass falls below this are outside the support.
  double min_effective_weight = 1e-8;

  double seeker_bw() const { return bandwidth; }
  double vacancy_bw() const { return vacancy_bandwidth > 0.0 ? vacancy_bandwidth : bandwidth; }
  /// Throws InputError on nonpositive bandwidth or floor.
  void validate() const;
};

/// Product of two standard-normal densities at the coordinate differences
/// divided by the bandwidth. Not normalized by the bandwidth: p == q gives 1/(2 pi).
double kernel_weight(ScaledPoint p, ScaledPoint q, const KernelConfig& config);

/// CDF of hires at one support point, left-continuous under strict_less.
struct ConditionalCdf {
  ScaledPoint query;
  std::vector<double> support;        // ascending distinct hires
  std::vector<double> probabilities;  // nondecreasing, in [0, 1]
};

/// Kernel weights of all observations at one query point, accumulated in
/// hires order so that any number of CDF evaluations cost a binary search.
class LocalDistribution {
 public:
  /// Throws SupportError when the total kernel mass is below the floor.
  LocalDistribution(const ScaledPanel& panel, ScaledPoint at, const KernelConfig& config);

  /// Returns nullopt instead of throwing when the query is outside the support.
  static std::optional<LocalDistribution> try_make(const ScaledPanel& panel, ScaledPoint at,
                                                   const KernelConfig& config);

  double total_mass() const { return cumulative_.back(); }
  double cdf(double hires) const;
  /// The CDF evaluated at every distinct observed hires value.
  ConditionalCdf to_cdf() const;

 private:
  LocalDistribution(const ScaledPanel& panel, ScaledPoint at, const KernelConfig& config,
                    std::nullptr_t);

  const ScaledPanel* panel_;
  ScaledPoint at_;
  TieRule tie_rule_;
  std::vector<double> cumulative_;  // cumulative_[k] = mass of the k smallest hires
};

/// Kernel-weighted share of observations with fewer hires than `hires`.
double conditional_cdf(const ScaledPanel& panel, double hires, ScaledPoint at,
                       const KernelConfig& config);

/// Isotonic (pool-adjacent-violators) projection of `values` under equal weights.
std::vector<double> isotonic_fit(std::span<const double> values);

/// Sorts samples by h, projects p onto nondecreasing sequences, clips to [0, 1]
/// and restores the largest observed probability at the top of the support.
ConditionalCdf monotone_rearrange(std::span<const double> hires, std::span<const double> probs);

/// Smallest support point whose CDF reaches p, linearly interpolated from the
/// preceding support point. Clamped to the observed hires range.
double conditional_quantile(const ConditionalCdf& cdf, double p);

/// Piecewise-linear CDF through the support points; the forward map whose
/// inverse is conditional_quantile wherever the CDF strictly increases.
double interpolated_cdf(const ConditionalCdf& cdf, double hires);

struct CdfQuery {
  double hires = 0.0;
  ScaledPoint at;
};

/// Evaluates many queries; out-of-support queries yield NaN. Parallel across
/// queries with per-query sequential summation, so output is thread-count invariant.
std::vector<double> conditional_cdf_batch(const ScaledPanel& panel, std::span<const CdfQuery> queries,
                                          const KernelConfig& config, int threads = 0);

namespace reference {

/// Direct evaluation of the weighted indicator sum, one observation at a time
/// in panel order. Kept for cross-checking the accumulated implementation.
double conditional_cdf(const ScaledPanel& panel, double hires, ScaledPoint at,
                       const KernelConfig& config);

std::vector<double> conditional_cdf_batch(const ScaledPanel& panel, std::span<const CdfQuery> queries,
                                          const KernelConfig& config);

}  // namespace reference

}  // namespace matchfn::kernel
