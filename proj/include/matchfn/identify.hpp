#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "matchfn/kernel.hpp"
#include "matchfn/panel.hpp"

namespace matchfn::identify {

/// Reference observation at which efficiency is pinned to `normalization`.
struct BasePoint {
  std::size_t index = 0;
  double hires = 0.0;
  double seekers = 0.0;
  double vacancies = 0.0;
  double normalization = 100.0;

  /// Throws InputError if index is out of range or the base has zero hires.
  static BasePoint at(const MarketPanel& panel, std::size_t index, double normalization = 100.0);
};

enum class SupportFlag : std::uint8_t {
  interior,
  lower_edge,  // target probability below the traced column; clamped to the smallest psi
  upper_edge,  // target probability at or above the top of the column; clamped to the largest psi
};

std::string to_string(SupportFlag flag);

struct SolveOptions {
  double tolerance = 1e-8;        // relative, on psi
  std::size_t grid_points = 201;  // log-spaced psi grid used for rearrangement
  double bracket_expansion = 0.1;
};

struct EstimationConfig {
  kernel::KernelConfig kernel;
  ScalingMode scaling = ScalingMode::log_min_max;
  SolveOptions solve;
  /// Fail with DegradedError when more than this share of periods is edge-clamped.
  double max_flagged_share = 0.5;
};

/// F(psi A0 | lambda U0) for one (psi, lambda), i.e. the kernel CDF of hires at
/// threshold lambda*psi*H0 and query (lambda*U0, lambda*psi*V0). Under constant
/// returns, m(A U, V) <= lambda*psi*H0 at U = lambda*U0, V = lambda*psi*V0 exactly
/// when A <= psi*A0. nullopt when the query lies outside the support.
std::optional<double> traced_cdf(const ScaledPanel& panel, const BasePoint& base, double psi,
                                 double lambda, const kernel::KernelConfig& config);

struct FSurface {
  std::vector<double> psi_grid;
  std::vector<double> lambda_grid;
  /// values[l][p] for lambda_grid[l], psi_grid[p]; NaN where out of support.
  std::vector<std::vector<double>> values;
  std::vector<std::vector<bool>> in_support;
};

/// Traces F over the grid and rearranges each lambda column to be nondecreasing
/// in psi. Throws SupportError when no cell is inside the support.
FSurface trace_F(const ScaledPanel& panel, const BasePoint& base, std::span<const double> psi_grid,
                 std::span<const double> lambda_grid, const kernel::KernelConfig& config,
                 int threads = 0);

/// Default psi bracket: [min H/H0, max H/H0] widened by `expansion` on each side.
std::pair<double, double> psi_bracket(const ScaledPanel& panel, const BasePoint& base,
                                      double expansion);

std::vector<double> log_grid(double lo, double hi, std::size_t points);

struct PsiSolution {
  double psi = 1.0;
  SupportFlag flag = SupportFlag::interior;
  /// Traced F at the solution: the target when interior, the column end otherwise.
  double column_value = 0.0;
};

/// Largest psi at which the rearranged column psi -> F(psi A0 | U/U0 * U0) does not
/// exceed target_p. The column is left-continuous under the strict tie rule, so
/// this is its generalized inverse. Throws SupportError when no grid cell is in support.
PsiSolution solve_psi(const ScaledPanel& panel, const BasePoint& base, double target_p,
                      double at_seekers, const kernel::KernelConfig& config,
                      const SolveOptions& options = {},
                      std::optional<std::pair<double, double>> bracket = std::nullopt);

struct EfficiencySeries {
  std::vector<PeriodIndex> periods;
  std::vector<double> values;  // A_t
  std::vector<double> psi;     // A_t / A0
  std::vector<double> target_probability;  // G(H_t | U_t, V_t)
  std::vector<double> column_value;        // F(A_t | U_t) as traced
  std::vector<SupportFlag> flags;
  BasePoint base;

  std::size_t flagged_count() const;
};

/// Recovers A_t for every period (parallel over periods). The base period is A0 exactly.
/// Throws DegradedError when more than max_flagged_share of periods are clamped.
EfficiencySeries recover_efficiency(const MarketPanel& panel, const BasePoint& base,
                                    const EstimationConfig& config = {}, int threads = 0);

/// Same computation, single-threaded loop. Reference for the parallel driver.
EfficiencySeries recover_efficiency_serial(const MarketPanel& panel, const BasePoint& base,
                                           const EstimationConfig& config = {});

struct FittedHires {
  std::vector<double> fitted;
  std::vector<double> relative_error;  // |fitted - H| / H, NaN when H == 0
};

/// Hires implied by the identified matching function at each observed point:
/// the conditional quantile at (U_t, V_t) of probability F(A_t | U_t).
FittedHires reconstruct_matching(const MarketPanel& panel, const EfficiencySeries& efficiency,
                                 const EstimationConfig& config = {}, int threads = 0);

/// m(psi A0 U0, psi V0) on the constant-returns ray through the base point.
/// The point is represented as seekers lambda U0 with efficiency psi A0 / lambda,
/// lambda taken from the observed U_t / U0 with the most kernel mass at
/// (lambda U0, psi V0). Throws SupportError when no representation is in support.
double matching_on_ray(const ScaledPanel& panel, const BasePoint& base, double psi,
                       const kernel::KernelConfig& config);

void write_efficiency_csv(const EfficiencySeries& series, const std::filesystem::path& path);
EfficiencySeries read_efficiency_csv(const std::filesystem::path& path);
void write_fitted_csv(const MarketPanel& panel, const FittedHires& fitted,
                      const std::filesystem::path& path);
void write_fsurface_csv(const FSurface& surface, const std::filesystem::path& path);

}  // namespace matchfn::identify
