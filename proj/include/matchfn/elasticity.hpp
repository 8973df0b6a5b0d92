#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "matchfn/identify.hpp"
#include "matchfn/panel.hpp"

namespace matchfn::elasticity {

/// Quadratic basis in efficiency units of search x = A U and vacancies v.
enum Feature : std::size_t { kX = 0, kV, kXX, kVV, kXV, kFeatureCount };

inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {"x", "v", "x2", "v2", "xv"};

struct Standardization {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> scale{};  // population standard deviation
  std::array<bool, kFeatureCount> active{};   // false for zero-variance columns
};

/// Design matrix of standardized quadratic features over a fitting window.
struct FeatureMatrix {
  std::vector<PeriodIndex> periods;
  std::vector<double> x;  // A_t U_t
  std::vector<double> v;  // V_t
  /// rows[i][j]: standardized feature j of row i; 0 for inactive columns.
  std::vector<std::array<double, kFeatureCount>> rows;
  Standardization standardization;
  std::vector<std::string> warnings;

  std::size_t size() const { return rows.size(); }
};

std::array<double, kFeatureCount> raw_features(double x, double v);

/// Builds features for panel rows [first, first + count). Zero-variance columns
/// are dropped with a warning. Throws InputError on misaligned periods.
FeatureMatrix build_features(const MarketPanel& panel, const identify::EfficiencySeries& efficiency,
                             std::size_t first = 0, std::size_t count = SIZE_MAX);

/// Same, from explicit columns of efficiency units x = A U and vacancies v.
FeatureMatrix build_features(std::span<const PeriodIndex> periods, std::span<const double> x,
                             std::span<const double> v);

struct PenaltyConfig {
  enum class Mode { fixed, cross_validated };
  Mode mode = Mode::cross_validated;
  double penalty = 0.0;  // used when mode == fixed
  std::size_t folds = 5;
  std::size_t grid_size = 50;
  double grid_ratio = 1e-4;  // smallest grid penalty relative to the largest
  double tolerance = 1e-10;
  std::size_t max_iterations = 100000;
};

struct QuadraticFit {
  double intercept = 0.0;
  std::array<double, kFeatureCount> coefficients{};  // on standardized features
  Standardization standardization;
  double penalty = 0.0;
  double r_squared = 0.0;
  PeriodIndex window_first = 0;
  PeriodIndex window_last = 0;
  std::size_t iterations = 0;

  double predict(double x, double v) const;
  /// Analytic (dH/dx, dH/dv) through the standardization.
  std::array<double, 2> gradient(double x, double v) const;
};

struct LassoResult {
  double intercept = 0.0;
  std::vector<double> coefficients;
  std::size_t iterations = 0;
};

/// Coordinate descent on (1/2n) sum (y - b0 - X b)^2 + penalty * |b|_1 with an
/// unpenalized intercept. Convergence is declared when no coefficient moves by
/// more than `tolerance` (in units of sd(y)) in a full sweep; the active set is
/// then polished by an exact solve of its stationarity conditions. Throws
/// ConvergenceError after max_iterations sweeps.
LassoResult coordinate_descent(std::span<const std::vector<double>> columns, std::span<const double> y,
                               double penalty, double tolerance, std::size_t max_iterations);

/// Smallest penalty at which every slope is zero: max_j |<x_j - mean, y - mean>| / n.
double max_penalty(std::span<const std::vector<double>> columns, std::span<const double> y);

/// Fits the quadratic with either a fixed penalty or one chosen by K-fold cross
/// validation (folds assigned by period modulo K) over a log-spaced grid.
QuadraticFit lasso_fit(const FeatureMatrix& features, std::span<const double> targets,
                       const PenaltyConfig& config = {}, int threads = 0);

enum class Denominator { fitted, observed };

struct ElasticityReport {
  std::string label;  // "global" or "rolling"
  std::vector<PeriodIndex> periods;
  std::vector<double> eta_seekers;    // d ln m / d ln AU
  std::vector<double> eta_vacancies;  // d ln m / d ln V
  std::vector<double> returns_to_scale;
  std::vector<double> fitted_hires;
  std::vector<bool> defined;  // false where the denominator is not positive
  double r_squared = 0.0;
  double penalty = 0.0;

  /// Means over defined periods: {eta_AU, eta_V, rts}.
  std::array<double, 3> time_average() const;
};

/// Pointwise elasticities of a fitted quadratic at every panel period.
ElasticityReport elasticity_series(const MarketPanel& panel, const identify::EfficiencySeries& efficiency,
                                   const QuadraticFit& fit, Denominator denominator = Denominator::fitted);

/// Refits on each sliding window of `window_length` periods and reports the
/// elasticity at the window's last period. Windows are fitted in parallel.
ElasticityReport rolling_elasticities(const MarketPanel& panel, const identify::EfficiencySeries& efficiency,
                                      std::size_t window_length, const PenaltyConfig& config = {},
                                      Denominator denominator = Denominator::fitted, int threads = 0);

void write_elasticity_csv(const ElasticityReport& report, const std::filesystem::path& path);
ElasticityReport read_elasticity_csv(const std::filesystem::path& path);
void write_fit_csv(const QuadraticFit& fit, const std::filesystem::path& path);

}  // namespace matchfn::elasticity
