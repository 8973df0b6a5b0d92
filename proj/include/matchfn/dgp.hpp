#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "matchfn/panel.hpp"

namespace matchfn::dgp {

// Matching technologies. Both have constant returns to scale in (A*U, V).

struct CobbDouglas {
  double alpha = 0.5;  // exponent on efficiency-weighted seekers
};

/// m(x, v) = (share * x^rho + (1 - share) * v^rho)^(1/rho). Extension beyond the
/// Cobb-Douglas benchmark: its elasticities vary with the (x, v) mix.
struct Ces {
  double share = 0.5;
  double substitution = 0.5;  // rho, nonzero
};

using Technology = std::variant<CobbDouglas, Ces>;

double evaluate(const Technology& technology, double efficient_seekers, double vacancies);

struct Elasticities {
  double seekers = 0.0;    // d ln m / d ln (A U)
  double vacancies = 0.0;  // d ln m / d ln V
};

Elasticities analytic_elasticities(const Technology& technology, double efficient_seekers,
                                   double vacancies);

// Efficiency processes.

struct ConstantEfficiency {
  double level = 1.0;
};

/// log A_t = mean + persistence * (log A_{t-1} - mean) + innovation_sd * e_t,
/// started from the stationary distribution.
struct LogAr1Efficiency {
  double mean = 0.0;
  double persistence = 0.8;
  double innovation_sd = 0.1;
};

struct TrendEfficiency {
  double start = 1.0;
  double growth_rate = 0.0;  // A_t = start * (1 + growth_rate)^t
};

using EfficiencyProcess = std::variant<ConstantEfficiency, LogAr1Efficiency, TrendEfficiency>;

/// log U_t = log U_{t-1} + drift + sd * e_t.
struct SeekerProcess {
  double initial = 1000.0;
  double drift = 0.0;
  double sd = 0.05;
};

/// V_t = ratio * U_0 * (U_t / U_0)^seeker_loading * exp(z_t), with
/// z_t = persistence * z_{t-1} + sd * e_t. The shock stream is independent of
/// the efficiency stream, so V and A are conditionally independent given U.
struct VacancyProcess {
  double ratio = 0.5;
  double seeker_loading = 1.0;
  double persistence = 0.0;
  double sd = 0.25;
};

struct DgpSpec {
  Technology technology = CobbDouglas{};
  EfficiencyProcess efficiency = LogAr1Efficiency{};
  SeekerProcess seekers;
  VacancyProcess vacancies;
  std::size_t periods = 50;
  std::uint64_t seed = 0;
  double noise_sd = 0.0;  // multiplicative log-normal noise on hires
  PeriodIndex start_period = 2014 * 12;
  std::string market_id = "simulated";
};

/// Throws InputError describing the first invalid field.
void validate(const DgpSpec& spec);

/// Cobb-Douglas(alpha), log-AR(1)(0, 0.8, 0.1) efficiency, T = 50, noise 0.05.
DgpSpec default_validation_spec(double alpha = 0.5, std::uint64_t seed = 0);

struct SimulatedTruth {
  MarketPanel panel;
  std::vector<double> efficiency;
  std::vector<Elasticities> elasticities;  // oracle values at (A_t U_t, V_t)
};

SimulatedTruth simulate(const DgpSpec& spec);

std::vector<double> efficiency_path(const EfficiencyProcess& process, std::size_t periods,
                                    std::uint64_t seed);

inline Elasticities oracle_elasticity(const DgpSpec& spec, double efficient_seekers,
                                      double vacancies) {
  return analytic_elasticities(spec.technology, efficient_seekers, vacancies);
}

/// truth.csv: period,A,eta_AU,eta_V
void write_truth_csv(const SimulatedTruth& truth, const std::filesystem::path& path);

std::string describe(const Technology& technology);

}  // namespace matchfn::dgp
