#include "matchfn/dgp.hpp"

#include <cmath>
#include <sstream>

#include "matchfn/error.hpp"
#include "matchfn/io.hpp"
#include "matchfn/rng.hpp"

namespace matchfn::dgp {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

double evaluate(const Technology& technology, double x, double v) {
  return std::visit(
      overloaded{
          [&](const CobbDouglas& cd) { return std::pow(x, cd.alpha) * std::pow(v, 1.0 - cd.alpha); },
          [&](const Ces& ces) {
            const double rho = ces.substitution;
            return std::pow(ces.share * std::pow(x, rho) + (1.0 - ces.share) * std::pow(v, rho),
                            1.0 / rho);
          },
      },
      technology);
}

Elasticities analytic_elasticities(const Technology& technology, double x, double v) {
  return std::visit(overloaded{
                        [](const CobbDouglas& cd) { return Elasticities{cd.alpha, 1.0 - cd.alpha}; },
                        [&](const Ces& ces) {
                          const double rho = ces.substitution;
                          const double a = ces.share * std::pow(x, rho);
                          const double b = (1.0 - ces.share) * std::pow(v, rho);
                          return Elasticities{a / (a + b), b / (a + b)};
                        },
                    },
                    technology);
}

void validate(const DgpSpec& spec) {
  std::visit(overloaded{
                 [](const CobbDouglas& cd) {
                   if (!(cd.alpha > 0.0 && cd.alpha < 1.0)) {
                     throw InputError("dgp: cobb_douglas alpha must lie in (0, 1)");
                   }
                 },
                 [](const Ces& ces) {
                   if (!(ces.share > 0.0 && ces.share < 1.0)) {
                     throw InputError("dgp: ces share must lie in (0, 1)");
                   }
                   if (ces.substitution == 0.0 || !std::isfinite(ces.substitution)) {
                     throw InputError("dgp: ces substitution must be finite and nonzero");
                   }
                 },
             },
             spec.technology);
  std::visit(overloaded{
                 [](const ConstantEfficiency& c) {
                   if (!(c.level > 0.0)) throw InputError("dgp: constant efficiency level must be > 0");
                 },
                 [](const LogAr1Efficiency& ar) {
                   if (!(ar.persistence > -1.0 && ar.persistence < 1.0)) {
                     throw InputError("dgp: log_ar1 persistence must lie in (-1, 1)");
                   }
                   if (!(ar.innovation_sd >= 0.0)) {
                     throw InputError("dgp: log_ar1 innovation_sd must be >= 0");
                   }
                 },
                 [](const TrendEfficiency& tr) {
                   if (!(tr.start > 0.0)) throw InputError("dgp: trend start must be > 0");
                   if (!(tr.growth_rate > -1.0)) throw InputError("dgp: trend growth_rate must be > -1");
                 },
             },
             spec.efficiency);
  if (spec.periods < kMinEstimationLength) {
    throw InputError("dgp: periods must be at least " + std::to_string(kMinEstimationLength));
  }
  if (!(spec.noise_sd >= 0.0)) throw InputError("dgp: noise_sd must be >= 0");
  if (!(spec.seekers.initial > 0.0)) throw InputError("dgp: seekers.initial must be > 0");
  if (!(spec.seekers.sd >= 0.0)) throw InputError("dgp: seekers.sd must be >= 0");
  if (!(spec.vacancies.ratio > 0.0)) throw InputError("dgp: vacancies.ratio must be > 0");
  if (!(spec.vacancies.sd >= 0.0)) throw InputError("dgp: vacancies.sd must be >= 0");
  if (!(std::abs(spec.vacancies.persistence) <= 1.0)) {
    throw InputError("dgp: vacancies.persistence must lie in [-1, 1]");
  }
}

DgpSpec default_validation_spec(double alpha, std::uint64_t seed) {
  DgpSpec spec;
  spec.technology = CobbDouglas{alpha};
  spec.efficiency = LogAr1Efficiency{0.0, 0.8, 0.1};
  spec.periods = 50;
  spec.noise_sd = 0.05;
  spec.seed = seed;
  return spec;
}

std::vector<double> efficiency_path(const EfficiencyProcess& process, std::size_t periods,
                                    std::uint64_t seed) {
  std::vector<double> out(periods);
  std::visit(overloaded{
                 [&](const ConstantEfficiency& c) { std::fill(out.begin(), out.end(), c.level); },
                 [&](const LogAr1Efficiency& ar) {
                   Rng rng(seed, Substream::efficiency);
                   const double stationary_sd =
                       ar.innovation_sd / std::sqrt(1.0 - ar.persistence * ar.persistence);
                   double dev = stationary_sd * rng.normal();
                   for (std::size_t t = 0; t < periods; ++t) {
                     if (t > 0) dev = ar.persistence * dev + ar.innovation_sd * rng.normal();
                     out[t] = std::exp(ar.mean + dev);
                   }
                 },
                 [&](const TrendEfficiency& tr) {
                   double level = tr.start;
                   for (std::size_t t = 0; t < periods; ++t) {
                     out[t] = level;
                     level *= 1.0 + tr.growth_rate;
                   }
                 },
             },
             process);
  return out;
}

SimulatedTruth simulate(const DgpSpec& spec) {
  validate(spec);
  const std::size_t T = spec.periods;

  SimulatedTruth truth;
  truth.efficiency = efficiency_path(spec.efficiency, T, spec.seed);

  Rng seeker_rng(spec.seed, Substream::seekers);
  Rng vacancy_rng(spec.seed, Substream::vacancies);
  Rng noise_rng(spec.seed, Substream::noise);

  const auto& vp = spec.vacancies;
  const bool unit_root = std::abs(vp.persistence) >= 1.0;
  double log_u = std::log(spec.seekers.initial);
  const double log_u0 = log_u;
  double z = unit_root ? 0.0 : vp.sd / std::sqrt(1.0 - vp.persistence * vp.persistence) *
                                   vacancy_rng.normal();

  std::vector<Observation> obs(T);
  truth.elasticities.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) {
      log_u += spec.seekers.drift + spec.seekers.sd * seeker_rng.normal();
      z = vp.persistence * z + vp.sd * vacancy_rng.normal();
    }
    const double U = std::exp(log_u);
    const double V = vp.ratio * std::exp(log_u0 + vp.seeker_loading * (log_u - log_u0) + z);
    const double x = truth.efficiency[t] * U;
    // Draw the noise unconditionally so the noise stream does not depend on noise_sd.
    const double eps = noise_rng.normal();
    double H = evaluate(spec.technology, x, V);
    if (spec.noise_sd > 0.0) H *= std::exp(spec.noise_sd * eps);

    obs[t] = Observation{spec.start_period + static_cast<PeriodIndex>(t), H, U, V};
    truth.elasticities[t] = analytic_elasticities(spec.technology, x, V);
  }
  truth.panel = MarketPanel(spec.market_id, std::move(obs));
  return truth;
}

void write_truth_csv(const SimulatedTruth& truth, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "period,A,eta_AU,eta_V\n";
  for (std::size_t t = 0; t < truth.panel.size(); ++t) {
    out << format_period(truth.panel[t].period) << ',' << io::format_number(truth.efficiency[t])
        << ',' << io::format_number(truth.elasticities[t].seekers) << ','
        << io::format_number(truth.elasticities[t].vacancies) << '\n';
  }
  io::write_file_atomic(path, out.str());
}

std::string describe(const Technology& technology) {
  return std::visit(overloaded{
                        [](const CobbDouglas& cd) {
                          return "cobb_douglas(alpha=" + io::format_number(cd.alpha) + ")";
                        },
                        [](const Ces& ces) {
                          return "ces(share=" + io::format_number(ces.share) +
                                 ", substitution=" + io::format_number(ces.substitution) + ")";
                        },
                    },
                    technology);
}

}  // namespace matchfn::dgp
