#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "matchfn/error.hpp"
#include "matchfn/kernel.hpp"

using namespace matchfn;
using namespace matchfn::kernel;

namespace {

// Three observations share (U, V) = (10, 10); a fourth sits so far away in
// identity scaling that its weight underflows to zero.
ScaledPanel tied_panel() {
  return ScaledPanel(MarketPanel("tied", {{24168, 1.0, 10.0, 10.0},
                                          {24169, 2.0, 10.0, 10.0},
                                          {24170, 3.0, 10.0, 10.0},
                                          {24171, 50.0, 500.0, 500.0}}),
                     ScalingMode::identity);
}

}  // namespace

TEST_SUITE("kernel") {

TEST_CASE("kernel weight at zero distance is 1/(2 pi)") {
  KernelConfig c;
  CHECK(kernel_weight({0.3, 0.7}, {0.3, 0.7}, c) == doctest::Approx(1.0 / (2 * std::numbers::pi)).epsilon(1e-15));
  CHECK(kernel_weight({0.3, 0.7}, {0.3, 0.7}, c) == doctest::Approx(0.15915).epsilon(1e-4));
}

TEST_CASE("kernel weight one bandwidth away is exp(-1/2)/(2 pi)") {
  KernelConfig c;
  c.bandwidth = 0.1;
  CHECK(kernel_weight({0.0, 0.0}, {0.1, 0.0}, c) == doctest::Approx(0.09653).epsilon(1e-4));
  CHECK(kernel_weight({0.0, 0.0}, {0.0, 0.1}, c) == doctest::Approx(0.09653).epsilon(1e-4));
  c.vacancy_bandwidth = 0.2;
  CHECK(kernel_weight({0.0, 0.0}, {0.0, 0.2}, c) == doctest::Approx(0.09653).epsilon(1e-4));
}

TEST_CASE("kernel weight is symmetric") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0, 1);
  KernelConfig c;
  for (int k = 0; k < 100; ++k) {
    const ScaledPoint p{u(gen), u(gen)}, q{u(gen), u(gen)};
    CHECK(kernel_weight(p, q, c) == kernel_weight(q, p, c));
  }
}

TEST_CASE("equal weights reduce to the empirical CDF") {
  const auto panel = tied_panel();
  const KernelConfig c;
  const ScaledPoint at{10.0, 10.0};
  CHECK(kernel_weight(at, {500.0, 500.0}, c) == 0.0);
  CHECK(conditional_cdf(panel, 2.5, at, c) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(conditional_cdf(panel, 2.0, at, c) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(conditional_cdf(panel, 3.0, at, c) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  auto le = c;
  le.tie_rule = TieRule::less_or_equal;
  CHECK(conditional_cdf(panel, 2.0, at, le) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(conditional_cdf(panel, 3.0, at, le) == 1.0);
}

TEST_CASE("quantile of the tied empirical CDF at p = 0.5 is 2.5") {
  const auto panel = tied_panel();
  auto cdf = LocalDistribution(panel, {10.0, 10.0}, KernelConfig{}).to_cdf();
  CHECK(cdf.support == std::vector<double>{1.0, 2.0, 3.0, 50.0});
  CHECK(conditional_quantile(cdf, 0.5) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(conditional_quantile(cdf, 0.0) == 1.0);
  CHECK(conditional_quantile(cdf, 1.0) == doctest::Approx(50.0).epsilon(1e-14));
}

TEST_CASE("CDF is 0 below and 1 above the observed hires") {
  std::mt19937_64 gen(4);
  const ScaledPanel panel(testing::random_panel(gen, 40));
  const KernelConfig c;
  const auto h = panel.hires_support();
  for (const auto& p : panel.points()) {
    CHECK(conditional_cdf(panel, h.front() * 0.5, p, c) == 0.0);
    CHECK(conditional_cdf(panel, h.front(), p, c) == 0.0);
    CHECK(conditional_cdf(panel, h.back() * 2, p, c) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("queries far outside the cloud raise SupportError") {
  std::mt19937_64 gen(5);
  const ScaledPanel panel(testing::random_panel(gen, 30));
  KernelConfig c;
  c.bandwidth = 0.01;
  CHECK_THROWS_AS(conditional_cdf(panel, 1000.0, {5.0, 5.0}, c), SupportError);
  CHECK_FALSE(LocalDistribution::try_make(panel, {5.0, 5.0}, c).has_value());
  const CdfQuery q[] = {{1000.0, {5.0, 5.0}}, {1000.0, panel.points()[0]}};
  const auto out = conditional_cdf_batch(panel, q, c, 1);
  CHECK(std::isnan(out[0]));
  CHECK(std::isfinite(out[1]));
}

TEST_CASE("pool adjacent violators") {
  const std::vector<double> v{0.2, 0.1, 0.4};
  const auto fit = isotonic_fit(v);
  REQUIRE(fit.size() == 3);
  CHECK(fit[0] == doctest::Approx(0.15));
  CHECK(fit[1] == doctest::Approx(0.15));
  CHECK(fit[2] == doctest::Approx(0.4));
  const std::vector<double> sorted{0.0, 0.1, 0.1, 0.7, 1.0};
  CHECK(isotonic_fit(sorted) == sorted);
  const std::vector<double> down{3.0, 2.0, 1.0};
  for (double x : isotonic_fit(down)) CHECK(x == doctest::Approx(2.0));
}

TEST_CASE("isotonic fit is nondecreasing and preserves the sum") {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> v(30);
    for (double& x : v) x = u(gen);
    const auto fit = isotonic_fit(v);
    CHECK(std::is_sorted(fit.begin(), fit.end()));
    double a = 0, b = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      a += v[i];
      b += fit[i];
    }
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("monotone_rearrange sorts by hires and clips") {
  const std::vector<double> h{3.0, 1.0, 2.0};
  const std::vector<double> p{0.9, 0.3, 0.1};
  const auto cdf = monotone_rearrange(h, p);
  CHECK(cdf.support == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(cdf.probabilities[0] == doctest::Approx(0.2));
  CHECK(cdf.probabilities[1] == doctest::Approx(0.2));
  CHECK(cdf.probabilities[2] == doctest::Approx(0.9));
  CHECK_THROWS_AS(monotone_rearrange(std::vector<double>{}, std::vector<double>{}), InputError);
}

TEST_CASE("quantile interpolates from the preceding support point") {
  ConditionalCdf cdf;
  cdf.support = {1.0, 2.0, 3.0, 4.0};
  cdf.probabilities = {0.1, 0.4, 0.6, 1.0};
  CHECK(conditional_quantile(cdf, 0.5) == doctest::Approx(2.5));
  CHECK(conditional_quantile(cdf, 0.4) == doctest::Approx(2.0));
  CHECK(conditional_quantile(cdf, 0.0) == 1.0);
  CHECK(conditional_quantile(cdf, 0.05) == 1.0);
  CHECK(conditional_quantile(cdf, 1.0) == 4.0);
  CHECK(conditional_quantile(cdf, 1.5) == 4.0);
}

TEST_CASE("interpolated_cdf inverts the quantile where the CDF increases") {
  ConditionalCdf cdf;
  cdf.support = {1.0, 2.0, 3.0, 4.0};
  cdf.probabilities = {0.1, 0.4, 0.6, 1.0};
  CHECK(interpolated_cdf(cdf, 0.5) == 0.1);
  CHECK(interpolated_cdf(cdf, 9.0) == 1.0);
  CHECK(interpolated_cdf(cdf, 2.5) == doctest::Approx(0.5));
  for (double h = 1.0; h <= 4.0; h += 0.125) {
    CHECK(conditional_quantile(cdf, interpolated_cdf(cdf, h)) == doctest::Approx(h).epsilon(1e-12));
  }
}

TEST_CASE("quantile of the CDF at an observed hires value returns that value") {
  // Under less-or-equal, quantile(F(h*)) is the first support point whose CDF
  // reaches F(h*): h* itself unless an earlier point has the same CDF value.
  std::mt19937_64 gen(7);
  const ScaledPanel panel(testing::random_panel(gen, 30));
  KernelConfig c;
  c.tie_rule = TieRule::less_or_equal;
  const auto h = panel.hires_support();
  const LocalDistribution local(panel, panel.points()[3], c);
  const auto cdf = local.to_cdf();
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double q = conditional_quantile(cdf, local.cdf(h[k]));
    CHECK(q <= h[k]);
    CHECK(local.cdf(q) == doctest::Approx(local.cdf(h[k])).epsilon(1e-12));
  }
  CHECK(cdf.probabilities.back() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("strict rule: quantile of the CDF at h* is the smallest support point at or above h*") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0, 1);
  const ScaledPanel panel(testing::random_panel(gen, 30));
  const KernelConfig c;
  const auto h = panel.hires_support();
  const LocalDistribution local(panel, panel.points()[5], c);
  const auto cdf = local.to_cdf();
  for (int k = 0; k < 200; ++k) {
    const double hs = h.front() + u(gen) * (h.back() - h.front());
    const double above = *std::lower_bound(h.begin(), h.end(), hs);
    CHECK(conditional_quantile(cdf, local.cdf(hs)) == doctest::Approx(above).epsilon(1e-12));
  }
}

TEST_CASE("CDF properties on random panels") {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0, 1);
  const KernelConfig c;
  for (int rep = 0; rep < 5; ++rep) {
    const auto raw = testing::random_panel(gen, 40);
    const ScaledPanel panel(raw);
    const auto h = panel.hires_support();
    for (int k = 0; k < 40; ++k) {
      const ScaledPoint at{u(gen), u(gen)};
      const auto local = LocalDistribution::try_make(panel, at, c);
      if (!local) continue;
      double prev = 0.0;
      for (double x = h.front() * 0.9; x < h.back() * 1.1; x += (h.back() - h.front()) / 50) {
        const double f = local->cdf(x);
        CHECK(f >= 0.0);
        CHECK(f <= 1.0 + 1e-14);
        CHECK(f >= prev);
        prev = f;
      }
    }

    // Mass at an observed point is at least its own weight.
    for (const auto& p : panel.points()) {
      CHECK(LocalDistribution(panel, p, c).total_mass() >= kernel_weight(p, p, c));
    }

    // Permuting rows leaves the CDF unchanged.
    std::vector<Observation> obs(raw.observations().begin(), raw.observations().end());
    std::vector<Observation> shuffled = obs;
    std::vector<std::size_t> perm(obs.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), gen);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      shuffled[i] = obs[perm[i]];
      shuffled[i].period = obs[i].period;
    }
    const ScaledPanel permuted(MarketPanel("p", shuffled));
    for (int k = 0; k < 20; ++k) {
      const double x = h.front() + u(gen) * (h.back() - h.front());
      const ScaledPoint at = panel.points()[static_cast<std::size_t>(k) % panel.size()];
      CHECK(conditional_cdf(panel, x, at, c) == doctest::Approx(conditional_cdf(permuted, x, at, c)).epsilon(1e-12));
    }
  }
}

TEST_CASE("accumulated and batch evaluation match the direct sum") {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0, 1);
  const ScaledPanel panel(testing::random_panel(gen, 60));
  const KernelConfig c;
  const auto h = panel.hires_support();
  std::vector<CdfQuery> queries;
  for (int k = 0; k < 500; ++k) {
    queries.push_back({h.front() + u(gen) * (h.back() - h.front()), panel.points()[static_cast<std::size_t>(k) % 60]});
  }
  for (std::size_t k = 0; k < 60; ++k) queries.push_back({h[k % h.size()], panel.points()[k]});
  const auto ref = reference::conditional_cdf_batch(panel, queries, c);
  const auto one = conditional_cdf_batch(panel, queries, c, 1);
  const auto many = conditional_cdf_batch(panel, queries, c, 4);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    CHECK(one[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    CHECK(one[i] == many[i]);
  }
}

TEST_CASE("configuration validation") {
  KernelConfig c;
  c.bandwidth = 0.0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = KernelConfig{};
  c.min_effective_weight = -1;
  CHECK_THROWS_AS(c.validate(), InputError);
  CHECK(parse_tie_rule(to_string(TieRule::less_or_equal)) == TieRule::less_or_equal);
  CHECK(parse_tie_rule(to_string(TieRule::strict_less)) == TieRule::strict_less);
  CHECK_THROWS_AS(parse_tie_rule("sometimes"), InputError);
}

}
