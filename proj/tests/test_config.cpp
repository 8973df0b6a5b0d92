#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "matchfn/config.hpp"
#include "matchfn/error.hpp"

using namespace matchfn;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.ini");
}

// Restores MATCHFN_THREADS on scope exit.
struct EnvGuard {
  std::string saved;
  bool had = false;
  EnvGuard() {
    if (const char* v = std::getenv("MATCHFN_THREADS")) {
      saved = v;
      had = true;
    }
  }
  ~EnvGuard() {
    if (had) {
      ::setenv("MATCHFN_THREADS", saved.c_str(), 1);
    } else {
      ::unsetenv("MATCHFN_THREADS");
    }
  }
};

}  // namespace

TEST_SUITE("config") {

TEST_CASE("empty text gives the defaults") {
  const auto c = parse("");
  CHECK(c.estimation.kernel.bandwidth == 0.1);
  CHECK(c.estimation.kernel.tie_rule == kernel::TieRule::strict_less);
  CHECK(c.normalization == 100.0);
  CHECK(c.base_index == 0);
  CHECK(c.penalty.mode == elasticity::PenaltyConfig::Mode::cross_validated);
  CHECK(c.rolling_window == 24);
  CHECK(c.validation.replications == 20);
  CHECK(c.output == "out");
}

TEST_CASE("sections and keys are applied") {
  const auto c = parse(R"(; comment line
[input]
path = data/panel.csv
hires_column = H
market_column = region

[kernel]
bandwidth = 0.05
vacancy_bandwidth = 0.2
tie_rule = less-or-equal

[panel]
scaling = min-max

[identify]
base_index = 3
normalization = 1

[elasticity]
penalty = 0.25
rolling_window = 12
denominator = observed

[dgp]
technology = ces
share = 0.4
substitution = -0.5
efficiency = trend
efficiency_start = 2
efficiency_growth = 0.01
periods = 80
noise_sd = 0.02

[validate]
alphas = 0.4, 0.6 ,0.2
replications = 3
noise_free_checks = false

[run]
threads = 2
seed = 99
)");
  CHECK(c.input == "data/panel.csv");
  CHECK(c.schema.hires == "H");
  CHECK(c.schema.market == "region");
  CHECK(c.estimation.kernel.bandwidth == 0.05);
  CHECK(c.estimation.kernel.vacancy_bw() == 0.2);
  CHECK(c.estimation.kernel.tie_rule == kernel::TieRule::less_or_equal);
  CHECK(c.estimation.scaling == ScalingMode::min_max);
  CHECK(c.base_index == 3);
  CHECK(c.normalization == 1.0);
  CHECK(c.penalty.mode == elasticity::PenaltyConfig::Mode::fixed);
  CHECK(c.penalty.penalty == 0.25);
  CHECK(c.rolling_window == 12);
  CHECK(c.denominator == elasticity::Denominator::observed);
  REQUIRE(std::holds_alternative<dgp::Ces>(c.dgp.technology));
  CHECK(std::get<dgp::Ces>(c.dgp.technology).share == 0.4);
  CHECK(std::get<dgp::Ces>(c.dgp.technology).substitution == -0.5);
  REQUIRE(std::holds_alternative<dgp::TrendEfficiency>(c.dgp.efficiency));
  CHECK(std::get<dgp::TrendEfficiency>(c.dgp.efficiency).start == 2.0);
  CHECK(c.dgp.periods == 80);
  CHECK(c.dgp.noise_sd == 0.02);
  CHECK(c.validation.alphas == std::vector<double>{0.4, 0.6, 0.2});
  CHECK(c.validation.replications == 3);
  CHECK_FALSE(c.validation.noise_free_checks);
  CHECK(c.threads == 2);
  CHECK(c.seed == 99);
}

TEST_CASE("trailing and hash comments") {
  const auto c = parse("# header\n[kernel] ; the kernel\nbandwidth = 0.2   ; scaled units\ntie_rule = less-or-equal # ties\n");
  CHECK(c.estimation.kernel.bandwidth == 0.2);
  CHECK(c.estimation.kernel.tie_rule == kernel::TieRule::less_or_equal);
}

TEST_CASE("unknown keys and sections are errors naming the key") {
  CHECK_THROWS_WITH_AS(parse("[kernel]\nbandwith = 0.1\n"), doctest::Contains("kernel.bandwith"), InputError);
  CHECK_THROWS_WITH_AS(parse("[colour]\nred = 1\n"), doctest::Contains("colour.red"), InputError);
  CHECK_THROWS_AS(parse("bandwidth = 0.1\n"), InputError);
}

TEST_CASE("invalid values are errors") {
  CHECK_THROWS_AS(parse("[kernel]\nbandwidth = -1\n"), InputError);
  CHECK_THROWS_AS(parse("[kernel]\nbandwidth = wide\n"), InputError);
  CHECK_THROWS_AS(parse("[kernel]\ntie_rule = maybe\n"), InputError);
  CHECK_THROWS_AS(parse("[elasticity]\npenalty = -2\n"), InputError);
  CHECK_THROWS_AS(parse("[elasticity]\nrolling_window = 5\n"), InputError);
  CHECK_THROWS_AS(parse("[dgp]\ntechnology = leontief\n"), InputError);
  CHECK_THROWS_AS(parse("[dgp]\nalpha = 1.5\n"), InputError);
  CHECK_THROWS_AS(parse("[validate]\nalphas = 0.5,,0.3\n"), InputError);
  CHECK_THROWS_AS(parse("[validate]\nnoise_free_checks = yes please\n"), InputError);
  CHECK_THROWS_AS(parse("[run]\nthreads = -1\n"), InputError);
  CHECK_THROWS_AS(parse("[identify]\nmax_flagged_share = 2\n"), InputError);
  CHECK_THROWS_AS(parse("[kernel\nbandwidth = 1\n"), InputError);
}

TEST_CASE("printed defaults parse back to the defaults") {
  const auto c = parse(default_config_text());
  const RunConfig d;
  CHECK(c.estimation.kernel.bandwidth == d.estimation.kernel.bandwidth);
  CHECK(c.estimation.kernel.min_effective_weight == d.estimation.kernel.min_effective_weight);
  CHECK(c.estimation.solve.grid_points == d.estimation.solve.grid_points);
  CHECK(c.penalty.grid_ratio == d.penalty.grid_ratio);
  CHECK(c.validation.alphas == d.validation.alphas);
  CHECK(c.output == d.output);
  CHECK(c.input.empty());
}

TEST_CASE("load_config reads a file and reports a missing one") {
  testing::TempDir dir("cfg");
  testing::write_text(dir / "run.ini", "[run]\nseed = 5\n");
  CHECK(load_config(dir / "run.ini").seed == 5);
  CHECK_THROWS_AS(load_config(dir / "missing.ini"), InputError);
}

TEST_CASE("thread count from the environment") {
  EnvGuard guard;
  ::unsetenv("MATCHFN_THREADS");
  CHECK_FALSE(threads_from_environment().has_value());
  ::setenv("MATCHFN_THREADS", "3", 1);
  CHECK(threads_from_environment() == 3);
  ::setenv("MATCHFN_THREADS", "three", 1);
  CHECK_THROWS_AS(threads_from_environment(), InputError);
}

}
