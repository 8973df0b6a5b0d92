#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "matchfn/error.hpp"
#include "matchfn/panel.hpp"

using namespace matchfn;

namespace {

MarketPanel two_rows() {
  return MarketPanel("m", {{parse_period("2014-02"), 110, 1010, 505}, {parse_period("2014-01"), 100, 1000, 500}});
}

std::string message_of(auto&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("panel") {

TEST_CASE("period labels") {
  CHECK(parse_period("2014-01") == 2014 * 12);
  CHECK(format_period(parse_period("1999-12")) == "1999-12");
  CHECK_THROWS_AS(parse_period("2014-13"), InputError);
  CHECK_THROWS_AS(parse_period("2014/01"), InputError);
  CHECK_THROWS_AS(parse_period("14-01"), InputError);
}

TEST_CASE("load_panel sorts rows by period") {
  testing::TempDir dir("panel");
  testing::write_text(dir / "p.csv", "period,hires,seekers,vacancies\n2014-02,110,1010,505\n2014-01,100,1000,500\n");
  const auto p = load_panel(dir / "p.csv");
  REQUIRE(p.size() == 2);
  CHECK(p[0].period == parse_period("2014-01"));
  CHECK(p[0].hires == 100);
  CHECK(p[1].vacancies == 505);
  CHECK(p.period_labels() == std::vector<std::string>{"2014-01", "2014-02"});
}

TEST_CASE("load_panel errors name the row and field") {
  testing::TempDir dir("panel");
  testing::write_text(dir / "dup.csv", "period,hires,seekers,vacancies\n2014-01,1,2,3\n2014-01,1,2,3\n");
  CHECK(message_of([&] { load_panel(dir / "dup.csv"); }).find("duplicate period 2014-01") != std::string::npos);

  testing::write_text(dir / "v0.csv", "period,hires,seekers,vacancies\n2014-01,1,2,3\n2014-02,1,2,0\n");
  const auto msg = message_of([&] { load_panel(dir / "v0.csv"); });
  CHECK(msg.find("2014-02") != std::string::npos);
  CHECK(msg.find("vacancies") != std::string::npos);

  testing::write_text(dir / "nan.csv", "period,hires,seekers,vacancies\n2014-01,x,2,3\n");
  CHECK_THROWS_AS(load_panel(dir / "nan.csv"), InputError);

  testing::write_text(dir / "col.csv", "period,hires,seekers\n2014-01,1,2\n");
  CHECK(message_of([&] { load_panel(dir / "col.csv"); }).find("vacancies") != std::string::npos);
}

TEST_CASE("custom column names") {
  testing::TempDir dir("panel");
  testing::write_text(dir / "p.csv", "month,H,U,V\n2014-01,1,2,3\n");
  ColumnSchema schema;
  schema.period = "month";
  schema.hires = "H";
  schema.seekers = "U";
  schema.vacancies = "V";
  CHECK(load_panel(dir / "p.csv", schema).size() == 1);
}

TEST_CASE("gaps and hires above seekers are warnings only") {
  const MarketPanel p("m", {{0, 5, 2, 10}, {3, 1, 2, 10}});
  REQUIRE(p.warnings().size() == 2);
  CHECK(p.warnings()[0].find("gap of 2") != std::string::npos);
  CHECK(p.warnings()[1].find("1 of 2") != std::string::npos);
}

TEST_CASE("minimum length is enforced at estimation") {
  CHECK_FALSE(two_rows().meets_minimum_length());
  CHECK_THROWS_AS(two_rows().require_estimable(), InputError);
}

TEST_CASE("derived_rates examples") {
  const MarketPanel p("m", {{0, 100, 1000, 500}, {1, 0, 10, 20}, {2, 1, 1, 1}});
  const auto r = derived_rates(p);
  CHECK(r.tightness[0] == doctest::Approx(0.5));
  CHECK(r.job_finding_rate[0] == doctest::Approx(0.1));
  CHECK(r.worker_finding_rate[0] == doctest::Approx(0.2));
  CHECK(r.job_finding_rate[1] == 0.0);
  CHECK(r.worker_finding_rate[1] == 0.0);
  CHECK(r.tightness[2] == 1.0);
  CHECK(r.job_finding_rate[2] == 1.0);
  CHECK(r.worker_finding_rate[2] == 1.0);
}

TEST_CASE("rates times denominators give hires back") {
  std::mt19937_64 gen(11);
  const auto p = testing::random_panel(gen, 200);
  const auto r = derived_rates(p);
  for (std::size_t t = 0; t < p.size(); ++t) {
    CHECK(std::abs(r.job_finding_rate[t] * p[t].seekers - p[t].hires) <= 1e-12 * p[t].hires);
    CHECK(std::abs(r.worker_finding_rate[t] * p[t].vacancies - p[t].hires) <= 1e-12 * p[t].hires);
  }
}

TEST_CASE("group_by_market partitions rows") {
  std::vector<LabeledObservation> rows = {{"A", {0, 1, 2, 3}}, {"A", {1, 1, 2, 3}}, {"B", {0, 1, 2, 3}}};
  const auto g = group_by_market(rows);
  REQUIRE(g.panels.size() == 2);
  CHECK(g.panels.at("A").size() == 2);
  CHECK(g.panels.at("B").size() == 1);
  CHECK(g.below_minimum == std::vector<std::string>{"A", "B"});

  CHECK(group_by_market({}).panels.empty());

  std::vector<LabeledObservation> one = {{"X", {1, 4, 5, 6}}, {"X", {0, 1, 2, 3}}};
  const auto single = group_by_market(one).panels.at("X");
  const MarketPanel direct("X", {{1, 4, 5, 6}, {0, 1, 2, 3}});
  REQUIRE(single.size() == direct.size());
  for (std::size_t i = 0; i < single.size(); ++i) {
    CHECK(single[i].period == direct[i].period);
    CHECK(single[i].hires == direct[i].hires);
  }
}

TEST_CASE("a failing group reports its name") {
  std::vector<LabeledObservation> rows = {{"ok", {0, 1, 2, 3}}, {"broken", {0, 1, -2, 3}}};
  CHECK(message_of([&] { group_by_market(rows); }).find("broken") != std::string::npos);
}

TEST_CASE("grouped CSV load keeps the market column") {
  testing::TempDir dir("panel");
  testing::write_text(dir / "g.csv",
                      "period,hires,seekers,vacancies,market\n2014-01,1,2,3,IT\n2014-01,1,2,3,Consulting\n");
  const auto rows = read_panel_rows(dir / "g.csv");
  CHECK(rows.has_market_column);
  CHECK(group_by_market(rows.rows).panels.size() == 2);
  CHECK_FALSE(read_panel_rows(dir / "g.csv", ColumnSchema{.market = "sector"}).has_market_column);
}

TEST_CASE("load, write, load is the identity") {
  testing::TempDir dir("panel");
  std::mt19937_64 gen(3);
  const auto p = testing::random_panel(gen, 30);
  write_panel_csv(p, dir / "a.csv");
  const auto q = load_panel(dir / "a.csv");
  REQUIRE(q.size() == p.size());
  for (std::size_t t = 0; t < p.size(); ++t) {
    CHECK(q[t].period == p[t].period);
    CHECK(q[t].hires == p[t].hires);
    CHECK(q[t].seekers == p[t].seekers);
    CHECK(q[t].vacancies == p[t].vacancies);
  }
}

TEST_CASE("log min-max scaling") {
  const MarketPanel p("m", {{0, 1, 1.0, 1}, {1, 1, std::exp(1.0), 2}, {2, 1, std::exp(2.0), 3}});
  const ScaledPanel s(p);
  CHECK(s.points()[0].u == doctest::Approx(0.0));
  CHECK(s.points()[1].u == doctest::Approx(0.5));
  CHECK(s.points()[2].u == doctest::Approx(1.0));
}

TEST_CASE("constant column is degenerate in every mode") {
  const MarketPanel p("m", {{0, 1, 1, 5}, {1, 1, 2, 5}});
  for (auto mode : {ScalingMode::identity, ScalingMode::min_max, ScalingMode::log_min_max}) {
    CHECK(message_of([&] { ScaledPanel(p, mode); }).find("vacancies") != std::string::npos);
  }
}

TEST_CASE("scaling round-trips, stays in the unit interval and is strictly monotone") {
  std::mt19937_64 gen(5);
  const auto p = testing::random_panel(gen, 100);
  for (auto mode : {ScalingMode::min_max, ScalingMode::log_min_max}) {
    const ScaledPanel s(p, mode);
    for (std::size_t t = 0; t < p.size(); ++t) {
      const auto q = s.points()[t];
      CHECK(q.u >= 0.0);
      CHECK(q.u <= 1.0);
      CHECK(q.v >= 0.0);
      CHECK(q.v <= 1.0);
      CHECK(std::abs(s.seeker_map().inverse(q.u) - p[t].seekers) <= 1e-12 * p[t].seekers);
      CHECK(std::abs(s.vacancy_map().inverse(q.v) - p[t].vacancies) <= 1e-12 * p[t].vacancies);
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[t].seekers < p[k].seekers) CHECK(q.u < s.points()[k].u);
      }
    }
  }
}

TEST_CASE("scaling mode names") {
  CHECK(parse_scaling_mode("log-min-max") == ScalingMode::log_min_max);
  CHECK(to_string(ScalingMode::min_max) == "min-max");
  CHECK_THROWS_AS(parse_scaling_mode("zscore"), InputError);
}

TEST_CASE("hires support is sorted and distinct") {
  const MarketPanel p("m", {{0, 3, 1, 1}, {1, 1, 2, 2}, {2, 3, 3, 3}, {3, 2, 4, 4}});
  const ScaledPanel s(p);
  const auto sup = s.hires_support();
  CHECK(std::vector<double>(sup.begin(), sup.end()) == std::vector<double>{1, 2, 3});
  const auto sorted = s.sorted_hires();
  CHECK(std::is_sorted(sorted.begin(), sorted.end()));
  CHECK(sorted.size() == 4);
}

}
