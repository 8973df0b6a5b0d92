#include <cmath>
#include <limits>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "doctest.h"
#include "matchfn/error.hpp"
#include "matchfn/svg.hpp"

using namespace matchfn;
namespace pt = boost::property_tree;

namespace {

pt::ptree parse_xml(const std::string& text) {
  std::istringstream in(text);
  pt::ptree tree;
  pt::read_xml(in, tree);
  return tree;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto i = text.find(needle); i != std::string::npos; i = text.find(needle, i + 1)) ++n;
  return n;
}

svg::LineChart sample() {
  svg::LineChart c;
  c.title = "Efficiency <A> & friends";
  c.y_label = "A";
  c.x_labels = {"2014-01", "2014-02", "2014-03", "2014-04"};
  c.series = {{"A", {100.0, 104.5, 98.25, 101.0}, "#1f77b4"}};
  c.reference = 100.0;
  c.marker = svg::Marker{0, 100.0, "base = 100"};
  return c;
}

}  // namespace

TEST_SUITE("svg") {

TEST_CASE("output is well-formed XML with an svg root") {
  const auto text = svg::render(sample());
  const auto tree = parse_xml(text);
  CHECK(tree.count("svg") == 1);
  CHECK(tree.get<std::string>("svg.<xmlattr>.xmlns") == "http://www.w3.org/2000/svg");
}

TEST_CASE("title is escaped") {
  const auto text = svg::render(sample());
  CHECK(text.find("Efficiency &lt;A&gt; &amp; friends") != std::string::npos);
  CHECK(svg::escape("\"a\" & 'b'") == "&quot;a&quot; &amp; &apos;b&apos;");
}

TEST_CASE("plotted values are repeated in the data comment") {
  const auto text = svg::render(sample());
  const auto start = text.find("<!-- data\n");
  const auto end = text.find("-->", start);
  REQUIRE(start != std::string::npos);
  const auto body = text.substr(start + 10, end - start - 10);
  CHECK(body == "x,A\n2014-01,100\n2014-02,104.5\n2014-03,98.25\n2014-04,101\n");
}

TEST_CASE("reference line and base marker") {
  const auto text = svg::render(sample());
  CHECK(count(text, "class=\"reference\"") == 1);
  CHECK(count(text, "class=\"marker\"") == 1);
  CHECK(text.find("base = 100") != std::string::npos);
}

TEST_CASE("NaN values split a series into separate polylines") {
  auto c = sample();
  c.series[0].values = {1.0, std::numeric_limits<double>::quiet_NaN(), 2.0, 3.0};
  c.reference.reset();
  c.marker.reset();
  const auto text = svg::render(c);
  CHECK(count(text, "<polyline") == 2);
  CHECK(text.find("2014-02,nan") != std::string::npos);
  parse_xml(text);
}

TEST_CASE("series labels containing double dashes keep the comment valid") {
  auto c = sample();
  c.series[0].label = "a--b";
  const auto text = svg::render(c);
  parse_xml(text);
}

TEST_CASE("constant and empty series still render") {
  auto c = sample();
  c.series[0].values = {5.0, 5.0, 5.0, 5.0};
  c.reference.reset();
  parse_xml(svg::render(c));
  c.series.clear();
  parse_xml(svg::render(c));
}

TEST_CASE("series length must match the x axis") {
  auto c = sample();
  c.series[0].values.pop_back();
  CHECK_THROWS_AS(svg::render(c), InputError);
}

}
