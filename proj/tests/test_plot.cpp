#include <regex>

#include "cortolam/csv.hpp"
#include "cortolam/error.hpp"
#include "cortolam/plot.hpp"
#include "doctest.h"

using namespace cortolam;

namespace {

NeuronRecord at(NeuronId id, double x, double y) { return {id, x, y, 100, 40, 0.8, 0.8, std::nullopt, std::nullopt}; }

std::size_t count_of(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

// Every opening tag closes in order; self-closing tags are skipped.
bool balanced(const std::string& svg) {
  std::vector<std::string> stack;
  const std::regex tag(R"(<(/?)([a-zA-Z][\w-]*)[^>]*?(/?)>)");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), tag); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    if (m[3].length()) continue;
    if (m[1].length()) {
      if (stack.empty() || stack.back() != m[2]) return false;
      stack.pop_back();
    } else {
      stack.push_back(m[2]);
    }
  }
  return stack.empty();
}

}  // namespace

TEST_CASE("class panel") {
  std::vector<NeuronRecord> ns{at(1, 0, 0), at(2, 100, 50), at(3, 50, 200)};
  std::vector<PlotPanel> panels{{"layers", std::vector<LayerClass>{LayerClass::I, LayerClass::II, LayerClass::I}}};
  const auto svg = render_svg(ns, panels);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(balanced(svg));
  CHECK(count_of(svg, "<circle") == 3);
  CHECK(count_of(svg, "class=\"legend-entry\"") == 2);
  CHECK(count_of(svg, std::string(layer_color(LayerClass::I))) == 3);  // two points plus the legend swatch
  CHECK(svg.find(">layers<") != std::string::npos);
}

TEST_CASE("panels side by side") {
  std::vector<NeuronRecord> ns{at(1, 0, 0), at(2, 10, 10)};
  std::vector<PlotPanel> panels{{"a", std::vector<LayerClass>{LayerClass::WM, LayerClass::WM}},
                                {"b", std::vector<double>{0.0, 1.0}},
                                {"c & d", std::vector<LayerClass>{LayerClass::V, LayerClass::VI}}};
  const auto svg = render_svg(ns, panels);
  CHECK(balanced(svg));
  CHECK(count_of(svg, "class=\"panel\"") == 3);
  CHECK(count_of(svg, "<circle") == 6);
  CHECK(count_of(svg, "<linearGradient") == 1);
  CHECK(svg.find("c &amp; d") != std::string::npos);
  CHECK(svg.find(colormap(0.0)) != std::string::npos);
  CHECK(svg.find(colormap(1.0)) != std::string::npos);
}

TEST_CASE("colormap endpoints and clamping") {
  CHECK(colormap(-1) == colormap(0));
  CHECK(colormap(2) == colormap(1));
  CHECK(colormap(0) != colormap(1));
  CHECK(std::regex_match(colormap(0.37), std::regex("#[0-9a-f]{6}")));
}

TEST_CASE("panel size must match") {
  std::vector<NeuronRecord> ns{at(1, 0, 0), at(2, 10, 10)};
  std::vector<PlotPanel> panels{{"a", std::vector<double>{1.0}}};
  try {
    render_svg(ns, panels);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
  }
}

TEST_CASE("classes from csv") {
  std::vector<NeuronRecord> ns{at(1, 0, 0), at(2, 10, 10)};
  auto doc = CsvDocument::parse("id,layer\n2,VI\n1,III\n");
  auto c = classes_for(ns, doc);
  CHECK(c == std::vector<LayerClass>{LayerClass::III, LayerClass::VI});

  auto bad = CsvDocument::parse("id,layer\n1,III\n2,VII\n");
  try {
    classes_for(ns, bad);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
  }
  auto missing = CsvDocument::parse("id,layer\n1,III\n");
  try {
    classes_for(ns, missing);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Reference);
  }
  auto vals = CsvDocument::parse("id,depth_um\n1,3.5\n2,7\n");
  CHECK(values_for(ns, vals, "depth_um") == std::vector<double>{3.5, 7});
}
