#include "cortolam/error.hpp"
#include "cortolam/eval.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cortolam;

namespace {

LabelSet labels(const std::string& rater, const std::vector<std::pair<NeuronId, LayerClass>>& v) {
  LabelSet l;
  l.rater_id = rater;
  for (auto [id, c] : v) l.labels[id] = c;
  return l;
}

LabelSet uniform_labels(const std::string& rater, NeuronId n, LayerClass c) {
  LabelSet l;
  l.rater_id = rater;
  for (NeuronId i = 1; i <= n; ++i) l.labels[i] = c;
  return l;
}

NeuronRecord neuron(NeuronId id, double area) { return {id, 0, 0, area, 10, 0.5, 0.5, std::nullopt, std::nullopt}; }

}  // namespace

TEST_CASE("agreement") {
  auto a = uniform_labels("a", 10, LayerClass::III);
  CHECK(agreement(a, a) == 1.0);
  auto b = uniform_labels("b", 10, LayerClass::IV);
  CHECK(agreement(a, b) == 0.0);
  auto h = a;
  for (NeuronId i = 1; i <= 5; ++i) h.labels[i] = LayerClass::V;
  CHECK(agreement(a, h) == 0.5);
  CHECK(agreement(h, a) == 0.5);

  // only the common ids count
  auto part = labels("p", {{1, LayerClass::III}, {2, LayerClass::I}, {99, LayerClass::I}});
  CHECK(agreement(a, part) == 0.5);
  auto far = labels("f", {{500, LayerClass::I}});
  CHECK_THROWS_AS(agreement(a, far), Error);

  std::vector<NeuronId> ids{1, 2, 3, 6};
  CHECK(agreement_on(a, h, ids) == 0.25);
  std::vector<NeuronId> missing{1, 77};
  CHECK_THROWS_AS(agreement_on(a, h, missing), Error);
}

TEST_CASE("mean and population std") {
  std::vector<double> v{0.8, 0.9, 1.0};
  auto m = mean_std(v);
  CHECK(m.mean == doctest::Approx(0.9));
  CHECK(m.std == doctest::Approx(std::sqrt(0.02 / 3)));
  CHECK(m.std == doctest::Approx(0.0816).epsilon(1e-3));
}

TEST_CASE("pairwise matrix") {
  std::vector<LabelSet> sets{uniform_labels("a", 10, LayerClass::I), uniform_labels("b", 10, LayerClass::I),
                             uniform_labels("c", 10, LayerClass::II)};
  auto pw = pairwise_agreement(sets);
  CHECK(pw.sources == std::vector<std::string>{"a", "b", "c"});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(pw.matrix[i][i] == 1.0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(pw.matrix[i][j] == pw.matrix[j][i]);
  }
  CHECK(pw.matrix[0][1] == 1.0);
  CHECK(pw.matrix[0][2] == 0.0);
  CHECK(pw.pairs.mean == doctest::Approx(1.0 / 3));
}

TEST_CASE("accuracy against raters") {
  std::vector<NeuronId> ids;
  for (NeuronId i = 1; i <= 10; ++i) ids.push_back(i);
  auto truth = uniform_labels("t", 10, LayerClass::VI);
  SUBCASE("perfect predictor") {
    std::vector<LabelSet> raters{truth, truth, truth};
    auto acc = accuracy_vs_raters(truth, raters, ids);
    CHECK(acc.summary.mean == 1.0);
    CHECK(acc.summary.std == 0.0);
  }
  SUBCASE("0.8, 0.9 and 1.0") {
    std::vector<LabelSet> raters{truth, truth, truth};
    raters[0].labels[1] = raters[0].labels[2] = LayerClass::V;
    raters[1].labels[3] = LayerClass::V;
    auto acc = accuracy_vs_raters(truth, raters, ids);
    CHECK(acc.per_rater == std::vector<double>{0.8, 0.9, 1.0});
    CHECK(acc.summary.mean == doctest::Approx(0.9));
    CHECK(acc.summary.std == doctest::Approx(0.0816).epsilon(1e-3));
  }
}

TEST_CASE("confusion matrix") {
  // 5 I and 5 II; one of each predicted as the other class, plus one miss
  auto ref = labels("ref", {{1, LayerClass::I},
                            {2, LayerClass::I},
                            {3, LayerClass::I},
                            {4, LayerClass::I},
                            {5, LayerClass::I},
                            {6, LayerClass::II},
                            {7, LayerClass::II},
                            {8, LayerClass::II},
                            {9, LayerClass::II},
                            {10, LayerClass::II}});
  auto pred = ref;
  pred.labels[1] = LayerClass::II;
  pred.labels[6] = LayerClass::I;
  auto cm = confusion(ref, pred);
  CHECK(cm.total() == 10);
  CHECK(cm.accuracy() == doctest::Approx(0.8));
  CHECK(cm.counts[0][0] == 4);
  CHECK(cm.counts[0][1] == 1);
  CHECK(cm.counts[1][0] == 1);
  // po 0.8, pe 0.5
  CHECK(cm.cohen_kappa() == doctest::Approx(0.6));
  const auto m = cm.metrics();
  CHECK(m[0].support == 5);
  CHECK(m[0].precision == doctest::Approx(0.8));
  CHECK(m[0].recall == doctest::Approx(0.8));
  CHECK(m[0].f1 == doctest::Approx(0.8));
  CHECK(m[3].support == 0);
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    std::int64_t row = 0;
    for (auto v : cm.counts[r]) row += v;
    CHECK(row == m[r].support);
  }
  std::int64_t trace = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) trace += cm.counts[c][c];
  CHECK(cm.accuracy() == static_cast<double>(trace) / static_cast<double>(cm.total()));

  std::vector<NeuronId> ids{1, 2};
  CHECK(confusion(ref, pred, ids).total() == 2);
}

TEST_CASE("top-n composition") {
  std::vector<NeuronRecord> ns;
  for (NeuronId i = 1; i <= 10; ++i) ns.push_back(neuron(i, static_cast<double>(i)));
  ns.push_back(neuron(11, 10.0));  // ties with id 10
  auto all3 = uniform_labels("t", 11, LayerClass::III);
  SUBCASE("single class") {
    auto c = top_n_composition(ns, all3, 5);
    CHECK(c.counts[ordinal(LayerClass::III)] == 5);
    CHECK(c.percent[ordinal(LayerClass::III)] == 100.0);
    CHECK(*c.plurality() == LayerClass::III);
    CHECK(c.feature == "area_um2");
  }
  SUBCASE("largest first, ties by lower id") {
    auto l = all3;
    l.labels[10] = LayerClass::V;
    l.labels[11] = LayerClass::VI;
    auto c = top_n_composition(ns, l, 1);
    CHECK(c.counts[ordinal(LayerClass::V)] == 1);
    auto c3 = top_n_composition(ns, l, 3);
    CHECK(c3.counts[ordinal(LayerClass::III)] == 1);
    CHECK(c3.counts[ordinal(LayerClass::V)] == 1);
    CHECK(c3.counts[ordinal(LayerClass::VI)] == 1);
    CHECK_FALSE(c3.plurality().has_value());
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(top_n_composition(ns, all3, 12), Error);
    CHECK_THROWS_AS(top_n_composition(ns, all3, 0), Error);
    CHECK_THROWS_AS(top_n_composition(ns, all3, 3, "volume"), Error);
  }
  SUBCASE("other columns") {
    auto c = top_n_composition(ns, all3, 2, "perimeter_um");
    CHECK(c.n == 2);
  }
}

TEST_CASE("report rendering") {
  AgreementReport r;
  std::vector<LabelSet> sets{uniform_labels("r1", 4, LayerClass::I), uniform_labels("r2", 4, LayerClass::I)};
  r.raters = pairwise_agreement(sets);
  std::vector<NeuronId> ids{1, 2, 3, 4};
  r.model_vs_raters = accuracy_vs_raters(sets[0], sets, ids);
  r.model_vs_truth = 0.75;
  r.test_count = 4;
  r.confusions.push_back({"r1", "model", confusion(sets[0], sets[1])});
  auto j = nlohmann::json::parse(report_json(r));
  CHECK(j.contains("rater_agreement"));
  CHECK(j["test_count"] == 4);
  const auto text = report_text(r);
  CHECK(text.find("0.7500") != std::string::npos);
}
