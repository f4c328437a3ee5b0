#include "cortolam/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <tuple>

#include "cortolam/error.hpp"
#include "json.hpp"

namespace cortolam {

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

double agreement(const LabelSet& a, const LabelSet& b) {
  std::size_t common = 0, equal = 0;
  auto ia = a.labels.begin();
  auto ib = b.labels.begin();
  while (ia != a.labels.end() && ib != b.labels.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      ++common;
      if (ia->second == ib->second) ++equal;
      ++ia;
      ++ib;
    }
  }
  if (common == 0)
    throw Error(ErrorKind::Reference, "label sets '" + a.rater_id + "' and '" + b.rater_id + "' share no neuron id");
  return static_cast<double>(equal) / static_cast<double>(common);
}

double agreement_on(const LabelSet& a, const LabelSet& b, std::span<const NeuronId> ids) {
  if (ids.empty()) throw Error(ErrorKind::Reference, "agreement over an empty id set");
  std::size_t equal = 0;
  for (NeuronId id : ids) {
    const auto la = a.find(id);
    const auto lb = b.find(id);
    if (!la) throw Error(ErrorKind::Reference, "neuron " + std::to_string(id) + " not labeled in '" + a.rater_id + "'");
    if (!lb) throw Error(ErrorKind::Reference, "neuron " + std::to_string(id) + " not labeled in '" + b.rater_id + "'");
    if (*la == *lb) ++equal;
  }
  return static_cast<double>(equal) / static_cast<double>(ids.size());
}

PairwiseAgreement pairwise_agreement(std::span<const LabelSet> sets) {
  PairwiseAgreement out;
  const std::size_t n = sets.size();
  out.matrix.assign(n, std::vector<double>(n, 1.0));
  std::vector<double> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    out.sources.push_back(sets[i].rater_id);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = agreement(sets[i], sets[j]);
      out.matrix[i][j] = out.matrix[j][i] = a;
      pairs.push_back(a);
    }
  }
  out.pairs = mean_std(pairs);
  return out;
}

AccuracySummary accuracy_vs_raters(const LabelSet& predictions, std::span<const LabelSet> raters,
                                   std::span<const NeuronId> ids) {
  AccuracySummary out;
  for (const auto& r : raters) {
    out.raters.push_back(r.rater_id);
    out.per_rater.push_back(agreement_on(predictions, r, ids));
  }
  out.summary = mean_std(out.per_rater);
  return out;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& row : counts)
    for (auto c : row) t += c;
  return t;
}

double ConfusionMatrix::accuracy() const {
  const auto t = total();
  if (t == 0) return 0;
  std::int64_t diag = 0;
  for (std::size_t i = 0; i < kNumClasses; ++i) diag += counts[i][i];
  return static_cast<double>(diag) / static_cast<double>(t);
}

std::array<ClassMetrics, kNumClasses> ConfusionMatrix::metrics() const {
  std::array<ClassMetrics, kNumClasses> out{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::int64_t row = 0, col = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      row += counts[c][k];
      col += counts[k][c];
    }
    auto& m = out[c];
    m.support = row;
    const auto tp = static_cast<double>(counts[c][c]);
    m.precision = col > 0 ? tp / static_cast<double>(col) : 0;
    m.recall = row > 0 ? tp / static_cast<double>(row) : 0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0;
  }
  return out;
}

double ConfusionMatrix::cohen_kappa() const {
  const auto t = static_cast<double>(total());
  if (t == 0) return 0;
  double expected = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    double row = 0, col = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      row += static_cast<double>(counts[c][k]);
      col += static_cast<double>(counts[k][c]);
    }
    expected += row * col;
  }
  expected /= t * t;
  if (expected >= 1) return 1;
  return (accuracy() - expected) / (1 - expected);
}

ConfusionMatrix confusion(const LabelSet& reference, const LabelSet& predicted,
                          std::optional<std::span<const NeuronId>> ids) {
  ConfusionMatrix m;
  if (ids) {
    for (NeuronId id : *ids) {
      const auto r = reference.find(id);
      const auto p = predicted.find(id);
      if (!r || !p) throw Error(ErrorKind::Reference, "neuron " + std::to_string(id) + " missing from a label set");
      m.counts[ordinal(*r)][ordinal(*p)]++;
    }
  } else {
    for (const auto& [id, r] : reference.labels)
      if (const auto p = predicted.find(id)) m.counts[ordinal(r)][ordinal(*p)]++;
  }
  return m;
}

std::optional<LayerClass> Composition::plurality() const {
  std::optional<LayerClass> best;
  std::int64_t top = 0;
  bool tie = false;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (counts[c] > top) {
      top = counts[c];
      best = layer_from_ordinal(static_cast<int>(c));
      tie = false;
    } else if (counts[c] == top && top > 0) {
      tie = true;
    }
  }
  if (tie) return std::nullopt;
  return best;
}

namespace {

double neuron_column(const NeuronRecord& n, const std::string& feature) {
  if (feature == "area_um2") return n.area_um2;
  if (feature == "perimeter_um") return n.perimeter_um;
  if (feature == "circularity") return n.circularity;
  if (feature == "roundness") return n.roundness;
  if (feature == "x_um") return n.x_um;
  if (feature == "y_um") return n.y_um;
  if (feature == "gray_mean" && n.gray_mean) return *n.gray_mean;
  if (feature == "gray_median" && n.gray_median) return *n.gray_median;
  if (feature == "gray_mean" || feature == "gray_median")
    throw Error(ErrorKind::Validation, "neuron " + std::to_string(n.id) + " has no " + feature);
  throw Error(ErrorKind::Schema, "unknown neuron column '" + feature + "'");
}

}  // namespace

Composition top_n_composition(std::span<const NeuronRecord> neurons, const LabelSet& labels, std::size_t n,
                              const std::string& feature) {
  std::vector<std::tuple<double, NeuronId, LayerClass>> rows;
  for (const auto& rec : neurons)
    if (const auto l = labels.find(rec.id)) rows.emplace_back(neuron_column(rec, feature), rec.id, *l);
  if (n == 0 || n > rows.size())
    throw Error(ErrorKind::Validation, "top-n composition needs 1 <= n <= " + std::to_string(rows.size()) +
                                           " labeled neurons, got n=" + std::to_string(n));
  auto larger = [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::get<1>(a) < std::get<1>(b);
  };
  std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n), rows.end(), larger);
  Composition out;
  out.feature = feature;
  out.n = n;
  for (std::size_t i = 0; i < n; ++i) out.counts[ordinal(std::get<2>(rows[i]))]++;
  for (std::size_t c = 0; c < kNumClasses; ++c)
    out.percent[c] = 100.0 * static_cast<double>(out.counts[c]) / static_cast<double>(n);
  return out;
}

namespace {

using nlohmann::ordered_json;

ordered_json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

ordered_json confusion_json(const NamedConfusion& nc) {
  ordered_json j;
  j["reference"] = nc.reference;
  j["predicted"] = nc.predicted;
  j["accuracy"] = nc.matrix.accuracy();
  j["cohen_kappa"] = nc.matrix.cohen_kappa();
  j["counts"] = nc.matrix.counts;
  ordered_json per = ordered_json::object();
  const auto metrics = nc.matrix.metrics();
  for (auto c : kAllLayers) {
    const auto& m = metrics[ordinal(c)];
    per[std::string(layer_name(c))] = {
        {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
  }
  j["per_class"] = std::move(per);
  return j;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string report_json(const AgreementReport& r) {
  ordered_json j;
  std::vector<std::string> classes;
  for (auto c : kAllLayers) classes.emplace_back(layer_name(c));
  j["classes"] = classes;
  j["rater_agreement"] = {{"sources", r.raters.sources},
                          {"matrix", r.raters.matrix},
                          {"pairwise", mean_std_json(r.raters.pairs)}};
  j["test_count"] = r.test_count;
  if (r.model_vs_raters) {
    ordered_json per = ordered_json::object();
    for (std::size_t i = 0; i < r.model_vs_raters->raters.size(); ++i)
      per[r.model_vs_raters->raters[i]] = r.model_vs_raters->per_rater[i];
    j["model_vs_raters"] = {{"per_rater", per}, {"summary", mean_std_json(r.model_vs_raters->summary)}};
  }
  if (r.model_vs_truth) j["model_vs_truth"] = *r.model_vs_truth;
  if (r.raters_vs_truth_mean) j["raters_vs_truth_mean"] = *r.raters_vs_truth_mean;
  ordered_json conf = ordered_json::array();
  for (const auto& c : r.confusions) conf.push_back(confusion_json(c));
  j["confusions"] = std::move(conf);
  if (r.composition) {
    const auto& c = *r.composition;
    ordered_json counts = ordered_json::object(), pct = ordered_json::object();
    for (auto l : kAllLayers) {
      counts[std::string(layer_name(l))] = c.counts[ordinal(l)];
      pct[std::string(layer_name(l))] = c.percent[ordinal(l)];
    }
    const auto p = c.plurality();
    j["top_n_composition"] = {{"feature", c.feature},
                              {"n", c.n},
                              {"counts", counts},
                              {"percent", pct},
                              {"plurality", p ? ordered_json(std::string(layer_name(*p))) : ordered_json(nullptr)}};
  }
  return j.dump(2) + "\n";
}

std::string report_text(const AgreementReport& r) {
  std::ostringstream os;
  os << "rater agreement (fraction of neurons with the same layer)\n";
  os << "  " << std::string(8, ' ');
  for (const auto& s : r.raters.sources) os << " " << s << std::string(s.size() < 8 ? 8 - s.size() : 0, ' ');
  os << "\n";
  for (std::size_t i = 0; i < r.raters.sources.size(); ++i) {
    const auto& s = r.raters.sources[i];
    os << "  " << s << std::string(s.size() < 8 ? 8 - s.size() : 0, ' ');
    for (double v : r.raters.matrix[i]) os << " " << fixed(v) << "  ";
    os << "\n";
  }
  os << "  pairwise mean " << fixed(r.raters.pairs.mean) << " +- " << fixed(r.raters.pairs.std) << "\n";
  if (r.model_vs_raters) {
    os << "\nmodel accuracy on " << r.test_count << " held-out neurons\n";
    for (std::size_t i = 0; i < r.model_vs_raters->raters.size(); ++i)
      os << "  vs " << r.model_vs_raters->raters[i] << ": " << fixed(r.model_vs_raters->per_rater[i]) << "\n";
    os << "  mean " << fixed(r.model_vs_raters->summary.mean) << " +- " << fixed(r.model_vs_raters->summary.std)
       << "\n";
  }
  if (r.model_vs_truth) os << "  vs truth: " << fixed(*r.model_vs_truth) << "\n";
  if (r.raters_vs_truth_mean) os << "  raters vs truth (mean): " << fixed(*r.raters_vs_truth_mean) << "\n";
  for (const auto& c : r.confusions) {
    os << "\nconfusion " << c.reference << " (rows) vs " << c.predicted << " (columns), kappa "
       << fixed(c.matrix.cohen_kappa()) << "\n      ";
    for (auto l : kAllLayers) os << std::string(7 - layer_name(l).size(), ' ') << layer_name(l);
    os << "\n";
    for (auto l : kAllLayers) {
      os << "  " << layer_name(l) << std::string(4 - layer_name(l).size(), ' ');
      for (auto v : c.matrix.counts[ordinal(l)]) {
        const auto s = std::to_string(v);
        os << std::string(s.size() < 7 ? 7 - s.size() : 0, ' ') << s;
      }
      os << "\n";
    }
    const auto m = c.matrix.metrics();
    os << "  class  precision  recall  f1\n";
    for (auto l : kAllLayers) {
      const auto& x = m[ordinal(l)];
      os << "  " << layer_name(l) << std::string(7 - layer_name(l).size(), ' ') << fixed(x.precision) << "     "
         << fixed(x.recall) << "  " << fixed(x.f1) << "\n";
    }
  }
  if (r.composition) {
    const auto& c = *r.composition;
    os << "\n" << c.n << " largest neurons by " << c.feature << "\n";
    for (auto l : kAllLayers)
      if (c.counts[ordinal(l)] > 0)
        os << "  " << layer_name(l) << ": " << c.counts[ordinal(l)] << " (" << fixed(c.percent[ordinal(l)], 1)
           << "%)\n";
  }
  return os.str();
}

}  // namespace cortolam
