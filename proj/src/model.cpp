#include "cortolam/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <unordered_set>

#include "json.hpp"

#include "cortolam/error.hpp"
#include "cortolam/parallel.hpp"

namespace cortolam {

void TrainConfig::validate() const {
  if (rounds == 0) throw Error(ErrorKind::Config, "rounds must be positive");
  if (max_depth == 0) throw Error(ErrorKind::Config, "max_depth must be positive");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate))
    throw Error(ErrorKind::Config, "learning_rate must be positive");
  if (!(l2_leaf_reg > 0) || !std::isfinite(l2_leaf_reg))
    throw Error(ErrorKind::Config, "l2_leaf_reg must be positive");
  if (min_samples_leaf == 0) throw Error(ErrorKind::Config, "min_samples_leaf must be positive");
}

std::size_t Tree::leaf_index(std::span<const double> row) const {
  std::size_t n = 0;
  while (feature[n] >= 0) n = row[static_cast<std::size_t>(feature[n])] <= threshold[n] ? left[n] : right[n];
  return n;
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> d(size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!is_leaf(i)) d[left[i]] = d[right[i]] = d[i] + 1;
  }
  return deepest;
}

void TreeEnsembleModel::check_schema(std::span<const std::string> other) const {
  if (other.size() != schema.size() || !std::equal(other.begin(), other.end(), schema.begin()))
    throw Error(ErrorKind::Schema, "feature schema does not match the model (model has " +
                                       std::to_string(schema.size()) + " columns, input has " +
                                       std::to_string(other.size()) + ")");
}

ClassVector TreeEnsembleModel::margins(std::span<const double> row) const {
  if (row.size() != schema.size())
    throw Error(ErrorKind::Schema, "row has " + std::to_string(row.size()) + " values, model expects " +
                                       std::to_string(schema.size()));
  ClassVector m = base_scores;
  for (const auto& t : trees) m[t.target_class] += t.predict(row);
  return m;
}

ClassVector softmax(const ClassVector& margins) {
  const double mx = *std::max_element(margins.begin(), margins.end());
  ClassVector p{};
  double sum = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) sum += p[c] = std::exp(margins[c] - mx);
  for (auto& v : p) v /= sum;
  return p;
}

ClassVector TreeEnsembleModel::predict_proba(std::span<const double> row) const { return softmax(margins(row)); }

void RaterEnsemble::validate() const {
  if (members.empty()) throw Error(ErrorKind::Model, "ensemble has no member models");
  for (const auto& m : members) members.front().check_schema(m.schema);
}

const std::vector<std::string>& RaterEnsemble::schema() const {
  validate();
  return members.front().schema;
}

TrainingSet make_training_set(const FeatureTable& features, const LabelSet& labels,
                              std::optional<std::span<const NeuronId>> subset) {
  std::unordered_set<NeuronId> keep;
  if (subset) keep.insert(subset->begin(), subset->end());
  TrainingSet ts;
  ts.schema = features.schema;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto id = features.ids[i];
    if (subset && !keep.count(id)) continue;
    auto layer = labels.find(id);
    if (!layer) continue;
    const auto row = features.row(i);
    ts.values.insert(ts.values.end(), row.begin(), row.end());
    ts.labels.push_back(ordinal(*layer));
  }
  return ts;
}

namespace {

double row_cross_entropy(const ClassVector& m, int label) {
  const double mx = *std::max_element(m.begin(), m.end());
  double sum = 0;
  for (double v : m) sum += std::exp(v - mx);
  return std::log(sum) + mx - m[label];
}

// Column-sorted view of the training matrix shared by all trees.
struct SortedColumns {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<double> column;            // column-major values
  std::vector<double> sorted_value;      // per feature, ascending
  std::vector<std::uint32_t> sorted_row; // matching row ids, ties by row

  SortedColumns(const TrainingSet& data) : n(data.rows()), m(data.cols()) {
    column.resize(n * m);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t f = 0; f < m; ++f) column[f * n + r] = data.values[r * m + f];
    sorted_value.resize(n * m);
    sorted_row.resize(n * m);
    std::vector<std::uint32_t> idx(n);
    for (std::size_t f = 0; f < m; ++f) {
      const double* col = column.data() + f * n;
      std::iota(idx.begin(), idx.end(), 0u);
      std::sort(idx.begin(), idx.end(), [col](std::uint32_t a, std::uint32_t b) {
        return col[a] != col[b] ? col[a] < col[b] : a < b;
      });
      for (std::size_t i = 0; i < n; ++i) {
        sorted_row[f * n + i] = idx[i];
        sorted_value[f * n + i] = col[idx[i]];
      }
    }
  }
};

struct SplitCandidate {
  double gain = 0;
  int feature = -1;
  double threshold = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const SortedColumns& cols, const TrainConfig& cfg) : cols_(cols), cfg_(cfg) {}

  /// Fits one tree to gradients g and hessians h; writes each row's leaf
  /// value into `row_output`.
  Tree build(int target_class, std::span<const double> g, std::span<const double> h, std::span<double> row_output) {
    const std::size_t n = cols_.n;
    const double lambda = cfg_.l2_leaf_reg;
    const auto min_leaf = static_cast<std::int64_t>(cfg_.min_samples_leaf);

    Tree tree;
    tree.target_class = target_class;
    std::vector<NodeStats> stats;
    auto add_node = [&](const NodeStats& s) {
      tree.feature.push_back(-1);
      tree.threshold.push_back(0.0);
      tree.left.push_back(-1);
      tree.right.push_back(-1);
      tree.leaf_value.push_back(0.0);
      tree.cover.push_back(static_cast<double>(s.count));
      stats.push_back(s);
      return static_cast<int>(tree.feature.size() - 1);
    };

    NodeStats root;
    for (std::size_t r = 0; r < n; ++r) {
      root.g += g[r];
      root.h += h[r];
    }
    root.count = static_cast<std::int64_t>(n);
    add_node(root);

    node_of_.assign(n, 0);
    std::vector<int> level{0};
    for (std::size_t depth = 0; depth < cfg_.max_depth && !level.empty(); ++depth) {
      // Slots for nodes at this level that can still be split.
      std::vector<int> active;
      std::vector<int> slot_of_node(tree.size(), -1);
      for (int node : level)
        if (stats[node].count >= 2 * min_leaf) {
          slot_of_node[node] = static_cast<int>(active.size());
          active.push_back(node);
        }
      if (active.empty()) break;
      rows_.resize(n);
      for (std::size_t r = 0; r < n; ++r) rows_[r] = {g[r], h[r], slot_of_node[node_of_[r]]};

      // best[s].gain holds the winning children score; a split must beat the parent.
      std::vector<SplitCandidate> best(active.size());
      std::vector<ScanState> state(active.size());
      std::vector<double> parent_score(active.size());
      std::vector<NodeStats> totals(active.size());
      for (std::size_t s = 0; s < active.size(); ++s) {
        totals[s] = stats[active[s]];
        parent_score[s] = totals[s].g * totals[s].g / (totals[s].h + lambda);
        best[s].gain = parent_score[s];
      }

      for (std::size_t f = 0; f < cols_.m; ++f) {
        for (auto& st : state) st = ScanState{};
        const double* vals = cols_.sorted_value.data() + f * n;
        const std::uint32_t* rows = cols_.sorted_row.data() + f * n;
        for (std::size_t i = 0; i < n; ++i) {
          const RowState& rs = rows_[rows[i]];
          const int s = rs.slot;
          if (s < 0) continue;
          ScanState& st = state[s];
          const double v = vals[i];
          const NodeStats& ns = totals[s];
          if (st.count >= min_leaf && v != st.last && ns.count - st.count >= min_leaf) {
            // Score GL^2/(HL+l) + GR^2/(HR+l) compared without dividing.
            const double gr = ns.g - st.g;
            const double dl = st.h + lambda;
            const double dr = ns.h - st.h + lambda;
            const double num = st.g * st.g * dr + gr * gr * dl;
            // Strict comparison: lower feature index, then lower threshold, wins ties.
            if (num > best[s].gain * (dl * dr)) best[s] = {num / (dl * dr), static_cast<int>(f), st.last};
          }
          st.g += rs.g;
          st.h += rs.h;
          st.count += 1;
          st.last = v;
        }
      }

      std::vector<int> next_level;
      std::vector<int> left_of(tree.size(), -1);
      for (std::size_t s = 0; s < active.size(); ++s) {
        if (best[s].feature < 0) continue;
        const int node = active[s];
        tree.feature[node] = best[s].feature;
        tree.threshold[node] = best[s].threshold;
        const int l = add_node({});
        const int rnode = add_node({});
        tree.left[node] = l;
        tree.right[node] = rnode;
        left_of.resize(tree.size(), -1);
        left_of[node] = l;
        next_level.push_back(l);
        next_level.push_back(rnode);
      }
      if (next_level.empty()) break;
      for (std::size_t r = 0; r < n; ++r) {
        const int node = node_of_[r];
        if (node >= static_cast<int>(left_of.size()) || left_of[node] < 0) continue;
        const double x = cols_.column[static_cast<std::size_t>(tree.feature[node]) * n + r];
        const int child = x <= tree.threshold[node] ? tree.left[node] : tree.right[node];
        node_of_[r] = child;
        auto& cs = stats[child];
        cs.g += g[r];
        cs.h += h[r];
        cs.count += 1;
      }
      for (int child : next_level) tree.cover[child] = static_cast<double>(stats[child].count);
      level = std::move(next_level);
    }

    for (std::size_t node = 0; node < tree.size(); ++node)
      if (tree.is_leaf(node))
        tree.leaf_value[node] = -cfg_.learning_rate * stats[node].g / (stats[node].h + lambda);
    for (std::size_t r = 0; r < n; ++r) row_output[r] = tree.leaf_value[node_of_[r]];
    return tree;
  }

 private:
  struct NodeStats {
    double g = 0;
    double h = 0;
    std::int64_t count = 0;
  };
  struct ScanState {
    double g = 0;
    double h = 0;
    std::int64_t count = 0;
    double last = 0;
  };

  const SortedColumns& cols_;
  const TrainConfig& cfg_;
  std::vector<int> node_of_;
  struct RowState {
    double g;
    double h;
    int slot;
  };
  std::vector<RowState> rows_;
};

}  // namespace

TreeEnsembleModel train(const TrainingSet& data, const TrainConfig& cfg, const std::string& rater_id) {
  cfg.validate();
  const std::size_t n = data.rows();
  const std::size_t m = data.cols();
  if (n == 0) throw Error(ErrorKind::Degenerate, "no labeled training rows");
  if (data.values.size() != n * m) throw Error(ErrorKind::Schema, "training matrix has the wrong size");
  for (double v : data.values)
    if (!std::isfinite(v))
      throw Error(ErrorKind::Validation, "training features contain NaN or infinity; impute before training");
  std::array<std::size_t, kNumClasses> class_count{};
  for (int y : data.labels) {
    if (y < 0 || y >= static_cast<int>(kNumClasses)) throw Error(ErrorKind::Validation, "label out of range");
    class_count[y]++;
  }
  if (std::count_if(class_count.begin(), class_count.end(), [](auto c) { return c > 0; }) < 2)
    throw Error(ErrorKind::Degenerate, "training labels contain a single class");

  TreeEnsembleModel model;
  model.rater_id = rater_id;
  model.schema = data.schema;
  model.config = cfg;
  model.base_scores.fill(0.0);

  const SortedColumns cols(data);
  std::vector<ClassVector> score(n, model.base_scores);
  auto mean_loss = [&] {
    double s = 0;
    for (std::size_t r = 0; r < n; ++r) s += row_cross_entropy(score[r], data.labels[r]);
    return s / static_cast<double>(n);
  };
  model.train_loss.push_back(mean_loss());

  std::vector<double> grad(kNumClasses * n), hess(kNumClasses * n), out(kNumClasses * n);
  std::vector<TreeBuilder> builders;
  builders.reserve(kNumClasses);
  for (std::size_t c = 0; c < kNumClasses; ++c) builders.emplace_back(cols, cfg);

  model.trees.reserve(cfg.rounds * kNumClasses);
  std::vector<Tree> round_trees(kNumClasses);
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    for (std::size_t r = 0; r < n; ++r) {
      const auto p = softmax(score[r]);
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double y = data.labels[r] == static_cast<int>(c) ? 1.0 : 0.0;
        grad[c * n + r] = p[c] - y;
        hess[c * n + r] = std::max(p[c] * (1.0 - p[c]), 1e-16);
      }
    }
    parallel_for(kNumClasses, [&](std::size_t c) {
      round_trees[c] = builders[c].build(static_cast<int>(c), std::span(grad).subspan(c * n, n),
                                         std::span(hess).subspan(c * n, n), std::span(out).subspan(c * n, n));
    });
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      for (std::size_t r = 0; r < n; ++r) score[r][c] += out[c * n + r];
      model.trees.push_back(std::move(round_trees[c]));
    }
    model.train_loss.push_back(mean_loss());
  }
  return model;
}

TreeEnsembleModel train(const FeatureTable& features, const LabelSet& labels, const TrainConfig& cfg,
                        std::optional<std::span<const NeuronId>> subset) {
  return train(make_training_set(features, labels, subset), cfg, labels.rater_id);
}

double cross_entropy(const TreeEnsembleModel& model, const TrainingSet& data) {
  model.check_schema(data.schema);
  double s = 0;
  for (std::size_t r = 0; r < data.rows(); ++r)
    s += row_cross_entropy(model.margins(std::span(data.values).subspan(r * data.cols(), data.cols())),
                           data.labels[r]);
  return s / static_cast<double>(data.rows());
}

EnsemblePrediction ensemble_predict(const RaterEnsemble& ensemble, std::span<const double> row) {
  ensemble.validate();
  EnsemblePrediction out;
  out.summed.fill(0.0);
  for (const auto& m : ensemble.members) {
    const auto p = m.predict_proba(row);
    for (std::size_t c = 0; c < kNumClasses; ++c) out.summed[c] += p[c];
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c)
    if (out.summed[c] > out.summed[best]) best = c;
  out.layer = layer_from_ordinal(static_cast<int>(best));
  return out;
}

TrainTestSplit split_train_test(const std::vector<std::pair<NeuronId, LayerClass>>& labeled, double fraction,
                                std::uint64_t seed) {
  if (labeled.size() < 4) throw Error(ErrorKind::Degenerate, "need at least 4 labeled neurons to split");
  if (!(fraction > 0 && fraction < 1)) throw Error(ErrorKind::Config, "train fraction must lie in (0,1)");

  TrainTestSplit out;
  // Strata: one per class with >= 2 members, plus one pool for the rest.
  std::map<int, std::vector<NeuronId>> by_class;
  for (const auto& [id, layer] : labeled) by_class[ordinal(layer)].push_back(id);
  std::vector<std::vector<NeuronId>> strata;
  std::vector<NeuronId> pool;
  for (auto& [cls, ids] : by_class) {
    if (ids.size() < 2) {
      out.warnings.push_back("class " + std::string(layer_name(layer_from_ordinal(cls))) + " has " +
                             std::to_string(ids.size()) + " member(s); split unstratified");
      pool.insert(pool.end(), ids.begin(), ids.end());
    } else {
      strata.push_back(std::move(ids));
    }
  }
  if (!pool.empty()) strata.push_back(std::move(pool));

  std::mt19937_64 rng(seed);
  for (auto& s : strata) {
    std::sort(s.begin(), s.end());
    for (std::size_t i = s.size(); i > 1; --i) std::swap(s[i - 1], s[rng() % i]);
  }

  const auto total = labeled.size();
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  std::vector<std::size_t> take(strata.size());
  std::vector<std::pair<double, std::size_t>> remainder;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < strata.size(); ++i) {
    const double exact = fraction * static_cast<double>(strata[i].size());
    take[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += take[i];
    remainder.push_back({exact - static_cast<double>(take[i]), i});
  }
  std::stable_sort(remainder.begin(), remainder.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < target && j < remainder.size(); ++j) {
    const auto i = remainder[j].second;
    if (take[i] < strata[i].size()) {
      take[i]++;
      assigned++;
    }
  }
  for (std::size_t i = 0; i < strata.size(); ++i) {
    out.train.insert(out.train.end(), strata[i].begin(), strata[i].begin() + static_cast<long>(take[i]));
    out.test.insert(out.test.end(), strata[i].begin() + static_cast<long>(take[i]), strata[i].end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// ---- serialization ----

namespace {

using nlohmann::json;

constexpr const char* kModelFormat = "cortolam.tree_ensemble";
constexpr const char* kEnsembleFormat = "cortolam.rater_ensemble";

json config_json(const TrainConfig& c) {
  return {{"rounds", c.rounds},
          {"max_depth", c.max_depth},
          {"learning_rate", c.learning_rate},
          {"l2_leaf_reg", c.l2_leaf_reg},
          {"min_samples_leaf", c.min_samples_leaf},
          {"seed", c.seed}};
}

json model_json(const TreeEnsembleModel& m) {
  json j;
  j["format"] = kModelFormat;
  j["version"] = kModelFormatVersion;
  j["rater"] = m.rater_id;
  j["schema"] = m.schema;
  std::vector<std::string> classes;
  for (auto c : kAllLayers) classes.emplace_back(layer_name(c));
  j["classes"] = classes;
  j["base_scores"] = m.base_scores;
  j["config"] = config_json(m.config);
  j["train_loss"] = m.train_loss;
  json trees = json::array();
  for (const auto& t : m.trees)
    trees.push_back({{"class", t.target_class},
                     {"feature_idx", t.feature},
                     {"threshold", t.threshold},
                     {"left", t.left},
                     {"right", t.right},
                     {"leaf_values", t.leaf_value},
                     {"cover", t.cover}});
  j["trees"] = std::move(trees);
  return j;
}

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorKind::Model, "malformed model file: " + what); }

TreeEnsembleModel model_from(const json& j) {
  if (!j.is_object() || j.value("format", "") != kModelFormat) malformed("not a tree ensemble document");
  if (!j.contains("version") || !j["version"].is_number_integer()) malformed("missing version");
  if (j["version"].get<int>() != kModelFormatVersion)
    throw Error(ErrorKind::Model, "model format version mismatch: file has " + j["version"].dump() +
                                      ", expected " + std::to_string(kModelFormatVersion));
  TreeEnsembleModel m;
  m.rater_id = j.at("rater").get<std::string>();
  m.schema = j.at("schema").get<std::vector<std::string>>();
  const auto classes = j.at("classes").get<std::vector<std::string>>();
  if (classes.size() != kNumClasses) malformed("expected 7 classes");
  for (std::size_t c = 0; c < kNumClasses; ++c)
    if (classes[c] != layer_name(kAllLayers[c])) malformed("unexpected class list");
  m.base_scores = j.at("base_scores").get<ClassVector>();
  const auto& c = j.at("config");
  m.config.rounds = c.at("rounds").get<std::size_t>();
  m.config.max_depth = c.at("max_depth").get<std::size_t>();
  m.config.learning_rate = c.at("learning_rate").get<double>();
  m.config.l2_leaf_reg = c.at("l2_leaf_reg").get<double>();
  m.config.min_samples_leaf = c.at("min_samples_leaf").get<std::size_t>();
  m.config.seed = c.at("seed").get<std::uint64_t>();
  m.train_loss = j.at("train_loss").get<std::vector<double>>();
  for (const auto& tj : j.at("trees")) {
    Tree t;
    t.target_class = tj.at("class").get<int>();
    t.feature = tj.at("feature_idx").get<std::vector<int>>();
    t.threshold = tj.at("threshold").get<std::vector<double>>();
    t.left = tj.at("left").get<std::vector<int>>();
    t.right = tj.at("right").get<std::vector<int>>();
    t.leaf_value = tj.at("leaf_values").get<std::vector<double>>();
    t.cover = tj.at("cover").get<std::vector<double>>();
    const auto n = t.feature.size();
    if (n == 0 || t.threshold.size() != n || t.left.size() != n || t.right.size() != n ||
        t.leaf_value.size() != n || t.cover.size() != n)
      malformed("tree arrays have inconsistent lengths");
    if (t.target_class < 0 || t.target_class >= static_cast<int>(kNumClasses)) malformed("tree class out of range");
    for (std::size_t i = 0; i < n; ++i) {
      if (t.feature[i] < 0) continue;
      if (t.feature[i] >= static_cast<int>(m.schema.size())) malformed("feature index outside schema");
      if (!std::isfinite(t.threshold[i])) malformed("non-finite threshold");
      if (t.left[i] <= static_cast<int>(i) || t.right[i] <= static_cast<int>(i) || t.left[i] >= static_cast<int>(n) ||
          t.right[i] >= static_cast<int>(n))
        malformed("child index out of order");
    }
    m.trees.push_back(std::move(t));
  }
  return m;
}

json parse_document(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    malformed(e.what());
  }
}

}  // namespace

std::string model_to_json(const TreeEnsembleModel& model) { return model_json(model).dump() + "\n"; }

TreeEnsembleModel model_from_json(std::string_view text) {
  try {
    return model_from(parse_document(text));
  } catch (const json::exception& e) {
    malformed(e.what());
  }
}

void save_model(const TreeEnsembleModel& model, const std::filesystem::path& path) {
  write_text(model_to_json(model), path);
}

TreeEnsembleModel load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::NotFound, "model not found: '" + path.string() + "'");
  return model_from_json(read_text(path));
}

std::string ensemble_to_json(const RaterEnsemble& ensemble) {
  json j;
  j["format"] = kEnsembleFormat;
  j["version"] = kModelFormatVersion;
  json members = json::array();
  for (const auto& m : ensemble.members) members.push_back(model_json(m));
  j["members"] = std::move(members);
  return j.dump() + "\n";
}

RaterEnsemble ensemble_from_json(std::string_view text) {
  RaterEnsemble e;
  try {
    const auto j = parse_document(text);
    if (!j.is_object() || j.value("format", "") != kEnsembleFormat) malformed("not a rater ensemble document");
    if (j.value("version", -1) != kModelFormatVersion)
      throw Error(ErrorKind::Model, "ensemble format version mismatch");
    for (const auto& mj : j.at("members")) e.members.push_back(model_from(mj));
  } catch (const json::exception& ex) {
    malformed(ex.what());
  }
  e.validate();
  return e;
}

void save_ensemble(const RaterEnsemble& ensemble, const std::filesystem::path& path) {
  write_text(ensemble_to_json(ensemble), path);
}

RaterEnsemble load_ensemble(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::NotFound, "model not found: '" + path.string() + "'");
  return ensemble_from_json(read_text(path));
}

}  // namespace cortolam
