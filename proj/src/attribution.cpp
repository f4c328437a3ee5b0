#include "cortolam/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cortolam/error.hpp"

namespace cortolam {

double tree_expected_value(const Tree& tree) {
  double sum = 0;
  for (std::size_t i = 0; i < tree.size(); ++i)
    if (tree.is_leaf(i)) sum += tree.cover[i] * tree.leaf_value[i];
  return sum / tree.cover[0];
}

namespace {

// One element of the unique feature path: how much of the path's weight
// flows through when the feature is absent (zero) or present (one).
struct PathElement {
  int feature;
  double zero_fraction;
  double one_fraction;
  double weight;
};

void extend_path(PathElement* path, std::size_t depth, double zero_fraction, double one_fraction, int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  const auto d1 = static_cast<double>(depth + 1);
  for (std::size_t i = depth; i-- > 0;) {
    path[i + 1].weight += one_fraction * path[i].weight * static_cast<double>(i + 1) / d1;
    path[i].weight = zero_fraction * path[i].weight * static_cast<double>(depth - i) / d1;
  }
}

void unwind_path(PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next = path[depth].weight;
  const auto d1 = static_cast<double>(depth + 1);
  for (std::size_t i = depth; i-- > 0;) {
    if (one != 0) {
      const double tmp = path[i].weight;
      path[i].weight = next * d1 / (static_cast<double>(i + 1) * one);
      next = tmp - path[i].weight * zero * static_cast<double>(depth - i) / d1;
    } else {
      path[i].weight = path[i].weight * d1 / (zero * static_cast<double>(depth - i));
    }
  }
  for (std::size_t i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

// Total path weight if the element at `index` were unwound.
double unwound_path_sum(const PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next = path[depth].weight;
  double total = 0;
  const auto d1 = static_cast<double>(depth + 1);
  for (std::size_t i = depth; i-- > 0;) {
    if (one != 0) {
      const double tmp = next * d1 / (static_cast<double>(i + 1) * one);
      total += tmp;
      next = path[i].weight - tmp * zero * (static_cast<double>(depth - i) / d1);
    } else if (zero != 0) {
      total += (path[i].weight / zero) / (static_cast<double>(depth - i) / d1);
    }
  }
  return total;
}

struct ShapWalker {
  const Tree& tree;
  std::span<const double> row;
  std::span<double> phi;

  void recurse(std::size_t node, std::size_t depth, PathElement* parent_path, double parent_zero,
               double parent_one, int parent_feature) {
    PathElement* path = parent_path + depth + 1;
    std::copy(parent_path, parent_path + depth + 1, path);
    extend_path(path, depth, parent_zero, parent_one, parent_feature);

    if (tree.is_leaf(node)) {
      const double value = tree.leaf_value[node];
      for (std::size_t i = 1; i <= depth; ++i) {
        const double w = unwound_path_sum(path, depth, i);
        const auto& el = path[i];
        phi[static_cast<std::size_t>(el.feature)] += w * (el.one_fraction - el.zero_fraction) * value;
      }
      return;
    }

    const int split = tree.feature[node];
    const bool go_left = row[static_cast<std::size_t>(split)] <= tree.threshold[node];
    const auto hot = static_cast<std::size_t>(go_left ? tree.left[node] : tree.right[node]);
    const auto cold = static_cast<std::size_t>(go_left ? tree.right[node] : tree.left[node]);
    const double cover = tree.cover[node];
    const double hot_zero = tree.cover[hot] / cover;
    const double cold_zero = tree.cover[cold] / cover;
    double incoming_zero = 1;
    double incoming_one = 1;

    // A feature already on the path is unwound and re-applied here.
    std::size_t k = 0;
    for (; k <= depth; ++k)
      if (path[k].feature == split) break;
    if (k != depth + 1) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind_path(path, depth, k);
      --depth;
    }
    recurse(hot, depth + 1, path, hot_zero * incoming_zero, incoming_one, split);
    recurse(cold, depth + 1, path, cold_zero * incoming_zero, 0.0, split);
  }
};

void require_cover(const Tree& tree) {
  if (tree.cover.size() != tree.size() || tree.size() == 0)
    throw Error(ErrorKind::Model, "tree lacks per-node coverage counts; TreeSHAP needs them");
  for (std::size_t i = 0; i < tree.size(); ++i)
    if (!tree.is_leaf(i) && !(tree.cover[i] > 0))
      throw Error(ErrorKind::Model, "tree has an internal node with zero coverage");
}

}  // namespace

void tree_shap_accumulate(const Tree& tree, std::span<const double> row, std::span<double> phi) {
  require_cover(tree);
  if (tree.is_leaf(0)) return;
  const std::size_t max_path = tree.depth() + 2;
  std::vector<PathElement> buffer(max_path * (max_path + 1) / 2 + max_path);
  ShapWalker{tree, row, phi}.recurse(0, 0, buffer.data(), 1.0, 1.0, -1);
}

ShapExplanation tree_shap(const TreeEnsembleModel& model, std::span<const double> row, NeuronId id) {
  if (row.size() != model.schema.size())
    throw Error(ErrorKind::Schema, "row length does not match the model schema");
  ShapExplanation ex;
  ex.id = id;
  ex.rater_id = model.rater_id;
  ex.base = model.base_scores;
  ex.phi.assign(kNumClasses, std::vector<double>(model.schema.size(), 0.0));
  for (const auto& t : model.trees) {
    require_cover(t);
    ex.base[t.target_class] += tree_expected_value(t);
    tree_shap_accumulate(t, row, ex.phi[t.target_class]);
  }
  return ex;
}

std::vector<FeatureImportance> rank_importance(std::span<const std::string> schema, std::span<const double> mean_abs) {
  std::vector<FeatureImportance> out;
  out.reserve(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) out.push_back({j, schema[j], mean_abs[j]});
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.mean_abs_phi > b.mean_abs_phi; });
  return out;
}

std::vector<FeatureImportance> global_importance(const TreeEnsembleModel& model, const FeatureTable& table) {
  model.check_schema(table.schema);
  if (table.rows() == 0) throw Error(ErrorKind::Degenerate, "global importance needs at least one row");
  const std::size_t m = table.cols();
  std::vector<double> sum(m, 0.0);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto ex = tree_shap(model, table.row(r), table.ids[r]);
    for (const auto& per_class : ex.phi)
      for (std::size_t j = 0; j < m; ++j) sum[j] += std::abs(per_class[j]);
  }
  const double denom = static_cast<double>(table.rows() * kNumClasses);
  for (auto& v : sum) v /= denom;
  return rank_importance(table.schema, sum);
}

ContributionTable contribution_table(const ShapExplanation& ex, std::span<const std::string> schema,
                                     std::span<const double> row, LayerClass layer) {
  ContributionTable t;
  t.rater_id = ex.rater_id;
  t.layer = layer;
  const auto& phi = ex.phi[ordinal(layer)];
  t.base = ex.base[ordinal(layer)];
  t.margin = t.base;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    t.margin += phi[j];
    Contribution c{schema[j], row[j], phi[j]};
    if (phi[j] > 0)
      t.increasing.push_back(c);
    else if (phi[j] < 0)
      t.decreasing.push_back(c);
    else
      t.neutral.push_back(c);
  }
  auto by_magnitude = [](const Contribution& a, const Contribution& b) { return std::abs(a.phi) > std::abs(b.phi); };
  std::stable_sort(t.increasing.begin(), t.increasing.end(), by_magnitude);
  std::stable_sort(t.decreasing.begin(), t.decreasing.end(), by_magnitude);
  return t;
}

PredictionExplanation explain_prediction(const RaterEnsemble& ensemble, std::span<const double> row, NeuronId id,
                                         std::optional<LayerClass> layer) {
  PredictionExplanation out;
  out.prediction = ensemble_predict(ensemble, row);
  const LayerClass target = layer.value_or(out.prediction.layer);
  for (const auto& m : ensemble.members) {
    out.members.push_back(tree_shap(m, row, id));
    out.tables.push_back(contribution_table(out.members.back(), m.schema, row, target));
  }
  return out;
}

std::string render_contributions(const PredictionExplanation& ex, std::size_t top) {
  std::ostringstream os;
  os.precision(6);
  const auto& pred = ex.prediction;
  os << "predicted layer " << layer_name(pred.layer) << " (summed probability " << pred.summed[ordinal(pred.layer)]
     << ")\n";
  os << "attributions are per rater model on the margin scale\n";
  for (const auto& t : ex.tables) {
    os << "\n[" << t.rater_id << "] class " << layer_name(t.layer) << ": base " << t.base << " -> margin " << t.margin
       << "\n";
    auto emit = [&](const char* title, const std::vector<Contribution>& list) {
      os << "  " << title << " (" << list.size() << ")\n";
      for (std::size_t i = 0; i < list.size() && i < top; ++i)
        os << "    " << (list[i].phi >= 0 ? "+" : "") << list[i].phi << "  " << list[i].feature << " = "
           << list[i].value << "\n";
      if (list.size() > top) os << "    ... " << list.size() - top << " more\n";
    };
    emit("increasing", t.increasing);
    emit("decreasing", t.decreasing);
  }
  return os.str();
}

}  // namespace cortolam
