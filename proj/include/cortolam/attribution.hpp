#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cortolam/features.hpp"
#include "cortolam/model.hpp"

namespace cortolam {

/// Attributions on the margin (pre-softmax) scale for one row and one model.
/// For every class c: base[c] + sum_j phi[c][j] equals the model margin.
struct ShapExplanation {
  NeuronId id = 0;
  std::string rater_id;
  ClassVector base{};
  std::vector<std::vector<double>> phi;  // [class][feature]
};

/// Cover-weighted mean leaf value of a tree (its expected output).
double tree_expected_value(const Tree& tree);

/// Path-dependent TreeSHAP for a single tree. Adds into `phi`.
void tree_shap_accumulate(const Tree& tree, std::span<const double> row, std::span<double> phi);

/// Throws Error(Model) if any tree lacks per-node coverage.
ShapExplanation tree_shap(const TreeEnsembleModel& model, std::span<const double> row, NeuronId id = 0);

struct FeatureImportance {
  std::size_t feature = 0;
  std::string name;
  double mean_abs_phi = 0;
};

/// Mean |phi| over rows and classes, descending; ties by feature index.
std::vector<FeatureImportance> global_importance(const TreeEnsembleModel& model, const FeatureTable& table);
std::vector<FeatureImportance> rank_importance(std::span<const std::string> schema, std::span<const double> mean_abs);

struct Contribution {
  std::string feature;
  double value = 0;  // feature value of the row
  double phi = 0;
};

/// Signed breakdown for one member model and one class.
struct ContributionTable {
  std::string rater_id;
  LayerClass layer = LayerClass::I;
  double base = 0;
  double margin = 0;
  std::vector<Contribution> increasing;  // phi > 0, by |phi| descending
  std::vector<Contribution> decreasing;  // phi < 0, by |phi| descending
  std::vector<Contribution> neutral;     // phi == 0, schema order
};

struct PredictionExplanation {
  EnsemblePrediction prediction;
  std::vector<ShapExplanation> members;
  std::vector<ContributionTable> tables;  // one per member for `layer`
};

ContributionTable contribution_table(const ShapExplanation& ex, std::span<const std::string> schema,
                                     std::span<const double> row, LayerClass layer);

/// Per-member explanations plus a contribution table per member for the
/// ensemble's predicted class (or `layer` when given).
PredictionExplanation explain_prediction(const RaterEnsemble& ensemble, std::span<const double> row, NeuronId id = 0,
                                         std::optional<LayerClass> layer = std::nullopt);

std::string render_contributions(const PredictionExplanation& ex, std::size_t top = 10);

}  // namespace cortolam
