#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cortolam/data.hpp"
#include "cortolam/features.hpp"
#include "cortolam/layer.hpp"

namespace cortolam {

using ClassVector = std::array<double, kNumClasses>;

struct TrainConfig {
  std::size_t rounds = 200;
  std::size_t max_depth = 6;
  double learning_rate = 0.1;
  double l2_leaf_reg = 1.0;
  std::size_t min_samples_leaf = 20;
  std::uint64_t seed = 42;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Regression tree in flat arrays. Node 0 is the root; children always have
/// larger indices than their parent. A row goes left iff x[feature] <= threshold.
struct Tree {
  int target_class = 0;
  std::vector<int> feature;  // -1 marks a leaf
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> leaf_value;  // learning rate already applied
  std::vector<double> cover;       // training rows reaching the node

  std::size_t size() const { return feature.size(); }
  bool is_leaf(std::size_t node) const { return feature[node] < 0; }
  std::size_t leaf_index(std::span<const double> row) const;
  double predict(std::span<const double> row) const { return leaf_value[leaf_index(row)]; }
  std::size_t depth() const;

  bool operator==(const Tree&) const = default;
};

/// Multiclass boosted trees for one rater: one tree per class per round.
struct TreeEnsembleModel {
  std::string rater_id;
  std::vector<std::string> schema;
  ClassVector base_scores{};
  TrainConfig config;
  std::vector<Tree> trees;           // round-major
  std::vector<double> train_loss;    // mean cross-entropy before round 1 and after each round

  /// Throws Error(Schema) unless `schema` equals the model's schema.
  void check_schema(std::span<const std::string> schema) const;

  ClassVector margins(std::span<const double> row) const;
  ClassVector predict_proba(std::span<const double> row) const;

  bool operator==(const TreeEnsembleModel&) const = default;
};

struct RaterEnsemble {
  std::vector<TreeEnsembleModel> members;

  /// Throws Error(Schema) if member schemas differ, Error(Model) if empty.
  void validate() const;
  const std::vector<std::string>& schema() const;
};

ClassVector softmax(const ClassVector& margins);

/// Dense training matrix, row-major, with class ordinals per row.
struct TrainingSet {
  std::vector<std::string> schema;
  std::vector<double> values;
  std::vector<int> labels;

  std::size_t rows() const { return labels.size(); }
  std::size_t cols() const { return schema.size(); }
};

/// Rows of `features` whose ids are labeled in `labels` (and, when given,
/// listed in `subset`), in feature-table order.
TrainingSet make_training_set(const FeatureTable& features, const LabelSet& labels,
                              std::optional<std::span<const NeuronId>> subset = std::nullopt);

/// Softmax gradient boosting with Newton leaf values -G/(H+lambda) and exact
/// greedy splits. Throws Error(Degenerate) with fewer than two classes and
/// Error(Validation) on non-finite features.
TreeEnsembleModel train(const TrainingSet& data, const TrainConfig& cfg, const std::string& rater_id = "");
TreeEnsembleModel train(const FeatureTable& features, const LabelSet& labels, const TrainConfig& cfg,
                        std::optional<std::span<const NeuronId>> subset = std::nullopt);

double cross_entropy(const TreeEnsembleModel& model, const TrainingSet& data);

struct EnsemblePrediction {
  LayerClass layer = LayerClass::I;
  ClassVector summed{};
};

/// Sums member probabilities; argmax with ties to the lower ordinal.
EnsemblePrediction ensemble_predict(const RaterEnsemble& ensemble, std::span<const double> row);

struct TrainTestSplit {
  std::vector<NeuronId> train;
  std::vector<NeuronId> test;
  std::vector<std::string> warnings;
};

/// Stratified split. Each class receives floor(f*n_c) training rows plus
/// one more for the classes with the largest remainders until the total
/// reaches round(f*N). Classes with fewer than two members are pooled.
TrainTestSplit split_train_test(const std::vector<std::pair<NeuronId, LayerClass>>& labeled, double fraction,
                                std::uint64_t seed);

inline constexpr int kModelFormatVersion = 1;

std::string model_to_json(const TreeEnsembleModel& model);
TreeEnsembleModel model_from_json(std::string_view text);
void save_model(const TreeEnsembleModel& model, const std::filesystem::path& path);
TreeEnsembleModel load_model(const std::filesystem::path& path);

std::string ensemble_to_json(const RaterEnsemble& ensemble);
RaterEnsemble ensemble_from_json(std::string_view text);
void save_ensemble(const RaterEnsemble& ensemble, const std::filesystem::path& path);
RaterEnsemble load_ensemble(const std::filesystem::path& path);

}  // namespace cortolam
