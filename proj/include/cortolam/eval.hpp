#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cortolam/data.hpp"
#include "cortolam/layer.hpp"

namespace cortolam {

struct MeanStd {
  double mean = 0;
  double std = 0;  // population standard deviation
};

MeanStd mean_std(std::span<const double> values);

/// Fraction of common ids with equal class. Throws Error(Reference) when
/// the two sets share no id.
double agreement(const LabelSet& a, const LabelSet& b);

/// Same, restricted to `ids`. Every id must be labeled in both sets.
double agreement_on(const LabelSet& a, const LabelSet& b, std::span<const NeuronId> ids);

struct PairwiseAgreement {
  std::vector<std::string> sources;
  std::vector<std::vector<double>> matrix;  // symmetric, unit diagonal
  MeanStd pairs;                            // over the upper triangle
};

PairwiseAgreement pairwise_agreement(std::span<const LabelSet> sets);

struct AccuracySummary {
  std::vector<std::string> raters;
  std::vector<double> per_rater;
  MeanStd summary;
};

/// Agreement of `predictions` with every rater on `ids`, then mean and
/// population std over raters.
AccuracySummary accuracy_vs_raters(const LabelSet& predictions, std::span<const LabelSet> raters,
                                   std::span<const NeuronId> ids);

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::int64_t support = 0;
};

/// Rows are the reference class, columns the predicted class.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> counts{};

  std::int64_t total() const;
  double accuracy() const;
  std::array<ClassMetrics, kNumClasses> metrics() const;
  double cohen_kappa() const;
};

/// Over the common ids, or over `ids` when given.
ConfusionMatrix confusion(const LabelSet& reference, const LabelSet& predicted,
                          std::optional<std::span<const NeuronId>> ids = std::nullopt);

struct Composition {
  std::string feature;
  std::size_t n = 0;
  std::array<std::int64_t, kNumClasses> counts{};
  std::array<double, kNumClasses> percent{};
  std::optional<LayerClass> plurality() const;
};

/// The n labeled neurons with the largest `feature` value (ties by lower
/// id), tallied by class. `feature` is a numeric neuron column.
Composition top_n_composition(std::span<const NeuronRecord> neurons, const LabelSet& labels, std::size_t n,
                              const std::string& feature = "area_um2");

struct NamedConfusion {
  std::string reference;
  std::string predicted;
  ConfusionMatrix matrix;
};

struct AgreementReport {
  PairwiseAgreement raters;
  std::optional<AccuracySummary> model_vs_raters;
  std::optional<double> model_vs_truth;
  std::optional<double> raters_vs_truth_mean;
  std::size_t test_count = 0;
  std::vector<NamedConfusion> confusions;
  std::optional<Composition> composition;
};

std::string report_json(const AgreementReport& report);
std::string report_text(const AgreementReport& report);

}  // namespace cortolam
