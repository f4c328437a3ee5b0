#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cortolam/csv.hpp"
#include "cortolam/layer.hpp"

namespace cortolam {

using NeuronId = std::int64_t;

/// One detected neuron. Lengths in micrometers, areas in square micrometers.
struct NeuronRecord {
  NeuronId id = 0;
  double x_um = 0;
  double y_um = 0;
  double area_um2 = 0;
  double perimeter_um = 0;
  double circularity = 0;
  double roundness = 0;
  std::optional<double> gray_mean;
  std::optional<double> gray_median;

  bool operator==(const NeuronRecord&) const = default;
};

/// Per-rater layer assignment. Neurons absent from `labels` are unlabeled.
struct LabelSet {
  std::string rater_id;
  std::map<NeuronId, LayerClass> labels;

  std::size_t size() const { return labels.size(); }
  std::optional<LayerClass> find(NeuronId id) const;
};

inline constexpr const char* kNeuronColumns[] = {"id",          "x_um",         "y_um",
                                                 "area_um2",    "perimeter_um", "circularity",
                                                 "roundness",   "gray_mean",    "gray_median"};

/// Throws Error(Validation) describing the first violated invariant.
/// `row` is used only for the message (0 = unknown).
void validate_neuron(const NeuronRecord& n, std::size_t row = 0);

/// Reads a neurons CSV. When `resolution_um_per_px` is given, the length
/// columns (x, y, perimeter) are taken to be in pixels and scaled by it, and
/// area by its square.
std::vector<NeuronRecord> load_neurons(const std::filesystem::path& path,
                                       std::optional<double> resolution_um_per_px = std::nullopt);
std::vector<NeuronRecord> parse_neurons(const CsvDocument& doc,
                                        std::optional<double> resolution_um_per_px = std::nullopt);

LabelSet load_labels(const std::filesystem::path& path, const std::string& rater_id,
                     std::span<const NeuronRecord> neurons);
LabelSet parse_labels(const CsvDocument& doc, const std::string& rater_id,
                      std::span<const NeuronRecord> neurons);

Table neurons_table(std::span<const NeuronRecord> neurons);
Table labels_table(const LabelSet& labels);

void write_neurons(std::span<const NeuronRecord> neurons, const std::filesystem::path& path);
void write_labels(const LabelSet& labels, const std::filesystem::path& path);

}  // namespace cortolam
