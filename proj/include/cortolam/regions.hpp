#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cortolam/data.hpp"
#include "cortolam/features.hpp"
#include "cortolam/spatial.hpp"

namespace cortolam {

/// Equal-width histogram over [min, max] of a value set.
struct Histogram {
  double min_value = 0;
  double bin_width = 0;
  std::vector<std::int64_t> counts;

  std::size_t bin_of(double v) const;
};

/// Throws Error(Degenerate) when all values are identical or none are given.
Histogram make_histogram(std::span<const double> values, std::size_t n_bins);

/// Multi-level Otsu on bin indices. Returns the first bin of every class
/// after the lowest (strictly ascending). Every class must be non-empty;
/// among optimal tuples the lexicographically lowest wins. The objective is
/// compared in exact integer arithmetic. n_classes must be 2 or 3.
std::vector<std::size_t> otsu_bin_thresholds(std::span<const std::int64_t> counts, std::size_t n_classes);

struct OtsuSplit {
  std::vector<double> thresholds;           // value-space class boundaries
  std::vector<std::size_t> bin_thresholds;  // first bin of classes 1..n-1
  std::vector<int> assignment;              // class per input value, 0 = lowest
  Histogram histogram;
};

OtsuSplit otsu_thresholds(std::span<const double> values, std::size_t n_classes, std::size_t n_bins = 256);

enum class Population { Sparse = 0, Average = 1, Dense = 2 };
enum class SparseKind { None = 0, LayerI = 1, WhiteMatter = 2 };

std::string_view to_string(Population p);
std::string_view to_string(SparseKind k);

struct PopulationSplit {
  std::vector<Population> tags;
  OtsuSplit otsu;
};

/// Three-class Otsu on density: lowest class sparse, highest dense.
PopulationSplit classify_population(std::span<const double> densities);

struct SparseSplit {
  std::vector<SparseKind> tags;
  bool degenerate = false;  // everything tagged white matter
  std::optional<double> threshold;
};

/// Two-class Otsu on the hull areas of sparse neurons: the larger-area class
/// is white matter, the smaller layer I.
SparseSplit split_sparse(std::span<const double> hull_areas);

struct DepthInfo {
  double depth_um = 0;
  double thickness_um = 0;
  double depth_norm = 0;
  double dist_to_dense_um = 0;
};

/// Nearest-neighbour lookups against the tagged neuron sets. Throws
/// Error(Unavailable) when the layer I or white matter set is empty.
class DepthReference {
 public:
  DepthReference(std::vector<Point2> layer_i, std::vector<Point2> white_matter, std::vector<Point2> dense);

  DepthInfo at(Point2 p) const;

 private:
  std::optional<KdTree> layer_i_;
  std::optional<KdTree> white_matter_;
  std::optional<KdTree> dense_;
};

DepthInfo depth_thickness(Point2 neuron, const DepthReference& ref);

struct RegionTags {
  NeuronId id = 0;
  Population population = Population::Average;
  SparseKind sparse_kind = SparseKind::None;
  DepthInfo depth;
};

struct RegionResult {
  std::vector<RegionTags> tags;  // same order as the neurons
  OtsuSplit density_split;
  std::optional<OtsuSplit> size_split;
  std::optional<double> hull_area_threshold;
  bool sparse_split_degenerate = false;
  std::vector<std::string> warnings;
};

/// Derives population, sparse kind and depth features for every neuron from
/// the density and hull area columns at cfg.density_k.
RegionResult derive_regions(std::span<const NeuronRecord> neurons, const FeatureTable& features,
                            const FeatureConfig& cfg);

/// Copy of `base` with the region block appended (schema order fixed).
FeatureTable append_region_block(const FeatureTable& base, const RegionResult& regions);

Table regions_table(const RegionResult& regions);
std::string regions_summary_json(const RegionResult& regions);

}  // namespace cortolam
