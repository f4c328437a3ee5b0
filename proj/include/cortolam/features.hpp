#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cortolam/data.hpp"
#include "cortolam/spatial.hpp"

namespace cortolam {

/// How the numerator of the nearest neighbour index is read.
enum class NniMode {
  Members,  // mean 1-NN distance among the k neighbourhood members (default)
  Central,  // mean distance from the central neuron to its k neighbours
};

std::string_view to_string(NniMode mode);
NniMode parse_nni_mode(std::string_view text);

/// Angular sectors anchored at a neuron. Sector 0 starts at angle 0 (+x) and
/// sectors advance counter-clockwise in the (x, y) frame of the input.
struct SliceConfig {
  std::size_t sectors = 8;
  std::size_t k_slice = 500;
};

struct FeatureConfig {
  std::vector<std::size_t> k_set{50, 100, 250, 500, 1000};
  SliceConfig slice;
  NniMode nni_mode = NniMode::Members;
  /// Neighbourhood size whose density and hull area drive region derivation.
  std::size_t density_k = 100;

  /// Throws Error(Config) on an empty or repeated K-set, R < 2, or zeros.
  void validate() const;
};

/// Per-neuron condition bits recorded next to the feature values.
namespace flag {
inline constexpr std::uint32_t kClamped = 1u << 0;          // some k exceeded n-1
inline constexpr std::uint32_t kFewNeighbors = 1u << 1;     // some k had < 3 neighbours
inline constexpr std::uint32_t kGrayImputed = 1u << 2;
inline constexpr std::uint32_t kSliceUnderfilled = 1u << 3;  // fewer slice neighbours than sectors
inline constexpr std::uint32_t kNoNeighbors = 1u << 4;
inline constexpr std::uint32_t kSparseSplitDegenerate = 1u << 5;
inline constexpr std::uint32_t kDensityDegenerate = 1u << 6;  // region density came from a degenerate hull
inline constexpr int kHullDegenerateShift = 8;                 // + position in the K-set
}  // namespace flag

std::vector<std::string> flag_tokens(std::uint32_t flags, const FeatureConfig& cfg);
std::uint32_t parse_flag_tokens(std::string_view text, const FeatureConfig& cfg);

struct DistanceStats {
  double mean = 0;
  double std = 0;
  double skew = 0;     // g1
  double kurt = 0;     // excess kurtosis g2
  double entropy = 0;  // nats, 16 equal bins over [0, max]
  bool degenerate = false;
};

inline constexpr std::size_t kDistanceEntropyBins = 16;

DistanceStats distance_stats_from(std::span<const double> distances);
DistanceStats distance_stats(const SpatialIndex& index, NeuronId id, std::size_t k);

struct HullFeatures {
  double area_um2 = 0;
  double perimeter_um = 0;
  double mean_nnd_um = 0;
  double std_nnd_um = 0;
  bool degenerate = false;
};

HullFeatures hull_features_from(std::span<const Point2> members);
HullFeatures hull_features(const SpatialIndex& index, NeuronId id, std::size_t k);

struct ScalarFeature {
  double value = 0;
  bool degenerate = false;
};

/// Neighbour count over hull area, in neurons per square millimetre.
ScalarFeature local_density(const SpatialIndex& index, NeuronId id, std::size_t k);

/// Observed mean distance over 0.5*sqrt(hull area / k).
ScalarFeature nni_from(Point2 center, std::span<const Point2> members, NniMode mode);
ScalarFeature nni(const SpatialIndex& index, NeuronId id, std::size_t k, NniMode mode = NniMode::Members);

std::size_t sector_of(double dx, double dy, std::size_t sectors);

/// Proportion of the neighbours falling in each sector; all zero when there
/// are no neighbours.
std::vector<double> slice_partition_from(Point2 center, std::span<const Point2> neighbors, std::size_t sectors);
std::vector<double> slice_partition(const SpatialIndex& index, NeuronId id, const SliceConfig& cfg);

/// -sum p ln p, with 0 ln 0 = 0.
double shannon_index(std::span<const double> p);
/// sum p^2.
double simpson_index(std::span<const double> p);

inline constexpr std::size_t kShapeBlockSize = 6;
inline constexpr std::size_t kPerKBlockSize = 11;
inline constexpr std::size_t kSliceBlockSize = 4;
inline constexpr std::size_t kRegionBlockSize = 6;

inline constexpr const char* kRegionColumns[kRegionBlockSize] = {
    "sparse_flag", "dense_flag", "depth_um", "thickness_um", "depth_norm", "dist_to_dense_um"};

std::vector<std::string> feature_schema(const FeatureConfig& cfg, bool with_region_block);

/// Row-major per-neuron feature matrix with its column schema.
struct FeatureTable {
  std::vector<std::string> schema;
  std::vector<NeuronId> ids;
  std::vector<double> values;
  std::vector<std::uint32_t> flags;

  std::size_t rows() const { return ids.size(); }
  std::size_t cols() const { return schema.size(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols(), cols()}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * cols(), cols()}; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
  std::size_t column_index(std::string_view name) const;  // throws Error(Schema)
  std::size_t row_index(NeuronId id) const;               // throws Error(Reference)
};

/// One row per neuron in input order. Missing gray values are replaced by
/// the column median and flagged. Never emits NaN or infinity.
FeatureTable assemble_features(std::span<const NeuronRecord> neurons, const SpatialIndex& index,
                               const FeatureConfig& cfg);

/// Writes `<path>` (id + schema columns), `<stem>.schema.json` and
/// `<stem>.flags.csv` next to it.
void write_feature_table(const FeatureTable& table, const std::filesystem::path& path,
                         const FeatureConfig& cfg);
FeatureTable load_feature_table(const std::filesystem::path& path, const FeatureConfig& cfg);

std::filesystem::path schema_sidecar_path(const std::filesystem::path& features_csv);
std::filesystem::path flags_sidecar_path(const std::filesystem::path& features_csv);

}  // namespace cortolam
