#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cortolam/features.hpp"
#include "cortolam/model.hpp"
#include "cortolam/synth.hpp"

namespace cortolam {

/// Everything the pipeline commands read. Empty paths fall back to the
/// conventional file names inside out_dir.
struct PipelineConfig {
  std::filesystem::path out_dir = "out";
  std::filesystem::path neurons;
  std::vector<std::filesystem::path> labels;
  std::filesystem::path truth;
  std::filesystem::path model;
  std::optional<double> resolution_um_per_px;

  FeatureConfig features;
  TrainConfig train;
  double train_fraction = 0.75;

  SynthConfig synth;
  std::size_t n_raters = 3;
  std::optional<double> rater_amplitude_um;  // absent: calibrate
  double target_agreement = 0.80;

  std::size_t explain_sample = 200;
  std::size_t explain_top = 10;
  std::optional<NeuronId> explain_id;
  std::size_t top_n = 500;
  unsigned threads = 0;

  std::uint64_t seed = 42;

  /// Applies one `key = value` setting. Throws Error(Config) for unknown
  /// keys or malformed values.
  void set(std::string_view key, std::string_view value);
  /// Copies the seed into every seeded component.
  void propagate_seed();
  void validate() const;

  std::filesystem::path neurons_path() const;
  std::vector<std::filesystem::path> label_paths() const;
  std::filesystem::path truth_path() const;
  std::filesystem::path model_path() const;
  std::filesystem::path out(std::string_view name) const { return out_dir / std::string(name); }
};

/// Flat text file: one `key = value` per line, `#` starts a comment.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});

/// Canonical text form that parse_config reads back to the same settings.
std::string config_text(const PipelineConfig& cfg);

}  // namespace cortolam
