#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cortolam/config.hpp"

namespace cortolam {

// Pipeline steps behind the CLI subcommands. Each reads and writes the
// files named in the README under cfg.out_dir and logs to `log`.

void cmd_synth(const PipelineConfig& cfg, std::ostream& log);
void cmd_features(const PipelineConfig& cfg, std::ostream& log);
void cmd_regions(const PipelineConfig& cfg, std::ostream& log);
void cmd_train(const PipelineConfig& cfg, std::ostream& log);
void cmd_predict(const PipelineConfig& cfg, std::ostream& log);
void cmd_explain(const PipelineConfig& cfg, std::ostream& log);
void cmd_eval(const PipelineConfig& cfg, std::ostream& log);

struct PlotRequest {
  std::vector<std::filesystem::path> sources;  // one panel each
  std::string column = "layer";
  bool continuous = false;
  std::filesystem::path output;  // default <out_dir>/map.svg
};

void cmd_plot(const PipelineConfig& cfg, const PlotRequest& req, std::ostream& log);

/// Rater id used for a label file: its stem without a leading "labels_".
std::string rater_id_for(const std::filesystem::path& labels_path);

/// Reads `id,set` rows written by cmd_train.
void read_split(const std::filesystem::path& path, std::vector<NeuronId>& train, std::vector<NeuronId>& test);

}  // namespace cortolam
