// cortolam command-line driver.
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cortolam/config.hpp"
#include "cortolam/error.hpp"
#include "cortolam/parallel.hpp"
#include "cortolam/pipeline.hpp"

using namespace cortolam;

namespace {

struct Overrides {
  std::string config;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flags;
};

// Registers an option whose value becomes a config override.
void add_key(CLI::App* app, Overrides& ov, const std::string& flag, const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&ov, key](const std::string& v) { ov.flags.emplace_back(key, v); }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cortolam: neuron-level cortical layer analysis"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Overrides ov;
  app.add_option("--config", ov.config, "flat key = value config file");
  add_key(&app, ov, "--seed", "seed", "seed for every stochastic step");
  add_key(&app, ov, "--out", "out_dir", "output directory (default out)");
  add_key(&app, ov, "--neurons", "neurons", "neurons CSV (default <out>/neurons.csv)");
  add_key(&app, ov, "--resolution", "resolution_um_per_px", "input lengths are pixels at this um/px");
  add_key(&app, ov, "--threads", "threads", "worker threads (0 = all cores)");
  app.add_option("--set", ov.sets, "extra config setting key=value (repeatable)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic section, truth and simulated raters");
  add_key(synth, ov, "--amplitude", "synth.rater_amplitude_um", "rater boundary jitter in um, or auto");
  add_key(synth, ov, "--raters", "synth.n_raters", "number of simulated raters");
  app.add_subcommand("features", "per-neuron feature table");
  app.add_subcommand("regions", "population tags, depth and thickness; appends the region block");
  auto* train = app.add_subcommand("train", "one boosted model per rater, saved as an ensemble");
  std::vector<std::string> labels;
  train->add_option("--labels", labels, "rater label CSVs (default <out>/labels_r*.csv)");
  add_key(train, ov, "--rounds", "rounds", "boosting rounds");
  add_key(train, ov, "--model", "model", "ensemble output path");
  auto* predict = app.add_subcommand("predict", "ensemble predictions for every neuron");
  add_key(predict, ov, "--model", "model", "ensemble file (default <out>/ensemble.json)");
  auto* explain = app.add_subcommand("explain", "TreeSHAP attributions and global importance");
  add_key(explain, ov, "--model", "model", "ensemble file");
  add_key(explain, ov, "--id", "explain.id", "neuron to break down");
  add_key(explain, ov, "--sample", "explain.sample", "neurons in the attribution sample");
  auto* eval = app.add_subcommand("eval", "agreement, accuracy, confusion and composition report");
  eval->add_option("--labels", labels, "rater label CSVs");
  add_key(eval, ov, "--truth", "truth", "ground-truth labels (default <out>/truth.csv if present)");
  add_key(eval, ov, "--top-n", "top_n", "size of the largest-neuron composition");
  auto* plot = app.add_subcommand("plot", "SVG map of neurons colored by class or value");
  PlotRequest req;
  std::vector<std::string> sources;
  std::string output;
  plot->add_option("--color-by", sources, "CSV with an id column; one panel per file (repeatable)");
  plot->add_option("--column", req.column, "column to color by (default layer)");
  plot->add_flag("--continuous", req.continuous, "column holds numbers, use a colormap");
  plot->add_option("-o,--output", output, "SVG path (default <out>/map.svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    PipelineConfig cfg = ov.config.empty() ? PipelineConfig{} : load_config(ov.config);
    for (const auto& s : ov.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::Config, "--set expects key=value, got '" + s + "'");
      cfg.set(trim(std::string_view(s).substr(0, eq)), std::string_view(s).substr(eq + 1));
    }
    for (const auto& [k, v] : ov.flags) cfg.set(k, v);
    if (!labels.empty()) {
      cfg.labels.assign(labels.begin(), labels.end());
    }
    cfg.propagate_seed();
    cfg.validate();
    set_thread_count(cfg.threads);

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "synth") cmd_synth(cfg, std::cout);
    else if (cmd == "features") cmd_features(cfg, std::cout);
    else if (cmd == "regions") cmd_regions(cfg, std::cout);
    else if (cmd == "train") cmd_train(cfg, std::cout);
    else if (cmd == "predict") cmd_predict(cfg, std::cout);
    else if (cmd == "explain") cmd_explain(cfg, std::cout);
    else if (cmd == "eval") cmd_eval(cfg, std::cout);
    else if (cmd == "plot") {
      req.sources.assign(sources.begin(), sources.end());
      req.output = output;
      cmd_plot(cfg, req, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
