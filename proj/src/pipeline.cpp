#include "cortolam/pipeline.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>

#include "cortolam/attribution.hpp"
#include "cortolam/csv.hpp"
#include "cortolam/error.hpp"
#include "cortolam/eval.hpp"
#include "cortolam/parallel.hpp"
#include "cortolam/plot.hpp"
#include "cortolam/regions.hpp"
#include "json.hpp"

namespace cortolam {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void ensure_out_dir(const PipelineConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory '" + cfg.out_dir.string() + "': " + ec.message());
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p))
    throw Error(ErrorKind::NotFound, what + " not found: '" + p.string() + "'");
}

std::vector<LabelSet> load_raters(const PipelineConfig& cfg, std::span<const NeuronRecord> neurons) {
  std::vector<LabelSet> raters;
  for (const auto& p : cfg.label_paths()) {
    require_file(p, "labels");
    raters.push_back(load_labels(p, rater_id_for(p), neurons));
  }
  if (raters.empty()) throw Error(ErrorKind::Config, "no rater label files given");
  return raters;
}

LabelSet load_predictions(const fs::path& path) {
  require_file(path, "predictions");
  const auto doc = CsvDocument::read(path);
  const auto ci = doc.require_column("id");
  const auto cl = doc.require_column("layer");
  LabelSet out;
  out.rater_id = "model";
  for (std::size_t r = 0; r < doc.size(); ++r) {
    const auto c = parse_layer(doc.text(r, cl));
    if (!c) throw Error(ErrorKind::Parse, path.string() + " row " + std::to_string(r + 1) + ": unknown layer");
    out.labels.emplace(doc.integer(r, ci), *c);
  }
  return out;
}

FeatureTable load_full_features(const PipelineConfig& cfg) {
  const auto path = cfg.out("features_full.csv");
  require_file(path, "feature table with region block (run `cortolam regions`)");
  return load_feature_table(path, cfg.features);
}

}  // namespace

std::string rater_id_for(const fs::path& labels_path) {
  std::string stem = labels_path.stem().string();
  if (stem.rfind("labels_", 0) == 0 && stem.size() > 7) stem = stem.substr(7);
  return stem;
}

void read_split(const fs::path& path, std::vector<NeuronId>& train, std::vector<NeuronId>& test) {
  require_file(path, "train/test split");
  const auto doc = CsvDocument::read(path);
  const auto ci = doc.require_column("id");
  const auto cs = doc.require_column("set");
  train.clear();
  test.clear();
  for (std::size_t r = 0; r < doc.size(); ++r) {
    const auto& s = doc.text(r, cs);
    if (s == "train")
      train.push_back(doc.integer(r, ci));
    else if (s == "test")
      test.push_back(doc.integer(r, ci));
    else
      throw Error(ErrorKind::Parse, path.string() + " row " + std::to_string(r + 1) + ": set must be train or test");
  }
}

void cmd_synth(const PipelineConfig& cfg, std::ostream& log) {
  ensure_out_dir(cfg);
  const auto section = generate(cfg.synth);
  write_neurons(section.neurons, cfg.out("neurons.csv"));
  write_labels(section.truth, cfg.out("truth.csv"));

  std::vector<LabelSet> raters;
  double amplitude = 0;
  double mean_agreement = 1;
  if (cfg.rater_amplitude_um) {
    amplitude = *cfg.rater_amplitude_um;
    for (std::size_t r = 0; r < cfg.n_raters; ++r)
      raters.push_back(
          synth_rater_labels(section, amplitude, rater_seed(cfg.seed, r), "r" + std::to_string(r + 1)));
    if (raters.size() >= 2) mean_agreement = pairwise_agreement(raters).pairs.mean;
  } else {
    if (cfg.n_raters < 2)
      throw Error(ErrorKind::Config, "calibrating the rater amplitude needs synth.n_raters >= 2");
    auto cal = calibrate_disagreement(section, cfg.n_raters, cfg.target_agreement, cfg.seed);
    amplitude = cal.amplitude_um;
    mean_agreement = cal.mean_pairwise_agreement;
    raters = std::move(cal.raters);
  }
  for (std::size_t r = 0; r < raters.size(); ++r)
    write_labels(raters[r], cfg.out("labels_r" + std::to_string(r + 1) + ".csv"));

  std::array<std::size_t, kNumClasses> per_band{};
  for (const auto& [id, c] : section.truth.labels) per_band[ordinal(c)]++;
  ordered_json j;
  j["seed"] = cfg.seed;
  j["neurons"] = section.neurons.size();
  ordered_json bands = ordered_json::object();
  for (auto c : kAllLayers) bands[std::string(layer_name(c))] = per_band[ordinal(c)];
  j["band_counts"] = bands;
  j["rater_amplitude_um"] = amplitude;
  j["amplitude_calibrated"] = !cfg.rater_amplitude_um.has_value();
  j["target_agreement"] = cfg.target_agreement;
  j["mean_pairwise_agreement"] = mean_agreement;
  write_text(j.dump(2) + "\n", cfg.out("synth.json"));
  write_text(config_text(cfg), cfg.out("synth_config.txt"));
  log << "synth: " << section.neurons.size() << " neurons, " << raters.size() << " raters at amplitude "
      << format_double(amplitude) << " um (mean pairwise agreement " << format_double(mean_agreement) << ")\n";
}

void cmd_features(const PipelineConfig& cfg, std::ostream& log) {
  ensure_out_dir(cfg);
  require_file(cfg.neurons_path(), "neurons");
  const auto neurons = load_neurons(cfg.neurons_path(), cfg.resolution_um_per_px);
  const auto index = build_index(neurons);
  const auto table = assemble_features(neurons, index, cfg.features);
  write_feature_table(table, cfg.out("features.csv"), cfg.features);
  std::size_t flagged = 0;
  for (auto f : table.flags)
    if (f) ++flagged;
  log << "features: " << table.rows() << " neurons x " << table.cols() << " features, " << flagged
      << " flagged\n";
}

void cmd_regions(const PipelineConfig& cfg, std::ostream& log) {
  ensure_out_dir(cfg);
  require_file(cfg.neurons_path(), "neurons");
  require_file(cfg.out("features.csv"), "feature table (run `cortolam features`)");
  const auto neurons = load_neurons(cfg.neurons_path(), cfg.resolution_um_per_px);
  const auto base = load_feature_table(cfg.out("features.csv"), cfg.features);
  const auto regions = derive_regions(neurons, base, cfg.features);
  write_table(regions_table(regions), cfg.out("regions.csv"));
  write_text(regions_summary_json(regions), cfg.out("regions_summary.json"));
  write_feature_table(append_region_block(base, regions), cfg.out("features_full.csv"), cfg.features);
  std::size_t counts[3] = {};
  for (const auto& t : regions.tags) counts[static_cast<int>(t.population)]++;
  log << "regions: sparse " << counts[0] << ", average " << counts[1] << ", dense " << counts[2] << "\n";
  for (const auto& w : regions.warnings) log << "warning: " << w << "\n";
}

void cmd_train(const PipelineConfig& cfg, std::ostream& log) {
  ensure_out_dir(cfg);
  require_file(cfg.neurons_path(), "neurons");
  const auto neurons = load_neurons(cfg.neurons_path(), cfg.resolution_um_per_px);
  const auto table = load_full_features(cfg);
  const auto raters = load_raters(cfg, neurons);

  // stratify on the first rater over neurons every rater labeled
  std::vector<std::pair<NeuronId, LayerClass>> labeled;
  for (NeuronId id : table.ids) {
    const auto first = raters.front().find(id);
    if (!first) continue;
    bool all = true;
    for (const auto& r : raters)
      if (!r.find(id)) all = false;
    if (all) labeled.emplace_back(id, *first);
  }
  const auto split = split_train_test(labeled, cfg.train_fraction, cfg.seed);
  for (const auto& w : split.warnings) log << "warning: " << w << "\n";
  Table st{{"id", "set"}, {}};
  std::map<NeuronId, bool> in_train;
  for (auto id : split.train) in_train[id] = true;
  for (auto id : split.test) in_train[id] = false;
  for (const auto& [id, tr] : in_train) st.rows.push_back({id, std::string(tr ? "train" : "test")});
  write_table(st, cfg.out("split.csv"));

  RaterEnsemble ensemble;
  ordered_json members = ordered_json::array();
  for (const auto& r : raters) {
    auto model = train(table, r, cfg.train, std::span<const NeuronId>(split.train));
    log << "train: rater " << r.rater_id << ", " << model.trees.size() << " trees, loss "
        << format_double(model.train_loss.front()) << " -> " << format_double(model.train_loss.back()) << "\n";
    members.push_back({{"rater", r.rater_id},
                       {"trees", model.trees.size()},
                       {"initial_loss", model.train_loss.front()},
                       {"final_loss", model.train_loss.back()}});
    ensemble.members.push_back(std::move(model));
  }
  save_ensemble(ensemble, cfg.model_path());
  ordered_json j;
  j["train_count"] = split.train.size();
  j["test_count"] = split.test.size();
  j["train_fraction"] = cfg.train_fraction;
  j["seed"] = cfg.seed;
  j["members"] = members;
  j["warnings"] = split.warnings;
  write_text(j.dump(2) + "\n", cfg.out("train_summary.json"));
}

void cmd_predict(const PipelineConfig& cfg, std::ostream& log) {
  ensure_out_dir(cfg);
  const auto ensemble = load_ensemble(cfg.model_path());
  const auto table = load_full_features(cfg);
  ensemble.members.front().check_schema(table.schema);
  std::vector<EnsemblePrediction> preds(table.rows());
  parallel_for(table.rows(), [&](std::size_t r) { preds[r] = ensemble_predict(ensemble, table.row(r)); });
  Table out;
  out.columns = {"id", "layer"};
  for (auto c : kAllLayers) out.columns.push_back("summed_" + std::string(layer_name(c)));
  for (std::size_t r = 0; r < table.rows(); ++r) {
    std::vector<Cell> row{table.ids[r], std::string(layer_name(preds[r].layer))};
    for (double p : preds[r].summed) row.emplace_back(p);
    out.rows.push_back(std::move(row));
  }
  write_table(out, cfg.out("predictions.csv"));
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& p : preds) counts[ordinal(p.layer)]++;
  log << "predict: " << preds.size() << " neurons (";
  for (auto c : kAllLayers) log << (c == LayerClass::I ? "" : ", ") << layer_name(c) << " " << counts[ordinal(c)];
  log << ")\n";
}

void cmd_explain(const PipelineConfig& cfg, std::ostream& log) {
  ensure_out_dir(cfg);
  const auto ensemble = load_ensemble(cfg.model_path());
  const auto table = load_full_features(cfg);
  ensemble.members.front().check_schema(table.schema);

  std::vector<NeuronId> pool;
  if (fs::exists(cfg.out("split.csv"))) {
    std::vector<NeuronId> tr;
    read_split(cfg.out("split.csv"), tr, pool);
  } else {
    pool = table.ids;
    std::sort(pool.begin(), pool.end());
  }
  std::vector<NeuronId> sample;
  const std::size_t want = std::min(cfg.explain_sample, pool.size());
  for (std::size_t i = 0; i < want; ++i) sample.push_back(pool[i * pool.size() / want]);
  if (cfg.explain_id && std::find(sample.begin(), sample.end(), *cfg.explain_id) == sample.end())
    sample.push_back(*cfg.explain_id);
  if (sample.empty()) throw Error(ErrorKind::Degenerate, "no neurons to explain");

  const std::size_t m = table.cols();
  const std::size_t nm = ensemble.members.size();
  std::vector<std::vector<ShapExplanation>> ex(sample.size());
  parallel_for(sample.size(), [&](std::size_t i) {
    const auto row = table.row(table.row_index(sample[i]));
    for (const auto& mem : ensemble.members) ex[i].push_back(tree_shap(mem, row, sample[i]));
  });

  Table out;
  out.columns = {"id", "rater", "class", "base"};
  for (const auto& s : table.schema) out.columns.push_back(s);
  std::vector<std::vector<double>> mean_abs(nm, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < sample.size(); ++i) {
    for (std::size_t k = 0; k < nm; ++k) {
      const auto& e = ex[i][k];
      for (auto c : kAllLayers) {
        std::vector<Cell> row{e.id, e.rater_id, std::string(layer_name(c)), e.base[ordinal(c)]};
        for (std::size_t j = 0; j < m; ++j) {
          row.emplace_back(e.phi[ordinal(c)][j]);
          mean_abs[k][j] += std::abs(e.phi[ordinal(c)][j]);
        }
        out.rows.push_back(std::move(row));
      }
    }
  }
  write_table(out, cfg.out("explanations.csv"));

  const double denom = static_cast<double>(sample.size() * kNumClasses);
  std::vector<double> overall(m, 0.0);
  ordered_json per_member = ordered_json::object();
  auto ranking_json = [](const std::vector<FeatureImportance>& rank) {
    ordered_json a = ordered_json::array();
    for (const auto& f : rank) a.push_back({{"feature", f.name}, {"mean_abs_phi", f.mean_abs_phi}});
    return a;
  };
  for (std::size_t k = 0; k < nm; ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      mean_abs[k][j] /= denom;
      overall[j] += mean_abs[k][j] / static_cast<double>(nm);
    }
    per_member[ensemble.members[k].rater_id] = ranking_json(rank_importance(table.schema, mean_abs[k]));
  }
  const auto overall_rank = rank_importance(table.schema, overall);
  ordered_json j;
  j["rows"] = sample.size();
  j["scale"] = "margin";
  j["mean_over_members"] = ranking_json(overall_rank);
  j["members"] = per_member;
  write_text(j.dump(2) + "\n", cfg.out("importance.json"));

  const NeuronId focus = cfg.explain_id.value_or(sample.front());
  const auto pe = explain_prediction(ensemble, table.row(table.row_index(focus)), focus);
  std::string text = "neuron " + std::to_string(focus) + "\n" + render_contributions(pe, cfg.explain_top);
  text += "\nglobal importance over " + std::to_string(sample.size()) +
          " neurons (mean |phi| over classes and members)\n";
  for (std::size_t i = 0; i < overall_rank.size() && i < cfg.explain_top; ++i)
    text += "  " + std::to_string(i + 1) + ". " + overall_rank[i].name + "  " +
            format_double(overall_rank[i].mean_abs_phi) + "\n";
  write_text(text, cfg.out("explain.txt"));
  log << text;
}

void cmd_eval(const PipelineConfig& cfg, std::ostream& log) {
  ensure_out_dir(cfg);
  require_file(cfg.neurons_path(), "neurons");
  const auto neurons = load_neurons(cfg.neurons_path(), cfg.resolution_um_per_px);
  const auto raters = load_raters(cfg, neurons);
  AgreementReport report;
  report.raters = pairwise_agreement(raters);

  std::optional<LabelSet> truth;
  if (fs::exists(cfg.truth_path())) truth = load_labels(cfg.truth_path(), "truth", neurons);

  if (fs::exists(cfg.out("predictions.csv"))) {
    const auto pred = load_predictions(cfg.out("predictions.csv"));
    std::vector<NeuronId> test;
    if (fs::exists(cfg.out("split.csv"))) {
      std::vector<NeuronId> tr;
      read_split(cfg.out("split.csv"), tr, test);
    } else {
      for (const auto& [id, c] : pred.labels) test.push_back(id);
    }
    report.test_count = test.size();
    report.model_vs_raters = accuracy_vs_raters(pred, raters, test);
    for (const auto& r : raters) report.confusions.push_back({r.rater_id, "model", confusion(r, pred, test)});
    if (truth) {
      report.model_vs_truth = agreement_on(pred, *truth, test);
      report.confusions.insert(report.confusions.begin(), {"truth", "model", confusion(*truth, pred, test)});
    }
  } else {
    log << "eval: no predictions.csv, reporting rater agreement only\n";
  }
  if (truth) {
    double s = 0;
    for (const auto& r : raters) s += agreement(r, *truth);
    report.raters_vs_truth_mean = s / static_cast<double>(raters.size());
  }
  const LabelSet& comp_labels = truth ? *truth : raters.front();
  const std::size_t n = std::min(cfg.top_n, comp_labels.size());
  if (n > 0) report.composition = top_n_composition(neurons, comp_labels, n, "area_um2");

  write_text(report_json(report), cfg.out("eval.json"));
  const auto text = report_text(report);
  write_text(text, cfg.out("eval.txt"));
  log << text;
}

void cmd_plot(const PipelineConfig& cfg, const PlotRequest& req, std::ostream& log) {
  ensure_out_dir(cfg);
  require_file(cfg.neurons_path(), "neurons");
  const auto neurons = load_neurons(cfg.neurons_path(), cfg.resolution_um_per_px);
  auto sources = req.sources;
  if (sources.empty()) sources.push_back(cfg.out("predictions.csv"));
  std::vector<PlotPanel> panels;
  for (const auto& s : sources) {
    require_file(s, "plot source");
    const auto doc = CsvDocument::read(s);
    PlotPanel p;
    p.title = s.stem().string() + (req.column == "layer" ? "" : ": " + req.column);
    if (req.continuous)
      p.colors = values_for(neurons, doc, req.column);
    else
      p.colors = classes_for(neurons, doc, req.column);
    panels.push_back(std::move(p));
  }
  const auto out = req.output.empty() ? cfg.out("map.svg") : req.output;
  write_text(render_svg(neurons, panels), out);
  log << "plot: " << panels.size() << " panel(s), " << neurons.size() << " neurons -> " << out.string() << "\n";
}

}  // namespace cortolam
