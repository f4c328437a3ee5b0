#include "cortolam/config.hpp"

#include <sstream>

#include "cortolam/csv.hpp"
#include "cortolam/error.hpp"

namespace cortolam {

namespace {

struct BandKey {
  const char* key;
  double BandParams::*field;
};

constexpr BandKey kBandKeys[] = {
    {"synth.fractions", &BandParams::thickness_fraction},
    {"synth.densities", &BandParams::density_per_mm2},
    {"synth.area_log_mu", &BandParams::area_log_mu},
    {"synth.area_log_sigma", &BandParams::area_log_sigma},
    {"synth.circularity_alpha", &BandParams::circularity_alpha},
    {"synth.circularity_beta", &BandParams::circularity_beta},
    {"synth.roundness_alpha", &BandParams::roundness_alpha},
    {"synth.roundness_beta", &BandParams::roundness_beta},
    {"synth.gray_mu", &BandParams::gray_mu},
    {"synth.gray_sigma", &BandParams::gray_sigma},
};

std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto end = v.find(',', start);
    const auto part = trim(v.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (!part.empty()) out.emplace_back(part);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

[[noreturn]] void bad(std::string_view key, std::string_view value, const char* want) {
  throw Error(ErrorKind::Config,
              "invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected " + want + ")");
}

double real(std::string_view key, std::string_view v) {
  const auto d = parse_double(trim(v));
  if (!d) bad(key, v, "a number");
  return *d;
}

std::uint64_t count(std::string_view key, std::string_view v) {
  const auto i = parse_int(trim(v));
  if (!i || *i < 0) bad(key, v, "a non-negative integer");
  return static_cast<std::uint64_t>(*i);
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
  return out;
}

}  // namespace

void PipelineConfig::set(std::string_view key, std::string_view value) {
  const auto v = trim(value);
  if (key == "out_dir") {
    out_dir = std::string(v);
  } else if (key == "neurons") {
    neurons = std::string(v);
  } else if (key == "labels") {
    labels.clear();
    for (auto& p : split_list(v)) labels.emplace_back(p);
  } else if (key == "truth") {
    truth = std::string(v);
  } else if (key == "model") {
    model = std::string(v);
  } else if (key == "resolution_um_per_px") {
    if (v.empty() || v == "none")
      resolution_um_per_px.reset();
    else
      resolution_um_per_px = real(key, v);
  } else if (key == "k_set") {
    features.k_set.clear();
    for (auto& p : split_list(v)) features.k_set.push_back(count(key, p));
  } else if (key == "slice_sectors") {
    features.slice.sectors = count(key, v);
  } else if (key == "k_slice") {
    features.slice.k_slice = count(key, v);
  } else if (key == "nni_mode") {
    try {
      features.nni_mode = parse_nni_mode(v);
    } catch (const Error&) {
      bad(key, v, "members or central");
    }
  } else if (key == "density_k") {
    features.density_k = count(key, v);
  } else if (key == "rounds") {
    train.rounds = count(key, v);
  } else if (key == "max_depth") {
    train.max_depth = count(key, v);
  } else if (key == "learning_rate") {
    train.learning_rate = real(key, v);
  } else if (key == "l2_leaf_reg") {
    train.l2_leaf_reg = real(key, v);
  } else if (key == "min_samples_leaf") {
    train.min_samples_leaf = count(key, v);
  } else if (key == "train_fraction") {
    train_fraction = real(key, v);
  } else if (key == "synth.width_um") {
    synth.width_um = real(key, v);
  } else if (key == "synth.height_um") {
    synth.height_um = real(key, v);
  } else if (key == "synth.wave_amplitude_um") {
    synth.wave_amplitude_um = real(key, v);
  } else if (key == "synth.wave_wavelength_um") {
    synth.wave_wavelength_um = real(key, v);
  } else if (key == "synth.n_raters") {
    n_raters = count(key, v);
  } else if (key == "synth.rater_amplitude_um") {
    if (v == "auto" || v.empty())
      rater_amplitude_um.reset();
    else
      rater_amplitude_um = real(key, v);
  } else if (key == "synth.target_agreement") {
    target_agreement = real(key, v);
  } else if (key == "explain.sample") {
    explain_sample = count(key, v);
  } else if (key == "explain.top") {
    explain_top = count(key, v);
  } else if (key == "explain.id") {
    if (v.empty())
      explain_id.reset();
    else
      explain_id = static_cast<NeuronId>(count(key, v));
  } else if (key == "top_n") {
    top_n = count(key, v);
  } else if (key == "threads") {
    threads = static_cast<unsigned>(count(key, v));
  } else if (key == "seed") {
    seed = count(key, v);
  } else {
    for (const auto& bk : kBandKeys) {
      if (key != bk.key) continue;
      const auto parts = split_list(v);
      if (parts.size() != kNumClasses) bad(key, v, "7 comma-separated numbers, layers I..VI then WM");
      for (std::size_t b = 0; b < kNumClasses; ++b) synth.bands[b].*bk.field = real(key, parts[b]);
      return;
    }
    throw Error(ErrorKind::Config, "unknown config key '" + std::string(key) + "'");
  }
}

void PipelineConfig::propagate_seed() {
  synth.seed = seed;
  train.seed = seed;
}

void PipelineConfig::validate() const {
  features.validate();
  train.validate();
  synth.validate();
  if (!(train_fraction > 0 && train_fraction < 1)) throw Error(ErrorKind::Config, "train_fraction must lie in (0, 1)");
  if (n_raters < 1) throw Error(ErrorKind::Config, "synth.n_raters must be at least 1");
  if (rater_amplitude_um && !(*rater_amplitude_um >= 0))
    throw Error(ErrorKind::Config, "synth.rater_amplitude_um must be >= 0");
  if (!(target_agreement > 0 && target_agreement <= 1))
    throw Error(ErrorKind::Config, "synth.target_agreement must lie in (0, 1]");
  if (resolution_um_per_px && !(*resolution_um_per_px > 0))
    throw Error(ErrorKind::Config, "resolution_um_per_px must be positive");
}

std::filesystem::path PipelineConfig::neurons_path() const { return neurons.empty() ? out("neurons.csv") : neurons; }

std::vector<std::filesystem::path> PipelineConfig::label_paths() const {
  if (!labels.empty()) return labels;
  std::vector<std::filesystem::path> out_paths;
  for (std::size_t r = 0; r < n_raters; ++r) out_paths.push_back(out("labels_r" + std::to_string(r + 1) + ".csv"));
  return out_paths;
}

std::filesystem::path PipelineConfig::truth_path() const { return truth.empty() ? out("truth.csv") : truth; }

std::filesystem::path PipelineConfig::model_path() const { return model.empty() ? out("ensemble.json") : model; }

PipelineConfig parse_config(std::string_view text, PipelineConfig base) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorKind::Config, "config line " + std::to_string(line_no) + ": expected key = value");
    try {
      base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, "config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::NotFound, "config file not found: '" + path.string() + "'");
  return parse_config(read_text(path));
}

std::string config_text(const PipelineConfig& c) {
  std::ostringstream os;
  auto line = [&](const char* k, const std::string& v) { os << k << " = " << v << "\n"; };
  std::vector<std::string> parts;
  line("seed", std::to_string(c.seed));
  line("out_dir", c.out_dir.string());
  if (!c.neurons.empty()) line("neurons", c.neurons.string());
  if (!c.labels.empty()) {
    for (const auto& p : c.labels) parts.push_back(p.string());
    line("labels", join(parts));
  }
  if (!c.truth.empty()) line("truth", c.truth.string());
  if (!c.model.empty()) line("model", c.model.string());
  if (c.resolution_um_per_px) line("resolution_um_per_px", format_double(*c.resolution_um_per_px));
  parts.clear();
  for (auto k : c.features.k_set) parts.push_back(std::to_string(k));
  line("k_set", join(parts));
  line("slice_sectors", std::to_string(c.features.slice.sectors));
  line("k_slice", std::to_string(c.features.slice.k_slice));
  line("nni_mode", std::string(to_string(c.features.nni_mode)));
  line("density_k", std::to_string(c.features.density_k));
  line("rounds", std::to_string(c.train.rounds));
  line("max_depth", std::to_string(c.train.max_depth));
  line("learning_rate", format_double(c.train.learning_rate));
  line("l2_leaf_reg", format_double(c.train.l2_leaf_reg));
  line("min_samples_leaf", std::to_string(c.train.min_samples_leaf));
  line("train_fraction", format_double(c.train_fraction));
  line("synth.width_um", format_double(c.synth.width_um));
  line("synth.height_um", format_double(c.synth.height_um));
  line("synth.wave_amplitude_um", format_double(c.synth.wave_amplitude_um));
  line("synth.wave_wavelength_um", format_double(c.synth.wave_wavelength_um));
  for (const auto& bk : kBandKeys) {
    parts.clear();
    for (const auto& b : c.synth.bands) parts.push_back(format_double(b.*bk.field));
    line(bk.key, join(parts));
  }
  line("synth.n_raters", std::to_string(c.n_raters));
  line("synth.rater_amplitude_um", c.rater_amplitude_um ? format_double(*c.rater_amplitude_um) : "auto");
  line("synth.target_agreement", format_double(c.target_agreement));
  line("explain.sample", std::to_string(c.explain_sample));
  line("explain.top", std::to_string(c.explain_top));
  if (c.explain_id) line("explain.id", std::to_string(*c.explain_id));
  line("top_n", std::to_string(c.top_n));
  line("threads", std::to_string(c.threads));
  return os.str();
}

}  // namespace cortolam
