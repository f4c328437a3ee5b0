#include "cortolam/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cortolam/error.hpp"
#include "cortolam/eval.hpp"

namespace cortolam {

std::array<BandParams, kNumClasses> SynthConfig::default_bands() {
  //         frac  dens   a_mu a_sd  circ a,b    round a,b   gray mu,sd
  return {{
      {0.10, 250, 4.45, 0.30, 8.0, 3.0, 7.0, 3.5, 150, 14},   // I
      {0.10, 1200, 4.55, 0.28, 9.0, 2.5, 8.0, 3.0, 130, 14},  // II
      {0.22, 600, 5.25, 0.38, 7.0, 3.0, 6.0, 3.5, 120, 14},   // III
      {0.10, 1200, 4.55, 0.28, 9.0, 2.5, 8.0, 3.0, 125, 14},  // IV
      {0.16, 600, 5.05, 0.38, 7.0, 3.0, 6.0, 3.5, 115, 14},   // V
      {0.16, 600, 4.95, 0.36, 5.0, 3.5, 4.5, 4.0, 110, 14},   // VI
      {0.16, 150, 4.40, 0.30, 6.0, 3.0, 5.5, 3.5, 100, 14},   // WM
  }};
}

void SynthConfig::validate() const {
  if (!(width_um > 0) || !(height_um > 0)) throw Error(ErrorKind::Config, "section width and height must be positive");
  if (!(wave_amplitude_um >= 0) || !(wave_wavelength_um > 0))
    throw Error(ErrorKind::Config, "boundary amplitude must be >= 0 and wavelength > 0");
  double total = 0;
  for (std::size_t b = 0; b < kNumClasses; ++b) {
    const auto& p = bands[b];
    const auto name = std::string(layer_name(layer_from_ordinal(static_cast<int>(b))));
    if (!(p.thickness_fraction > 0)) throw Error(ErrorKind::Config, "band " + name + " has zero area");
    if (!(p.density_per_mm2 > 0)) throw Error(ErrorKind::Config, "band " + name + " density must be positive");
    if (!(p.area_log_sigma > 0) || !(p.gray_sigma >= 0) || !(p.circularity_alpha > 0) || !(p.circularity_beta > 0) ||
        !(p.roundness_alpha > 0) || !(p.roundness_beta > 0))
      throw Error(ErrorKind::Config, "band " + name + " has invalid attribute distribution parameters");
    total += p.thickness_fraction;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::Config, "band thickness fractions must sum to 1");
  auto dens = [&](LayerClass c) { return bands[ordinal(c)].density_per_mm2; };
  const double dense = std::min(dens(LayerClass::II), dens(LayerClass::IV));
  const double avg_lo = std::min({dens(LayerClass::III), dens(LayerClass::V), dens(LayerClass::VI)});
  const double avg_hi = std::max({dens(LayerClass::III), dens(LayerClass::V), dens(LayerClass::VI)});
  const double sparse = std::max(dens(LayerClass::I), dens(LayerClass::WM));
  if (!(dense > avg_hi) || !(avg_lo > sparse))
    throw Error(ErrorKind::Config, "densities must satisfy II, IV > III, V, VI > I, WM");
}

double SynthSection::nominal_boundary(std::size_t b) const {
  double acc = 0;
  for (std::size_t i = 0; i <= b; ++i) acc += config.bands[i].thickness_fraction;
  return acc * config.height_um;
}

double SynthSection::boundary(std::size_t b, double x) const {
  return nominal_boundary(b) +
         config.wave_amplitude_um * std::sin(2 * std::numbers::pi * x / config.wave_wavelength_um + phases[b]);
}

LayerClass SynthSection::band_at(double x, double y) const {
  int band = 0;
  for (std::size_t b = 0; b + 1 < kNumClasses; ++b)
    if (y >= boundary(b, x)) ++band;
  return layer_from_ordinal(band);
}

namespace {

double sample_beta(std::mt19937_64& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

}  // namespace

SynthSection generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthSection s;
  s.config = cfg;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& ph : s.phases) ph = 2 * std::numbers::pi * unit(rng);

  struct Placed {
    double x, y;
    int band;
    NeuronRecord rec;
  };
  std::vector<Placed> placed;
  const double amp = cfg.wave_amplitude_um;
  for (std::size_t b = 0; b < kNumClasses; ++b) {
    const auto& p = cfg.bands[b];
    const double top = std::max(0.0, (b == 0 ? 0.0 : s.nominal_boundary(b - 1) - amp));
    const double bottom = std::min(cfg.height_um, (b + 1 == kNumClasses ? cfg.height_um : s.nominal_boundary(b) + amp));
    const double strip_mm2 = cfg.width_um * (bottom - top) * 1e-6;
    std::poisson_distribution<long long> count(p.density_per_mm2 * strip_mm2);
    const long long n = count(rng);
    std::lognormal_distribution<double> area(p.area_log_mu, p.area_log_sigma);
    std::normal_distribution<double> gray(p.gray_mu, p.gray_sigma);
    std::normal_distribution<double> gray_jitter(0.0, 3.0);
    for (long long i = 0; i < n; ++i) {
      const double x = cfg.width_um * unit(rng);
      const double y = top + (bottom - top) * unit(rng);
      NeuronRecord r;
      r.area_um2 = area(rng);
      r.circularity = std::clamp(sample_beta(rng, p.circularity_alpha, p.circularity_beta), 0.05, 1.0);
      r.roundness = std::clamp(sample_beta(rng, p.roundness_alpha, p.roundness_beta), 0.05, 1.0);
      r.perimeter_um = std::sqrt(4 * std::numbers::pi * r.area_um2 / r.circularity);
      const double g = std::clamp(gray(rng), 0.0, 255.0);
      r.gray_mean = g;
      r.gray_median = std::clamp(g + gray_jitter(rng), 0.0, 255.0);
      if (ordinal(s.band_at(x, y)) != static_cast<int>(b)) continue;
      placed.push_back({x, y, static_cast<int>(b), r});
    }
  }
  std::sort(placed.begin(), placed.end(), [](const Placed& a, const Placed& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  s.truth.rater_id = "truth";
  s.neurons.reserve(placed.size());
  NeuronId next = 1;
  for (auto& p : placed) {
    p.rec.id = next++;
    p.rec.x_um = p.x;
    p.rec.y_um = p.y;
    s.truth.labels.emplace(p.rec.id, layer_from_ordinal(p.band));
    s.neurons.push_back(p.rec);
  }
  return s;
}

std::uint64_t rater_seed(std::uint64_t base, std::size_t r) {
  // splitmix64 finalizer over (base, r)
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (r + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

LabelSet synth_rater_labels(const SynthSection& section, double disagreement_um, std::uint64_t seed,
                            const std::string& rater_id) {
  if (!(disagreement_um >= 0)) throw Error(ErrorKind::Config, "disagreement amplitude must be >= 0");
  struct Wave {
    double weight, wavelength, phase;
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::array<std::array<Wave, 3>, kNumClasses - 1> noise{};
  std::array<double, kNumClasses - 1> norm{};
  for (std::size_t b = 0; b + 1 < kNumClasses; ++b) {
    for (auto& w : noise[b]) {
      w.weight = 0.5 + 0.5 * unit(rng);
      w.wavelength = 600 + 2400 * unit(rng);
      w.phase = 2 * std::numbers::pi * unit(rng);
      norm[b] += w.weight;
    }
  }
  LabelSet out;
  out.rater_id = rater_id;
  for (const auto& n : section.neurons) {
    int band = 0;
    for (std::size_t b = 0; b + 1 < kNumClasses; ++b) {
      double shift = 0;
      if (disagreement_um > 0) {
        for (const auto& w : noise[b])
          shift += w.weight * std::sin(2 * std::numbers::pi * n.x_um / w.wavelength + w.phase);
        shift *= disagreement_um / norm[b];
      }
      if (n.y_um >= section.boundary(b, n.x_um) + shift) ++band;
    }
    out.labels.emplace(n.id, layer_from_ordinal(band));
  }
  return out;
}

namespace {

std::vector<LabelSet> make_raters(const SynthSection& s, std::size_t n, double amp, std::uint64_t seed) {
  std::vector<LabelSet> raters;
  for (std::size_t r = 0; r < n; ++r)
    raters.push_back(synth_rater_labels(s, amp, rater_seed(seed, r), "r" + std::to_string(r + 1)));
  return raters;
}

double mean_pairwise(const std::vector<LabelSet>& raters) {
  return pairwise_agreement(raters).pairs.mean;
}

}  // namespace

Calibration calibrate_disagreement(const SynthSection& section, std::size_t n_raters, double target,
                                   std::uint64_t seed, double tolerance) {
  if (n_raters < 2) throw Error(ErrorKind::Config, "calibration needs at least two raters");
  if (!(target > 0 && target <= 1)) throw Error(ErrorKind::Config, "target agreement must lie in (0, 1]");
  Calibration c;
  double lo = 0;
  double hi = section.config.height_um / 10;
  auto eval_at = [&](double amp) {
    c.amplitude_um = amp;
    c.raters = make_raters(section, n_raters, amp, seed);
    c.mean_pairwise_agreement = mean_pairwise(c.raters);
    return c.mean_pairwise_agreement;
  };
  if (eval_at(hi) > target)
    throw Error(ErrorKind::Degenerate, "raters still agree above the target at the largest amplitude tried");
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double a = eval_at(mid);
    if (std::abs(a - target) <= tolerance) return c;
    if (a > target)
      lo = mid;
    else
      hi = mid;
  }
  return c;
}

}  // namespace cortolam
