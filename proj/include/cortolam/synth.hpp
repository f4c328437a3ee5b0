#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cortolam/data.hpp"
#include "cortolam/layer.hpp"

namespace cortolam {

/// Generation parameters of one band (layer).
struct BandParams {
  double thickness_fraction = 0;
  double density_per_mm2 = 0;
  double area_log_mu = 0;  // soma area ~ exp(N(mu, sigma)) in um^2
  double area_log_sigma = 0;
  double circularity_alpha = 0;  // beta distribution
  double circularity_beta = 0;
  double roundness_alpha = 0;
  double roundness_beta = 0;
  double gray_mu = 0;
  double gray_sigma = 0;
};

/// Rectangular section with horizontal bands I..WM stacked top (y = 0) to
/// bottom. Boundaries between bands are sinusoids around their nominal depth.
struct SynthConfig {
  double width_um = 4000;
  double height_um = 20000;
  std::array<BandParams, kNumClasses> bands = default_bands();
  double wave_amplitude_um = 50;
  double wave_wavelength_um = 800;
  std::uint64_t seed = 42;

  static std::array<BandParams, kNumClasses> default_bands();

  /// Throws Error(Config): non-positive sizes, fractions not summing to 1,
  /// a zero-area band, or densities out of the sparse < average < dense order.
  void validate() const;
};

struct SynthSection {
  SynthConfig config;
  std::vector<NeuronRecord> neurons;  // sorted by (y, x); ids 1..n
  LabelSet truth;                     // rater_id "truth"
  std::array<double, kNumClasses - 1> phases{};  // boundary sinusoid phases

  /// Nominal (unperturbed) depth of the boundary below band b.
  double nominal_boundary(std::size_t b) const;
  /// Perturbed boundary below band b at horizontal position x.
  double boundary(std::size_t b, double x) const;
  /// Band containing (x, y): the number of boundaries lying above y.
  LayerClass band_at(double x, double y) const;
};

SynthSection generate(const SynthConfig& cfg);

/// A simulated rater: every boundary is shifted by smooth noise of amplitude
/// `disagreement_um` (a normalized sum of three random sinusoids per
/// boundary) and neurons are relabeled against the shifted curves.
/// Amplitude 0 reproduces the truth exactly.
LabelSet synth_rater_labels(const SynthSection& section, double disagreement_um, std::uint64_t seed,
                            const std::string& rater_id = "rater");

/// Seed of simulated rater r (0-based) derived from a base seed.
std::uint64_t rater_seed(std::uint64_t base, std::size_t r);

struct Calibration {
  double amplitude_um = 0;
  double mean_pairwise_agreement = 1;
  std::vector<LabelSet> raters;
};

/// Bisects the rater amplitude until the mean pairwise agreement of
/// `n_raters` simulated raters is within `tolerance` of `target`.
Calibration calibrate_disagreement(const SynthSection& section, std::size_t n_raters, double target,
                                   std::uint64_t seed, double tolerance = 0.0025);

}  // namespace cortolam
