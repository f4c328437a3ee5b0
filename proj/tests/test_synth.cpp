#include <cmath>

#include "cortolam/error.hpp"
#include "cortolam/eval.hpp"
#include "cortolam/synth.hpp"
#include "doctest.h"

using namespace cortolam;

namespace {

const SynthSection& default_section() {
  static const SynthSection s = generate(SynthConfig{});
  return s;
}

SynthConfig small_config() {
  SynthConfig c;
  c.width_um = 1600;
  c.height_um = 8000;
  return c;
}

}  // namespace

TEST_CASE("default section size and ordering") {
  const auto& s = default_section();
  CHECK(s.neurons.size() > 40000);
  CHECK(s.neurons.size() < 60000);
  CHECK(s.truth.size() == s.neurons.size());
  CHECK(s.truth.rater_id == "truth");
  for (std::size_t i = 0; i < s.neurons.size(); ++i) {
    CHECK(s.neurons[i].id == static_cast<NeuronId>(i + 1));
    if (i) {
      const auto& a = s.neurons[i - 1];
      const auto& b = s.neurons[i];
      CHECK((a.y_um < b.y_um || (a.y_um == b.y_um && a.x_um <= b.x_um)));
    }
    CHECK_NOTHROW(validate_neuron(s.neurons[i]));
  }
}

TEST_CASE("realized band densities are near target") {
  const auto& s = default_section();
  std::array<double, kNumClasses> count{};
  for (const auto& n : s.neurons) count[ordinal(*s.truth.find(n.id))] += 1;
  for (std::size_t b = 0; b < kNumClasses; ++b) {
    const auto& band = s.config.bands[b];
    // whole wavelengths across the width, so the sinusoids integrate to zero
    const double area_mm2 = s.config.width_um * band.thickness_fraction * s.config.height_um * 1e-6;
    const double expected = band.density_per_mm2 * area_mm2;
    if (expected < 500) continue;
    CHECK(std::abs(count[b] - expected) / expected <= 0.10);
  }
}

TEST_CASE("band is recoverable from position") {
  const auto& s = default_section();
  for (const auto& n : s.neurons) CHECK(s.band_at(n.x_um, n.y_um) == *s.truth.find(n.id));
  for (std::size_t b = 0; b + 1 < kNumClasses; ++b) {
    CHECK(s.boundary(b, 0) == doctest::Approx(s.nominal_boundary(b) + s.config.wave_amplitude_um * std::sin(s.phases[b])));
    if (b + 2 < kNumClasses) CHECK(s.nominal_boundary(b) < s.nominal_boundary(b + 1));
  }
}

TEST_CASE("largest neurons are mostly layer III") {
  const auto& s = default_section();
  auto c = top_n_composition(s.neurons, s.truth, 500);
  REQUIRE(c.plurality().has_value());
  CHECK(*c.plurality() == LayerClass::III);
}

TEST_CASE("layered size populations") {
  // III, V and VI carry larger somata on average than I, II, IV and WM
  const auto& s = default_section();
  std::array<double, kNumClasses> sum{}, cnt{};
  for (const auto& n : s.neurons) {
    const auto b = ordinal(*s.truth.find(n.id));
    sum[b] += n.area_um2;
    cnt[b] += 1;
  }
  auto mean = [&](LayerClass c) { return sum[ordinal(c)] / cnt[ordinal(c)]; };
  for (auto big : {LayerClass::III, LayerClass::V, LayerClass::VI})
    for (auto small : {LayerClass::I, LayerClass::II, LayerClass::IV, LayerClass::WM}) CHECK(mean(big) > mean(small));
}

TEST_CASE("generation is seeded") {
  auto cfg = small_config();
  auto a = generate(cfg);
  auto b = generate(cfg);
  CHECK(a.neurons == b.neurons);
  CHECK(a.truth.labels == b.truth.labels);
  cfg.seed = 7;
  auto c = generate(cfg);
  CHECK(c.neurons != a.neurons);
}

TEST_CASE("config validation") {
  auto bad = small_config();
  bad.width_um = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = small_config();
  bad.bands[0].thickness_fraction += 0.1;
  CHECK_THROWS_AS(generate(bad), Error);
  bad = small_config();
  bad.bands[ordinal(LayerClass::I)].density_per_mm2 = 700;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = small_config();
  bad.bands[ordinal(LayerClass::III)].thickness_fraction = 0;
  bad.bands[ordinal(LayerClass::V)].thickness_fraction += 0.22;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_NOTHROW(SynthConfig{}.validate());
}

TEST_CASE("simulated raters") {
  const auto s = generate(small_config());
  SUBCASE("zero amplitude is the truth") {
    auto r = synth_rater_labels(s, 0, 5, "r");
    CHECK(r.labels == s.truth.labels);
    CHECK(agreement(r, s.truth) == 1.0);
  }
  SUBCASE("agreement falls as amplitude grows") {
    double last = 1.0;
    for (double amp : {100.0, 400.0, 1200.0}) {
      auto a = synth_rater_labels(s, amp, rater_seed(3, 0), "a");
      auto b = synth_rater_labels(s, amp, rater_seed(3, 1), "b");
      const double ag = agreement(a, b);
      CHECK(ag <= last);
      last = ag;
    }
    CHECK(last < 0.9);
  }
  SUBCASE("seeds") {
    CHECK(rater_seed(1, 0) != rater_seed(1, 1));
    CHECK(rater_seed(1, 0) != rater_seed(2, 0));
    auto a = synth_rater_labels(s, 300, 9, "a");
    auto b = synth_rater_labels(s, 300, 9, "b");
    CHECK(a.labels == b.labels);
    CHECK(b.rater_id == "b");
  }
}

TEST_CASE("amplitude calibration hits the target agreement") {
  const auto s = generate(small_config());
  auto cal = calibrate_disagreement(s, 3, 0.80, 11);
  REQUIRE(cal.raters.size() == 3);
  CHECK(cal.raters[0].rater_id == "r1");
  CHECK(cal.raters[2].rater_id == "r3");
  CHECK(std::abs(cal.mean_pairwise_agreement - 0.80) <= 0.05);
  const auto pw = pairwise_agreement(cal.raters);
  CHECK(pw.pairs.mean == doctest::Approx(cal.mean_pairwise_agreement));
  CHECK(cal.amplitude_um > 0);
  auto again = calibrate_disagreement(s, 3, 0.80, 11);
  CHECK(again.amplitude_um == cal.amplitude_um);
}
