#include <numbers>
#include <random>

#include "cortolam/error.hpp"
#include "cortolam/features.hpp"
#include "cortolam/parallel.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cortolam;

namespace {

std::vector<NeuronRecord> neurons_at(const std::vector<Point2>& pts) {
  std::vector<NeuronRecord> out;
  for (std::size_t i = 0; i < pts.size(); ++i)
    out.push_back({static_cast<NeuronId>(i + 1), pts[i].x, pts[i].y, 40 + static_cast<double>(i % 7), 25, 0.8, 0.7,
                   100.0 + static_cast<double>(i % 5), 99.0});
  return out;
}

std::vector<Point2> uniform(std::size_t n, std::uint64_t seed, double side = 1000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, side);
  std::vector<Point2> p(n);
  for (auto& q : p) q = {u(rng), u(rng)};
  return p;
}

bool rel_close(double a, double b, double tol = 1e-9) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("equidistant neighbours") {
  std::vector<Point2> pts{{0, 0}};
  for (int i = 0; i < 8; ++i) {
    const double a = 2 * std::numbers::pi * i / 8;
    pts.push_back({5 * std::cos(a), 5 * std::sin(a)});
  }
  auto idx = build_index(neurons_at(pts));
  auto s = distance_stats(idx, 1, 8);
  CHECK(s.mean == doctest::Approx(5));
  CHECK(s.std == 0);
  CHECK(s.skew == 0);
  CHECK(s.kurt == 0);
  CHECK(s.entropy == 0);
}

TEST_CASE("distance statistics of 1,2,3,4") {
  std::vector<double> d{1, 2, 3, 4};
  auto s = distance_stats_from(d);
  auto o = oracle::moments(d);
  CHECK(s.mean == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(1.25)));
  CHECK(s.skew == doctest::Approx(0).epsilon(1e-12));
  CHECK(s.kurt == doctest::Approx(1.64 - 3));  // m4 = 2.5625, m2^2 = 1.5625
  CHECK(s.kurt == doctest::Approx(o.kurt));
  CHECK(s.entropy == doctest::Approx(oracle::entropy16(d)));
  CHECK(s.entropy == doctest::Approx(std::log(4.0)));
}

TEST_CASE("few neighbours set higher statistics to zero") {
  std::vector<double> d{2, 4};
  auto s = distance_stats_from(d);
  CHECK(s.degenerate);
  CHECK(s.mean == 3);
  CHECK(s.std == 0);
  CHECK(s.entropy == 0);
}

TEST_CASE("default K-set") {
  FeatureConfig cfg;
  CHECK(cfg.k_set == std::vector<std::size_t>{50, 100, 250, 500, 1000});
  CHECK(cfg.slice.sectors == 8);
  CHECK(cfg.slice.k_slice == 500);
  CHECK(cfg.density_k == 100);
  CHECK(cfg.nni_mode == NniMode::Members);
}

TEST_CASE("hull features on a square") {
  std::vector<Point2> pts{{0.5, 0.5}, {0, 0}, {1, 0}, {1, 1}, {0, 1}};
  auto idx = build_index(neurons_at(pts));
  auto h = hull_features(idx, 1, 4);
  CHECK(h.area_um2 == 1);
  CHECK(h.perimeter_um == 4);
  CHECK(h.mean_nnd_um == 1);
  CHECK(h.std_nnd_um == 0);
  CHECK_FALSE(h.degenerate);
}

TEST_CASE("collinear neighbours give zeros and a flag") {
  std::vector<Point2> pts{{0, 1}, {0, 0}, {1, 0}, {2, 0}};
  auto idx = build_index(neurons_at(pts));
  auto h = hull_features(idx, 1, 3);
  CHECK(h.degenerate);
  CHECK(h.area_um2 == 0);
  CHECK(h.mean_nnd_um == 0);
  auto d = local_density(idx, 1, 3);
  CHECK(d.degenerate);
  CHECK(d.value == 0);
  CHECK(nni(idx, 1, 3).value == 0);
}

TEST_CASE("density on a 100 um square") {
  std::vector<Point2> pts{{50, 50}, {0, 0}, {100, 0}, {100, 100}, {0, 100}};
  auto idx = build_index(neurons_at(pts));
  CHECK(local_density(idx, 1, 4).value == doctest::Approx(400));
}

TEST_CASE("density of a Poisson field") {
  // 2000 per mm^2 over 4 mm^2
  std::mt19937_64 rng(99);
  std::poisson_distribution<int> count(8000);
  const auto pts = uniform(static_cast<std::size_t>(count(rng)), 100, 2000);
  auto idx = build_index(neurons_at(pts));
  double sum = 0;
  int used = 0;
  for (std::size_t i = 0; i < pts.size() && used < 100; ++i) {
    if (std::abs(pts[i].x - 1000) > 250 || std::abs(pts[i].y - 1000) > 250) continue;
    sum += local_density(idx, static_cast<NeuronId>(i + 1), 500).value;
    ++used;
  }
  REQUIRE(used == 100);
  CHECK(std::abs(sum / used - 2000) / 2000 < 0.15);
}

TEST_CASE("nni extremes") {
  SUBCASE("nearly co-located members") {
    std::vector<Point2> members;
    for (double cx : {0.0, 100.0})
      for (double cy : {0.0, 100.0})
        for (int i = 0; i < 25; ++i) members.push_back({cx + 1e-6 * i, cy + 1e-6 * (i % 3)});
    auto v = nni_from({50, 50}, members, NniMode::Members);
    CHECK(v.value < 0.05);
  }
  SUBCASE("uniform random members") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1000);
    double sum = 0;
    for (int t = 0; t < 100; ++t) {
      std::vector<Point2> m(500);
      for (auto& p : m) p = {u(rng), u(rng)};
      sum += nni_from({500, 500}, m, NniMode::Members).value;
    }
    CHECK(sum / 100 >= 0.9);
    CHECK(sum / 100 <= 1.1);
  }
  SUBCASE("hand computed 4-point case") {
    // rectangle 2 x 1: nearest neighbour distances all 1, area 2, k 4
    std::vector<Point2> m{{0, 0}, {2, 0}, {2, 1}, {0, 1}};
    CHECK(nni_from({1, 0.5}, m, NniMode::Members).value == doctest::Approx(1.0 / (0.5 * std::sqrt(2.0 / 4))));
    const double central = std::hypot(1.0, 0.5);
    CHECK(nni_from({1, 0.5}, m, NniMode::Central).value == doctest::Approx(central / (0.5 * std::sqrt(0.5))));
  }
}

TEST_CASE("slices") {
  SUBCASE("sector centers") {
    std::vector<Point2> nb;
    for (int s = 0; s < 8; ++s) {
      const double a = 2 * std::numbers::pi * (s + 0.5) / 8;
      nb.push_back({std::cos(a), std::sin(a)});
    }
    auto p = slice_partition_from({0, 0}, nb, 8);
    for (double v : p) CHECK(v == 0.125);
    CHECK(shannon_index(p) == doctest::Approx(std::log(8.0)).epsilon(1e-12));
    CHECK(simpson_index(p) == doctest::Approx(1.0 / 8).epsilon(1e-12));
  }
  SUBCASE("all due east") {
    std::vector<Point2> nb{{1, 0}, {2, 0}, {3, 0.0}};
    auto p = slice_partition_from({0, 0}, nb, 8);
    CHECK(p[0] == 1);
    for (int s = 1; s < 8; ++s) CHECK(p[s] == 0);
    CHECK(shannon_index(p) == 0);
    CHECK(simpson_index(p) == 1);
  }
  SUBCASE("random cloud matches wedge test") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0, 10);
    std::vector<Point2> nb(2000);
    for (auto& q : nb) q = {g(rng), g(rng)};
    for (std::size_t r : {2u, 3u, 5u, 8u, 12u}) {
      auto p = slice_partition_from({0, 0}, nb, r);
      std::vector<double> want(r, 0.0);
      for (const auto& q : nb) want[oracle::sector(q.x, q.y, r)] += 1.0 / 2000;
      for (std::size_t s = 0; s < r; ++s) CHECK(p[s] == doctest::Approx(want[s]).epsilon(1e-12));
    }
  }
}

TEST_CASE("diversity indices") {
  std::vector<double> p{0.5, 0.25, 0.25};
  CHECK(shannon_index(p) == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-12));
  CHECK(simpson_index(p) == doctest::Approx(0.375).epsilon(1e-12));
  std::vector<double> q{0.25, 0.5, 0.25};
  CHECK(shannon_index(q) == shannon_index(p));
  CHECK(simpson_index(q) == simpson_index(p));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> w(8);
    double s = 0;
    for (auto& x : w) s += (x = u(rng));
    for (auto& x : w) x /= s;
    CHECK(shannon_index(w) <= std::log(8.0) + 1e-12);
    CHECK(simpson_index(w) >= 1.0 / 8 - 1e-12);
  }
}

TEST_CASE("schema shape") {
  FeatureConfig cfg;
  CHECK(feature_schema(cfg, true).size() == 6 + cfg.k_set.size() * 11 + 4 + 6);
  CHECK(feature_schema(cfg, false).size() == 6 + cfg.k_set.size() * 11 + 4);
  cfg.k_set = {10, 20};
  CHECK(feature_schema(cfg, true).size() == 6 + 2 * 11 + 4 + 6);
  CHECK(feature_schema(FeatureConfig{}, false)[6] == "dist_mean_k50");
}

TEST_CASE("neighbourhood features equal a brute-force implementation") {
  const auto pts = uniform(1000, 31);
  const auto neurons = neurons_at(pts);
  auto idx = build_index(neurons);
  FeatureConfig cfg;
  cfg.k_set = {10, 50, 200};
  cfg.slice.k_slice = 100;
  auto t = assemble_features(neurons, idx, cfg);
  std::vector<std::int64_t> ids(pts.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i + 1);

  for (std::size_t q = 0; q < pts.size(); q += 37) {
    for (auto k : cfg.k_set) {
      const auto nb = oracle::knn(pts, ids, q, k);
      std::vector<double> d;
      std::vector<Point2> m;
      for (const auto& n : nb) {
        d.push_back(n.distance);
        m.push_back(pts[static_cast<std::size_t>(n.id - 1)]);
      }
      const auto mo = oracle::moments(d);
      const auto h = oracle::hull(m);
      const auto nn = oracle::nnd(m);
      double nn_mean = 0;
      for (double v : nn) nn_mean += v;
      nn_mean /= static_cast<double>(nn.size());
      double nn_var = 0;
      for (double v : nn) nn_var += (v - nn_mean) * (v - nn_mean);
      const auto s = "_k" + std::to_string(k);
      auto col = [&](const std::string& name) { return t.at(q, t.column_index(name + s)); };
      CHECK(rel_close(col("dist_mean"), mo.mean));
      CHECK(rel_close(col("dist_std"), mo.std));
      CHECK(rel_close(col("dist_skew"), mo.skew, 1e-7));
      CHECK(rel_close(col("dist_kurt"), mo.kurt, 1e-7));
      CHECK(rel_close(col("dist_entropy"), oracle::entropy16(d)));
      CHECK(rel_close(col("hull_area"), h.area));
      CHECK(rel_close(col("hull_perimeter"), h.perimeter));
      CHECK(rel_close(col("hull_mean_nnd"), nn_mean));
      CHECK(rel_close(col("hull_std_nnd"), std::sqrt(nn_var / static_cast<double>(nn.size()))));
      CHECK(rel_close(col("density"), static_cast<double>(k) / h.area * 1e6));
      CHECK(rel_close(col("nni"), nn_mean / (0.5 * std::sqrt(h.area / static_cast<double>(k)))));
    }
    const auto nb = oracle::knn(pts, ids, q, 100);
    std::vector<double> p(8, 0.0);
    for (const auto& n : nb) {
      const auto& o = pts[static_cast<std::size_t>(n.id - 1)];
      p[oracle::sector(o.x - pts[q].x, o.y - pts[q].y, 8)] += 0.01;
    }
    double sh = 0, si = 0;
    for (double v : p) {
      if (v > 0) sh -= v * std::log(v);
      si += v * v;
    }
    CHECK(rel_close(t.at(q, t.column_index("shannon_k100_R8")), sh));
    CHECK(rel_close(t.at(q, t.column_index("simpson_k100_R8")), si));
    CHECK(rel_close(t.at(q, t.column_index("slice_min_frac")), *std::min_element(p.begin(), p.end())));
    CHECK(rel_close(t.at(q, t.column_index("slice_max_frac")), *std::max_element(p.begin(), p.end())));
  }
}

TEST_CASE("invariance under rigid motion and scaling") {
  const auto pts = uniform(600, 41);
  FeatureConfig cfg;
  cfg.k_set = {20, 80};
  cfg.slice.k_slice = 50;
  const auto base_neurons = neurons_at(pts);
  auto base = assemble_features(base_neurons, build_index(base_neurons), cfg);

  const double th = 0.7, s = 2.5;
  std::vector<Point2> moved, scaled;
  for (const auto& p : pts) {
    moved.push_back({std::cos(th) * p.x - std::sin(th) * p.y + 300, std::sin(th) * p.x + std::cos(th) * p.y - 80});
    scaled.push_back({s * p.x, s * p.y});
  }
  const auto mn = neurons_at(moved);
  const auto sn = neurons_at(scaled);
  auto mt = assemble_features(mn, build_index(mn), cfg);
  auto st = assemble_features(sn, build_index(sn), cfg);
  for (std::size_t r = 0; r < pts.size(); r += 13) {
    for (auto k : cfg.k_set) {
      const auto sfx = "_k" + std::to_string(k);
      for (const char* name : {"dist_mean", "dist_std", "hull_area", "hull_perimeter", "hull_mean_nnd", "density", "nni"}) {
        const auto c = base.column_index(name + sfx);
        CHECK(rel_close(mt.at(r, c), base.at(r, c), 1e-6));
      }
      auto at = [&](const FeatureTable& t, const char* name) { return t.at(r, t.column_index(name + sfx)); };
      CHECK(rel_close(at(st, "dist_mean"), s * at(base, "dist_mean"), 1e-9));
      CHECK(rel_close(at(st, "hull_area"), s * s * at(base, "hull_area"), 1e-9));
      CHECK(rel_close(at(st, "nni"), at(base, "nni"), 1e-9));
      CHECK(rel_close(at(st, "dist_skew"), at(base, "dist_skew"), 1e-6));
    }
    const auto sh = base.column_index("shannon_k50_R8");
    CHECK(rel_close(st.at(r, sh), base.at(r, sh), 1e-9));
  }
}

TEST_CASE("assembly is deterministic and thread-count independent") {
  const auto pts = uniform(700, 51);
  auto neurons = neurons_at(pts);
  neurons[3].gray_mean.reset();
  neurons[3].gray_median.reset();
  FeatureConfig cfg;
  cfg.k_set = {10, 40};
  cfg.slice.k_slice = 30;
  auto idx = build_index(neurons);
  set_thread_count(1);
  auto a = assemble_features(neurons, idx, cfg);
  set_thread_count(4);
  auto b = assemble_features(neurons, idx, cfg);
  set_thread_count(0);
  CHECK(a.values == b.values);
  CHECK(a.flags == b.flags);
  CHECK((a.flags[3] & flag::kGrayImputed) != 0);
  for (double v : a.values) CHECK(std::isfinite(v));
}

TEST_CASE("single neuron section") {
  auto neurons = neurons_at({{3, 4}});
  auto t = assemble_features(neurons, build_index(neurons), FeatureConfig{});
  REQUIRE(t.rows() == 1);
  CHECK(t.at(0, 0) == neurons[0].area_um2);
  CHECK(t.at(0, 2) == neurons[0].circularity);
  CHECK((t.flags[0] & flag::kNoNeighbors) != 0);
  for (std::size_t c = kShapeBlockSize; c < t.cols(); ++c) CHECK(t.at(0, c) == 0);
}

TEST_CASE("feature table round-trip") {
  TempDir dir("features");
  const auto pts = uniform(300, 61);
  auto neurons = neurons_at(pts);
  FeatureConfig cfg;
  cfg.k_set = {5, 25};
  cfg.slice.k_slice = 20;
  auto t = assemble_features(neurons, build_index(neurons), cfg);
  write_feature_table(t, dir / "f.csv", cfg);
  CHECK(std::filesystem::exists(schema_sidecar_path(dir / "f.csv")));
  auto back = load_feature_table(dir / "f.csv", cfg);
  CHECK(back.schema == t.schema);
  CHECK(back.ids == t.ids);
  CHECK(back.values == t.values);
  CHECK(back.flags == t.flags);
}

TEST_CASE("config validation and nni mode parsing") {
  FeatureConfig cfg;
  cfg.k_set = {};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.k_set = {5, 5};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.k_set = {5};
  cfg.slice.sectors = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(parse_nni_mode("central") == NniMode::Central);
  CHECK(parse_nni_mode("members") == NniMode::Members);
  CHECK_THROWS_AS(parse_nni_mode("other"), Error);
}
