#include <random>

#include "cortolam/error.hpp"
#include "cortolam/spatial.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cortolam;

namespace {

std::vector<NeuronRecord> neurons_at(const std::vector<Point2>& pts) {
  std::vector<NeuronRecord> out;
  for (std::size_t i = 0; i < pts.size(); ++i)
    out.push_back({static_cast<NeuronId>(i + 1), pts[i].x, pts[i].y, 10, 10, 0.5, 0.5, std::nullopt, std::nullopt});
  return out;
}

std::vector<Point2> uniform(std::size_t n, std::uint64_t seed, double side = 1000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, side);
  std::vector<Point2> p(n);
  for (auto& q : p) q = {u(rng), u(rng)};
  return p;
}

}  // namespace

TEST_CASE("single neuron index") {
  auto idx = build_index(neurons_at({{5, 5}}));
  auto nb = idx.nearest({100, -3}, 1);
  REQUIRE(nb.size() == 1);
  CHECK(nb[0].id == 1);
  CHECK_THROWS_AS(build_index(std::vector<NeuronRecord>{}), Error);
}

TEST_CASE("collinear neighbours") {
  auto idx = build_index(neurons_at({{0, 0}, {1, 0}, {3, 0}}));
  auto r = knn(idx, 1, 2);
  REQUIRE(r.neighbors.size() == 2);
  CHECK(r.neighbors[0].distance == 1);
  CHECK(r.neighbors[1].distance == 3);
  CHECK_FALSE(r.clamped);
}

TEST_CASE("k beyond n-1 is clamped") {
  auto idx = build_index(neurons_at(uniform(10, 1)));
  auto r = knn(idx, 4, 15);
  CHECK(r.neighbors.size() == 9);
  CHECK(r.clamped);
  CHECK_THROWS_AS(knn(idx, 99, 3), Error);
  CHECK_THROWS_AS(knn(idx, 1, 0), Error);
}

TEST_CASE("duplicate coordinates are both returned") {
  auto idx = build_index(neurons_at({{1, 1}, {1, 1}, {1, 1}, {9, 9}}));
  auto r = knn(idx, 1, 2);
  REQUIRE(r.neighbors.size() == 2);
  CHECK(r.neighbors[0].id == 2);
  CHECK(r.neighbors[1].id == 3);
  CHECK(r.neighbors[0].distance == 0);
}

TEST_CASE("knn equals brute force on random points") {
  const auto pts = uniform(1000, 7);
  std::vector<std::int64_t> ids(pts.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i + 1);
  auto idx = build_index(neurons_at(pts));
  for (std::size_t q = 0; q < pts.size(); ++q) {
    auto got = knn(idx, ids[q], 50).neighbors;
    auto want = oracle::knn(pts, ids, q, 50);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].id == want[i].id);
      CHECK(got[i].distance == want[i].distance);
    }
  }
}

TEST_CASE("ties are broken by id on a lattice") {
  std::vector<Point2> pts;
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) pts.push_back({static_cast<double>(x), static_cast<double>(y)});
  std::vector<std::int64_t> ids(pts.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i + 1);
  auto idx = build_index(neurons_at(pts));
  for (std::size_t q = 0; q < pts.size(); q += 7) {
    auto got = knn(idx, ids[q], 20).neighbors;
    auto want = oracle::knn(pts, ids, q, 20);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].id == want[i].id);
  }
}

TEST_CASE("large index is exact on sampled queries") {
  const auto pts = uniform(100000, 8, 10000);
  std::vector<std::int64_t> ids(pts.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i + 1);
  auto idx = build_index(neurons_at(pts));
  for (std::size_t q = 0; q < pts.size(); q += 9973) {
    auto got = knn(idx, ids[q], 30).neighbors;
    auto want = oracle::knn(pts, ids, q, 30);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].id == want[i].id);
  }
}

TEST_CASE("kth distance is nondecreasing in k") {
  const auto pts = uniform(500, 9);
  auto idx = build_index(neurons_at(pts));
  auto r = knn(idx, 17, 200).neighbors;
  for (std::size_t i = 1; i < r.size(); ++i) CHECK(r[i - 1].distance <= r[i].distance);
}

TEST_CASE("radius query matches brute force") {
  const auto pts = uniform(800, 12);
  KdTree t(pts);
  const Point2 q{500, 500};
  auto got = t.within_radius(q, 120);
  std::size_t want = 0;
  for (const auto& p : pts)
    if (std::hypot(p.x - q.x, p.y - q.y) <= 120) ++want;
  CHECK(got.size() == want);
}

TEST_CASE("unit square hull") {
  std::vector<Point2> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
  auto h = convex_hull(sq);
  CHECK(h.vertices.size() == 4);
  CHECK(h.area_um2 == 1);
  CHECK(h.perimeter_um == 4);
}

TEST_CASE("degenerate hulls") {
  CHECK_THROWS_AS(convex_hull(std::vector<Point2>{{0, 0}, {1, 1}}), Error);
  std::vector<Point2> line{{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 4}};
  try {
    convex_hull(line);
    FAIL("expected degenerate error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Degenerate);
  }
}

TEST_CASE("hull matches the exhaustive oracle") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto pts = uniform(200, 100 + seed);
    auto h = convex_hull(pts);
    auto o = oracle::hull(pts);
    CHECK(h.area_um2 == doctest::Approx(o.area).epsilon(1e-9));
    CHECK(h.perimeter_um == doctest::Approx(o.perimeter).epsilon(1e-9));
    CHECK(h.vertices.size() == o.edges);
    // every point inside, vertices strictly convex and counter-clockwise
    const auto& v = h.vertices;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& a = v[i];
      const auto& b = v[(i + 1) % v.size()];
      const auto& c = v[(i + 2) % v.size()];
      CHECK((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x) > 0);
      for (const auto& p : pts) {
        const double cr = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        CHECK(cr / std::hypot(b.x - a.x, b.y - a.y) >= -1e-9);
      }
    }
    CHECK(polygon_area(v) == doctest::Approx(h.area_um2));
  }
}

TEST_CASE("nearest neighbour distances within a member set") {
  const auto pts = uniform(300, 21);
  auto got = nearest_neighbor_distances(pts);
  auto want = oracle::nnd(pts);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(got[i] == want[i]);
}
