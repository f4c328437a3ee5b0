#include "cortolam/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "cortolam/error.hpp"

namespace cortolam {

namespace {

struct Candidate {
  double d2;
  NeuronId id;
  std::size_t index;
};

// Max-heap on (d2, id): the top is the current worst accepted candidate.
struct WorseFirst {
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    return a.id < b.id;
  }
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.d2 != b.d2) return a.d2 < b.d2;
  return a.id < b.id;
}

std::vector<Neighbor> to_neighbors(std::vector<Candidate> cands) {
  std::sort(cands.begin(), cands.end(), better);
  std::vector<Neighbor> out;
  out.reserve(cands.size());
  for (const auto& c : cands) out.push_back({c.id, c.index, std::sqrt(c.d2)});
  return out;
}

}  // namespace

KdTree::KdTree(std::vector<Point2> points, std::vector<NeuronId> ids)
    : points_(std::move(points)), ids_(std::move(ids)) {
  if (points_.empty()) throw Error(ErrorKind::Degenerate, "cannot build a spatial index over zero points");
  if (ids_.empty()) {
    ids_.resize(points_.size());
    std::iota(ids_.begin(), ids_.end(), NeuronId{0});
  }
  if (ids_.size() != points_.size())
    throw Error(ErrorKind::Validation, "spatial index: id count does not match point count");
  by_id_.reserve(ids_.size() * 2);
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (!by_id_.emplace(ids_[i], i).second)
      throw Error(ErrorKind::Validation, "spatial index: duplicate id " + std::to_string(ids_[i]));

  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  build(0, static_cast<std::uint32_t>(points_.size()));
  ordered_points_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) ordered_points_[i] = points_[order_[i]];
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  Node node{};
  node.begin = begin;
  node.end = end;
  node.min_x = node.min_y = std::numeric_limits<double>::infinity();
  node.max_x = node.max_y = -std::numeric_limits<double>::infinity();
  for (auto i = begin; i < end; ++i) {
    const auto& p = points_[order_[i]];
    node.min_x = std::min(node.min_x, p.x);
    node.max_x = std::max(node.max_x, p.x);
    node.min_y = std::min(node.min_y, p.y);
    node.max_y = std::max(node.max_y, p.y);
  }
  const auto self = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) return self;

  const bool split_x = (node.max_x - node.min_x) >= (node.max_y - node.min_y);
  const auto mid = begin + (end - begin) / 2;
  auto key_less = [&](std::uint32_t a, std::uint32_t b) {
    const double ka = split_x ? points_[a].x : points_[a].y;
    const double kb = split_x ? points_[b].x : points_[b].y;
    if (ka != kb) return ka < kb;
    return a < b;
  };
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, key_less);
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

double KdTree::box_distance2(const Node& n, Point2 q) const {
  const double dx = q.x < n.min_x ? n.min_x - q.x : (q.x > n.max_x ? q.x - n.max_x : 0.0);
  const double dy = q.y < n.min_y ? n.min_y - q.y : (q.y > n.max_y ? q.y - n.max_y : 0.0);
  return dx * dx + dy * dy;
}

std::optional<std::size_t> KdTree::index_of(NeuronId id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<Neighbor> KdTree::nearest(Point2 q, std::size_t k, std::optional<std::size_t> exclude) const {
  if (k == 0) return {};
  std::vector<Candidate> storage;
  storage.reserve(k + 1);
  std::priority_queue<Candidate, std::vector<Candidate>, WorseFirst> heap(WorseFirst{}, std::move(storage));

  struct Pending {
    std::int32_t node;
    double d2;
  };
  std::vector<Pending> stack;
  stack.reserve(64);
  stack.push_back({0, box_distance2(nodes_[0], q)});
  while (!stack.empty()) {
    const auto [ni, bd2] = stack.back();
    stack.pop_back();
    // Equal box distance may still hold a lower-id tie, so prune only on >.
    if (heap.size() == k && bd2 > heap.top().d2) continue;
    const Node& node = nodes_[ni];
    if (node.left < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        if (exclude && *exclude == idx) continue;
        Candidate c{squared_distance(ordered_points_[i], q), ids_[idx], idx};
        if (heap.size() < k) {
          heap.push(c);
        } else if (better(c, heap.top())) {
          heap.pop();
          heap.push(c);
        }
      }
      continue;
    }
    const double dl = box_distance2(nodes_[node.left], q);
    const double dr = box_distance2(nodes_[node.right], q);
    // Push the farther child first so the nearer one is explored next.
    if (dl <= dr) {
      stack.push_back({node.right, dr});
      stack.push_back({node.left, dl});
    } else {
      stack.push_back({node.left, dl});
      stack.push_back({node.right, dr});
    }
  }
  std::vector<Candidate> cands;
  cands.reserve(heap.size());
  while (!heap.empty()) {
    cands.push_back(heap.top());
    heap.pop();
  }
  return to_neighbors(std::move(cands));
}

std::vector<Neighbor> KdTree::within_radius(Point2 q, double radius, std::optional<std::size_t> exclude) const {
  std::vector<Candidate> cands;
  if (!(radius >= 0)) return {};
  const double r2 = radius * radius;
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const auto ni = stack.back();
    stack.pop_back();
    const Node& node = nodes_[ni];
    if (box_distance2(node, q) > r2) continue;
    if (node.left < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        if (exclude && *exclude == idx) continue;
        const double d2 = squared_distance(ordered_points_[i], q);
        if (d2 <= r2) cands.push_back({d2, ids_[idx], idx});
      }
      continue;
    }
    stack.push_back(node.right);
    stack.push_back(node.left);
  }
  return to_neighbors(std::move(cands));
}

SpatialIndex build_index(std::span<const NeuronRecord> neurons) {
  if (neurons.empty()) throw Error(ErrorKind::Degenerate, "cannot build a spatial index over an empty section");
  std::vector<Point2> pts;
  std::vector<NeuronId> ids;
  pts.reserve(neurons.size());
  ids.reserve(neurons.size());
  for (const auto& n : neurons) {
    pts.push_back({n.x_um, n.y_um});
    ids.push_back(n.id);
  }
  return KdTree(std::move(pts), std::move(ids));
}

KnnResult knn(const SpatialIndex& index, NeuronId query_id, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::Config, "knn: k must be at least 1");
  auto qi = index.index_of(query_id);
  if (!qi) throw Error(ErrorKind::Reference, "knn: unknown neuron id " + std::to_string(query_id));
  KnnResult res;
  const std::size_t available = index.size() - 1;
  res.clamped = k > available;
  res.neighbors = index.nearest(index.point(*qi), std::min(k, available), *qi);
  return res;
}

namespace {

double cross(Point2 o, Point2 a, Point2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

}  // namespace

double polygon_area(std::span<const Point2> v) {
  double twice = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % v.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

double polygon_perimeter(std::span<const Point2> v) {
  double p = 0;
  for (std::size_t i = 0; i < v.size(); ++i) p += std::sqrt(squared_distance(v[i], v[(i + 1) % v.size()]));
  return p;
}

Hull convex_hull(std::span<const Point2> points) {
  if (points.size() < 3)
    throw Error(ErrorKind::Degenerate, "convex hull needs at least 3 points, got " + std::to_string(points.size()));
  std::vector<Point2> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });

  std::vector<Point2> h(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    const auto& p = pts[i];
    while (k >= lower && cross(h[k - 2], h[k - 1], p) <= 0) --k;
    h[k++] = p;
  }
  h.resize(k > 0 ? k - 1 : 0);  // last point repeats the first
  if (h.size() < 3) throw Error(ErrorKind::Degenerate, "convex hull is degenerate (all points collinear)");

  Hull hull;
  hull.vertices = std::move(h);
  hull.area_um2 = polygon_area(hull.vertices);
  hull.perimeter_um = polygon_perimeter(hull.vertices);
  if (!(hull.area_um2 > 0)) throw Error(ErrorKind::Degenerate, "convex hull has zero area");
  return hull;
}

std::vector<double> nearest_neighbor_distances(std::span<const Point2> points) {
  std::vector<double> out(points.size(), 0.0);
  if (points.size() < 2) return out;
  KdTree tree(std::vector<Point2>(points.begin(), points.end()));
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = tree.nearest(points[i], 1, i).front().distance;
  return out;
}

}  // namespace cortolam
