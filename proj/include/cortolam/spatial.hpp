#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "cortolam/data.hpp"

namespace cortolam {

struct Point2 {
  double x = 0;
  double y = 0;

  bool operator==(const Point2&) const = default;
};

inline double squared_distance(Point2 a, Point2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

struct Neighbor {
  NeuronId id = 0;
  std::size_t index = 0;  // position in the indexed collection
  double distance = 0;
};

struct KnnResult {
  std::vector<Neighbor> neighbors;  // ascending by (distance, id)
  bool clamped = false;             // requested k exceeded n-1
};

/// Static 2-d tree over a point set with exact k-nearest and radius queries.
///
/// Results are ordered by (distance, id); equal distances resolve to the
/// lower id so answers never depend on traversal order. Immutable after
/// construction and safe to query from several threads at once.
class KdTree {
 public:
  static constexpr std::size_t kLeafSize = 8;

  /// `ids` defaults to 0..n-1. Throws Error(Degenerate) for an empty set.
  explicit KdTree(std::vector<Point2> points, std::vector<NeuronId> ids = {});

  std::size_t size() const { return points_.size(); }
  Point2 point(std::size_t index) const { return points_[index]; }
  NeuronId id(std::size_t index) const { return ids_[index]; }
  std::optional<std::size_t> index_of(NeuronId id) const;

  /// The k points closest to q, skipping the point at `exclude` if given.
  std::vector<Neighbor> nearest(Point2 q, std::size_t k,
                                std::optional<std::size_t> exclude = std::nullopt) const;

  /// All points with distance <= radius, ordered like nearest().
  std::vector<Neighbor> within_radius(Point2 q, double radius,
                                      std::optional<std::size_t> exclude = std::nullopt) const;

 private:
  struct Node {
    double min_x, min_y, max_x, max_y;
    std::uint32_t begin, end;   // range into order_
    std::int32_t left = -1;     // -1 for leaves
    std::int32_t right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  double box_distance2(const Node& n, Point2 q) const;

  std::vector<Point2> points_;
  std::vector<NeuronId> ids_;
  std::vector<std::uint32_t> order_;
  std::vector<Point2> ordered_points_;
  std::vector<Node> nodes_;
  std::unordered_map<NeuronId, std::size_t> by_id_;
};

/// Spatial index over a neuron section.
using SpatialIndex = KdTree;

/// Throws Error(Degenerate) if `neurons` is empty.
SpatialIndex build_index(std::span<const NeuronRecord> neurons);

/// k nearest neighbours of a neuron, excluding the neuron itself. k is
/// clamped to n-1 and the clamp reported. Throws Error(Reference) for an
/// unknown id and Error(Config) for k == 0.
KnnResult knn(const SpatialIndex& index, NeuronId query_id, std::size_t k);

/// Strictly convex polygon, counter-clockwise.
struct Hull {
  std::vector<Point2> vertices;
  double area_um2 = 0;
  double perimeter_um = 0;
};

/// Monotone-chain hull. Collinear boundary points are dropped. Throws
/// Error(Degenerate) for fewer than three points or an all-collinear set.
Hull convex_hull(std::span<const Point2> points);

double polygon_area(std::span<const Point2> ccw_vertices);
double polygon_perimeter(std::span<const Point2> vertices);

/// For each point, the distance to its nearest other point in the same set
/// (0 for duplicates). Sets of size < 2 yield zeros.
std::vector<double> nearest_neighbor_distances(std::span<const Point2> points);

}  // namespace cortolam
