#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "sapling/model.hpp"

namespace sapling {

/// Static 3D kd-tree. Results are ordered by (squared distance, index), so
/// ties resolve to the lowest point index and queries are deterministic.
class KdTree {
 public:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  explicit KdTree(std::span<const Vec3> points, std::size_t leaf_size = 12);

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  /// k nearest points to `query`, optionally skipping index `skip`.
  /// Returns (squared distance, index) pairs sorted ascending.
  std::vector<std::pair<double, std::size_t>> knn(const Vec3& query, std::size_t k,
                                                  std::size_t skip = kNone) const;

  /// Nearest point index (kNone when empty).
  std::size_t nearest(const Vec3& query) const;

  /// All points within `radius` (inclusive), sorted by (distance, index).
  std::vector<std::pair<double, std::size_t>> radius(const Vec3& query, double radius) const;

 private:
  struct Node {
    std::size_t begin = 0, end = 0;  // range into order_
    std::size_t left = kNone, right = kNone;
    int axis = -1;
    double split = 0.0;
    Eigen::Vector3d lo, hi;  // bounding box
  };

  std::size_t build(std::size_t begin, std::size_t end);
  template <typename Visit>
  void search(std::size_t node, const Vec3& q, double& bound, Visit&& visit) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

}  // namespace sapling
