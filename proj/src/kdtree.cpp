#include "sapling/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace sapling {

namespace {

using Hit = std::pair<double, std::size_t>;

double box_distance2(const Vec3& q, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  double d = 0.0;
  for (int k = 0; k < 3; ++k) {
    if (q[k] < lo[k]) d += (lo[k] - q[k]) * (lo[k] - q[k]);
    else if (q[k] > hi[k]) d += (q[k] - hi[k]) * (q[k] - hi[k]);
  }
  return d;
}

}  // namespace

KdTree::KdTree(std::span<const Vec3> points, std::size_t leaf_size)
    : points_(points.begin(), points.end()), order_(points.size()), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
    build(0, points_.size());
  }
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.emplace_back();
  Node node;
  node.begin = begin;
  node.end = end;
  node.lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  for (std::size_t i = begin; i < end; ++i) {
    node.lo = node.lo.cwiseMin(points_[order_[i]]);
    node.hi = node.hi.cwiseMax(points_[order_[i]]);
  }
  if (end - begin > leaf_size_) {
    const Eigen::Vector3d extent = node.hi - node.lo;
    int axis = 0;
    extent.maxCoeff(&axis);
    if (extent[axis] > 0.0) {
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                       order_.begin() + static_cast<std::ptrdiff_t>(mid),
                       order_.begin() + static_cast<std::ptrdiff_t>(end),
                       [&](std::size_t a, std::size_t b) {
                         const double va = points_[a][axis], vb = points_[b][axis];
                         return va < vb || (va == vb && a < b);
                       });
      node.axis = axis;
      node.split = points_[order_[mid]][axis];
      node.left = build(begin, mid);
      node.right = build(mid, end);
    }
  }
  nodes_[id] = node;
  return id;
}

template <typename Visit>
void KdTree::search(std::size_t id, const Vec3& q, double& bound, Visit&& visit) const {
  const Node& node = nodes_[id];
  if (box_distance2(q, node.lo, node.hi) > bound) return;
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      visit((points_[idx] - q).squaredNorm(), idx);
    }
    return;
  }
  const bool go_left = q[node.axis] < node.split;
  search(go_left ? node.left : node.right, q, bound, visit);
  search(go_left ? node.right : node.left, q, bound, visit);
}

std::vector<Hit> KdTree::knn(const Vec3& query, std::size_t k, std::size_t skip) const {
  std::vector<Hit> out;
  if (k == 0 || points_.empty()) return out;
  std::priority_queue<Hit> heap;  // max-heap on (d2, index)
  double bound = std::numeric_limits<double>::infinity();
  search(0, query, bound, [&](double d2, std::size_t idx) {
    if (idx == skip) return;
    const Hit hit{d2, idx};
    if (heap.size() < k) {
      heap.push(hit);
    } else if (hit < heap.top()) {
      heap.pop();
      heap.push(hit);
    } else {
      return;
    }
    if (heap.size() == k) bound = heap.top().first;
  });
  out.resize(heap.size());
  for (std::size_t i = heap.size(); i-- > 0;) {
    out[i] = heap.top();
    heap.pop();
  }
  return out;
}

std::size_t KdTree::nearest(const Vec3& query) const {
  const auto hits = knn(query, 1);
  return hits.empty() ? kNone : hits.front().second;
}

std::vector<Hit> KdTree::radius(const Vec3& query, double r) const {
  std::vector<Hit> out;
  if (points_.empty() || !(r >= 0.0)) return out;
  double bound = r * r;
  search(0, query, bound, [&](double d2, std::size_t idx) {
    if (d2 <= r * r) out.emplace_back(d2, idx);
  });
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace sapling
