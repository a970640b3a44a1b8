#include "sapling/leafwood.hpp"

#include <algorithm>
#include <deque>

#include "sapling/error.hpp"
#include "sapling/kdtree.hpp"

namespace sapling {

std::vector<std::size_t> find_terminal_vertices(const SkeletonGraph& skeleton,
                                                const LeafWoodParams& params) {
  const std::size_t n = skeleton.vertex_count();
  const auto adj = skeleton.adjacency();
  const auto excluded = [&](std::size_t v) {
    return params.exclude_root_chain && v == skeleton.root_index;
  };

  std::vector<std::size_t> hops(n, KdTree::kNone);
  std::deque<std::size_t> queue;
  for (std::size_t v = 0; v < n; ++v) {
    if (adj[v].size() == 1 && !excluded(v)) {
      hops[v] = 0;
      queue.push_back(v);
    }
  }
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    if (hops[v] >= params.terminal_hops) continue;
    for (std::size_t w : adj[v]) {
      if (hops[w] != KdTree::kNone || excluded(w)) continue;
      hops[w] = hops[v] + 1;
      queue.push_back(w);
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < n; ++v) {
    if (hops[v] != KdTree::kNone) out.push_back(v);
  }
  return out;
}

Segmentation segment_leaf_wood(const PointCloud& cloud, const SkeletonGraph& skeleton,
                               const LeafWoodParams& params) {
  if (skeleton.vertices.empty()) throw Error(ErrorKind::Range, "skeleton has no vertices");
  const std::vector<std::size_t> terminals = find_terminal_vertices(skeleton, params);
  std::vector<bool> is_terminal(skeleton.vertex_count(), false);
  for (std::size_t v : terminals) is_terminal[v] = true;

  Segmentation seg;
  seg.no_terminals = terminals.empty();
  if (seg.no_terminals) {
    seg.wood_indices.resize(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) seg.wood_indices[i] = i;
  } else if (params.radius) {
    std::vector<Vec3> tips;
    for (std::size_t v : terminals) tips.push_back(skeleton.vertices[v]);
    const KdTree tree(tips);
    const double r2 = *params.radius * *params.radius;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto hit = tree.knn(cloud.points[i], 1);
      (hit.front().first <= r2 ? seg.leaf_indices : seg.wood_indices).push_back(i);
    }
  } else {
    const KdTree tree(skeleton.vertices);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const std::size_t v = tree.nearest(cloud.points[i]);
      (is_terminal[v] ? seg.leaf_indices : seg.wood_indices).push_back(i);
    }
  }
  seg.leaf = cloud.subset(seg.leaf_indices);
  seg.wood = cloud.subset(seg.wood_indices);
  return seg;
}

double leaf_wood_ratio(std::size_t n_leaf, std::size_t n_wood) {
  if (n_wood == 0) throw Error(ErrorKind::Range, "leaf/wood ratio undefined: no wood points");
  return static_cast<double>(n_leaf) / static_cast<double>(n_wood);
}

double leaf_wood_ratio(const Segmentation& segmentation) {
  return leaf_wood_ratio(segmentation.leaf_indices.size(), segmentation.wood_indices.size());
}

}  // namespace sapling
