#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "sapling/model.hpp"

namespace sapling {

struct LeafWoodParams {
  /// Graph distance from a terminal vertex that still counts as foliage.
  std::size_t terminal_hops = 0;
  /// Keep the root out of the terminal set even when it has degree 1.
  bool exclude_root_chain = true;
  /// When set, a point is leaf iff it lies within this distance of a terminal
  /// vertex, replacing nearest-vertex assignment.
  std::optional<double> radius;
};

struct Segmentation {
  PointCloud leaf;
  PointCloud wood;
  std::vector<std::size_t> leaf_indices;  // ascending indices into the source cloud
  std::vector<std::size_t> wood_indices;
  bool no_terminals = false;  // the skeleton had no terminal vertex; all points are wood
};

/// Degree-1 vertices other than the root, dilated by `terminal_hops` along
/// the graph. Sorted ascending.
std::vector<std::size_t> find_terminal_vertices(const SkeletonGraph& skeleton,
                                                const LeafWoodParams& params = {});

/// Assigns every point to its nearest skeleton vertex (lowest index on ties);
/// points owned by terminal vertices are leaf, the rest wood.
Segmentation segment_leaf_wood(const PointCloud& cloud, const SkeletonGraph& skeleton,
                               const LeafWoodParams& params = {});

/// N_leaf / N_wood. Throws Range when there are no wood points.
double leaf_wood_ratio(std::size_t n_leaf, std::size_t n_wood);
double leaf_wood_ratio(const Segmentation& segmentation);

}  // namespace sapling
