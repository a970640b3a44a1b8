#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sapling/model.hpp"

namespace sapling {

/// Laplacian contraction parameters.
///
/// The contraction weight starts at init_contraction_weight_factor / (10 d),
/// d being the mean k-nearest-neighbour distance of the input, and is
/// multiplied by `amplification` after every iteration up to
/// `max_contraction_weight`. Attraction weights start at `attraction_weight`
/// and grow per point with the inverse of its neighbourhood shrinkage.
struct ContractionParams {
  enum class Solver { Auto, Direct, ConjugateGradient };

  std::size_t k_neighbors = 16;
  double init_contraction_weight_factor = 1.0;
  double attraction_weight = 1.0;
  double amplification = 3.0;
  double max_contraction_weight = 2048.0;
  std::size_t max_iterations = 20;
  double convergence_ratio = 0.01;
  /// Once the contraction weight has saturated, stop when an iteration shrinks
  /// the extent ratio by less than this fraction of its previous value.
  double stall_ratio = 0.01;
  /// A point whose neighbourhood is this close to a line (largest PCA
  /// eigenvalue over the trace) is pinned for the rest of the run. 0 disables.
  double linearity_freeze = 0.99;
  double solver_tolerance = 1e-8;
  Solver solver = Solver::Auto;
  std::size_t direct_solver_limit = 200000;  // points; CG above this in Auto mode
  std::size_t cg_max_iterations = 2000;

  /// Throws Config when a parameter is out of range.
  void validate() const;
};

struct TopologyParams {
  double sample_radius_fraction = 0.02;   // of the bounding-box diagonal
  double sample_radius = 0.0;             // metres; overrides the fraction when > 0
  double min_branch_length_factor = 3.0;  // multiples of the sample radius

  void validate() const;
};

/// One point per occupied voxel, at the centroid of its members; colors are
/// averaged. Output order follows the first occurrence of each voxel.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

using NeighborLists = std::vector<std::vector<std::size_t>>;

/// k-nearest-neighbour graph symmetrised by union; each list sorted.
/// Throws Range when the cloud has k or fewer points.
NeighborLists knn_graph(std::span<const Vec3> points, std::size_t k);

/// Mean distance from each point to the centroid of its neighbours.
double mean_neighborhood_extent(std::span<const Vec3> points, const NeighborLists& graph);

struct ContractionResult {
  std::vector<Vec3> points;         // same length and order as the input
  std::vector<double> displacement; // |contracted - original| per point
  std::size_t iterations = 0;
  double extent_ratio = 1.0;        // final / initial neighbourhood extent
  bool converged = false;           // extent_ratio reached convergence_ratio
  NeighborLists graph;              // kNN graph of the input points
};

ContractionResult contract(const PointCloud& cloud, const ContractionParams& params = {});

struct SkeletonExtraction {
  SkeletonGraph graph;
  std::vector<std::size_t> point_vertex;  // vertex per input point, kNone if dropped
  double sample_radius = 0.0;
  bool disconnected = false;  // more than one component; only the largest kept
};

/// Samples the contracted points, links samples whose members are kNN
/// neighbours, and reduces the result to its minimum spanning tree.
SkeletonExtraction extract_skeleton(std::span<const Vec3> contracted, const PointCloud& original,
                                    const NeighborLists& graph, const TopologyParams& params = {});

/// Repeatedly removes the shortest terminal chain shorter than
/// `min_branch_length`. The chain that contains the root is never removed.
SkeletonGraph prune(const SkeletonGraph& skeleton, double min_branch_length);

/// Sum over vertices of max(degree - 2, 0): an n-way fork counts as n - 2
/// binary forks.
std::size_t count_bifurcations(const SkeletonGraph& skeleton);

struct SkeletonizeParams {
  double voxel = 0.005;  // metres; <= 0 disables downsampling
  ContractionParams contraction;
  TopologyParams topology;
  bool prune = true;
};

struct SkeletonizeResult {
  SkeletonGraph skeleton;
  SkeletonGraph unpruned;
  std::size_t input_points = 0;
  std::size_t contracted_points = 0;
  std::size_t iterations = 0;
  bool converged = false;
  bool disconnected = false;
  double sample_radius = 0.0;
};

/// Settings for the over-skeletonised graph used by leaf/wood segmentation:
/// no downsampling, a wider neighbourhood so dense clouds still contract, no
/// pinning, and a fixed 28 mm sample radius on the scale of a leaf cluster.
SkeletonizeParams full_resolution_params();

/// voxel_downsample -> contract -> extract_skeleton -> prune.
SkeletonizeResult skeletonize(const PointCloud& cloud, const SkeletonizeParams& params = {});

/// Applies `key=value` overrides (contraction.*, topology.*, voxel, prune).
/// Throws Config on unknown keys or bad values.
void apply_override(SkeletonizeParams& params, const std::string& key, const std::string& value);

/// `v x y z` lines, then `e i j` lines, then `root K`.
std::string write_skeleton(const SkeletonGraph& skeleton);
SkeletonGraph parse_skeleton(std::string_view text);

}  // namespace sapling
