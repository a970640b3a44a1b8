#include "sapling/skeleton.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "sapling/error.hpp"
#include "sapling/ingest.hpp"
#include "sapling/kdtree.hpp"

namespace sapling {

namespace {

constexpr std::size_t kNone = KdTree::kNone;

double bbox_diagonal(std::span<const Vec3> pts) {
  if (pts.empty()) return 0.0;
  Vec3 lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

struct UnionFind {
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (a < b) std::swap(a, b);
    parent[a] = b;  // smaller index is the representative
    return true;
  }
  std::vector<std::size_t> parent;
};

}  // namespace

void ContractionParams::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::Config, "contraction: " + what); };
  if (k_neighbors < 4) fail("k_neighbors must be at least 4");
  if (!(init_contraction_weight_factor > 0.0)) fail("init_contraction_weight_factor must be positive");
  if (!(attraction_weight > 0.0)) fail("attraction_weight must be positive");
  if (!(amplification > 0.0)) fail("amplification must be positive");
  if (!(max_contraction_weight > 0.0)) fail("max_contraction_weight must be positive");
  if (max_iterations == 0) fail("max_iterations must be positive");
  if (!(convergence_ratio > 0.0 && convergence_ratio < 1.0)) fail("convergence_ratio must lie in (0, 1)");
  if (!(stall_ratio >= 0.0 && stall_ratio < 1.0)) fail("stall_ratio must lie in [0, 1)");
  if (!(linearity_freeze == 0.0 || (linearity_freeze > 1.0 / 3.0 && linearity_freeze <= 1.0))) {
    fail("linearity_freeze must be 0 or lie in (1/3, 1]");
  }
  if (!(solver_tolerance > 0.0)) fail("solver_tolerance must be positive");
  if (cg_max_iterations == 0) fail("cg_max_iterations must be positive");
}

void TopologyParams::validate() const {
  if (!(sample_radius_fraction > 0.0)) throw Error(ErrorKind::Config, "topology: sample_radius_fraction must be positive");
  if (!(sample_radius >= 0.0)) throw Error(ErrorKind::Config, "topology: sample_radius must be non-negative");
  if (!(min_branch_length_factor > 0.0)) throw Error(ErrorKind::Config, "topology: min_branch_length_factor must be positive");
}

// voxel grid ---------------------------------------------------------------------

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0)) throw Error(ErrorKind::Range, "voxel size must be positive");
  struct KeyHash {
    std::size_t operator()(const std::array<long long, 3>& k) const {
      std::size_t h = 1469598103934665603ull;
      for (long long v : k) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ull;
      return h;
    }
  };
  struct Cell {
    Vec3 sum = Vec3::Zero();
    Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
    std::size_t count = 0;
  };
  std::unordered_map<std::array<long long, 3>, std::size_t, KeyHash> index;
  std::vector<Cell> cells;
  index.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const std::array<long long, 3> key{static_cast<long long>(std::floor(p.x() / voxel)),
                                       static_cast<long long>(std::floor(p.y() / voxel)),
                                       static_cast<long long>(std::floor(p.z() / voxel))};
    auto [it, inserted] = index.try_emplace(key, cells.size());
    if (inserted) cells.emplace_back();
    Cell& c = cells[it->second];
    c.sum += p;
    if (cloud.has_colors()) c.rgb += Eigen::Vector3d(cloud.colors[i].r, cloud.colors[i].g, cloud.colors[i].b);
    ++c.count;
  }
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.points.reserve(cells.size());
  for (const Cell& c : cells) {
    const double n = static_cast<double>(c.count);
    out.points.push_back(c.sum / n);
    if (cloud.has_colors()) {
      const Eigen::Vector3d m = (c.rgb / n).array().round();
      out.colors.push_back(Rgb{static_cast<std::uint8_t>(m.x()), static_cast<std::uint8_t>(m.y()),
                               static_cast<std::uint8_t>(m.z())});
    }
  }
  return out;
}

// kNN graph ----------------------------------------------------------------------

NeighborLists knn_graph(std::span<const Vec3> points, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::Range, "k must be positive");
  if (points.size() <= k) {
    throw Error(ErrorKind::Range, "kNN graph needs more than k = " + std::to_string(k) +
                                      " points, got " + std::to_string(points.size()));
  }
  const KdTree tree(points);
  NeighborLists lists(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (const auto& [d2, j] : tree.knn(points[i], k, i)) {
      lists[i].push_back(j);
      lists[j].push_back(i);
    }
  }
  for (auto& l : lists) {
    std::sort(l.begin(), l.end());
    l.erase(std::unique(l.begin(), l.end()), l.end());
  }
  return lists;
}

namespace {

/// Largest eigenvalue of the neighbourhood covariance over its trace; 1 on a line.
double linearity(const Eigen::MatrixX3d& pos, std::size_t i, const std::vector<std::size_t>& nbrs) {
  const auto row = [&](std::size_t j) { return Vec3(pos.row(static_cast<Eigen::Index>(j)).transpose()); };
  Vec3 c = row(i);
  for (std::size_t j : nbrs) c += row(j);
  c /= static_cast<double>(nbrs.size() + 1);
  Eigen::Matrix3d cov = (row(i) - c) * (row(i) - c).transpose();
  for (std::size_t j : nbrs) cov += (row(j) - c) * (row(j) - c).transpose();
  const double trace = cov.trace();
  if (!(trace > 0.0)) return 0.0;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(2) / trace;
}

std::vector<double> neighborhood_extents(std::span<const Vec3> pts, const NeighborLists& graph) {
  std::vector<double> e(pts.size(), 0.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (graph[i].empty()) continue;
    Vec3 c = Vec3::Zero();
    for (std::size_t j : graph[i]) c += pts[j];
    c /= static_cast<double>(graph[i].size());
    e[i] = (pts[i] - c).norm();
  }
  return e;
}

}  // namespace

double mean_neighborhood_extent(std::span<const Vec3> points, const NeighborLists& graph) {
  const auto e = neighborhood_extents(points, graph);
  if (e.empty()) return 0.0;
  return std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
}

// contraction ----------------------------------------------------------------------

ContractionResult contract(const PointCloud& cloud, const ContractionParams& params) {
  params.validate();
  const std::size_t n = cloud.size();
  const std::size_t k = params.k_neighbors;
  if (n < k + 1) {
    throw Error(ErrorKind::Range, "contraction needs at least k + 1 = " + std::to_string(k + 1) +
                                      " points, got " + std::to_string(n));
  }

  ContractionResult result;
  result.graph = knn_graph(cloud.points, k);
  const NeighborLists& graph = result.graph;
  const auto ni = [](std::size_t i) { return static_cast<Eigen::Index>(i); };

  double edge_sum = 0.0;
  std::size_t edge_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : graph[i]) {
      edge_sum += (cloud.points[i] - cloud.points[j]).norm();
      ++edge_count;
    }
  }
  const double mean_spacing = edge_sum / static_cast<double>(edge_count);

  // Uniform Laplacian, row-normalised: (L P)_i = p_i - mean of neighbours.
  Eigen::SparseMatrix<double> lap(ni(n), ni(n));
  {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n + edge_count);
    for (std::size_t i = 0; i < n; ++i) {
      trip.emplace_back(ni(i), ni(i), 1.0);
      const double w = -1.0 / static_cast<double>(graph[i].size());
      for (std::size_t j : graph[i]) trip.emplace_back(ni(i), ni(j), w);
    }
    lap.setFromTriplets(trip.begin(), trip.end());
  }
  const Eigen::SparseMatrix<double> lap_gram = Eigen::SparseMatrix<double>(lap.transpose()) * lap;

  Eigen::MatrixX3d pos(ni(n), 3);
  for (std::size_t i = 0; i < n; ++i) pos.row(ni(i)) = cloud.points[i].transpose();

  auto current_points = [&] {
    std::vector<Vec3> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = pos.row(ni(i)).transpose();
    return pts;
  };

  const std::vector<double> extent0 = neighborhood_extents(cloud.points, graph);
  const double mean_extent0 = std::accumulate(extent0.begin(), extent0.end(), 0.0) / static_cast<double>(n);

  double wl = params.init_contraction_weight_factor / (10.0 * mean_spacing);
  Eigen::VectorXd wh = Eigen::VectorXd::Constant(ni(n), params.attraction_weight);

  const bool use_direct = params.solver == ContractionParams::Solver::Direct ||
                          (params.solver == ContractionParams::Solver::Auto && n <= params.direct_solver_limit);

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  bool analyzed = false;

  // Every diagonal entry is structurally present in lap_gram (L has a unit
  // diagonal), so adding W_H^2 keeps the sparsity pattern fixed.
  Eigen::SparseMatrix<double> system = lap_gram;

  // Pinned points lose their Laplacian row and get the largest attraction.
  std::vector<char> frozen(n, 0);
  std::size_t frozen_count = 0;
  const double pin_weight = params.attraction_weight * 1e4;
  const auto update_frozen = [&] {
    if (params.linearity_freeze == 0.0) return false;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (frozen[i] || linearity(pos, i, graph[i]) < params.linearity_freeze) continue;
      frozen[i] = 1;
      ++frozen_count;
      changed = true;
    }
    return changed;
  };
  const auto apply_pins = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      if (frozen[i]) wh[ni(i)] = pin_weight;
    }
  };
  bool pattern_dirty = update_frozen();
  apply_pins();

  double previous_ratio = 1.0;
  for (std::size_t iter = 0; iter < params.max_iterations; ++iter) {
    if (frozen_count == 0) {
      system = (wl * wl) * lap_gram;
    } else {
      Eigen::VectorXd row_w(ni(n));
      for (std::size_t i = 0; i < n; ++i) row_w[ni(i)] = frozen[i] ? 0.0 : wl;
      const Eigen::SparseMatrix<double> wlap = row_w.asDiagonal() * lap;
      system = Eigen::SparseMatrix<double>(wlap.transpose()) * wlap;
    }
    for (std::size_t i = 0; i < n; ++i) system.coeffRef(ni(i), ni(i)) += wh[ni(i)] * wh[ni(i)];
    const Eigen::MatrixX3d rhs = wh.array().square().matrix().asDiagonal() * pos;

    Eigen::MatrixX3d next;
    if (use_direct) {
      if (!analyzed || pattern_dirty || frozen_count > 0) {
        ldlt.analyzePattern(system);
        analyzed = true;
        pattern_dirty = false;
      }
      ldlt.factorize(system);
      if (ldlt.info() != Eigen::Success) {
        throw Error(ErrorKind::Solver, "contraction: sparse factorisation failed at iteration " +
                                           std::to_string(iter + 1));
      }
      next = ldlt.solve(rhs);
    } else {
      cg.setTolerance(params.solver_tolerance);
      cg.setMaxIterations(static_cast<Eigen::Index>(params.cg_max_iterations));
      cg.compute(system);
      next.resize(ni(n), 3);
      for (int c = 0; c < 3; ++c) {
        next.col(c) = cg.solveWithGuess(rhs.col(c), pos.col(c));
        if (cg.info() != Eigen::Success) {
          throw Error(ErrorKind::Solver,
                      "contraction: conjugate gradients did not reach tolerance " +
                          format_double(params.solver_tolerance) + " within " +
                          std::to_string(params.cg_max_iterations) + " iterations (error " +
                          format_double(cg.error()) + ")");
        }
      }
    }
    if (!next.allFinite()) throw Error(ErrorKind::Solver, "contraction produced non-finite points");
    pos = next;
    ++result.iterations;

    const std::vector<Vec3> pts = current_points();
    const std::vector<double> extent = neighborhood_extents(pts, graph);
    const double mean_extent = std::accumulate(extent.begin(), extent.end(), 0.0) / static_cast<double>(n);
    result.extent_ratio = mean_extent0 > 0.0 ? mean_extent / mean_extent0 : 0.0;
    if (result.extent_ratio < params.convergence_ratio) {
      result.converged = true;
      break;
    }
    if (wl >= params.max_contraction_weight &&
        previous_ratio - result.extent_ratio < params.stall_ratio * previous_ratio) {
      break;
    }
    previous_ratio = result.extent_ratio;

    wl = std::min(wl * params.amplification, params.max_contraction_weight);
    for (std::size_t i = 0; i < n; ++i) {
      const double shrink = extent[i] > 0.0 ? extent0[i] / extent[i] : 1e4;
      wh[ni(i)] = params.attraction_weight * std::clamp(shrink, 1.0, 1e4);
    }
    if (update_frozen()) pattern_dirty = true;
    apply_pins();
  }

  result.points = current_points();
  result.displacement.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.displacement[i] = (result.points[i] - cloud.points[i]).norm();
  return result;
}

// skeleton extraction ---------------------------------------------------------------

SkeletonExtraction extract_skeleton(std::span<const Vec3> contracted, const PointCloud& original,
                                    const NeighborLists& graph, const TopologyParams& params) {
  params.validate();
  const std::size_t n = contracted.size();
  if (n == 0) throw Error(ErrorKind::Range, "cannot extract a skeleton from an empty point set");
  if (original.size() != n || graph.size() != n) {
    throw Error(ErrorKind::Range, "contracted points, original cloud and graph sizes differ");
  }

  SkeletonExtraction out;
  const double diag = bbox_diagonal(original.points);
  const double radius = params.sample_radius > 0.0 ? params.sample_radius : params.sample_radius_fraction * diag;
  out.sample_radius = radius;

  // Farthest-point sampling seeded at point 0; each point remembers its
  // nearest sample (earliest sample on ties).
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> owner(n, 0);
  std::vector<std::size_t> samples;
  std::size_t next = 0;
  while (true) {
    const std::size_t s = samples.size();
    samples.push_back(next);
    const Vec3 c = contracted[next];
    double best = -1.0;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (contracted[i] - c).norm();
      if (d < dist[i]) {
        dist[i] = d;
        owner[i] = s;
      }
      if (dist[i] > best) {
        best = dist[i];
        best_idx = i;
      }
    }
    if (!(best >= radius) || best == 0.0) break;
    next = best_idx;
  }
  const std::size_t m = samples.size();

  std::vector<Vec3> centroid(m, Vec3::Zero());
  std::vector<std::size_t> members(m, 0);
  for (std::size_t i = 0; i < n; ++i) {
    centroid[owner[i]] += contracted[i];
    ++members[owner[i]];
  }
  for (std::size_t v = 0; v < m; ++v) centroid[v] /= static_cast<double>(members[v]);

  std::vector<Edge> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : graph[i]) {
      if (j <= i) continue;
      const std::size_t a = owner[i], b = owner[j];
      if (a != b) candidates.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  canonicalize_edges(candidates);

  // Largest component by member count.
  UnionFind comps(m);
  for (const auto& [a, b] : candidates) comps.unite(a, b);
  std::vector<std::size_t> comp_size(m, 0);
  for (std::size_t v = 0; v < m; ++v) comp_size[comps.find(v)] += members[v];
  std::size_t keep = 0;
  for (std::size_t v = 0; v < m; ++v) {
    if (comp_size[v] > comp_size[keep]) keep = v;
  }
  std::vector<std::size_t> remap(m, kNone);
  std::size_t kept = 0;
  for (std::size_t v = 0; v < m; ++v) {
    if (comps.find(v) == keep) remap[v] = kept++;
  }
  out.disconnected = kept < m;

  // Kruskal over the kept component.
  std::vector<std::pair<double, Edge>> weighted;
  for (const auto& [a, b] : candidates) {
    if (remap[a] == kNone) continue;
    weighted.push_back({(centroid[a] - centroid[b]).norm(), {a, b}});
  }
  std::sort(weighted.begin(), weighted.end());
  UnionFind forest(m);
  SkeletonGraph& g = out.graph;
  g.vertices.reserve(kept);
  for (std::size_t v = 0; v < m; ++v) {
    if (remap[v] != kNone) g.vertices.push_back(centroid[v]);
  }
  for (const auto& [w, e] : weighted) {
    if (forest.unite(e.first, e.second)) g.edges.emplace_back(remap[e.first], remap[e.second]);
  }
  canonicalize_edges(g.edges);

  g.root_index = 0;
  for (std::size_t v = 1; v < g.vertices.size(); ++v) {
    if (g.vertices[v].z() < g.vertices[g.root_index].z()) g.root_index = v;
  }

  out.point_vertex.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.point_vertex[i] = remap[owner[i]];
  return out;
}

// pruning ------------------------------------------------------------------------

namespace {

SkeletonGraph compact(const SkeletonGraph& g, const std::vector<bool>& alive) {
  std::vector<std::size_t> remap(g.vertices.size(), kNone);
  SkeletonGraph out;
  for (std::size_t v = 0; v < g.vertices.size(); ++v) {
    if (!alive[v]) continue;
    remap[v] = out.vertices.size();
    out.vertices.push_back(g.vertices[v]);
  }
  for (const auto& [a, b] : g.edges) {
    if (alive[a] && alive[b]) out.edges.emplace_back(remap[a], remap[b]);
  }
  canonicalize_edges(out.edges);
  out.root_index = remap[g.root_index];
  return out;
}

}  // namespace

SkeletonGraph prune(const SkeletonGraph& skeleton, double min_branch_length) {
  const std::size_t n = skeleton.vertex_count();
  if (n <= 2) return skeleton;
  std::vector<std::vector<std::size_t>> adj = skeleton.adjacency();
  std::vector<std::size_t> deg(n);
  for (std::size_t v = 0; v < n; ++v) deg[v] = adj[v].size();
  std::vector<bool> alive(n, true);
  const std::size_t root = skeleton.root_index;

  while (true) {
    double best_len = min_branch_length;
    std::vector<std::size_t> best_chain;
    std::size_t best_junction = kNone;
    for (std::size_t leaf = 0; leaf < n; ++leaf) {
      if (!alive[leaf] || deg[leaf] != 1 || leaf == root) continue;
      std::vector<std::size_t> chain{leaf};
      std::size_t prev = leaf;
      std::size_t cur = kNone;
      for (std::size_t w : adj[leaf]) {
        if (alive[w]) cur = w;
      }
      double len = (skeleton.vertices[leaf] - skeleton.vertices[cur]).norm();
      while (deg[cur] == 2 && cur != root) {
        chain.push_back(cur);
        std::size_t nxt = kNone;
        for (std::size_t w : adj[cur]) {
          if (alive[w] && w != prev) nxt = w;
        }
        len += (skeleton.vertices[cur] - skeleton.vertices[nxt]).norm();
        prev = cur;
        cur = nxt;
      }
      if (deg[cur] < 3) continue;  // reached the root chain or the other end of a path
      if (len < best_len) {
        best_len = len;
        best_chain = std::move(chain);
        best_junction = cur;
      }
    }
    if (best_chain.empty()) break;
    for (std::size_t v : best_chain) {
      alive[v] = false;
      deg[v] = 0;
    }
    --deg[best_junction];
  }
  return compact(skeleton, alive);
}

std::size_t count_bifurcations(const SkeletonGraph& skeleton) {
  std::size_t count = 0;
  for (std::size_t d : skeleton.degrees()) count += d > 2 ? d - 2 : 0;
  return count;
}

// pipeline -----------------------------------------------------------------------

SkeletonizeParams full_resolution_params() {
  SkeletonizeParams p;
  p.voxel = 0.0;
  p.contraction.k_neighbors = 32;
  // Pinning splits leaf clusters into several tips.
  p.contraction.linearity_freeze = 0.0;
  // Sized to a leaf cluster rather than to the sapling.
  p.topology.sample_radius = 0.028;
  return p;
}

SkeletonizeResult skeletonize(const PointCloud& cloud, const SkeletonizeParams& params) {
  params.contraction.validate();
  params.topology.validate();
  SkeletonizeResult out;
  out.input_points = cloud.size();
  const PointCloud work = params.voxel > 0.0 ? voxel_downsample(cloud, params.voxel) : cloud;
  out.contracted_points = work.size();

  const ContractionResult contracted = contract(work, params.contraction);
  out.iterations = contracted.iterations;
  out.converged = contracted.converged;

  const SkeletonExtraction ex = extract_skeleton(contracted.points, work, contracted.graph, params.topology);
  out.disconnected = ex.disconnected;
  out.sample_radius = ex.sample_radius;
  out.unpruned = ex.graph;
  out.skeleton = params.prune
                     ? prune(ex.graph, params.topology.min_branch_length_factor * ex.sample_radius)
                     : ex.graph;
  return out;
}

void apply_override(SkeletonizeParams& params, const std::string& key, const std::string& value) {
  auto as_double = [&] {
    try {
      return parse_double(value);
    } catch (const Error&) {
      throw Error(ErrorKind::Config, "'" + key + "' expects a number, got '" + value + "'");
    }
  };
  auto as_count = [&] {
    const double v = as_double();
    if (v < 0 || v != std::floor(v)) throw Error(ErrorKind::Config, "'" + key + "' expects a count");
    return static_cast<std::size_t>(v);
  };
  auto as_bool = [&] {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw Error(ErrorKind::Config, "'" + key + "' expects true/false");
  };
  ContractionParams& c = params.contraction;
  TopologyParams& t = params.topology;
  if (key == "voxel") params.voxel = as_double();
  else if (key == "prune") params.prune = as_bool();
  else if (key == "contraction.k_neighbors") c.k_neighbors = as_count();
  else if (key == "contraction.init_contraction_weight_factor") c.init_contraction_weight_factor = as_double();
  else if (key == "contraction.attraction_weight") c.attraction_weight = as_double();
  else if (key == "contraction.amplification") c.amplification = as_double();
  else if (key == "contraction.max_contraction_weight") c.max_contraction_weight = as_double();
  else if (key == "contraction.max_iterations") c.max_iterations = as_count();
  else if (key == "contraction.convergence_ratio") c.convergence_ratio = as_double();
  else if (key == "contraction.stall_ratio") c.stall_ratio = as_double();
  else if (key == "contraction.linearity_freeze") c.linearity_freeze = as_double();
  else if (key == "contraction.solver_tolerance") c.solver_tolerance = as_double();
  else if (key == "contraction.direct_solver_limit") c.direct_solver_limit = as_count();
  else if (key == "contraction.cg_max_iterations") c.cg_max_iterations = as_count();
  else if (key == "contraction.solver") {
    if (value == "auto") c.solver = ContractionParams::Solver::Auto;
    else if (value == "direct") c.solver = ContractionParams::Solver::Direct;
    else if (value == "cg") c.solver = ContractionParams::Solver::ConjugateGradient;
    else throw Error(ErrorKind::Config, "contraction.solver must be auto, direct or cg");
  } else if (key == "topology.sample_radius_fraction") t.sample_radius_fraction = as_double();
  else if (key == "topology.sample_radius") t.sample_radius = as_double();
  else if (key == "topology.min_branch_length_factor") t.min_branch_length_factor = as_double();
  else throw Error(ErrorKind::Config, "unknown skeleton parameter '" + key + "'");
}

// file format --------------------------------------------------------------------

std::string write_skeleton(const SkeletonGraph& skeleton) {
  std::string out;
  for (const Vec3& v : skeleton.vertices) {
    out += "v " + format_double(v.x()) + ' ' + format_double(v.y()) + ' ' + format_double(v.z()) + '\n';
  }
  for (const auto& [a, b] : skeleton.edges) out += "e " + std::to_string(a) + ' ' + std::to_string(b) + '\n';
  out += "root " + std::to_string(skeleton.root_index) + '\n';
  return out;
}

SkeletonGraph parse_skeleton(std::string_view text) {
  SkeletonGraph g;
  bool have_root = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto parse_index = [&](const std::string& s) {
    const double v = parse_double(s, line_no);
    if (v < 0 || v != std::floor(v) || v > 1e15) throw Error(ErrorKind::Parse, "bad vertex index '" + s + "'", line_no);
    return static_cast<std::size_t>(v);
  };
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    std::vector<std::string> tok;
    for (auto& f : split_fields(raw, ' ')) {
      if (!f.empty()) tok.push_back(f);
    }
    if (tok.empty() || tok[0].front() == '#') continue;
    if (have_root) throw Error(ErrorKind::Parse, "content after root line", line_no);
    if (tok[0] == "v") {
      if (tok.size() != 4) throw Error(ErrorKind::Parse, "vertex line needs 3 coordinates", line_no);
      if (!g.edges.empty()) throw Error(ErrorKind::Parse, "vertex after edges", line_no);
      const Vec3 v(parse_double(tok[1], line_no), parse_double(tok[2], line_no), parse_double(tok[3], line_no));
      if (!v.allFinite()) throw Error(ErrorKind::Parse, "non-finite vertex", line_no);
      g.vertices.push_back(v);
    } else if (tok[0] == "e") {
      if (tok.size() != 3) throw Error(ErrorKind::Parse, "edge line needs 2 indices", line_no);
      const std::size_t a = parse_index(tok[1]), b = parse_index(tok[2]);
      if (a >= g.vertices.size() || b >= g.vertices.size()) throw Error(ErrorKind::Parse, "edge index out of range", line_no);
      if (a == b) throw Error(ErrorKind::Parse, "self-loop edge", line_no);
      g.edges.emplace_back(std::min(a, b), std::max(a, b));
    } else if (tok[0] == "root") {
      if (tok.size() != 2) throw Error(ErrorKind::Parse, "root line needs 1 index", line_no);
      g.root_index = parse_index(tok[1]);
      if (g.root_index >= g.vertices.size()) throw Error(ErrorKind::Parse, "root index out of range", line_no);
      have_root = true;
    } else {
      throw Error(ErrorKind::Parse, "unknown record '" + tok[0] + "'", line_no);
    }
  }
  if (!have_root) throw Error(ErrorKind::Parse, "skeleton file lacks a root line");
  const std::size_t before = g.edges.size();
  canonicalize_edges(g.edges);
  if (g.edges.size() != before) throw Error(ErrorKind::Parse, "duplicate edges");
  if (!g.is_tree()) throw Error(ErrorKind::Parse, "skeleton graph is not a tree");
  return g;
}

}  // namespace sapling
