#pragma once

// Reference implementations used only by the tests. Written independently
// of the library code paths they check: brute force where the library uses
// an index, textbook closed forms where it uses a factorisation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sapling/model.hpp"

namespace oracle {

using sapling::Vec3;

// Geodesy written out from the WGS84 definitions.
inline Vec3 ecef(double lat_deg, double lon_deg, double h) {
  const double a = 6378137.0;
  const double f = 1.0 / 298.257223563;
  const double e2 = f * (2.0 - f);
  const double lat = lat_deg * std::numbers::pi / 180.0;
  const double lon = lon_deg * std::numbers::pi / 180.0;
  const double n = a / std::sqrt(1.0 - e2 * std::sin(lat) * std::sin(lat));
  return {(n + h) * std::cos(lat) * std::cos(lon), (n + h) * std::cos(lat) * std::sin(lon),
          (n * (1.0 - e2) + h) * std::sin(lat)};
}

inline Vec3 enu(double lat, double lon, double h, double lat0, double lon0, double h0) {
  const Vec3 d = ecef(lat, lon, h) - ecef(lat0, lon0, h0);
  const double p = lat0 * std::numbers::pi / 180.0;
  const double l = lon0 * std::numbers::pi / 180.0;
  const double east = -std::sin(l) * d.x() + std::cos(l) * d.y();
  const double north = -std::sin(p) * std::cos(l) * d.x() - std::sin(p) * std::sin(l) * d.y() + std::cos(p) * d.z();
  const double up = std::cos(p) * std::cos(l) * d.x() + std::cos(p) * std::sin(l) * d.y() + std::sin(p) * d.z();
  return {east, north, up};
}

/// Indices of the k nearest points to points[i] (excluding i), ties by index.
inline std::vector<std::size_t> brute_knn(const std::vector<Vec3>& points, std::size_t i, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (j != i) all.emplace_back((points[j] - points[i]).squaredNorm(), j);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t m = 0; m < k && m < all.size(); ++m) out.push_back(all[m].second);
  return out;
}

inline std::size_t brute_nearest(const std::vector<Vec3>& points, const Vec3& q) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < points.size(); ++j) {
    if ((points[j] - q).squaredNorm() < (points[best] - q).squaredNorm()) best = j;
  }
  return best;
}

/// Distinct voxel cells, counted through an ordered set of integer triples.
inline std::size_t voxel_count(const std::vector<Vec3>& points, double voxel) {
  std::set<std::tuple<long long, long long, long long>> cells;
  for (const Vec3& p : points) {
    cells.emplace(static_cast<long long>(std::floor(p.x() / voxel)), static_cast<long long>(std::floor(p.y() / voxel)),
                  static_cast<long long>(std::floor(p.z() / voxel)));
  }
  return cells.size();
}

/// Gaussian KDE evaluated by direct summation.
inline double kde(const std::vector<double>& z, double h, double x) {
  double s = 0.0;
  for (double v : z) s += std::exp(-0.5 * ((x - v) / h) * ((x - v) / h));
  return s / (static_cast<double>(z.size()) * h * std::sqrt(2.0 * std::numbers::pi));
}

/// Silverman's rule with type-7 quantiles, computed from scratch.
inline double silverman(std::vector<double> z) {
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : z) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const auto q = [&](double p) {
    const double h = (n - 1.0) * p;
    const auto lo = static_cast<std::size_t>(h);
    const std::size_t hi = std::min(lo + 1, z.size() - 1);
    return z[lo] + (h - static_cast<double>(lo)) * (z[hi] - z[lo]);
  };
  const double iqr = q(0.75) - q(0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

inline sapling::Quat random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return sapling::Quat(g(rng), g(rng), g(rng), g(rng)).normalized();
}

/// 4x4 homogeneous matrix of p -> s R p + t.
inline Eigen::Matrix4d similarity_matrix(double s, const sapling::Quat& q, const Vec3& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = s * q.toRotationMatrix();
  m.topRightCorner<3, 1>() = t;
  return m;
}

/// Distance from p to the segment [a, b].
inline double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 d = b - a;
  const double t = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * d)).norm();
}

/// Tree check by union-find plus |E| = |V| - 1.
inline bool is_tree(const sapling::SkeletonGraph& g) {
  const std::size_t n = g.vertices.size();
  if (n == 0) return false;
  if (g.edges.size() != n - 1) return false;
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  const auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [a, b] : g.edges) {
    if (a >= n || b >= n || a == b) return false;
    const std::size_t ra = find(a), rb = find(b);
    if (ra == rb) return false;
    parent[ra] = rb;
  }
  return true;
}

}  // namespace oracle
