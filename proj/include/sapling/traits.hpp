#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sapling/georef.hpp"
#include "sapling/leafwood.hpp"
#include "sapling/model.hpp"

namespace sapling {

inline constexpr std::size_t kProfileBins = 200;

/// Vertical leaf density on a uniform grid; unit trapezoidal integral.
struct LeafProfile {
  std::vector<double> heights;
  std::vector<double> density;
  double bandwidth = 0.0;
  bool degenerate = false;  // zero vertical spread; spike on a 2 mm grid

  bool empty() const { return heights.empty(); }
};

double trapezoid_integral(std::span<const double> x, std::span<const double> y);
double trapezoid_integral(const LeafProfile& profile);

/// Silverman's rule: 0.9 min(sigma, IQR / 1.34) n^(-1/5), falling back to
/// sigma when the IQR vanishes.
double silverman_bandwidth(std::span<const double> values);

/// Gaussian KDE of leaf heights evaluated on `bins` points spanning the leaf
/// z-range, renormalised to unit integral. Fewer than two points yields an
/// empty profile.
LeafProfile leaf_profile(const PointCloud& leaf, std::size_t bins = kProfileBins);

struct HeightParams {
  std::size_t k_neighbors = 10;
  double std_ratio = 2.0;
  bool use_percentiles = false;  // 0.5 / 99.5 percentiles instead of extremes
  double low_percentile = 0.5;
  double high_percentile = 99.5;
};

/// Indices of points whose mean k-NN distance is at most mean + std_ratio * sd.
std::vector<std::size_t> statistical_outlier_filter(std::span<const Vec3> points, std::size_t k,
                                                    double std_ratio);

/// z-extent of the outlier-filtered cloud. Throws Range below 50 points.
double stem_height(const PointCloud& cloud, const HeightParams& params = {});

struct TraitReport {
  std::string sapling_id;
  std::string session_id;
  double height = 0.0;
  std::size_t bifurcations = 0;
  double lwr = 0.0;
  LeafProfile leaf_profile;
  std::size_t n_leaf = 0;
  std::size_t n_wood = 0;
  double latitude = 0.0;
  double longitude = 0.0;
  Vec3 map_position = Vec3::Zero();  // centroid of the wood points
};

TraitReport compute_traits(const PointCloud& cloud, const SkeletonGraph& pruned_skeleton,
                           const Segmentation& segmentation, const EarthTransform& earth,
                           const std::string& sapling_id, const std::string& session_id,
                           const HeightParams& height_params = {});

/// key:value report (profile excluded).
std::string write_trait_report(const TraitReport& report);
/// Two-column `z,density` CSV.
std::string write_profile_csv(const LeafProfile& profile);
TraitReport parse_trait_report(std::string_view report, std::string_view profile_csv = {});
LeafProfile parse_profile_csv(std::string_view text);

}  // namespace sapling
