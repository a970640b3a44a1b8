#include "sapling/traits.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sapling/error.hpp"
#include "sapling/ingest.hpp"
#include "sapling/kdtree.hpp"
#include "sapling/skeleton.hpp"

namespace sapling {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  // linear interpolation between order statistics
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double trapezoid_integral(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::Range, "trapezoid: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) sum += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return sum;
}

double trapezoid_integral(const LeafProfile& profile) {
  return trapezoid_integral(profile.heights, profile.density);
}

double silverman_bandwidth(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw Error(ErrorKind::Range, "bandwidth needs at least two values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sigma = std::sqrt(ss / static_cast<double>(n - 1));

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = std::min(sigma, iqr / 1.34);
  if (!(spread > 0.0)) spread = sigma;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

LeafProfile leaf_profile(const PointCloud& leaf, std::size_t bins) {
  LeafProfile profile;
  if (leaf.size() < 2) return profile;
  if (bins < 2) throw Error(ErrorKind::Range, "profile needs at least two bins");

  std::vector<double> z(leaf.size());
  for (std::size_t i = 0; i < leaf.size(); ++i) z[i] = leaf.points[i].z();
  auto [lo_it, hi_it] = std::minmax_element(z.begin(), z.end());
  double lo = *lo_it, hi = *hi_it;

  if (!(hi > lo)) {
    profile.degenerate = true;
    lo -= 1e-3;
    hi += 1e-3;
    profile.bandwidth = 1e-4;
  } else {
    profile.bandwidth = silverman_bandwidth(z);
  }

  const double h = profile.bandwidth;
  const double norm = 1.0 / (static_cast<double>(z.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  profile.heights.resize(bins);
  profile.density.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    const double x = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins - 1);
    double sum = 0.0;
    for (double zi : z) {
      const double u = (x - zi) / h;
      sum += std::exp(-0.5 * u * u);
    }
    profile.heights[b] = x;
    profile.density[b] = sum * norm;
  }
  const double area = trapezoid_integral(profile);
  if (area > 0.0) {
    for (double& d : profile.density) d /= area;
  }
  return profile;
}

std::vector<std::size_t> statistical_outlier_filter(std::span<const Vec3> points, std::size_t k,
                                                    double std_ratio) {
  const std::size_t n = points.size();
  if (n <= k) throw Error(ErrorKind::Range, "outlier filter needs more than k points");
  const KdTree tree(points);
  std::vector<double> mean_dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto nn = tree.knn(points[i], k, i);
    double s = 0.0;
    for (const auto& [d2, j] : nn) s += std::sqrt(d2);
    mean_dist[i] = s / static_cast<double>(nn.size());
  }
  double mu = 0.0;
  for (double d : mean_dist) mu += d;
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (double d : mean_dist) var += (d - mu) * (d - mu);
  const double sd = std::sqrt(var / static_cast<double>(n));
  const double limit = mu + std_ratio * sd;

  std::vector<std::size_t> kept;
  kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (mean_dist[i] <= limit) kept.push_back(i);
  }
  return kept;
}

double stem_height(const PointCloud& cloud, const HeightParams& params) {
  if (cloud.size() < 50) throw Error(ErrorKind::Range, "stem height needs at least 50 points");
  const auto kept = statistical_outlier_filter(cloud.points, params.k_neighbors, params.std_ratio);
  std::vector<double> z;
  z.reserve(kept.size());
  for (std::size_t i : kept) z.push_back(cloud.points[i].z());
  std::sort(z.begin(), z.end());
  if (params.use_percentiles) {
    return quantile_sorted(z, params.high_percentile / 100.0) -
           quantile_sorted(z, params.low_percentile / 100.0);
  }
  return z.back() - z.front();
}

TraitReport compute_traits(const PointCloud& cloud, const SkeletonGraph& pruned_skeleton,
                           const Segmentation& segmentation, const EarthTransform& earth,
                           const std::string& sapling_id, const std::string& session_id,
                           const HeightParams& height_params) {
  TraitReport r;
  r.sapling_id = sapling_id;
  r.session_id = session_id;
  r.height = stem_height(cloud, height_params);
  r.bifurcations = count_bifurcations(pruned_skeleton);
  r.n_leaf = segmentation.leaf.size();
  r.n_wood = segmentation.wood.size();
  r.lwr = leaf_wood_ratio(r.n_leaf, r.n_wood);
  r.leaf_profile = leaf_profile(segmentation.leaf);

  Vec3 c = Vec3::Zero();
  for (const Vec3& p : segmentation.wood.points) c += p;
  r.map_position = c / static_cast<double>(segmentation.wood.size());
  const GeoPosition geo = to_earth(earth, r.map_position);
  r.latitude = geo.latitude;
  r.longitude = geo.longitude;
  return r;
}

std::string write_trait_report(const TraitReport& report) {
  KeyValueFile kv;
  kv.set("sapling_id", report.sapling_id);
  kv.set("session_id", report.session_id);
  kv.set("height_m", report.height);
  kv.set("bifurcations", static_cast<long long>(report.bifurcations));
  kv.set("lwr", report.lwr);
  kv.set("leaf_points", static_cast<long long>(report.n_leaf));
  kv.set("wood_points", static_cast<long long>(report.n_wood));
  kv.set("lat", report.latitude);
  kv.set("lon", report.longitude);
  kv.set("x", report.map_position.x());
  kv.set("y", report.map_position.y());
  kv.set("z", report.map_position.z());
  kv.set("profile_bandwidth", report.leaf_profile.bandwidth);
  kv.set("profile_degenerate", static_cast<long long>(report.leaf_profile.degenerate));
  return kv.str();
}

std::string write_profile_csv(const LeafProfile& profile) {
  std::ostringstream out;
  out << "z,density\n";
  for (std::size_t i = 0; i < profile.heights.size(); ++i) {
    out << format_double(profile.heights[i]) << ',' << format_double(profile.density[i]) << '\n';
  }
  return out.str();
}

LeafProfile parse_profile_csv(std::string_view text) {
  LeafProfile profile;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split_fields(line, ',');
    if (!header) {
      if (fields.size() != 2 || fields[0] != "z" || fields[1] != "density") {
        throw Error(ErrorKind::Parse, "expected header 'z,density'", line_no);
      }
      header = true;
      continue;
    }
    if (fields.size() != 2) throw Error(ErrorKind::Parse, "expected 2 fields", line_no);
    const double z = parse_double(fields[0], line_no);
    const double d = parse_double(fields[1], line_no);
    if (!profile.heights.empty() && !(z > profile.heights.back())) {
      throw Error(ErrorKind::Range, "profile heights must increase", line_no);
    }
    if (!(d >= 0.0)) throw Error(ErrorKind::Range, "negative density", line_no);
    profile.heights.push_back(z);
    profile.density.push_back(d);
  }
  if (!header) throw Error(ErrorKind::Parse, "missing profile header");
  return profile;
}

TraitReport parse_trait_report(std::string_view report, std::string_view profile_csv) {
  const KeyValueFile kv = KeyValueFile::parse(report);
  TraitReport r;
  r.sapling_id = kv.get("sapling_id");
  r.session_id = kv.get("session_id");
  r.height = kv.get_double("height_m");
  const long long bif = kv.get_int("bifurcations");
  const long long nl = kv.get_int("leaf_points");
  const long long nw = kv.get_int("wood_points");
  if (bif < 0 || nl < 0 || nw < 0) throw Error(ErrorKind::Range, "negative count in report");
  r.bifurcations = static_cast<std::size_t>(bif);
  r.n_leaf = static_cast<std::size_t>(nl);
  r.n_wood = static_cast<std::size_t>(nw);
  r.lwr = kv.get_double("lwr");
  r.latitude = kv.get_double("lat");
  r.longitude = kv.get_double("lon");
  r.map_position = Vec3(kv.get_double("x"), kv.get_double("y"), kv.get_double("z"));
  if (!profile_csv.empty()) r.leaf_profile = parse_profile_csv(profile_csv);
  if (kv.contains("profile_bandwidth")) r.leaf_profile.bandwidth = kv.get_double("profile_bandwidth");
  if (kv.contains("profile_degenerate")) r.leaf_profile.degenerate = kv.get_int("profile_degenerate") != 0;
  return r;
}

}  // namespace sapling
