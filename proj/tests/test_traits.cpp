#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "sapling/error.hpp"
#include "sapling/leafwood.hpp"
#include "sapling/skeleton.hpp"
#include "sapling/synthgen.hpp"
#include "sapling/traits.hpp"

using namespace sapling;

namespace {

// Stem surface of radius 1 cm over [z0, z1], with closing rings at both ends.
PointCloud stem_cloud(double z0, double z1, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointCloud c;
  c.frame_id = "M1";
  for (std::size_t i = 0; i < n; ++i) {
    const double th = 2.0 * std::numbers::pi * u(rng);
    c.points.emplace_back(0.01 * std::cos(th), 0.01 * std::sin(th), z0 + (z1 - z0) * u(rng));
  }
  for (int i = 0; i < 24; ++i) {
    const double th = 2.0 * std::numbers::pi * i / 24.0;
    c.points.emplace_back(0.01 * std::cos(th), 0.01 * std::sin(th), z0);
    c.points.emplace_back(0.01 * std::cos(th), 0.01 * std::sin(th), z1);
  }
  return c;
}

PointCloud heights_cloud(const std::vector<double>& z) {
  PointCloud c;
  for (std::size_t i = 0; i < z.size(); ++i) c.points.emplace_back(0.001 * static_cast<double>(i % 7), 0.0, z[i]);
  return c;
}

std::vector<double> zs(const PointCloud& c) {
  std::vector<double> z;
  for (const Vec3& p : c.points) z.push_back(p.z());
  return z;
}

/// Mean distance to the k nearest neighbours, by brute force.
std::vector<std::size_t> brute_outlier_filter(const std::vector<Vec3>& pts, std::size_t k, double ratio) {
  std::vector<double> md(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double s = 0.0;
    for (std::size_t j : oracle::brute_knn(pts, i, k)) s += (pts[j] - pts[i]).norm();
    md[i] = s / static_cast<double>(k);
  }
  double mu = 0.0;
  for (double d : md) mu += d;
  mu /= static_cast<double>(md.size());
  double var = 0.0;
  for (double d : md) var += (d - mu) * (d - mu);
  const double limit = mu + ratio * std::sqrt(var / static_cast<double>(md.size()));
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (md[i] <= limit) kept.push_back(i);
  }
  return kept;
}

std::size_t argmax_in(const LeafProfile& p, double lo, double hi) {
  std::size_t best = p.heights.size();
  for (std::size_t b = 0; b < p.heights.size(); ++b) {
    if (p.heights[b] < lo || p.heights[b] > hi) continue;
    if (best == p.heights.size() || p.density[b] > p.density[best]) best = b;
  }
  return best;
}

}  // namespace

// height ---------------------------------------------------------------------------------

TEST(Height, SpanOfCleanCloud) {
  // Sapling 01 of the field table has height 0.89 m.
  const PointCloud c = stem_cloud(0.10, 0.99, 5000, 1);
  EXPECT_NEAR(stem_height(c), 0.89, 1e-12);
}

TEST(Height, OutliersAreRemoved) {
  const PointCloud clean = stem_cloud(0.10, 0.99, 5000, 2);
  PointCloud noisy = clean;
  for (int i = 0; i < 5; ++i) noisy.points.emplace_back(0.2 * i - 0.4, 0.3, 3.0);
  const auto kept = statistical_outlier_filter(noisy.points, 10, 2.0);
  for (std::size_t i = clean.size(); i < noisy.size(); ++i) {
    EXPECT_FALSE(std::binary_search(kept.begin(), kept.end(), i));
  }
  EXPECT_NEAR(stem_height(noisy), stem_height(clean), 0.01);
  EXPECT_NEAR(stem_height(noisy), 0.89, 0.01);
}

TEST(Height, FilterMatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<Vec3> pts;
  for (int i = 0; i < 600; ++i) pts.emplace_back(g(rng), g(rng), g(rng));
  for (int i = 0; i < 6; ++i) pts.emplace_back(1.0 + i, -1.0, 2.0);
  EXPECT_EQ(statistical_outlier_filter(pts, 10, 2.0), brute_outlier_filter(pts, 10, 2.0));
  EXPECT_EQ(statistical_outlier_filter(pts, 5, 1.0), brute_outlier_filter(pts, 5, 1.0));
}

TEST(Height, FlatCloudIsZero) {
  PointCloud c;
  for (int i = 0; i < 100; ++i) c.points.emplace_back(0.01 * (i % 10), 0.01 * (i / 10), 0.7);
  EXPECT_EQ(stem_height(c), 0.0);
}

TEST(Height, TooFewPoints) {
  const PointCloud c = stem_cloud(0.0, 1.0, 1, 4);
  PointCloud small;
  small.points.assign(c.points.begin(), c.points.begin() + 49);
  try {
    stem_height(small);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Range);
  }
}

TEST(Height, PercentileVariant) {
  const PointCloud c = stem_cloud(0.0, 1.0, 20000, 5);
  HeightParams p;
  p.use_percentiles = true;
  const double h = stem_height(c, p);
  EXPECT_LT(h, stem_height(c));
  EXPECT_NEAR(h, 0.99, 0.01);
}

TEST(Height, RigidMotionProperties) {
  const PointCloud c = stem_cloud(0.2, 1.1, 3000, 6);
  const double h = stem_height(c);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Matrix3d r = Eigen::AngleAxisd(u(rng), Vec3::UnitZ()).toRotationMatrix();
    const Vec3 t(u(rng), u(rng), u(rng));
    PointCloud moved = c;
    for (Vec3& p : moved.points) p = r * p + t;
    EXPECT_NEAR(stem_height(moved), h, 1e-9);
  }
}

// profile ----------------------------------------------------------------------------------

TEST(Profile, BandwidthMatchesOracle) {
  std::mt19937_64 rng(8);
  std::gamma_distribution<double> g(2.0, 0.2);
  std::vector<double> z;
  for (int i = 0; i < 777; ++i) z.push_back(g(rng));
  EXPECT_NEAR(silverman_bandwidth(z), oracle::silverman(z), 1e-14);
  EXPECT_THROW(silverman_bandwidth(std::vector<double>{1.0}), Error);
}

TEST(Profile, MatchesDirectSummation) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(1.0, 0.3);
  std::vector<double> z;
  for (int i = 0; i < 500; ++i) z.push_back(g(rng));
  const LeafProfile p = leaf_profile(heights_cloud(z));
  ASSERT_EQ(p.heights.size(), kProfileBins);
  const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
  EXPECT_DOUBLE_EQ(p.heights.front(), *lo);
  EXPECT_NEAR(p.heights.back(), *hi, 1e-12);
  std::vector<double> want;
  for (double x : p.heights) want.push_back(oracle::kde(z, oracle::silverman(z), x));
  const double area = trapezoid_integral(p.heights, want);
  for (std::size_t b = 0; b < want.size(); ++b) EXPECT_NEAR(p.density[b], want[b] / area, 1e-9);
  EXPECT_NEAR(trapezoid_integral(p), 1.0, 1e-12);
}

TEST(Profile, NarrowClusterPeaksAtItsHeight) {
  std::vector<double> z;
  for (int i = 0; i <= 100; ++i) z.push_back(0.9995 + 0.001 * i / 100.0);
  const LeafProfile p = leaf_profile(heights_cloud(z));
  EXPECT_FALSE(p.degenerate);
  const std::size_t peak = argmax_in(p, -1e9, 1e9);
  std::size_t nearest = 0;
  for (std::size_t b = 0; b < p.heights.size(); ++b) {
    if (std::abs(p.heights[b] - 1.0) < std::abs(p.heights[nearest] - 1.0)) nearest = b;
  }
  EXPECT_LE(std::max(peak, nearest) - std::min(peak, nearest), 1u);
  EXPECT_NEAR(trapezoid_integral(p), 1.0, 1e-6);
}

TEST(Profile, BimodalClusters) {
  std::vector<double> z;
  for (int i = 0; i < 1000; ++i) {
    const double f = -0.1 + 0.2 * i / 999.0;
    z.push_back(0.5 + f * std::abs(f) * 10.0);  // denser towards the centre
    z.push_back(1.5 + f * std::abs(f) * 10.0);
  }
  const LeafProfile p = leaf_profile(heights_cloud(z));
  const double bin = p.heights[1] - p.heights[0];
  const std::size_t a = argmax_in(p, 0.0, 1.0);
  const std::size_t b = argmax_in(p, 1.0, 2.0);
  EXPECT_LE(std::abs(p.heights[a] - 0.5), bin);
  EXPECT_LE(std::abs(p.heights[b] - 1.5), bin);
  // The direct sum agrees on which grid points are the peaks.
  const double h = oracle::silverman(z);
  for (std::size_t peak : {a, b}) {
    for (std::size_t n : {peak - 1, peak + 1}) {
      EXPECT_GE(oracle::kde(z, h, p.heights[peak]), oracle::kde(z, h, p.heights[n]));
    }
  }
  // Dip between the modes.
  EXPECT_LT(p.density[argmax_in(p, 0.99, 1.01)], 0.1 * p.density[a]);
  std::vector<double> lx, ly, ux, uy;
  for (std::size_t i = 0; i < p.heights.size(); ++i) {
    (p.heights[i] <= 1.0 ? lx : ux).push_back(p.heights[i]);
    (p.heights[i] <= 1.0 ? ly : uy).push_back(p.density[i]);
  }
  const double lower = trapezoid_integral(lx, ly), upper = trapezoid_integral(ux, uy);
  EXPECT_NEAR(lower / upper, 1.0, 0.02);
}

TEST(Profile, UniformHeights) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> z;
  for (int i = 0; i < 10000; ++i) z.push_back(u(rng));
  const LeafProfile p = leaf_profile(heights_cloud(z));
  for (std::size_t b = 0; b < p.heights.size(); ++b) {
    if (p.heights[b] < 0.1 || p.heights[b] > 0.9) continue;
    EXPECT_NEAR(p.density[b], 1.0, 0.1) << p.heights[b];
  }
}

TEST(Profile, DegenerateAndEmpty) {
  const LeafProfile spike = leaf_profile(heights_cloud(std::vector<double>(20, 0.8)));
  EXPECT_TRUE(spike.degenerate);
  EXPECT_NEAR(trapezoid_integral(spike), 1.0, 1e-6);
  EXPECT_NEAR(spike.heights[argmax_in(spike, -1e9, 1e9)], 0.8, 1e-5);
  EXPECT_TRUE(leaf_profile(heights_cloud({0.3})).empty());
  EXPECT_TRUE(leaf_profile(PointCloud{}).empty());
}

TEST(Profile, IntegralAndNonNegativityOnRandomInputs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> count(2, 400);
    std::lognormal_distribution<double> scale(-2.0, 1.5);
    const double s = scale(rng);
    std::normal_distribution<double> g(0.0, s);
    std::vector<double> z;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) z.push_back(g(rng) + (i % 3 == 0 ? 4.0 * s : 0.0));
    const LeafProfile p = leaf_profile(heights_cloud(z));
    ASSERT_EQ(p.heights.size(), kProfileBins);
    EXPECT_NEAR(trapezoid_integral(p), 1.0, 1e-6);
    for (double d : p.density) EXPECT_GE(d, 0.0);
    EXPECT_TRUE(std::is_sorted(p.heights.begin(), p.heights.end()));
  }
}

// report -----------------------------------------------------------------------------------

TEST(Report, SyntheticSaplingMatchesTruth) {
  const auto syn = synth::generate(synth::leafy_spec(2, 3));
  const SkeletonizeResult topo = skeletonize(syn.cloud);
  const SkeletonizeResult full = skeletonize(syn.cloud, full_resolution_params());
  const Segmentation seg = segment_leaf_wood(syn.cloud, full.skeleton);
  EarthTransform earth;
  earth.anchor = GeoFix{0.0, 51.775, -1.339, 100.0, true};
  const TraitReport r = compute_traits(syn.cloud, topo.skeleton, seg, earth, "S01", "s1");
  EXPECT_NEAR(r.height, syn.truth.height, 0.01);
  EXPECT_EQ(r.bifurcations, syn.truth.bifurcations);
  EXPECT_NEAR(r.lwr / syn.truth.lwr, 1.0, 0.10);
  EXPECT_EQ(r.n_leaf + r.n_wood, syn.cloud.size());
  EXPECT_NEAR(trapezoid_integral(r.leaf_profile), 1.0, 1e-6);

  Vec3 c = Vec3::Zero();
  for (const Vec3& p : seg.wood.points) c += p;
  c /= static_cast<double>(seg.wood.size());
  EXPECT_NEAR((r.map_position - c).norm(), 0.0, 1e-12);
  const GeoPosition geo = to_earth(earth, c);
  EXPECT_EQ(r.latitude, geo.latitude);
  EXPECT_EQ(r.longitude, geo.longitude);

  // Same inputs, same report.
  const TraitReport again = compute_traits(syn.cloud, topo.skeleton, seg, earth, "S01", "s1");
  EXPECT_EQ(write_trait_report(again), write_trait_report(r));
  EXPECT_EQ(write_profile_csv(again.leaf_profile), write_profile_csv(r.leaf_profile));
}

TEST(Report, NoWoodIsAnError) {
  PointCloud c = stem_cloud(0.0, 1.0, 100, 12);
  Segmentation seg;
  seg.leaf = c;
  for (std::size_t i = 0; i < c.size(); ++i) seg.leaf_indices.push_back(i);
  SkeletonGraph g;
  g.vertices = {Vec3::Zero()};
  EXPECT_THROW(compute_traits(c, g, seg, EarthTransform{}, "a", "b"), Error);
}

TEST(Report, Roundtrip) {
  TraitReport r;
  r.sapling_id = "S07";
  r.session_id = "2024-06";
  r.height = 0.89;
  r.bifurcations = 4;
  r.lwr = 12.54;
  r.n_leaf = 1254;
  r.n_wood = 100;
  r.latitude = 51.775123456789;
  r.longitude = -1.339987654321;
  r.map_position = Vec3(1.0 / 3.0, -2e-9, 123.456);
  std::vector<double> z;
  for (int i = 0; i < 50; ++i) z.push_back(0.3 + 0.01 * i * i / 50.0);
  r.leaf_profile = leaf_profile(heights_cloud(z));

  const TraitReport back = parse_trait_report(write_trait_report(r), write_profile_csv(r.leaf_profile));
  EXPECT_EQ(back.sapling_id, r.sapling_id);
  EXPECT_EQ(back.session_id, r.session_id);
  EXPECT_EQ(back.height, r.height);
  EXPECT_EQ(back.bifurcations, r.bifurcations);
  EXPECT_EQ(back.lwr, r.lwr);
  EXPECT_EQ(back.n_leaf, r.n_leaf);
  EXPECT_EQ(back.n_wood, r.n_wood);
  EXPECT_EQ(back.latitude, r.latitude);
  EXPECT_EQ(back.longitude, r.longitude);
  EXPECT_EQ(back.map_position, r.map_position);
  EXPECT_EQ(back.leaf_profile.heights, r.leaf_profile.heights);
  EXPECT_EQ(back.leaf_profile.density, r.leaf_profile.density);
  EXPECT_EQ(back.leaf_profile.bandwidth, r.leaf_profile.bandwidth);
  EXPECT_EQ(back.leaf_profile.degenerate, r.leaf_profile.degenerate);
}

TEST(Report, ProfileCsvErrors) {
  EXPECT_THROW(parse_profile_csv("height,d\n0,1\n"), Error);
  EXPECT_THROW(parse_profile_csv("z,density\n0,1\n0,1\n"), Error);
  EXPECT_THROW(parse_profile_csv("z,density\n0,-1\n"), Error);
  EXPECT_THROW(parse_profile_csv("z,density\n0\n"), Error);
  EXPECT_THROW(parse_profile_csv(""), Error);
  EXPECT_TRUE(parse_profile_csv("z,density\n").empty());
  try {
    parse_profile_csv("z,density\n0,1\n1,x\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Report, MissingKeyIsReported) {
  TraitReport r;
  r.sapling_id = "S";
  r.session_id = "s";
  std::string text = write_trait_report(r);
  const auto at = text.find("lwr");
  text.erase(at, text.find('\n', at) - at + 1);
  EXPECT_THROW(parse_trait_report(text), Error);
}
