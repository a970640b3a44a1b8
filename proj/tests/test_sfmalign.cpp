#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "sapling/error.hpp"
#include "sapling/sfmalign.hpp"

using namespace sapling;

namespace {

std::vector<Vec3> random_points(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  return pts;
}

std::vector<Vec3> map_points(const SimilarityTransform& t, const std::vector<Vec3>& pts) {
  std::vector<Vec3> out;
  for (const Vec3& p : pts) out.push_back(t(p));
  return out;
}

// Dome capture path: one revolution of radius 1 m with the height oscillating.
Trajectory dome(double t0, std::size_t n) {
  std::vector<Pose> poses;
  for (std::size_t i = 0; i < n; ++i) {
    const double th = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    Pose p;
    p.timestamp = t0 + 0.1 * static_cast<double>(i);
    p.translation = Vec3(std::cos(th), std::sin(th), 1.0 + 0.4 * std::sin(2.0 * th));
    p.rotation = Quat(Eigen::AngleAxisd(th + std::numbers::pi, Vec3::UnitZ()));
    poses.push_back(p);
  }
  return Trajectory("M1", poses);
}

Trajectory mapped(const Trajectory& t, const SimilarityTransform& s, const std::string& frame, double noise = 0.0,
                  std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, noise > 0.0 ? noise : 1.0);
  std::vector<Pose> poses;
  for (const Pose& p : t.poses()) {
    Pose q = apply(s, p);
    if (noise > 0.0) q.translation += s.scale * Vec3(g(rng), g(rng), g(rng)) * (noise > 0.0);
    poses.push_back(q);
  }
  return Trajectory(frame, poses);
}

}  // namespace

TEST(Subtrajectory, Windows) {
  std::vector<Pose> poses;
  for (int i = 0; i <= 5; ++i) poses.push_back({static_cast<double>(i), Quat::Identity(), Vec3(i, 0, 0)});
  const Trajectory t("M1", poses);
  const Subtrajectory all = extract_subtrajectory(t, -1.0, 10.0, "a", "s");
  EXPECT_EQ(all.poses.size(), 6u);
  const Subtrajectory mid = extract_subtrajectory(t, 2.0, 3.0, "a", "s");
  ASSERT_EQ(mid.poses.size(), 2u);
  EXPECT_EQ(mid.poses[0].timestamp, 2.0);
  EXPECT_EQ(mid.poses[1].timestamp, 3.0);
  EXPECT_EQ(mid.poses.frame_id(), "M1");
  EXPECT_THROW(extract_subtrajectory(t, -5.0, -1.0, "a", "s"), Error);
  EXPECT_THROW(extract_subtrajectory(t, 3.0, 2.0, "a", "s"), Error);
}

TEST(Umeyama, IdentityOnEqualSets) {
  std::mt19937_64 rng(1);
  const auto pts = random_points(20, rng);
  const auto t = umeyama(pts, pts);
  EXPECT_NEAR(t.scale, 1.0, 1e-12);
  EXPECT_LT(t.rotation.angularDistance(Quat::Identity()), 1e-9);
  EXPECT_LT(t.translation.norm(), 1e-12);
  EXPECT_LT(rms_residual(t, pts, pts), 1e-12);
}

TEST(Umeyama, PlantedScaleRotationTranslation) {
  std::mt19937_64 rng(2);
  const auto src = random_points(50, rng);
  const SimilarityTransform planted(2.5, Quat(Eigen::AngleAxisd(std::numbers::pi / 6.0, Vec3::UnitZ())),
                                    Vec3(1, 2, 3));
  const auto t = umeyama(src, map_points(planted, src));
  EXPECT_NEAR(t.scale, 2.5, 1e-9);
  EXPECT_LT((t.rotation.toRotationMatrix() - planted.rotation.toRotationMatrix()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((t.translation - Vec3(1, 2, 3)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Umeyama, RandomPlantedSimilarities) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ls(std::log(0.05), std::log(20.0)), u(-10.0, 10.0);
    const SimilarityTransform planted(std::exp(ls(rng)), oracle::random_rotation(rng), Vec3(u(rng), u(rng), u(rng)));
    const auto src = random_points(30, rng);
    const auto t = umeyama(src, map_points(planted, src));
    EXPECT_NEAR(t.scale, planted.scale, 1e-9 * planted.scale);
    EXPECT_LT((t.rotation.toRotationMatrix() - planted.rotation.toRotationMatrix()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((t.translation - planted.translation).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Umeyama, WithoutScalePinsScale) {
  std::mt19937_64 rng(3);
  const auto src = random_points(20, rng);
  const SimilarityTransform planted(1.0, oracle::random_rotation(rng), Vec3(0.5, 0, -1));
  const auto t = umeyama(src, map_points(planted, src), false);
  EXPECT_EQ(t.scale, 1.0);
  EXPECT_LT((t.translation - planted.translation).norm(), 1e-9);
}

TEST(Umeyama, Errors) {
  std::mt19937_64 rng(4);
  const auto pts = random_points(5, rng);
  const std::vector<Vec3> two(pts.begin(), pts.begin() + 2);
  EXPECT_THROW(umeyama(pts, two), Error);
  EXPECT_THROW(umeyama(two, two), Error);
  std::vector<Vec3> line;
  for (int i = 0; i < 6; ++i) line.push_back(Vec3(i, 2.0 * i, -i));
  try {
    umeyama(line, line);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
  }
  const std::vector<Vec3> same(4, Vec3(1, 1, 1));
  EXPECT_THROW(umeyama(same, same), Error);
}

TEST(UmeyamaProperty, ScaleEquivariance) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(seed);
    const auto src = random_points(25, rng);
    auto dst = random_points(25, rng);  // arbitrary, not an exact similarity
    const double base = umeyama(src, dst).scale;
    for (double k : {0.1, 1.0, 10.0}) {
      std::vector<Vec3> scaled;
      for (const Vec3& p : dst) scaled.push_back(k * p);
      EXPECT_NEAR(umeyama(src, scaled).scale, k * base, 1e-9 * k * base);
    }
  }
}

TEST(UmeyamaProperty, PerturbationsNeverReduceResidual) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto src = random_points(30, rng);
    auto dst = map_points(SimilarityTransform(1.7, oracle::random_rotation(rng), Vec3(1, 2, 3)), src);
    std::normal_distribution<double> g(0.0, 0.05);
    for (Vec3& p : dst) p += Vec3(g(rng), g(rng), g(rng));
    const auto t = umeyama(src, dst);
    const double best = sum_squared_residual(t, src, dst);
    for (int k = 0; k < 20; ++k) {
      std::normal_distribution<double> d(0.0, 1e-3);
      const Quat dq = Quat(Eigen::AngleAxisd(std::abs(d(rng)), Vec3(d(rng), d(rng), d(rng)).normalized()));
      const SimilarityTransform p(t.scale * (1.0 + d(rng)), dq * t.rotation, t.translation + Vec3(d(rng), d(rng), d(rng)));
      EXPECT_GE(sum_squared_residual(p, src, dst), best * (1.0 - 1e-12));
    }
  }
}

TEST(Register, CopiedPositionsGiveIdentity) {
  const Trajectory slam = dome(100.0, 200);
  const Subtrajectory sub = extract_subtrajectory(slam, 100.0, 120.0, "a", "s");
  const Trajectory sfm("F_a", sub.poses.poses());
  const RegistrationResult r = register_sfm(sfm, sub);
  EXPECT_NEAR(r.transform.scale, 1.0, 1e-12);
  EXPECT_LT(r.transform.translation.norm(), 1e-9);
  EXPECT_LT(r.rms_residual, 1e-9);
  EXPECT_EQ(r.pair_count, sub.poses.size());
  EXPECT_EQ(r.transform.source_frame, "F_a");
  EXPECT_EQ(r.transform.target_frame, "M1");
  EXPECT_FALSE(r.coplanar_warning);
}

TEST(Register, RecoversInverseOfPlantedScale) {
  const Trajectory slam = dome(0.0, 150);
  const Subtrajectory sub = extract_subtrajectory(slam, 0.0, 20.0, "a", "s");
  std::mt19937_64 rng(7);
  const SimilarityTransform map_to_sfm(0.113, oracle::random_rotation(rng), Vec3(4, -2, 9));
  const RegistrationResult r = register_sfm(mapped(sub.poses, map_to_sfm, "F_a"), sub);
  EXPECT_NEAR(r.transform.scale, 1.0 / 0.113, 1e-6 / 0.113);
  for (std::size_t i = 0; i < sub.poses.size(); ++i) {
    EXPECT_LT((r.aligned[i].translation - sub.poses[i].translation).norm(), 1e-9);
    EXPECT_LT(r.aligned[i].rotation.angularDistance(sub.poses[i].rotation), 1e-9);
  }
}

TEST(Register, NoisyDomeMonteCarlo) {
  int pass = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Trajectory slam = dome(0.0, 200);
    const Subtrajectory sub = extract_subtrajectory(slam, 0.0, 30.0, "a", "s");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ls(std::log(0.2), std::log(5.0));
    const double s = std::exp(ls(rng));
    const SimilarityTransform map_to_sfm(s, oracle::random_rotation(rng), Vec3(1, 2, 3));
    const RegistrationResult r = register_sfm(mapped(sub.poses, map_to_sfm, "F_a", 0.005, seed), sub);
    pass += r.rms_residual <= 0.010 && std::abs(r.transform.scale * s - 1.0) <= 0.01;
  }
  EXPECT_GE(pass, 95);
}

TEST(Register, FlatCircleRaisesWarning) {
  std::vector<Pose> poses;
  for (int i = 0; i < 60; ++i) {
    const double th = 0.1 * i;
    poses.push_back({static_cast<double>(i), Quat::Identity(), Vec3(std::cos(th), std::sin(th), 1.0)});
  }
  const Trajectory slam("M1", poses);
  const Subtrajectory sub = extract_subtrajectory(slam, 0.0, 59.0, "a", "s");
  const RegistrationResult r = register_sfm(Trajectory("F_a", poses), sub);
  EXPECT_TRUE(r.coplanar_warning);
  EXPECT_NEAR(r.transform.scale, 1.0, 1e-9);
}

TEST(Register, TooFewMatches) {
  const Trajectory slam = dome(0.0, 100);
  const Subtrajectory sub = extract_subtrajectory(slam, 0.0, 5.0, "a", "s");
  std::vector<Pose> far = {{500.0, Quat::Identity(), Vec3::Zero()}, {501.0, Quat::Identity(), Vec3::UnitX()}};
  EXPECT_THROW(register_sfm(Trajectory("F_a", far), sub), Error);
}

TEST(TransformCloud, IdentityAndCube) {
  PointCloud c;
  c.frame_id = "F_a";
  for (int i = 0; i < 8; ++i) {
    c.points.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
    c.colors.push_back(Rgb{static_cast<std::uint8_t>(i), 0, 255});
  }
  const PointCloud same = transform_cloud(c, SimilarityTransform(1.0, Quat::Identity(), Vec3::Zero(), "F_a", "M1"), "M1");
  EXPECT_EQ(same.points, c.points);
  EXPECT_EQ(same.colors, c.colors);
  EXPECT_EQ(same.frame_id, "M1");
  const PointCloud big = transform_cloud(c, SimilarityTransform(2.0, Quat::Identity(), Vec3::Zero()), "M1");
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(big.points[i], 2.0 * c.points[i]);
  EXPECT_EQ(big.colors, c.colors);
}

TEST(TransformCloud, FrameMismatch) {
  PointCloud c;
  c.frame_id = "F_b";
  c.points = {Vec3::Zero()};
  try {
    transform_cloud(c, SimilarityTransform(1.0, Quat::Identity(), Vec3::Zero(), "F_a", "M1"), "M1");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::FrameMismatch);
  }
}

TEST(TransformCloud, MatchesHomogeneousOracle) {
  std::mt19937_64 rng(12);
  const SimilarityTransform t(0.37, oracle::random_rotation(rng), Vec3(10, -4, 2), "F", "M1");
  const Eigen::Matrix4d m = oracle::similarity_matrix(t.scale, t.rotation, t.translation);
  PointCloud c;
  c.frame_id = "F";
  c.points = random_points(500, rng);
  const PointCloud out = transform_cloud(c, t, "M1");
  ASSERT_EQ(out.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_LT((out.points[i] - (m * c.points[i].homogeneous()).head<3>()).norm(), 1e-9);
  }
}

TEST(SimilarityText, Roundtrip) {
  std::mt19937_64 rng(13);
  const SimilarityTransform t(3.25, oracle::random_rotation(rng), Vec3(1.5, -2.25, 1e-7), "F_x", "M1");
  const SimilarityTransform back = parse_similarity_transform(write_similarity_transform(t, 0.01, 42, true));
  EXPECT_EQ(back.scale, t.scale);
  EXPECT_EQ(back.translation, t.translation);
  EXPECT_EQ(back.source_frame, "F_x");
  EXPECT_EQ(back.target_frame, "M1");
  EXPECT_LT(back.rotation.angularDistance(t.rotation), 1e-15);
}

TEST(Manifest, RoundtripAndErrors) {
  const std::vector<ManifestRow> rows = {{"s1", "sap01", 10.0, 30.5, "sfm/sap01.tum", "clouds/sap01.ply"},
                                         {"s1", "sap02", 40.0, 60.0, "sfm/sap02.tum", "clouds/sap02.ply"}};
  const auto back = parse_manifest(write_manifest(rows));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].sapling_id, "sap02");
  EXPECT_EQ(back[0].t_end, 30.5);
  EXPECT_EQ(back[1].cloud_path, "clouds/sap02.ply");
  EXPECT_THROW(parse_manifest("session_id,sapling_id\ns1,a\n"), Error);
  EXPECT_THROW(parse_manifest("session_id,sapling_id,t_start,t_end,sfm_traj_path,cloud_path\ns1,a,5,x,p,q\n"),
               Error);
}
