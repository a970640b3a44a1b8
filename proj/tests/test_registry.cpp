#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include <unistd.h>

#include "sapling/error.hpp"
#include "sapling/ingest.hpp"
#include "sapling/registry.hpp"

using namespace sapling;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("sapling_registry_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

LeafProfile gaussian_profile(double mu, double sigma, double lo, double hi, std::size_t bins = 200) {
  LeafProfile p;
  for (std::size_t i = 0; i < bins; ++i) {
    const double z = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins - 1);
    p.heights.push_back(z);
    p.density.push_back(std::exp(-0.5 * std::pow((z - mu) / sigma, 2)) / (sigma * std::sqrt(2.0 * std::numbers::pi)));
  }
  p.bandwidth = sigma;
  return p;
}

TraitReport report_for(const std::string& sapling, const std::string& session, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TraitReport r;
  r.sapling_id = sapling;
  r.session_id = session;
  r.height = 0.5 + u(rng);
  r.bifurcations = static_cast<std::size_t>(rng() % 6);
  r.n_leaf = 100 + rng() % 1000;
  r.n_wood = 100 + rng() % 1000;
  r.lwr = static_cast<double>(r.n_leaf) / static_cast<double>(r.n_wood);
  r.latitude = 51.775 + 1e-4 * u(rng);
  r.longitude = -1.339 + 1e-4 * u(rng);
  r.map_position = Vec3(10.0 * u(rng), 10.0 * u(rng), u(rng));
  r.leaf_profile = gaussian_profile(0.5 * r.height, 0.1 + 0.1 * u(rng), 0.1, r.height);
  return r;
}

/// Writes artifacts for a record and returns the record.
SaplingRecord stored(const fs::path& root, const TraitReport& r, const std::string& date) {
  PointCloud cloud;
  cloud.frame_id = "M1";
  cloud.points = {{0, 0, 0}, {0, 0, r.height}};
  SkeletonGraph skel;
  skel.vertices = cloud.points;
  skel.edges = {{0, 1}};
  Segmentation seg;
  seg.wood = cloud.subset(std::vector<std::size_t>{0});
  seg.leaf = cloud.subset(std::vector<std::size_t>{1});
  seg.wood_indices = {0};
  seg.leaf_indices = {1};
  write_artifacts(root, r, cloud, skel, seg);
  return make_record(r, date);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST(Registry, AddAndDuplicate) {
  std::mt19937_64 rng(1);
  Registry reg;
  EXPECT_TRUE(reg.empty());
  reg = add_record(reg, make_record(report_for("S01", "s1", rng), "2024-07-01"));
  EXPECT_EQ(reg.size(), 1u);
  try {
    reg.add(make_record(report_for("S01", "s1", rng), "2024-08-01"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Duplicate);
  }
  EXPECT_EQ(reg.size(), 1u);
  EXPECT_TRUE(reg.contains("S01", "s1"));
  EXPECT_FALSE(reg.contains("S01", "s2"));
  try {
    reg.get("S02", "s1");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotFound);
  }
}

TEST(Registry, LookupSortedByDate) {
  std::mt19937_64 rng(2);
  Registry reg;
  const std::vector<std::pair<std::string, std::string>> sessions = {
      {"winter", "2024-12-03"}, {"summer", "2024-07-15"}, {"autumn", "2024-09-30"}};
  for (int s = 0; s < 5; ++s) {
    for (const auto& [ses, date] : sessions) {
      reg.add(make_record(report_for("S0" + std::to_string(s), ses, rng), date));
    }
  }
  EXPECT_EQ(reg.size(), 15u);
  const auto three = reg.lookup("S03");
  ASSERT_EQ(three.size(), 3u);
  EXPECT_EQ(three[0].session_id, "summer");
  EXPECT_EQ(three[1].session_id, "autumn");
  EXPECT_EQ(three[2].session_id, "winter");
  EXPECT_TRUE(reg.lookup("S99").empty());
}

TEST(Registry, RejectsBadKeysAndDates) {
  std::mt19937_64 rng(3);
  Registry reg;
  EXPECT_THROW(reg.add(make_record(report_for("../x", "s1", rng), "2024-01-01")), Error);
  EXPECT_THROW(reg.add(make_record(report_for("a b", "s1", rng), "2024-01-01")), Error);
  EXPECT_THROW(make_record(report_for("S1", "s1", rng), "2024-02-30"), Error);
  EXPECT_THROW(validate_date("2024-13-01"), Error);
  EXPECT_THROW(validate_date("24-01-01"), Error);
  EXPECT_THROW(validate_date("2024-1-011"), Error);
  EXPECT_NO_THROW(validate_date("2024-02-29"));
  EXPECT_THROW(validate_date("2023-02-29"), Error);
}

TEST(Registry, SaveLoadRoundtrip) {
  TempDir dir;
  std::mt19937_64 rng(4);
  Registry reg;
  for (int s = 0; s < 4; ++s) {
    for (const char* ses : {"s1", "s2"}) {
      reg.add(stored(dir.path(), report_for("S" + std::to_string(s), ses, rng), ses[1] == '1' ? "2024-07-01" : "2024-12-01"));
    }
  }
  reg.save(dir.path());
  const Registry back = Registry::load(dir.path());
  EXPECT_EQ(back, reg);
  EXPECT_EQ(back.index_csv(), reg.index_csv());
  for (const char* name : {"cloud.ply", "skel.txt", "leaf.ply", "wood.ply", "report.txt", "profile.csv"}) {
    EXPECT_TRUE(fs::exists(dir.path() / "S2" / "s1" / name)) << name;
  }
  EXPECT_TRUE(fs::exists(dir.path() / "index.csv"));
}

TEST(Registry, SaveRequiresArtifacts) {
  TempDir dir;
  std::mt19937_64 rng(5);
  Registry reg;
  reg.add(make_record(report_for("S1", "s1", rng), "2024-01-01"));
  try {
    reg.save(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotFound);
  }
  EXPECT_FALSE(fs::exists(dir.path() / "index.csv"));
}

TEST(Registry, CorruptIndexRowsAreLocated) {
  std::mt19937_64 rng(6);
  Registry reg;
  reg.add(make_record(report_for("S1", "s1", rng), "2024-01-01"));
  reg.add(make_record(report_for("S2", "s1", rng), "2024-01-01"));
  const std::string good = reg.index_csv();

  const auto expect_row = [](const std::string& text, std::size_t line) {
    try {
      Registry::parse_index(text);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.line(), line) << text;
    }
  };
  std::string bad_date = good;
  bad_date.replace(bad_date.find("2024-01-01", bad_date.find("S2")), 10, "2024-01-32");
  expect_row(bad_date, 3);
  std::string short_row = good + "S3,s1,2024-01-01,1,2\n";
  expect_row(short_row, 4);
  std::string dup = good + good.substr(good.find('\n') + 1, good.find('\n', good.find('\n') + 1) - good.find('\n'));
  expect_row(dup, 4);
  std::string bad_bif = good;
  const auto row2 = bad_bif.find("S2");
  const auto last_comma = bad_bif.rfind(',');
  const auto prev_comma = bad_bif.rfind(',', last_comma - 1);
  ASSERT_GT(prev_comma, row2);
  bad_bif.replace(prev_comma + 1, last_comma - prev_comma - 1, "-1");
  expect_row(bad_bif, 3);
  EXPECT_THROW(Registry::parse_index("id,session\n"), Error);
  EXPECT_THROW(Registry::parse_index(""), Error);
  EXPECT_EQ(Registry::parse_index(good), Registry::parse_index(good));
}

TEST(Registry, HundredRecordsLoadQuickly) {
  TempDir dir;
  std::mt19937_64 rng(7);
  Registry reg;
  for (int s = 0; s < 50; ++s) {
    reg.add(stored(dir.path(), report_for("S" + std::to_string(s), "jul", rng), "2024-07-01"));
    reg.add(stored(dir.path(), report_for("S" + std::to_string(s), "dec", rng), "2024-12-01"));
  }
  reg.save(dir.path());
  (void)Registry::load(dir.path());  // warm the page cache
  const auto t0 = std::chrono::steady_clock::now();
  const Registry back = Registry::load(dir.path());
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(back.size(), 100u);
  EXPECT_LT(ms, 100.0);
}

// change reports -------------------------------------------------------------------------

TEST(Change, IdenticalRecordsGiveZero) {
  std::mt19937_64 rng(8);
  Registry reg;
  reg.add(make_record(report_for("S1", "a", rng), "2024-01-01"));
  const ChangeReport c = change_report(reg, "S1", "a", "a");
  EXPECT_EQ(c.d_height, 0.0);
  EXPECT_EQ(c.d_bifurcations, 0);
  EXPECT_EQ(c.d_lwr, 0.0);
  EXPECT_EQ(c.d_lwr_relative, 0.0);
  EXPECT_EQ(c.profile_distance, 0.0);
  EXPECT_EQ(c.position_drift, 0.0);
  EXPECT_THROW(change_report(reg, "S1", "a", "b"), Error);
}

TEST(Change, KnownDeltas) {
  std::mt19937_64 rng(9);
  SaplingRecord a = make_record(report_for("S1", "jul", rng), "2024-07-01");
  SaplingRecord b = a;
  b.session_id = "dec";
  b.height = a.height + 0.02;
  b.bifurcations = a.bifurcations + 2;
  b.lwr = 0.25 * a.lwr;
  b.map_position = a.map_position + Vec3(3.0, 4.0, 0.0);
  const ChangeReport c = compare(a, b);
  EXPECT_NEAR(c.d_height, 0.02, 1e-12);
  EXPECT_EQ(c.d_bifurcations, 2);
  EXPECT_NEAR(c.d_lwr_relative, -0.75, 1e-12);
  EXPECT_NEAR(c.position_drift, 5.0, 1e-12);
  const std::string text = write_change_report(c);
  const KeyValueFile kv = KeyValueFile::parse(text);
  EXPECT_EQ(kv.get_int("d_bifurcations"), 2);
  EXPECT_EQ(kv.get_double("d_lwr_relative"), c.d_lwr_relative);
}

TEST(Change, AntisymmetryAndSymmetry) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const SaplingRecord a = make_record(report_for("S", "a", rng), "2024-01-01");
    const SaplingRecord b = make_record(report_for("S", "b", rng), "2024-02-01");
    const ChangeReport ab = compare(a, b), ba = compare(b, a);
    EXPECT_EQ(ab.d_height, -ba.d_height);
    EXPECT_EQ(ab.d_bifurcations, -ba.d_bifurcations);
    EXPECT_EQ(ab.d_lwr, -ba.d_lwr);
    EXPECT_EQ(ab.profile_distance, ba.profile_distance);
    EXPECT_EQ(ab.position_drift, ba.position_drift);
    EXPECT_GE(ab.profile_distance, 0.0);
    EXPECT_LE(ab.profile_distance, 2.0);
  }
}

TEST(ProfileDistance, ShiftedGaussiansMatchClosedForm) {
  // L1 between N(m1, s) and N(m2, s) is 2 (2 Phi(|m1 - m2| / 2s) - 1).
  for (double shift : {0.0, 0.05, 0.1, 0.3}) {
    const LeafProfile a = gaussian_profile(1.0, 0.1, 0.0, 2.5, 400);
    const LeafProfile b = gaussian_profile(1.0 + shift, 0.1, -0.5, 2.0, 300);
    const double want = 2.0 * (2.0 * normal_cdf(shift / 0.2) - 1.0);
    EXPECT_NEAR(profile_distance(a, b, 2000), want, 2e-3) << shift;
  }
}

TEST(ProfileDistance, DisjointAndEmpty) {
  const LeafProfile a = gaussian_profile(0.5, 0.02, 0.4, 0.6);
  const LeafProfile b = gaussian_profile(1.5, 0.02, 1.4, 1.6);
  EXPECT_NEAR(profile_distance(a, b), 2.0, 1e-6);
  EXPECT_NEAR(profile_distance(a, LeafProfile{}), 1.0, 1e-6);
  EXPECT_EQ(profile_distance(LeafProfile{}, LeafProfile{}), 0.0);
  EXPECT_EQ(profile_distance(a, a), 0.0);
  EXPECT_THROW(profile_distance(a, b, 1), Error);
}

TEST(ProfileDistance, BoundedOnRandomProfiles) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    LeafProfile a, b;
    const double lo_a = u(rng), lo_b = u(rng);
    for (int i = 0; i < 50; ++i) {
      a.heights.push_back(lo_a + 0.01 * i);
      a.density.push_back(u(rng) < 0.3 ? 0.0 : u(rng));
      b.heights.push_back(lo_b + 0.02 * i);
      b.density.push_back(u(rng));
    }
    const double d = profile_distance(a, b);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
    EXPECT_EQ(d, profile_distance(b, a));
  }
}
