#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sapling/leafwood.hpp"
#include "sapling/model.hpp"
#include "sapling/traits.hpp"

namespace sapling {

/// Artifact file names inside <root>/<sapling_id>/<session_id>/.
struct ArtifactNames {
  static constexpr const char* cloud = "cloud.ply";
  static constexpr const char* skeleton = "skel.txt";
  static constexpr const char* leaf = "leaf.ply";
  static constexpr const char* wood = "wood.ply";
  static constexpr const char* report = "report.txt";
  static constexpr const char* profile = "profile.csv";
};

struct SaplingRecord {
  std::string sapling_id;
  std::string session_id;
  std::string date;  // YYYY-MM-DD
  double latitude = 0.0;
  double longitude = 0.0;
  Vec3 map_position = Vec3::Zero();
  double height = 0.0;
  std::size_t bifurcations = 0;
  double lwr = 0.0;
  LeafProfile leaf_profile;

  friend bool operator==(const SaplingRecord& a, const SaplingRecord& b);
};

SaplingRecord make_record(const TraitReport& report, const std::string& date);

/// Throws Parse unless `date` is a valid calendar date written YYYY-MM-DD.
void validate_date(std::string_view date, std::optional<std::size_t> line = std::nullopt);

std::filesystem::path record_dir(const std::filesystem::path& root, const std::string& sapling_id,
                                 const std::string& session_id);

/// Writes the six per-record artifacts under record_dir(root, ...).
void write_artifacts(const std::filesystem::path& root, const TraitReport& report,
                     const PointCloud& cloud, const SkeletonGraph& skeleton,
                     const Segmentation& segmentation);

/// Records keyed by (sapling_id, session_id). Single writer; a saved
/// registry may be loaded concurrently by any number of readers.
class Registry {
 public:
  /// Throws Duplicate when the key already exists.
  void add(SaplingRecord record);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<SaplingRecord>& records() const { return records_; }

  /// Throws NotFound when absent.
  const SaplingRecord& get(const std::string& sapling_id, const std::string& session_id) const;
  bool contains(const std::string& sapling_id, const std::string& session_id) const;

  /// All sessions of one sapling ordered by date, then session id.
  std::vector<SaplingRecord> lookup(const std::string& sapling_id) const;

  /// Writes <root>/index.csv. Every record's artifacts must already exist
  /// under `root` (NotFound otherwise).
  void save(const std::filesystem::path& root) const;
  /// Reads <root>/index.csv and each record's profile.csv / report.txt.
  static Registry load(const std::filesystem::path& root);

  std::string index_csv() const;
  static Registry parse_index(std::string_view text);

  friend bool operator==(const Registry&, const Registry&) = default;

 private:
  std::vector<SaplingRecord> records_;  // sorted by (sapling_id, date, session_id)
};

/// Value-semantics form: returns a copy with the record added.
Registry add_record(Registry registry, SaplingRecord record);

struct ChangeReport {
  std::string sapling_id;
  std::string session_a;
  std::string session_b;
  double d_height = 0.0;          // b - a, metres
  long long d_bifurcations = 0;   // b - a
  double d_lwr = 0.0;             // b - a
  double d_lwr_relative = 0.0;    // (b - a) / a; 0 when both are 0
  double profile_distance = 0.0;  // L1 between unit-mass profiles, in [0, 2]
  double position_drift = 0.0;    // metres between map positions
};

/// L1 distance between the two profiles after resampling both (linear
/// interpolation, zero outside their own range) onto a common grid over the
/// union z-range and renormalising each to unit integral. An empty profile
/// counts as zero density.
double profile_distance(const LeafProfile& a, const LeafProfile& b, std::size_t bins = kProfileBins);

ChangeReport compare(const SaplingRecord& a, const SaplingRecord& b);
ChangeReport change_report(const Registry& registry, const std::string& sapling_id,
                           const std::string& session_a, const std::string& session_b);

std::string write_change_report(const ChangeReport& report);

}  // namespace sapling
