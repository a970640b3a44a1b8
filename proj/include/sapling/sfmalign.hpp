#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sapling/model.hpp"

namespace sapling {

/// Slice of a map-frame trajectory that circles one sapling.
struct Subtrajectory {
  std::string sapling_id;
  std::string session_id;
  Trajectory poses;
  double t_start = 0.0;
  double t_end = 0.0;
};

/// Poses with timestamps in [t_start, t_end], order preserved.
Subtrajectory extract_subtrajectory(const Trajectory& trajectory, double t_start, double t_end,
                                    std::string sapling_id, std::string session_id);

/// Closed-form least-squares similarity (Umeyama 1991) mapping `source`
/// onto `target`. With `with_scale == false` the scale is pinned to 1.
/// Throws Range on size mismatch or fewer than 3 points and Degenerate when
/// the source is collinear or (with scale) has zero variance.
SimilarityTransform umeyama(std::span<const Vec3> source, std::span<const Vec3> target,
                            bool with_scale = true);

double rms_residual(const SimilarityTransform& t, std::span<const Vec3> source,
                    std::span<const Vec3> target);
double sum_squared_residual(const SimilarityTransform& t, std::span<const Vec3> source,
                            std::span<const Vec3> target);

struct RegistrationOptions {
  double max_gap = 0.05;          // seconds, SfM-to-SLAM timestamp association
  double coplanar_ratio = 1e-3;   // smallest/largest singular value of the SfM positions
};

struct RegistrationResult {
  SimilarityTransform transform;  // SfM frame -> map frame
  double rms_residual = 0.0;
  std::size_t pair_count = 0;
  Trajectory aligned;             // SfM poses expressed in the map frame
  bool coplanar_warning = false;
};

/// Matches SfM and SLAM poses by nearest timestamp and fits a similarity to
/// the matched positions; orientations are carried through, not fitted.
RegistrationResult register_sfm(const Trajectory& sfm, const Subtrajectory& slam,
                                const RegistrationOptions& options = {});

/// Maps every point by `t`; colors and count preserved. Throws FrameMismatch
/// when the cloud is not in the transform's source frame.
PointCloud transform_cloud(const PointCloud& cloud, const SimilarityTransform& t,
                           const std::string& target_frame);

std::string write_similarity_transform(const SimilarityTransform& t, double rms = 0.0,
                                       std::size_t pairs = 0, bool coplanar_warning = false);
SimilarityTransform parse_similarity_transform(std::string_view text);

// manifest -----------------------------------------------------------------------

struct ManifestRow {
  std::string session_id;
  std::string sapling_id;
  double t_start = 0.0;
  double t_end = 0.0;
  std::string sfm_traj_path;
  std::string cloud_path;
};

/// CSV with header `session_id,sapling_id,t_start,t_end,sfm_traj_path,cloud_path`.
std::vector<ManifestRow> parse_manifest(std::string_view text);
std::string write_manifest(const std::vector<ManifestRow>& rows);

}  // namespace sapling
