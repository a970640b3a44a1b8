#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace sapling {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// Builds a quaternion from (w, x, y, z). Eigen's own constructor takes the
/// same order but stores x, y, z, w; all parsers go through this helper.
inline Quat quat_wxyz(double w, double x, double y, double z) {
  return Quat(w, x, y, z);
}

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Poses and trajectories ----------------------------------------------------

struct Pose {
  double timestamp = 0.0;
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();
};

/// Timestamped rigid poses expressed in one named frame ("M1", "E", "F_ij").
/// Construction validates: at least one pose, strictly increasing finite
/// timestamps, unit quaternions (within 1e-9).
class Trajectory {
 public:
  Trajectory(std::string frame_id, std::vector<Pose> poses);

  const std::string& frame_id() const { return frame_id_; }
  const std::vector<Pose>& poses() const { return poses_; }
  std::size_t size() const { return poses_.size(); }
  const Pose& operator[](std::size_t i) const { return poses_[i]; }
  double start_time() const { return poses_.front().timestamp; }
  double end_time() const { return poses_.back().timestamp; }

  std::vector<Vec3> positions() const;

  /// Index of the pose whose timestamp is closest to t; ties go to the
  /// earlier pose.
  std::size_t nearest_index(double t) const;

 private:
  std::string frame_id_;
  std::vector<Pose> poses_;
};

// Geodetic data --------------------------------------------------------------

struct GeoFix {
  double timestamp = 0.0;
  double latitude = 0.0;   // degrees, WGS84
  double longitude = 0.0;  // degrees, WGS84
  double altitude = 0.0;   // metres above the ellipsoid
  bool has_altitude = false;
};

/// Throws Range if |lat| > 90, |lon| > 180 or a field is non-finite.
void validate(const GeoFix& fix);

class GeoTrack {
 public:
  /// Anchor defaults to the first fix.
  explicit GeoTrack(std::vector<GeoFix> fixes);
  GeoTrack(std::vector<GeoFix> fixes, GeoFix anchor);

  const std::vector<GeoFix>& fixes() const { return fixes_; }
  const GeoFix& anchor() const { return anchor_; }
  std::size_t size() const { return fixes_.size(); }

 private:
  std::vector<GeoFix> fixes_;
  GeoFix anchor_;
};

// Transforms -----------------------------------------------------------------

/// p ↦ s·R·p + t, mapping points of `source_frame` into `target_frame`.
/// Empty frame tags are wildcards.
struct SimilarityTransform {
  double scale = 1.0;
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();
  std::string source_frame;
  std::string target_frame;

  SimilarityTransform() = default;
  SimilarityTransform(double scale, const Quat& rotation, const Vec3& translation,
                      std::string source_frame = {}, std::string target_frame = {});

  static SimilarityTransform identity() { return {}; }

  Vec3 operator()(const Vec3& p) const { return scale * (rotation * p) + translation; }
  SimilarityTransform inverse() const;
  Eigen::Matrix4d matrix() const;
};

/// Result maps p to a(b(p)).
SimilarityTransform compose(const SimilarityTransform& a, const SimilarityTransform& b);
Vec3 apply(const SimilarityTransform& t, const Vec3& p);

/// Applies `t` to a pose: rotation composed, translation mapped.
Pose apply(const SimilarityTransform& t, const Pose& pose);

// Point clouds and skeletons --------------------------------------------------

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Rgb> colors;  // empty, or one per point
  std::string frame_id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_colors() const { return !colors.empty(); }

  /// Throws Range on color/point count mismatch or non-finite coordinates.
  void validate() const;

  /// Sub-cloud made of the given indices, colors carried along.
  PointCloud subset(const std::vector<std::size_t>& indices) const;
};

using Edge = std::pair<std::size_t, std::size_t>;

/// Skeleton graph: 3D vertices, undirected edges (stored with first < second)
/// and the root vertex (lowest z).
struct SkeletonGraph {
  std::vector<Vec3> vertices;
  std::vector<Edge> edges;
  std::size_t root_index = 0;

  std::size_t vertex_count() const { return vertices.size(); }
  std::vector<std::vector<std::size_t>> adjacency() const;
  std::vector<std::size_t> degrees() const;

  /// Connected, acyclic, no self-loops or duplicate edges.
  bool is_tree() const;

  friend bool operator==(const SkeletonGraph&, const SkeletonGraph&) = default;
};

/// Sorts each edge's endpoints and the edge list; drops duplicates.
void canonicalize_edges(std::vector<Edge>& edges);

}  // namespace sapling
