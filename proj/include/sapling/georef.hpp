#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sapling/model.hpp"

namespace sapling {

/// WGS84 ellipsoid.
inline constexpr double kWgs84A = 6378137.0;
inline constexpr double kWgs84InvF = 298.257223563;

/// Exact geodetic -> ECEF -> local East/North/Up about `anchor`.
Vec3 geodetic_to_enu(const GeoFix& fix, const GeoFix& anchor);
/// Inverse of geodetic_to_enu; the returned fix has timestamp 0.
GeoFix enu_to_geodetic(const Vec3& enu, const GeoFix& anchor);

/// One map pose matched to one GNSS fix.
struct AssociationPair {
  Vec2 pose_xy = Vec2::Zero();
  Vec2 enu_xy = Vec2::Zero();
  double time_gap = 0.0;
  double pose_z = 0.0;
  double enu_up = 0.0;
  bool has_up = false;
};

using AssociationPairs = std::vector<AssociationPair>;

struct AssociationOptions {
  std::optional<std::size_t> first_u;  // restrict to the first u fixes; all when empty
  double max_gap = 0.25;               // seconds
};

/// Pairs each considered GNSS fix with the trajectory pose nearest in time and
/// drops pairs whose gap exceeds max_gap. Throws Degenerate when fewer than
/// two pairs survive and Range when u < 2.
AssociationPairs associate(const Trajectory& trajectory, const GeoTrack& track,
                           const AssociationOptions& options = {});

/// Planar rigid transform from the gravity-aligned map frame to local ENU:
/// enu_xy = R(rotation_z) * map_xy + translation, enu_up = map_z + up_offset.
struct EarthTransform {
  double rotation_z = 0.0;  // radians, (-pi, pi]
  Vec2 translation = Vec2::Zero();
  GeoFix anchor;
  double rms_residual = 0.0;  // metres, horizontal
  double up_offset = 0.0;
  std::size_t pair_count = 0;

  Vec3 map_to_enu(const Vec3& p) const;
  Vec3 enu_to_map(const Vec3& enu) const;
};

/// Closed-form least-squares fit of the planar rotation and translation
/// (2x2 cross-covariance SVD with reflection correction).
EarthTransform fit_earth_transform(const AssociationPairs& pairs);

/// associate + fit_earth_transform, with the anchor taken from the track.
EarthTransform georeference(const Trajectory& trajectory, const GeoTrack& track,
                            const AssociationOptions& options = {});

/// Sum of squared horizontal residuals for a candidate (rotation, translation).
double earth_objective(const AssociationPairs& pairs, double rotation_z, const Vec2& translation);

struct GeoPosition {
  double latitude = 0.0;
  double longitude = 0.0;
  double altitude = 0.0;
};

GeoPosition to_earth(const EarthTransform& transform, const Vec3& map_point);
Vec3 from_earth(const EarthTransform& transform, const GeoPosition& position);

std::string write_earth_transform(const EarthTransform& transform);
EarthTransform parse_earth_transform(std::string_view text);

}  // namespace sapling
