#include "sapling/georef.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/SVD>

#include "sapling/error.hpp"
#include "sapling/ingest.hpp"

namespace sapling {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kF = 1.0 / kWgs84InvF;
constexpr double kE2 = kF * (2.0 - kF);

Vec3 geodetic_to_ecef(double lat_deg, double lon_deg, double h) {
  const double lat = lat_deg * kDeg;
  const double lon = lon_deg * kDeg;
  const double s = std::sin(lat);
  const double c = std::cos(lat);
  const double n = kWgs84A / std::sqrt(1.0 - kE2 * s * s);
  return {(n + h) * c * std::cos(lon), (n + h) * c * std::sin(lon), (n * (1.0 - kE2) + h) * s};
}

/// Rows are the east, north and up unit vectors at the anchor.
Eigen::Matrix3d ecef_to_enu_rotation(double lat_deg, double lon_deg) {
  const double lat = lat_deg * kDeg;
  const double lon = lon_deg * kDeg;
  const double sl = std::sin(lat), cl = std::cos(lat);
  const double so = std::sin(lon), co = std::cos(lon);
  Eigen::Matrix3d r;
  r << -so, co, 0.0,
       -sl * co, -sl * so, cl,
       cl * co, cl * so, sl;
  return r;
}

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

Eigen::Matrix2d rot2(double theta) {
  Eigen::Matrix2d r;
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

}  // namespace

Vec3 geodetic_to_enu(const GeoFix& fix, const GeoFix& anchor) {
  const Vec3 p = geodetic_to_ecef(fix.latitude, fix.longitude, fix.altitude);
  const Vec3 o = geodetic_to_ecef(anchor.latitude, anchor.longitude, anchor.altitude);
  return ecef_to_enu_rotation(anchor.latitude, anchor.longitude) * (p - o);
}

GeoFix enu_to_geodetic(const Vec3& enu, const GeoFix& anchor) {
  const Vec3 o = geodetic_to_ecef(anchor.latitude, anchor.longitude, anchor.altitude);
  const Vec3 x = o + ecef_to_enu_rotation(anchor.latitude, anchor.longitude).transpose() * enu;

  const double p = std::hypot(x.x(), x.y());
  const double lon = std::atan2(x.y(), x.x());
  double lat = std::atan2(x.z(), p * (1.0 - kE2));
  double h = 0.0;
  for (int it = 0; it < 10; ++it) {
    const double s = std::sin(lat);
    const double n = kWgs84A / std::sqrt(1.0 - kE2 * s * s);
    h = p / std::cos(lat) - n;
    const double next = std::atan2(x.z(), p * (1.0 - kE2 * n / (n + h)));
    if (std::abs(next - lat) < 1e-15) {
      lat = next;
      break;
    }
    lat = next;
  }
  {
    const double s = std::sin(lat);
    const double n = kWgs84A / std::sqrt(1.0 - kE2 * s * s);
    h = p / std::cos(lat) - n;
  }
  GeoFix out;
  out.latitude = lat / kDeg;
  out.longitude = lon / kDeg;
  out.altitude = h;
  out.has_altitude = true;
  return out;
}

AssociationPairs associate(const Trajectory& trajectory, const GeoTrack& track,
                           const AssociationOptions& options) {
  std::size_t u = track.size();
  if (options.first_u) {
    if (*options.first_u < 2) throw Error(ErrorKind::Range, "u must be at least 2");
    u = std::min(u, *options.first_u);
  }
  AssociationPairs pairs;
  pairs.reserve(u);
  for (std::size_t i = 0; i < u; ++i) {
    const GeoFix& fix = track.fixes()[i];
    const Pose& pose = trajectory[trajectory.nearest_index(fix.timestamp)];
    const double gap = std::abs(pose.timestamp - fix.timestamp);
    if (gap > options.max_gap) continue;
    const Vec3 enu = geodetic_to_enu(fix, track.anchor());
    AssociationPair pair;
    pair.pose_xy = pose.translation.head<2>();
    pair.enu_xy = enu.head<2>();
    pair.time_gap = gap;
    pair.pose_z = pose.translation.z();
    pair.enu_up = enu.z();
    pair.has_up = fix.has_altitude;
    pairs.push_back(pair);
  }
  if (pairs.size() < 2) {
    throw Error(ErrorKind::Degenerate,
                "only " + std::to_string(pairs.size()) +
                    " GNSS fixes lie within max_gap of a trajectory pose (need 2)");
  }
  return pairs;
}

Vec3 EarthTransform::map_to_enu(const Vec3& p) const {
  const Vec2 xy = rot2(rotation_z) * p.head<2>() + translation;
  return {xy.x(), xy.y(), p.z() + up_offset};
}

Vec3 EarthTransform::enu_to_map(const Vec3& enu) const {
  const Vec2 xy = rot2(rotation_z).transpose() * (enu.head<2>() - translation);
  return {xy.x(), xy.y(), enu.z() - up_offset};
}

EarthTransform fit_earth_transform(const AssociationPairs& pairs) {
  if (pairs.size() < 2) throw Error(ErrorKind::Degenerate, "need at least 2 association pairs");
  const double n = static_cast<double>(pairs.size());
  Vec2 src_mean = Vec2::Zero(), dst_mean = Vec2::Zero();
  for (const auto& p : pairs) {
    src_mean += p.pose_xy;
    dst_mean += p.enu_xy;
  }
  src_mean /= n;
  dst_mean /= n;

  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  double src_var = 0.0;
  double src_scale = 1.0;
  for (const auto& p : pairs) {
    const Vec2 a = p.pose_xy - src_mean;
    cov += (p.enu_xy - dst_mean) * a.transpose();
    src_var += a.squaredNorm();
    src_scale = std::max(src_scale, p.pose_xy.cwiseAbs().maxCoeff());
  }
  if (src_var <= n * std::pow(1e-9 * src_scale, 2)) {
    throw Error(ErrorKind::Degenerate,
                "trajectory positions are coincident; rotation is unobservable");
  }

  Eigen::JacobiSVD<Eigen::Matrix2d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(1, 1) = -1.0;
  const Eigen::Matrix2d r = svd.matrixU() * d * svd.matrixV().transpose();

  EarthTransform out;
  out.rotation_z = wrap_angle(std::atan2(r(1, 0), r(0, 0)));
  const Eigen::Matrix2d r_clean = rot2(out.rotation_z);
  out.translation = dst_mean - r_clean * src_mean;
  out.pair_count = pairs.size();
  out.rms_residual = std::sqrt(earth_objective(pairs, out.rotation_z, out.translation) / n);

  double up_sum = 0.0;
  std::size_t up_count = 0;
  for (const auto& p : pairs) {
    if (!p.has_up) continue;
    up_sum += p.enu_up - p.pose_z;
    ++up_count;
  }
  out.up_offset = up_count ? up_sum / static_cast<double>(up_count) : 0.0;
  return out;
}

EarthTransform georeference(const Trajectory& trajectory, const GeoTrack& track,
                            const AssociationOptions& options) {
  EarthTransform t = fit_earth_transform(associate(trajectory, track, options));
  t.anchor = track.anchor();
  return t;
}

double earth_objective(const AssociationPairs& pairs, double rotation_z, const Vec2& translation) {
  const Eigen::Matrix2d r = rot2(rotation_z);
  double sum = 0.0;
  for (const auto& p : pairs) sum += (r * p.pose_xy + translation - p.enu_xy).squaredNorm();
  return sum;
}

GeoPosition to_earth(const EarthTransform& transform, const Vec3& map_point) {
  const GeoFix fix = enu_to_geodetic(transform.map_to_enu(map_point), transform.anchor);
  return {fix.latitude, fix.longitude, fix.altitude};
}

Vec3 from_earth(const EarthTransform& transform, const GeoPosition& position) {
  GeoFix fix;
  fix.latitude = position.latitude;
  fix.longitude = position.longitude;
  fix.altitude = position.altitude;
  fix.has_altitude = true;
  return transform.enu_to_map(geodetic_to_enu(fix, transform.anchor));
}

std::string write_earth_transform(const EarthTransform& t) {
  KeyValueFile kv;
  kv.set("rotation_z_rad", t.rotation_z);
  kv.set("east_m", t.translation.x());
  kv.set("north_m", t.translation.y());
  kv.set("up_m", t.up_offset);
  kv.set("anchor_lat", t.anchor.latitude);
  kv.set("anchor_lon", t.anchor.longitude);
  kv.set("anchor_alt", t.anchor.altitude);
  kv.set("rms_m", t.rms_residual);
  kv.set("pairs", static_cast<long long>(t.pair_count));
  return kv.str();
}

EarthTransform parse_earth_transform(std::string_view text) {
  const KeyValueFile kv = KeyValueFile::parse(text);
  EarthTransform t;
  t.rotation_z = kv.get_double("rotation_z_rad");
  t.translation = Vec2(kv.get_double("east_m"), kv.get_double("north_m"));
  t.up_offset = kv.contains("up_m") ? kv.get_double("up_m") : 0.0;
  t.anchor.latitude = kv.get_double("anchor_lat");
  t.anchor.longitude = kv.get_double("anchor_lon");
  t.anchor.altitude = kv.get_double("anchor_alt");
  t.anchor.has_altitude = true;
  t.rms_residual = kv.get_double("rms_m");
  t.pair_count = kv.contains("pairs") ? static_cast<std::size_t>(kv.get_int("pairs")) : 0;
  validate(t.anchor);
  if (!(t.rms_residual >= 0.0)) throw Error(ErrorKind::Range, "rms_m must be non-negative");
  return t;
}

}  // namespace sapling
