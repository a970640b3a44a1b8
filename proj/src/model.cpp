#include "sapling/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sapling/error.hpp"

namespace sapling {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Range: return "range";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::FrameMismatch: return "frame_mismatch";
    case ErrorKind::NotFound: return "not_found";
    case ErrorKind::Duplicate: return "duplicate";
    case ErrorKind::Solver: return "solver";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message, std::optional<std::size_t> line)
    : std::runtime_error(line ? "line " + std::to_string(*line) + ": " + message : message),
      kind_(kind),
      line_(line) {}

// Trajectory -----------------------------------------------------------------

Trajectory::Trajectory(std::string frame_id, std::vector<Pose> poses)
    : frame_id_(std::move(frame_id)), poses_(std::move(poses)) {
  if (poses_.empty()) throw Error(ErrorKind::Range, "trajectory needs at least one pose");
  for (std::size_t i = 0; i < poses_.size(); ++i) {
    const Pose& p = poses_[i];
    if (!std::isfinite(p.timestamp)) {
      throw Error(ErrorKind::Range, "non-finite timestamp at pose " + std::to_string(i));
    }
    if (std::abs(p.rotation.norm() - 1.0) > 1e-9) {
      throw Error(ErrorKind::Range, "non-unit quaternion at pose " + std::to_string(i));
    }
    if (!p.translation.allFinite()) {
      throw Error(ErrorKind::Range, "non-finite translation at pose " + std::to_string(i));
    }
    if (i > 0 && !(p.timestamp > poses_[i - 1].timestamp)) {
      throw Error(ErrorKind::Range,
                  "timestamps not strictly increasing at pose " + std::to_string(i));
    }
  }
}

std::vector<Vec3> Trajectory::positions() const {
  std::vector<Vec3> out;
  out.reserve(poses_.size());
  for (const auto& p : poses_) out.push_back(p.translation);
  return out;
}

std::size_t Trajectory::nearest_index(double t) const {
  auto it = std::lower_bound(poses_.begin(), poses_.end(), t,
                             [](const Pose& p, double v) { return p.timestamp < v; });
  if (it == poses_.begin()) return 0;
  if (it == poses_.end()) return poses_.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - poses_.begin());
  const std::size_t lo = hi - 1;
  return (t - poses_[lo].timestamp) <= (poses_[hi].timestamp - t) ? lo : hi;
}

// Geodetic -------------------------------------------------------------------

void validate(const GeoFix& fix) {
  if (!std::isfinite(fix.timestamp) || !std::isfinite(fix.latitude) ||
      !std::isfinite(fix.longitude) || !std::isfinite(fix.altitude)) {
    throw Error(ErrorKind::Range, "non-finite GNSS field");
  }
  if (std::abs(fix.latitude) > 90.0) {
    throw Error(ErrorKind::Range, "latitude out of range: " + std::to_string(fix.latitude));
  }
  if (std::abs(fix.longitude) > 180.0) {
    throw Error(ErrorKind::Range, "longitude out of range: " + std::to_string(fix.longitude));
  }
}

namespace {
void check_fixes(const std::vector<GeoFix>& fixes) {
  for (std::size_t i = 0; i < fixes.size(); ++i) {
    validate(fixes[i]);
    if (i > 0 && !(fixes[i].timestamp > fixes[i - 1].timestamp)) {
      throw Error(ErrorKind::Range,
                  "GNSS timestamps not strictly increasing at fix " + std::to_string(i));
    }
  }
}
}  // namespace

GeoTrack::GeoTrack(std::vector<GeoFix> fixes) : fixes_(std::move(fixes)) {
  if (fixes_.empty()) throw Error(ErrorKind::Range, "GNSS track needs at least one fix");
  check_fixes(fixes_);
  anchor_ = fixes_.front();
}

GeoTrack::GeoTrack(std::vector<GeoFix> fixes, GeoFix anchor)
    : fixes_(std::move(fixes)), anchor_(anchor) {
  if (fixes_.empty()) throw Error(ErrorKind::Range, "GNSS track needs at least one fix");
  check_fixes(fixes_);
  validate(anchor_);
}

// SimilarityTransform ----------------------------------------------------------

SimilarityTransform::SimilarityTransform(double s, const Quat& r, const Vec3& t,
                                         std::string source, std::string target)
    : scale(s), rotation(r.normalized()), translation(t),
      source_frame(std::move(source)), target_frame(std::move(target)) {
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw Error(ErrorKind::Range, "similarity scale must be positive and finite");
  }
}

SimilarityTransform SimilarityTransform::inverse() const {
  const Quat r_inv = rotation.conjugate();
  const double s_inv = 1.0 / scale;
  return SimilarityTransform(s_inv, r_inv, -s_inv * (r_inv * translation), target_frame,
                             source_frame);
}

Eigen::Matrix4d SimilarityTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = scale * rotation.toRotationMatrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

SimilarityTransform compose(const SimilarityTransform& a, const SimilarityTransform& b) {
  // a(b(p)) = sa Ra (sb Rb p + tb) + ta
  return SimilarityTransform(a.scale * b.scale, (a.rotation * b.rotation).normalized(),
                             a.scale * (a.rotation * b.translation) + a.translation,
                             b.source_frame, a.target_frame);
}

Vec3 apply(const SimilarityTransform& t, const Vec3& p) { return t(p); }

Pose apply(const SimilarityTransform& t, const Pose& pose) {
  Pose out;
  out.timestamp = pose.timestamp;
  out.rotation = (t.rotation * pose.rotation).normalized();
  out.translation = t(pose.translation);
  return out;
}

// PointCloud -----------------------------------------------------------------

void PointCloud::validate() const {
  if (!colors.empty() && colors.size() != points.size()) {
    throw Error(ErrorKind::Range, "color count " + std::to_string(colors.size()) +
                                      " does not match point count " +
                                      std::to_string(points.size()));
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite()) {
      throw Error(ErrorKind::Range, "non-finite coordinate at point " + std::to_string(i));
    }
  }
}

PointCloud PointCloud::subset(const std::vector<std::size_t>& indices) const {
  PointCloud out;
  out.frame_id = frame_id;
  out.points.reserve(indices.size());
  for (std::size_t i : indices) out.points.push_back(points[i]);
  if (has_colors()) {
    out.colors.reserve(indices.size());
    for (std::size_t i : indices) out.colors.push_back(colors[i]);
  }
  return out;
}

// SkeletonGraph ----------------------------------------------------------------

std::vector<std::vector<std::size_t>> SkeletonGraph::adjacency() const {
  std::vector<std::vector<std::size_t>> adj(vertices.size());
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

std::vector<std::size_t> SkeletonGraph::degrees() const {
  std::vector<std::size_t> deg(vertices.size(), 0);
  for (const auto& [a, b] : edges) {
    ++deg[a];
    ++deg[b];
  }
  return deg;
}

bool SkeletonGraph::is_tree() const {
  const std::size_t n = vertices.size();
  if (n == 0) return false;
  if (edges.size() != n - 1) return false;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [a, b] : edges) {
    if (a >= n || b >= n || a == b) return false;
    const std::size_t ra = find(a), rb = find(b);
    if (ra == rb) return false;  // cycle or duplicate
    parent[ra] = rb;
  }
  return true;  // n-1 edges without a cycle => connected
}

void canonicalize_edges(std::vector<Edge>& edges) {
  for (auto& e : edges) {
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

}  // namespace sapling
