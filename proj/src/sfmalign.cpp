#include "sapling/sfmalign.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "sapling/error.hpp"
#include "sapling/ingest.hpp"

namespace sapling {

Subtrajectory extract_subtrajectory(const Trajectory& trajectory, double t_start, double t_end,
                                    std::string sapling_id, std::string session_id) {
  if (!(t_start < t_end)) throw Error(ErrorKind::Range, "subtrajectory needs t_start < t_end");
  std::vector<Pose> poses;
  for (const Pose& p : trajectory.poses()) {
    if (p.timestamp >= t_start && p.timestamp <= t_end) poses.push_back(p);
  }
  if (poses.empty()) {
    throw Error(ErrorKind::Range, "no poses in window [" + format_double(t_start) + ", " +
                                      format_double(t_end) + "] for sapling " + sapling_id);
  }
  return Subtrajectory{std::move(sapling_id), std::move(session_id),
                       Trajectory(trajectory.frame_id(), std::move(poses)), t_start, t_end};
}

namespace {

struct Centered {
  Vec3 mean = Vec3::Zero();
  Eigen::Matrix3Xd pts;
  double variance = 0.0;  // mean squared distance to the centroid
};

Centered center(std::span<const Vec3> pts) {
  Centered c;
  const double n = static_cast<double>(pts.size());
  for (const auto& p : pts) c.mean += p;
  c.mean /= n;
  c.pts.resize(3, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) c.pts.col(static_cast<Eigen::Index>(i)) = pts[i] - c.mean;
  c.variance = c.pts.squaredNorm() / n;
  return c;
}

}  // namespace

SimilarityTransform umeyama(std::span<const Vec3> source, std::span<const Vec3> target,
                            bool with_scale) {
  if (source.size() != target.size()) {
    throw Error(ErrorKind::Range, "umeyama: source has " + std::to_string(source.size()) +
                                      " points, target " + std::to_string(target.size()));
  }
  if (source.size() < 3) throw Error(ErrorKind::Range, "umeyama needs at least 3 point pairs");

  const Centered src = center(source);
  const Centered dst = center(target);
  const double n = static_cast<double>(source.size());

  if (with_scale && !(src.variance > 0.0)) {
    throw Error(ErrorKind::Degenerate, "umeyama: source points have zero variance");
  }
  const Eigen::JacobiSVD<Eigen::Matrix3Xd> src_svd(src.pts);
  const Eigen::Vector3d sv = src_svd.singularValues();
  if (!(sv(1) > 1e-10 * sv(0))) {
    throw Error(ErrorKind::Degenerate, "umeyama: source points are collinear; rotation is not unique");
  }

  const Eigen::Matrix3d cov = dst.pts * src.pts.transpose() / n;
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2) = -1.0;
  const Eigen::Matrix3d r = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();

  const double scale = with_scale ? svd.singularValues().dot(s) / src.variance : 1.0;
  if (!(scale > 0.0)) throw Error(ErrorKind::Degenerate, "umeyama: non-positive scale estimate");
  const Vec3 t = dst.mean - scale * (r * src.mean);
  return SimilarityTransform(scale, Quat(r), t);
}

double sum_squared_residual(const SimilarityTransform& t, std::span<const Vec3> source,
                            std::span<const Vec3> target) {
  double sum = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) sum += (t(source[i]) - target[i]).squaredNorm();
  return sum;
}

double rms_residual(const SimilarityTransform& t, std::span<const Vec3> source,
                    std::span<const Vec3> target) {
  if (source.empty()) return 0.0;
  return std::sqrt(sum_squared_residual(t, source, target) / static_cast<double>(source.size()));
}

RegistrationResult register_sfm(const Trajectory& sfm, const Subtrajectory& slam,
                                const RegistrationOptions& options) {
  std::vector<Vec3> src, dst;
  for (const Pose& p : sfm.poses()) {
    const Pose& q = slam.poses[slam.poses.nearest_index(p.timestamp)];
    if (std::abs(q.timestamp - p.timestamp) > options.max_gap) continue;
    src.push_back(p.translation);
    dst.push_back(q.translation);
  }
  if (src.size() < 3) {
    throw Error(ErrorKind::Degenerate,
                "sapling " + slam.sapling_id + "/" + slam.session_id + ": only " +
                    std::to_string(src.size()) + " SfM poses match SLAM timestamps (need 3)");
  }

  SimilarityTransform t = umeyama(src, dst, true);
  t.source_frame = sfm.frame_id();
  t.target_frame = slam.poses.frame_id();

  const Centered c = center(src);
  const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::Matrix3Xd>(c.pts).singularValues();

  std::vector<Pose> aligned;
  aligned.reserve(sfm.size());
  for (const Pose& p : sfm.poses()) aligned.push_back(apply(t, p));

  return RegistrationResult{t, rms_residual(t, src, dst), src.size(),
                            Trajectory(slam.poses.frame_id(), std::move(aligned)),
                            sv(2) < options.coplanar_ratio * sv(0)};
}

PointCloud transform_cloud(const PointCloud& cloud, const SimilarityTransform& t,
                           const std::string& target_frame) {
  if (!t.source_frame.empty() && cloud.frame_id != t.source_frame) {
    throw Error(ErrorKind::FrameMismatch, "cloud is in frame '" + cloud.frame_id +
                                              "' but transform expects '" + t.source_frame + "'");
  }
  if (!t.target_frame.empty() && target_frame != t.target_frame) {
    throw Error(ErrorKind::FrameMismatch, "transform maps into '" + t.target_frame +
                                              "', not '" + target_frame + "'");
  }
  PointCloud out;
  out.frame_id = target_frame;
  out.colors = cloud.colors;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(t(p));
  return out;
}

std::string write_similarity_transform(const SimilarityTransform& t, double rms, std::size_t pairs,
                                       bool coplanar_warning) {
  KeyValueFile kv;
  kv.set("source_frame", t.source_frame);
  kv.set("target_frame", t.target_frame);
  kv.set("scale", t.scale);
  kv.set("qw", t.rotation.w());
  kv.set("qx", t.rotation.x());
  kv.set("qy", t.rotation.y());
  kv.set("qz", t.rotation.z());
  kv.set("tx", t.translation.x());
  kv.set("ty", t.translation.y());
  kv.set("tz", t.translation.z());
  kv.set("rms_m", rms);
  kv.set("pairs", static_cast<long long>(pairs));
  kv.set("coplanar_warning", std::string(coplanar_warning ? "true" : "false"));
  return kv.str();
}

SimilarityTransform parse_similarity_transform(std::string_view text) {
  const KeyValueFile kv = KeyValueFile::parse(text);
  const Quat q = quat_wxyz(kv.get_double("qw"), kv.get_double("qx"), kv.get_double("qy"),
                           kv.get_double("qz"));
  if (std::abs(q.norm() - 1.0) > 1e-3) throw Error(ErrorKind::Range, "transform quaternion is not unit");
  return SimilarityTransform(kv.get_double("scale"), q,
                             Vec3(kv.get_double("tx"), kv.get_double("ty"), kv.get_double("tz")),
                             kv.contains("source_frame") ? kv.get("source_frame") : "",
                             kv.contains("target_frame") ? kv.get("target_frame") : "");
}

// manifest -----------------------------------------------------------------------

namespace {
constexpr const char* kManifestColumns[] = {"session_id", "sapling_id",    "t_start",
                                            "t_end",      "sfm_traj_path", "cloud_path"};
}

std::vector<ManifestRow> parse_manifest(std::string_view text) {
  std::vector<ManifestRow> rows;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto fields = split_fields(line, ',');
    if (fields.size() == 1 && (fields[0].empty() || fields[0].front() == '#')) continue;
    if (!have_header) {
      if (fields.size() != 6) throw Error(ErrorKind::Parse, "manifest header needs 6 columns", line_no);
      for (std::size_t k = 0; k < 6; ++k) {
        if (fields[k] != kManifestColumns[k]) {
          throw Error(ErrorKind::Parse, "manifest column " + std::to_string(k + 1) + " must be '" +
                                            kManifestColumns[k] + "'", line_no);
        }
      }
      have_header = true;
      continue;
    }
    if (fields.size() != 6) {
      throw Error(ErrorKind::Parse, "expected 6 manifest columns, got " + std::to_string(fields.size()),
                  line_no);
    }
    ManifestRow row{fields[0], fields[1], parse_double(fields[2], line_no),
                    parse_double(fields[3], line_no), fields[4], fields[5]};
    if (row.session_id.empty() || row.sapling_id.empty()) {
      throw Error(ErrorKind::Parse, "empty session or sapling id", line_no);
    }
    if (!(row.t_start < row.t_end)) throw Error(ErrorKind::Range, "t_start must precede t_end", line_no);
    rows.push_back(std::move(row));
  }
  if (!have_header) throw Error(ErrorKind::Parse, "manifest has no header row");
  return rows;
}

std::string write_manifest(const std::vector<ManifestRow>& rows) {
  std::string out = "session_id,sapling_id,t_start,t_end,sfm_traj_path,cloud_path\n";
  for (const auto& r : rows) {
    out += r.session_id + ',' + r.sapling_id + ',' + format_double(r.t_start) + ',' +
           format_double(r.t_end) + ',' + r.sfm_traj_path + ',' + r.cloud_path + '\n';
  }
  return out;
}

}  // namespace sapling
