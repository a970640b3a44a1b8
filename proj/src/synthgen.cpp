#include "sapling/synthgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "sapling/error.hpp"
#include "sapling/ingest.hpp"
#include "sapling/skeleton.hpp"

namespace sapling::synth {

namespace {

using Rng = std::mt19937_64;
constexpr double kPi = std::numbers::pi;

double uniform(Rng& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

double gauss(Rng& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finaliser over the combined value
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t parse_seed(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorKind::Parse, "bad " + key + " '" + value + "'");
  }
  return v;
}

Vec3 direction(double azimuth, double elevation) {
  return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
          std::sin(elevation)};
}

/// Orthonormal basis whose third column is `axis`.
Eigen::Matrix3d basis_for(const Vec3& axis) {
  const Vec3 w = axis.normalized();
  const Vec3 helper = std::abs(w.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  const Vec3 u = helper.cross(w).normalized();
  const Vec3 v = w.cross(u);
  Eigen::Matrix3d m;
  m << u, v, w;
  return m;
}

struct Cylinder {
  Vec3 base;
  Vec3 axis;  // unit
  double length;
  double r0, r1;

  double radius_at(double t) const { return r0 + (r1 - r0) * t / length; }
  Vec3 tip() const { return base + axis * length; }
  double area() const { return kPi * (r0 + r1) * length; }

  bool contains(const Vec3& p) const {
    const Vec3 d = p - base;
    const double t = d.dot(axis);
    if (t <= 0.0 || t >= length) return false;
    return (d - t * axis).norm() < radius_at(t) * (1.0 - 1e-9);
  }
};

struct Ellipsoid {
  Vec3 centre;
  Eigen::Matrix3d axes;  // columns: unit semi-axis directions
  Vec3 semi;

  bool contains(const Vec3& p) const {
    const Vec3 q = axes.transpose() * (p - centre);
    return (q.array() / semi.array()).square().sum() < 1.0 - 1e-9;
  }

  double area() const {
    const double p = 1.6075;
    const double a = std::pow(semi.x(), p), b = std::pow(semi.y(), p), c = std::pow(semi.z(), p);
    return 4.0 * kPi * std::pow((a * b + a * c + b * c) / 3.0, 1.0 / p);
  }

  double top() const {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += std::pow(semi[i] * axes(2, i), 2);
    return centre.z() + std::sqrt(s);
  }
};

std::size_t sample_count(double density, double area) {
  return static_cast<std::size_t>(std::llround(density * area));
}

void sample_cylinder(const Cylinder& c, std::size_t n, Rng& rng, std::vector<Vec3>& out) {
  const Eigen::Matrix3d b = basis_for(c.axis);
  const double rmax = std::max(c.r0, c.r1);
  std::size_t made = 0;
  while (made < n) {
    const double t = uniform(rng, 0.0, c.length);
    const double r = c.radius_at(t);
    if (uniform(rng, 0.0, rmax) > r) continue;
    const double th = uniform(rng, 0.0, 2.0 * kPi);
    out.push_back(c.base + c.axis * t + r * (std::cos(th) * b.col(0) + std::sin(th) * b.col(1)));
    ++made;
  }
}

void sample_ellipsoid(const Ellipsoid& e, std::size_t n, Rng& rng, std::vector<Vec3>& out) {
  // uniform on the sphere, thinned by the local area stretch of the map
  const double stretch_max = 1.0 / e.semi.minCoeff();
  std::size_t made = 0;
  while (made < n) {
    Vec3 s(gauss(rng, 1.0), gauss(rng, 1.0), gauss(rng, 1.0));
    const double len = s.norm();
    if (len < 1e-12) continue;
    s /= len;
    const double stretch = (s.array() / e.semi.array()).matrix().norm();
    if (uniform(rng, 0.0, stretch_max) > stretch) continue;
    out.push_back(e.centre + e.axes * (s.array() * e.semi.array()).matrix());
    ++made;
  }
}

struct Tip {
  Vec3 position;
  Vec3 outward;
  std::size_t leaves;
};

std::vector<Ellipsoid> leaf_cluster(const Tip& tip, double leaf_radius, Rng& rng) {
  std::vector<Ellipsoid> leaves;
  const Eigen::Matrix3d b = basis_for(tip.outward);
  const double phase = uniform(rng, 0.0, 2.0 * kPi);
  for (std::size_t j = 0; j < tip.leaves; ++j) {
    const double phi = phase + 2.0 * kPi * static_cast<double>(j) / static_cast<double>(tip.leaves) +
                       uniform(rng, -0.25, 0.25);
    const double tilt_rad = uniform(rng, 45.0, 65.0) * kPi / 180.0;
    const Vec3 d = (std::cos(tilt_rad) * tip.outward +
                    std::sin(tilt_rad) * (std::cos(phi) * b.col(0) + std::sin(phi) * b.col(1)))
                       .normalized();
    const double a = leaf_radius * uniform(rng, 0.85, 1.15);
    Ellipsoid e;
    e.semi = Vec3(a, 0.6 * a, 0.15 * a);
    const Vec3 lateral = tip.outward.cross(d).normalized();
    e.axes << d, lateral, d.cross(lateral);
    e.centre = tip.position + d * a;
    leaves.push_back(e);
  }
  return leaves;
}

}  // namespace

void SaplingSpec::validate() const {
  const auto fail = [](const std::string& m) { throw Error(ErrorKind::Range, "sapling spec: " + m); };
  if (!(stem_height > 0.0)) fail("stem_height must be positive");
  if (!(stem_radius > 0.0) || !(stem_top_radius > 0.0)) fail("stem radii must be positive");
  if (!(density > 0.0)) fail("density must be positive");
  if (!(noise >= 0.0)) fail("noise must be non-negative");
  if (leaves_per_tip > 0 && !(leaf_radius > 0.0)) fail("leaf_radius must be positive");
  for (const BranchSpec& b : branches) {
    if (!(b.radius > 0.0)) fail("branch radius must be positive");
    if (!(b.length > 0.0)) fail("branch length must be positive");
    if (!(b.attach_height >= 0.0 && b.attach_height <= stem_height)) {
      fail("branch attachment height outside the stem");
    }
    if (!std::isfinite(b.azimuth) || !std::isfinite(b.elevation)) fail("non-finite branch angle");
  }
}

SyntheticSapling generate(const SaplingSpec& spec) {
  spec.validate();
  Rng rng(mix(spec.seed, 0x5A9));

  const Cylinder stem{Vec3::Zero(), Vec3::UnitZ(), spec.stem_height, spec.stem_radius,
                      spec.stem_top_radius};
  std::vector<Cylinder> wood{stem};
  std::vector<Tip> tips;
  tips.push_back({stem.tip(), Vec3::UnitZ(), spec.leaves_per_tip});
  for (const BranchSpec& b : spec.branches) {
    const Cylinder c{Vec3(0.0, 0.0, b.attach_height), direction(b.azimuth, b.elevation), b.length,
                     b.radius, 0.6 * b.radius};
    wood.push_back(c);
    tips.push_back({c.tip(), c.axis, spec.leaves_per_tip});
    if (spec.mid_branch_leaves && spec.leaves_per_tip > 0) {
      const Vec3 side = (Vec3::UnitZ() - c.axis.z() * c.axis).normalized();
      tips.push_back({c.base + c.axis * (0.5 * c.length) + side * c.r0, side, 2});
    }
  }

  std::vector<Ellipsoid> leaves;
  for (const Tip& t : tips) {
    if (t.leaves == 0) continue;
    std::optional<Rng> own;
    if (spec.leaf_seed != 0) {
      std::uint64_t key = spec.leaf_seed;
      for (int k = 0; k < 3; ++k) key = mix(key, static_cast<std::uint64_t>(std::llround(t.position[k] * 1e6)));
      own.emplace(key);
    }
    const auto cluster = leaf_cluster(t, spec.leaf_radius, own ? *own : rng);
    leaves.insert(leaves.end(), cluster.begin(), cluster.end());
  }

  // Sample each surface, dropping samples hidden inside another solid.
  std::vector<Vec3> pts;
  std::vector<std::uint8_t> label;
  const auto hidden = [&](const Vec3& p, std::size_t self_wood, std::size_t self_leaf) {
    for (std::size_t i = 0; i < wood.size(); ++i) {
      if (i != self_wood && wood[i].contains(p)) return true;
    }
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (i != self_leaf && leaves[i].contains(p)) return true;
    }
    return false;
  };
  constexpr std::size_t kNoSolid = static_cast<std::size_t>(-1);
  for (std::size_t i = 0; i < wood.size(); ++i) {
    std::vector<Vec3> s;
    sample_cylinder(wood[i], sample_count(spec.density, wood[i].area()), rng, s);
    for (const Vec3& p : s) {
      if (hidden(p, i, kNoSolid)) continue;
      pts.push_back(p);
      label.push_back(0);
    }
  }
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    std::vector<Vec3> s;
    sample_ellipsoid(leaves[i], sample_count(spec.density, leaves[i].area()), rng, s);
    for (const Vec3& p : s) {
      if (hidden(p, kNoSolid, i)) continue;
      pts.push_back(p);
      label.push_back(1);
    }
  }

  SyntheticSapling out;
  out.cloud.frame_id = "local";
  out.cloud.points.reserve(pts.size());
  out.cloud.colors.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 noise(gauss(rng, spec.noise), gauss(rng, spec.noise), gauss(rng, spec.noise));
    out.cloud.points.push_back(pts[i] + noise);
    out.cloud.colors.push_back(label[i] ? Rgb{64, 140, 52} : Rgb{112, 84, 56});
  }
  out.is_leaf = label;

  // True skeleton: base, one vertex per distinct attachment height, stem top,
  // one tip vertex per branch.
  SkeletonGraph& g = out.skeleton;
  std::vector<double> heights{0.0, spec.stem_height};
  for (const BranchSpec& b : spec.branches) heights.push_back(b.attach_height);
  std::sort(heights.begin(), heights.end());
  heights.erase(std::unique(heights.begin(), heights.end()), heights.end());
  for (double h : heights) g.vertices.emplace_back(0.0, 0.0, h);
  for (std::size_t i = 0; i + 1 < heights.size(); ++i) g.edges.emplace_back(i, i + 1);
  for (std::size_t i = 0; i < spec.branches.size(); ++i) {
    const auto at = std::lower_bound(heights.begin(), heights.end(), spec.branches[i].attach_height);
    g.vertices.push_back(wood[i + 1].tip());
    g.edges.emplace_back(static_cast<std::size_t>(at - heights.begin()), g.vertices.size() - 1);
  }
  canonicalize_edges(g.edges);
  g.root_index = 0;

  // True height: analytic extremes of the surfaces.
  double top = spec.stem_height;
  for (std::size_t i = 1; i < wood.size(); ++i) {
    const Cylinder& c = wood[i];
    top = std::max(top, c.tip().z() + c.r1 * std::sqrt(std::max(0.0, 1.0 - c.axis.z() * c.axis.z())));
  }
  for (const Ellipsoid& e : leaves) top = std::max(top, e.top());

  TraitReport& t = out.truth;
  t.height = top;
  t.bifurcations = count_bifurcations(g);
  for (std::uint8_t l : label) (l ? t.n_leaf : t.n_wood) += 1;
  t.lwr = t.n_wood > 0 ? static_cast<double>(t.n_leaf) / static_cast<double>(t.n_wood) : 0.0;
  std::vector<std::size_t> leaf_idx;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i]) leaf_idx.push_back(i);
  }
  t.leaf_profile = leaf_profile(out.cloud.subset(leaf_idx));
  return out;
}

SaplingSpec cylinder_spec(std::uint64_t seed, double radius, double length, std::size_t points) {
  SaplingSpec s;
  s.seed = seed;
  s.stem_height = length;
  s.stem_radius = radius;
  s.stem_top_radius = radius;
  s.density = static_cast<double>(points) / (2.0 * kPi * radius * length);
  return s;
}

SaplingSpec y_tree_spec(std::uint64_t seed) {
  Rng rng(mix(seed, 0x7));
  SaplingSpec s;
  s.seed = seed;
  s.stem_height = 0.8;
  s.stem_radius = 0.01;
  s.stem_top_radius = 0.007;
  s.branches.push_back({uniform(rng, 0.35, 0.45), uniform(rng, 0.0, 2.0 * kPi),
                        uniform(rng, 35.0, 55.0) * kPi / 180.0, uniform(rng, 0.3, 0.4), 0.006});
  return s;
}

SaplingSpec broom_spec(std::uint64_t seed) {
  Rng rng(mix(seed, 0xB));
  SaplingSpec s;
  s.seed = seed;
  s.stem_height = 0.6;
  s.stem_radius = 0.01;
  s.stem_top_radius = 0.008;
  const double phase = uniform(rng, 0.0, 2.0 * kPi);
  for (int i = 0; i < 3; ++i) {
    s.branches.push_back({s.stem_height, phase + 2.0 * kPi * i / 3.0 + uniform(rng, -0.2, 0.2),
                          uniform(rng, 40.0, 60.0) * kPi / 180.0, uniform(rng, 0.25, 0.35), 0.006});
  }
  return s;
}

SaplingSpec leafy_spec(std::size_t variant, std::uint64_t seed) {
  if (variant >= 10) throw Error(ErrorKind::Range, "leafy spec variant must be in [0, 10)");
  Rng rng(mix(seed, 0x1000 + variant));
  const double v = static_cast<double>(variant);
  SaplingSpec s;
  s.seed = seed;
  s.stem_height = 0.6 + 0.07 * v + uniform(rng, -0.03, 0.03);
  s.stem_radius = 0.008 + 0.001 * static_cast<double>(variant % 3);
  s.stem_top_radius = 0.6 * s.stem_radius;
  s.leaves_per_tip = 3 + variant % 3;
  s.leaf_radius = 0.025 + 0.002 * static_cast<double>(variant % 5);
  s.density = 60000.0;

  const std::size_t n = 2 + variant % 4;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  const double az0 = uniform(rng, 0.0, 2.0 * kPi);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1);
    BranchSpec b;
    b.attach_height = s.stem_height * (0.3 + 0.45 * f) + uniform(rng, -0.01, 0.01);
    b.azimuth = az0 + golden * static_cast<double>(i) + uniform(rng, -0.2, 0.2);
    b.elevation = uniform(rng, 30.0, 55.0) * kPi / 180.0;
    b.length = s.stem_height * uniform(rng, 0.25, 0.38);
    b.radius = uniform(rng, 0.004, 0.006);
    s.branches.push_back(b);
  }
  return s;
}

SaplingSpec defoliated(const SaplingSpec& spec) {
  SaplingSpec s = spec;
  s.leaves_per_tip = 0;
  s.mid_branch_leaves = false;
  return s;
}

SaplingSpec without_top_branch(const SaplingSpec& spec) {
  SaplingSpec s = spec;
  if (s.branches.empty()) return s;
  std::size_t top = 0;
  for (std::size_t i = 1; i < s.branches.size(); ++i) {
    if (s.branches[i].attach_height >= s.branches[top].attach_height) top = i;
  }
  s.branches.erase(s.branches.begin() + static_cast<std::ptrdiff_t>(top));
  return s;
}

std::string write_spec(const SaplingSpec& spec) {
  KeyValueFile kv;
  kv.set("seed", std::to_string(spec.seed));
  kv.set("stem_height", spec.stem_height);
  kv.set("stem_radius", spec.stem_radius);
  kv.set("stem_top_radius", spec.stem_top_radius);
  kv.set("leaves_per_tip", static_cast<long long>(spec.leaves_per_tip));
  kv.set("leaf_radius", spec.leaf_radius);
  kv.set("density", spec.density);
  kv.set("noise", spec.noise);
  kv.set("mid_branch_leaves", static_cast<long long>(spec.mid_branch_leaves));
  kv.set("leaf_seed", std::to_string(spec.leaf_seed));
  for (std::size_t i = 0; i < spec.branches.size(); ++i) {
    const BranchSpec& b = spec.branches[i];
    kv.set("branch." + std::to_string(i),
           format_double(b.attach_height) + ' ' + format_double(b.azimuth) + ' ' +
               format_double(b.elevation) + ' ' + format_double(b.length) + ' ' +
               format_double(b.radius));
  }
  return kv.str();
}

SaplingSpec parse_spec(std::string_view text) {
  const KeyValueFile kv = KeyValueFile::parse(text);
  SaplingSpec s;
  const auto count = [&](const std::string& key) {
    const long long v = kv.get_int(key);
    if (v < 0) throw Error(ErrorKind::Range, key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  std::size_t branch_count = 0;
  for (const auto& [key, value] : kv.entries()) {
    if (key == "seed") {
      s.seed = parse_seed(key, value);
    } else if (key == "stem_height") {
      s.stem_height = kv.get_double(key);
    } else if (key == "stem_radius") {
      s.stem_radius = kv.get_double(key);
    } else if (key == "stem_top_radius") {
      s.stem_top_radius = kv.get_double(key);
    } else if (key == "leaves_per_tip") {
      s.leaves_per_tip = count(key);
    } else if (key == "leaf_radius") {
      s.leaf_radius = kv.get_double(key);
    } else if (key == "density") {
      s.density = kv.get_double(key);
    } else if (key == "noise") {
      s.noise = kv.get_double(key);
    } else if (key == "leaf_seed") {
      s.leaf_seed = parse_seed(key, value);
    } else if (key == "mid_branch_leaves") {
      s.mid_branch_leaves = kv.get_int(key) != 0;
    } else if (key.rfind("branch.", 0) == 0) {
      ++branch_count;
    } else {
      throw Error(ErrorKind::Parse, "unknown spec key '" + key + "'");
    }
  }
  for (std::size_t i = 0; i < branch_count; ++i) {
    const std::string key = "branch." + std::to_string(i);
    if (!kv.contains(key)) throw Error(ErrorKind::Parse, "missing " + key);
    std::vector<std::string> f;
    std::istringstream in(kv.get(key));
    for (std::string tok; in >> tok;) f.push_back(tok);
    if (f.size() != 5) throw Error(ErrorKind::Parse, key + ": expected 5 numbers");
    s.branches.push_back({parse_double(f[0]), parse_double(f[1]), parse_double(f[2]),
                          parse_double(f[3]), parse_double(f[4])});
  }
  s.validate();
  return s;
}

// plots ------------------------------------------------------------------------------

namespace {

Quat yaw_pitch(double yaw, double pitch) {
  return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()))
      .normalized();
}

class PathBuilder {
 public:
  PathBuilder(double t0, double dt) : t_(t0), dt_(dt) {}

  void add(const Vec3& p, const Quat& q) {
    poses_.push_back({t_, q, p});
    t_ += dt_;
  }

  void walk_to(const Vec3& target, double speed) {
    const Vec3 from = poses_.empty() ? target : poses_.back().translation;
    const Vec3 d = target - from;
    const double yaw = std::atan2(d.y(), d.x());
    const auto steps = static_cast<std::size_t>(std::ceil(d.norm() / (speed * dt_)));
    for (std::size_t i = 1; i <= steps; ++i) {
      add(from + d * (static_cast<double>(i) / static_cast<double>(steps)), yaw_pitch(yaw, 0.0));
    }
    if (poses_.empty()) add(target, yaw_pitch(0.0, 0.0));
  }

  /// One revolution around `centre` at `radius`, camera facing inwards, the
  /// height oscillating to cover the crown.
  void dome(const Vec3& centre, double radius, double seconds) {
    const auto steps = static_cast<std::size_t>(std::llround(seconds / dt_));
    for (std::size_t i = 0; i < steps; ++i) {
      const double th = -kPi / 2.0 + 2.0 * kPi * static_cast<double>(i) / static_cast<double>(steps);
      const Vec3 p = centre + Vec3(radius * std::cos(th), radius * std::sin(th),
                                   1.1 + 0.4 * std::sin(2.0 * th));
      const Vec3 look = centre + Vec3(0.0, 0.0, 0.5) - p;
      add(p, yaw_pitch(std::atan2(look.y(), look.x()),
                       -std::atan2(look.z(), look.head<2>().norm())));
    }
  }

  double time() const { return t_; }
  const std::vector<Pose>& poses() const { return poses_; }

 private:
  double t_;
  double dt_;
  std::vector<Pose> poses_;
};

Quat random_rotation(Rng& rng) {
  return Quat(gauss(rng, 1.0), gauss(rng, 1.0), gauss(rng, 1.0), gauss(rng, 1.0)).normalized();
}

std::string sapling_name(std::size_t i) {
  std::string n = std::to_string(i + 1);
  if (n.size() < 2) n = "0" + n;
  return "sap" + n;
}

}  // namespace

namespace {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Defoliated: return "defoliated";
    case Variant::Pruned: return "pruned";
    case Variant::Unchanged: break;
  }
  return "unchanged";
}

}  // namespace

std::string write_plot_spec(const PlotSpec& spec) {
  KeyValueFile kv;
  kv.set("seed", std::to_string(spec.seed));
  kv.set("layout_seed", std::to_string(spec.layout_seed));
  kv.set("n_saplings", static_cast<long long>(spec.n_saplings));
  kv.set("anchor_lat", spec.anchor.latitude);
  kv.set("anchor_lon", spec.anchor.longitude);
  kv.set("anchor_alt", spec.anchor.altitude);
  kv.set("gnss_noise", spec.gnss_noise);
  kv.set("sfm_noise", spec.sfm_noise);
  kv.set("earth_yaw", spec.earth_yaw);
  kv.set("earth_east", spec.earth_shift.x());
  kv.set("earth_north", spec.earth_shift.y());
  kv.set("earth_up", spec.earth_up);
  kv.set("session_id", spec.session_id);
  kv.set("start_time", spec.start_time);
  kv.set("point_density", spec.point_density);
  std::string variants;
  for (std::size_t i = 0; i < spec.variants.size(); ++i) {
    if (i) variants += ',';
    variants += variant_name(spec.variants[i]);
  }
  if (!variants.empty()) kv.set("variants", variants);
  return kv.str();
}

PlotSpec parse_plot_spec(std::string_view text) {
  const KeyValueFile kv = KeyValueFile::parse(text);
  PlotSpec s;
  for (const auto& [key, value] : kv.entries()) {
    if (key == "seed") s.seed = parse_seed(key, value);
    else if (key == "layout_seed") s.layout_seed = parse_seed(key, value);
    else if (key == "n_saplings") {
      const long long n = kv.get_int(key);
      if (n < 1) throw Error(ErrorKind::Range, "n_saplings must be at least 1");
      s.n_saplings = static_cast<std::size_t>(n);
    }
    else if (key == "anchor_lat") s.anchor.latitude = kv.get_double(key);
    else if (key == "anchor_lon") s.anchor.longitude = kv.get_double(key);
    else if (key == "anchor_alt") s.anchor.altitude = kv.get_double(key);
    else if (key == "gnss_noise") s.gnss_noise = kv.get_double(key);
    else if (key == "sfm_noise") s.sfm_noise = kv.get_double(key);
    else if (key == "earth_yaw") s.earth_yaw = kv.get_double(key);
    else if (key == "earth_east") s.earth_shift.x() = kv.get_double(key);
    else if (key == "earth_north") s.earth_shift.y() = kv.get_double(key);
    else if (key == "earth_up") s.earth_up = kv.get_double(key);
    else if (key == "session_id") s.session_id = value;
    else if (key == "start_time") s.start_time = kv.get_double(key);
    else if (key == "point_density") s.point_density = kv.get_double(key);
    else if (key == "variants") {
      for (const std::string& name : split_fields(value, ',')) {
        if (name == "unchanged") s.variants.push_back(Variant::Unchanged);
        else if (name == "defoliated") s.variants.push_back(Variant::Defoliated);
        else if (name == "pruned") s.variants.push_back(Variant::Pruned);
        else throw Error(ErrorKind::Parse, "unknown variant '" + name + "'");
      }
    }
    else throw Error(ErrorKind::Parse, "unknown plot key '" + key + "'");
  }
  validate(s.anchor);
  if (!(s.gnss_noise >= 0.0) || !(s.sfm_noise >= 0.0) || !(s.point_density >= 0.0)) {
    throw Error(ErrorKind::Range, "noise and density must be non-negative");
  }
  return s;
}

SyntheticSession generate_plot(const PlotSpec& spec) {
  if (spec.n_saplings == 0) throw Error(ErrorKind::Range, "plot needs at least one sapling");
  Rng layout(mix(spec.layout_seed, 0x9107));
  Rng noise(mix(spec.seed, 0x3A11));

  EarthTransform earth;
  earth.rotation_z = spec.earth_yaw;
  earth.translation = spec.earth_shift;
  earth.anchor = spec.anchor;
  earth.up_offset = spec.earth_up;

  // Saplings along a row, each with its own yaw and SfM frame.
  std::vector<PlantedSapling> planted;
  std::vector<double> yaws;
  for (std::size_t i = 0; i < spec.n_saplings; ++i) {
    PlantedSapling p;
    p.sapling_id = sapling_name(i);
    p.map_position = Vec3(3.0 * static_cast<double>(i) + uniform(layout, -0.4, 0.4),
                          uniform(layout, -0.5, 0.5), uniform(layout, -0.05, 0.05));
    yaws.push_back(uniform(layout, 0.0, 2.0 * kPi));
    p.spec = leafy_spec(i % 10, mix(spec.layout_seed, i));
    const double scale = std::exp(uniform(layout, std::log(0.2), std::log(5.0)));
    const Quat rot = random_rotation(layout);
    const Vec3 shift(uniform(layout, -2.0, 2.0), uniform(layout, -2.0, 2.0), uniform(layout, -2.0, 2.0));
    p.sfm_to_map = SimilarityTransform(scale, rot, p.map_position + shift, "F_" + p.sapling_id, "M1");

    p.spec.leaf_seed = mix(spec.layout_seed, 0x1EAF + i);
    p.spec.seed = mix(spec.seed, i + 1);
    if (spec.point_density > 0.0) p.spec.density = spec.point_density;
    const Variant v = i < spec.variants.size() ? spec.variants[i] : Variant::Unchanged;
    if (v == Variant::Defoliated) p.spec = defoliated(p.spec);
    if (v == Variant::Pruned) p.spec = without_top_branch(p.spec);
    p.sapling = generate(p.spec);
    p.geo = to_earth(earth, p.map_position);
    planted.push_back(std::move(p));
  }

  // Lawnmower traverse: out along one lane with a dome loop per sapling, back
  // along the other.
  PathBuilder path(spec.start_time, 0.1);
  const double speed = 0.5;
  const double x_end = 3.0 * static_cast<double>(spec.n_saplings);
  path.walk_to(Vec3(-3.0, -2.5, 1.0), speed);
  std::vector<std::pair<double, double>> windows;
  for (const PlantedSapling& p : planted) {
    path.walk_to(Vec3(p.map_position.x(), -2.5, 1.0), speed);
    const Vec3 entry = p.map_position + Vec3(0.0, -1.5, 0.0);
    path.walk_to(Vec3(entry.x(), entry.y(), 1.1), speed);
    const double t0 = path.time();
    path.dome(Vec3(p.map_position.x(), p.map_position.y(), 0.0), 1.5, 20.0);
    windows.emplace_back(t0, path.time() - 0.1);
    path.walk_to(Vec3(p.map_position.x(), -2.5, 1.0), speed);
  }
  path.walk_to(Vec3(x_end, -2.5, 1.0), speed);
  path.walk_to(Vec3(x_end, 2.5, 1.0), speed);
  path.walk_to(Vec3(-3.0, 2.5, 1.0), speed);

  SyntheticSession session{Trajectory("M1", path.poses()), GeoTrack({GeoFix{}}), earth, {}, {}, {}, {}};

  std::vector<GeoFix> fixes;
  const auto& poses = session.slam.poses();
  for (std::size_t i = 0; i < poses.size(); i += 5) {
    Vec3 enu = earth.map_to_enu(poses[i].translation);
    enu.x() += gauss(noise, spec.gnss_noise);
    enu.y() += gauss(noise, spec.gnss_noise);
    GeoFix f = enu_to_geodetic(enu, spec.anchor);
    f.timestamp = poses[i].timestamp;
    f.has_altitude = true;
    fixes.push_back(f);
  }
  session.gnss = GeoTrack(fixes, spec.anchor);

  for (std::size_t i = 0; i < planted.size(); ++i) {
    const PlantedSapling& p = planted[i];
    const SimilarityTransform to_sfm = p.sfm_to_map.inverse();
    const auto [t0, t1] = windows[i];

    std::vector<Pose> sfm_poses;
    for (const Pose& pose : poses) {
      if (pose.timestamp < t0 - 1e-9 || pose.timestamp > t1 + 1e-9) continue;
      Pose jittered = pose;
      jittered.translation += Vec3(gauss(noise, spec.sfm_noise), gauss(noise, spec.sfm_noise),
                                   gauss(noise, spec.sfm_noise));
      sfm_poses.push_back(apply(to_sfm, jittered));
    }
    session.sfm.emplace_back(to_sfm.target_frame, std::move(sfm_poses));

    const Eigen::Matrix3d yaw = Eigen::AngleAxisd(yaws[i], Vec3::UnitZ()).toRotationMatrix();
    PointCloud cloud = p.sapling.cloud;
    cloud.frame_id = to_sfm.target_frame;
    for (Vec3& q : cloud.points) q = to_sfm(yaw * q + p.map_position);
    session.sfm_clouds.push_back(std::move(cloud));

    session.manifest.push_back({spec.session_id, p.sapling_id, t0, t1,
                                "sfm/" + p.sapling_id + ".tum", "clouds/" + p.sapling_id + ".ply"});
  }
  session.saplings = std::move(planted);
  return session;
}

void write_session(const SyntheticSession& session, const std::filesystem::path& dir) {
  write_file(dir / "slam.tum", write_trajectory(session.slam));
  write_file(dir / "gnss.csv", write_gnss(session.gnss));
  write_file(dir / "manifest.csv", write_manifest(session.manifest));

  KeyValueFile truth;
  const EarthTransform& e = session.planted_earth;
  truth.set("earth.rotation_z_rad", e.rotation_z);
  truth.set("earth.east_m", e.translation.x());
  truth.set("earth.north_m", e.translation.y());
  truth.set("earth.up_m", e.up_offset);
  for (std::size_t i = 0; i < session.saplings.size(); ++i) {
    const PlantedSapling& p = session.saplings[i];
    write_file(dir / "sfm" / (p.sapling_id + ".tum"), write_trajectory(session.sfm[i]));
    write_file(dir / "clouds" / (p.sapling_id + ".ply"),
               write_ply(session.sfm_clouds[i], PlyFormat::BinaryLittleEndian));
    write_file(dir / "specs" / (p.sapling_id + ".txt"), write_spec(p.spec));
    const std::string k = p.sapling_id + ".";
    const TraitReport& t = p.sapling.truth;
    truth.set(k + "height_m", t.height);
    truth.set(k + "bifurcations", static_cast<long long>(t.bifurcations));
    truth.set(k + "lwr", t.lwr);
    truth.set(k + "leaf_points", static_cast<long long>(t.n_leaf));
    truth.set(k + "wood_points", static_cast<long long>(t.n_wood));
    truth.set(k + "lat", p.geo.latitude);
    truth.set(k + "lon", p.geo.longitude);
    truth.set(k + "x", p.map_position.x());
    truth.set(k + "y", p.map_position.y());
    truth.set(k + "z", p.map_position.z());
    truth.set(k + "sfm_scale", p.sfm_to_map.scale);
  }
  write_file(dir / "truth.txt", truth.str());
}

}  // namespace sapling::synth
