#include "sapling/registry.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

#include "sapling/error.hpp"
#include "sapling/ingest.hpp"
#include "sapling/skeleton.hpp"

namespace sapling {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kIndexHeader =
    "sapling_id,session_id,date,lat,lon,x,y,z,height_m,bifurcations,lwr";

bool profiles_equal(const LeafProfile& a, const LeafProfile& b) {
  return a.heights == b.heights && a.density == b.density && a.bandwidth == b.bandwidth &&
         a.degenerate == b.degenerate;
}

auto sort_key(const SaplingRecord& r) { return std::tie(r.sapling_id, r.date, r.session_id); }

void check_id(const std::string& id, const char* what, std::optional<std::size_t> line = std::nullopt) {
  if (id.empty()) throw Error(ErrorKind::Parse, std::string("empty ") + what, line);
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    if (!ok || id == "." || id == "..") {
      throw Error(ErrorKind::Parse, std::string(what) + " '" + id + "' has characters outside [A-Za-z0-9_.-]",
                  line);
    }
  }
}

/// Linear interpolation of `p` at z, zero outside its range.
double sample(const LeafProfile& p, double z) {
  if (p.heights.empty() || z < p.heights.front() || z > p.heights.back()) return 0.0;
  const auto it = std::lower_bound(p.heights.begin(), p.heights.end(), z);
  const auto i = static_cast<std::size_t>(it - p.heights.begin());
  if (i == 0) return p.density.front();
  const double z0 = p.heights[i - 1], z1 = p.heights[i];
  const double f = z1 > z0 ? (z - z0) / (z1 - z0) : 0.0;
  return p.density[i - 1] + f * (p.density[i] - p.density[i - 1]);
}

std::vector<double> resample_normalised(const LeafProfile& p, const std::vector<double>& grid) {
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = sample(p, grid[i]);
  const double area = trapezoid_integral(grid, out);
  if (area > 0.0) {
    for (double& v : out) v /= area;
  }
  return out;
}

}  // namespace

bool operator==(const SaplingRecord& a, const SaplingRecord& b) {
  return a.sapling_id == b.sapling_id && a.session_id == b.session_id && a.date == b.date &&
         a.latitude == b.latitude && a.longitude == b.longitude && a.map_position == b.map_position &&
         a.height == b.height && a.bifurcations == b.bifurcations && a.lwr == b.lwr &&
         profiles_equal(a.leaf_profile, b.leaf_profile);
}

SaplingRecord make_record(const TraitReport& report, const std::string& date) {
  validate_date(date);
  SaplingRecord r;
  r.sapling_id = report.sapling_id;
  r.session_id = report.session_id;
  r.date = date;
  r.latitude = report.latitude;
  r.longitude = report.longitude;
  r.map_position = report.map_position;
  r.height = report.height;
  r.bifurcations = report.bifurcations;
  r.lwr = report.lwr;
  r.leaf_profile = report.leaf_profile;
  return r;
}

void validate_date(std::string_view date, std::optional<std::size_t> line) {
  const auto bad = [&] { throw Error(ErrorKind::Parse, "bad date '" + std::string(date) + "', want YYYY-MM-DD", line); };
  if (date.size() != 10 || date[4] != '-' || date[7] != '-') bad();
  int y = 0;
  unsigned m = 0, d = 0;
  const auto num = [&](std::size_t pos, std::size_t len, auto& out) {
    const char* b = date.data() + pos;
    const auto [p, ec] = std::from_chars(b, b + len, out);
    if (ec != std::errc() || p != b + len) bad();
  };
  num(0, 4, y);
  num(5, 2, m);
  num(8, 2, d);
  const std::chrono::year_month_day ymd{std::chrono::year(y), std::chrono::month(m), std::chrono::day(d)};
  if (!ymd.ok()) bad();
}

fs::path record_dir(const fs::path& root, const std::string& sapling_id, const std::string& session_id) {
  check_id(sapling_id, "sapling_id");
  check_id(session_id, "session_id");
  return root / sapling_id / session_id;
}

void write_artifacts(const fs::path& root, const TraitReport& report, const PointCloud& cloud,
                     const SkeletonGraph& skeleton, const Segmentation& segmentation) {
  const fs::path dir = record_dir(root, report.sapling_id, report.session_id);
  write_file(dir / ArtifactNames::cloud, write_ply(cloud, PlyFormat::BinaryLittleEndian));
  write_file(dir / ArtifactNames::skeleton, write_skeleton(skeleton));
  write_file(dir / ArtifactNames::leaf, write_ply(segmentation.leaf, PlyFormat::BinaryLittleEndian));
  write_file(dir / ArtifactNames::wood, write_ply(segmentation.wood, PlyFormat::BinaryLittleEndian));
  write_file(dir / ArtifactNames::report, write_trait_report(report));
  write_file(dir / ArtifactNames::profile, write_profile_csv(report.leaf_profile));
}

// Registry ---------------------------------------------------------------------------

void Registry::add(SaplingRecord record) {
  check_id(record.sapling_id, "sapling_id");
  check_id(record.session_id, "session_id");
  validate_date(record.date);
  if (contains(record.sapling_id, record.session_id)) {
    throw Error(ErrorKind::Duplicate,
                "record (" + record.sapling_id + ", " + record.session_id + ") already exists");
  }
  const auto at = std::upper_bound(records_.begin(), records_.end(), record,
                                   [](const auto& a, const auto& b) { return sort_key(a) < sort_key(b); });
  records_.insert(at, std::move(record));
}

bool Registry::contains(const std::string& sapling_id, const std::string& session_id) const {
  return std::any_of(records_.begin(), records_.end(), [&](const SaplingRecord& r) {
    return r.sapling_id == sapling_id && r.session_id == session_id;
  });
}

const SaplingRecord& Registry::get(const std::string& sapling_id, const std::string& session_id) const {
  for (const SaplingRecord& r : records_) {
    if (r.sapling_id == sapling_id && r.session_id == session_id) return r;
  }
  throw Error(ErrorKind::NotFound, "no record (" + sapling_id + ", " + session_id + ")");
}

std::vector<SaplingRecord> Registry::lookup(const std::string& sapling_id) const {
  std::vector<SaplingRecord> out;
  for (const SaplingRecord& r : records_) {
    if (r.sapling_id == sapling_id) out.push_back(r);
  }
  return out;
}

std::string Registry::index_csv() const {
  std::ostringstream out;
  out << kIndexHeader << '\n';
  for (const SaplingRecord& r : records_) {
    out << r.sapling_id << ',' << r.session_id << ',' << r.date << ',' << format_double(r.latitude) << ','
        << format_double(r.longitude) << ',' << format_double(r.map_position.x()) << ','
        << format_double(r.map_position.y()) << ',' << format_double(r.map_position.z()) << ','
        << format_double(r.height) << ',' << r.bifurcations << ',' << format_double(r.lwr) << '\n';
  }
  return out.str();
}

Registry Registry::parse_index(std::string_view text) {
  Registry reg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto f = split_fields(line, ',');
    if (!header) {
      if (line != kIndexHeader) {
        throw Error(ErrorKind::Parse, "expected index header '" + std::string(kIndexHeader) + "'", line_no);
      }
      header = true;
      continue;
    }
    if (f.size() != 11) {
      throw Error(ErrorKind::Parse, "expected 11 fields, got " + std::to_string(f.size()), line_no);
    }
    SaplingRecord r;
    r.sapling_id = f[0];
    r.session_id = f[1];
    check_id(r.sapling_id, "sapling_id", line_no);
    check_id(r.session_id, "session_id", line_no);
    validate_date(f[2], line_no);
    r.date = f[2];
    r.latitude = parse_double(f[3], line_no);
    r.longitude = parse_double(f[4], line_no);
    r.map_position = Vec3(parse_double(f[5], line_no), parse_double(f[6], line_no), parse_double(f[7], line_no));
    r.height = parse_double(f[8], line_no);
    unsigned long long bif = 0;
    const auto [p, ec] = std::from_chars(f[9].data(), f[9].data() + f[9].size(), bif);
    if (ec != std::errc() || p != f[9].data() + f[9].size()) {
      throw Error(ErrorKind::Parse, "bad bifurcation count '" + f[9] + "'", line_no);
    }
    r.bifurcations = static_cast<std::size_t>(bif);
    r.lwr = parse_double(f[10], line_no);
    if (std::abs(r.latitude) > 90.0 || std::abs(r.longitude) > 180.0) {
      throw Error(ErrorKind::Range, "latitude/longitude out of range", line_no);
    }
    if (reg.contains(r.sapling_id, r.session_id)) {
      throw Error(ErrorKind::Duplicate, "duplicate record (" + r.sapling_id + ", " + r.session_id + ")", line_no);
    }
    reg.add(std::move(r));
  }
  if (!header) throw Error(ErrorKind::Parse, "index is empty");
  return reg;
}

void Registry::save(const fs::path& root) const {
  for (const SaplingRecord& r : records_) {
    const fs::path dir = record_dir(root, r.sapling_id, r.session_id);
    for (const char* name : {ArtifactNames::cloud, ArtifactNames::skeleton, ArtifactNames::leaf,
                             ArtifactNames::wood, ArtifactNames::report, ArtifactNames::profile}) {
      if (!fs::exists(dir / name)) {
        throw Error(ErrorKind::NotFound, "missing artifact " + (dir / name).string());
      }
    }
  }
  write_file(root / "index.csv", index_csv());
}

Registry Registry::load(const fs::path& root) {
  Registry reg = parse_index(read_file(root / "index.csv"));
  for (SaplingRecord& r : reg.records_) {
    const fs::path dir = record_dir(root, r.sapling_id, r.session_id);
    if (fs::exists(dir / ArtifactNames::profile)) {
      r.leaf_profile = parse_profile_csv(read_file(dir / ArtifactNames::profile));
    }
    if (fs::exists(dir / ArtifactNames::report)) {
      const KeyValueFile kv = KeyValueFile::parse(read_file(dir / ArtifactNames::report));
      if (kv.contains("profile_bandwidth")) r.leaf_profile.bandwidth = kv.get_double("profile_bandwidth");
      if (kv.contains("profile_degenerate")) r.leaf_profile.degenerate = kv.get_int("profile_degenerate") != 0;
    }
  }
  return reg;
}

Registry add_record(Registry registry, SaplingRecord record) {
  registry.add(std::move(record));
  return registry;
}

// change reports -------------------------------------------------------------------

double profile_distance(const LeafProfile& a, const LeafProfile& b, std::size_t bins) {
  if (bins < 2) throw Error(ErrorKind::Range, "profile distance needs at least two bins");
  if (a.empty() && b.empty()) return 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const LeafProfile* p : {&a, &b}) {
    if (p->empty()) continue;
    lo = std::min(lo, p->heights.front());
    hi = std::max(hi, p->heights.back());
  }
  if (!(hi > lo)) return 0.0;
  std::vector<double> grid(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins - 1);
  }
  const std::vector<double> da = resample_normalised(a, grid);
  const std::vector<double> db = resample_normalised(b, grid);
  std::vector<double> diff(bins);
  for (std::size_t i = 0; i < bins; ++i) diff[i] = std::abs(da[i] - db[i]);
  return std::clamp(trapezoid_integral(grid, diff), 0.0, 2.0);
}

ChangeReport compare(const SaplingRecord& a, const SaplingRecord& b) {
  ChangeReport c;
  c.sapling_id = a.sapling_id;
  c.session_a = a.session_id;
  c.session_b = b.session_id;
  c.d_height = b.height - a.height;
  c.d_bifurcations = static_cast<long long>(b.bifurcations) - static_cast<long long>(a.bifurcations);
  c.d_lwr = b.lwr - a.lwr;
  if (a.lwr != 0.0) {
    c.d_lwr_relative = c.d_lwr / a.lwr;
  } else {
    c.d_lwr_relative = b.lwr == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  c.profile_distance = profile_distance(a.leaf_profile, b.leaf_profile);
  c.position_drift = (b.map_position - a.map_position).norm();
  return c;
}

ChangeReport change_report(const Registry& registry, const std::string& sapling_id,
                           const std::string& session_a, const std::string& session_b) {
  return compare(registry.get(sapling_id, session_a), registry.get(sapling_id, session_b));
}

std::string write_change_report(const ChangeReport& r) {
  KeyValueFile kv;
  kv.set("sapling_id", r.sapling_id);
  kv.set("session_a", r.session_a);
  kv.set("session_b", r.session_b);
  kv.set("d_height_m", r.d_height);
  kv.set("d_bifurcations", r.d_bifurcations);
  kv.set("d_lwr", r.d_lwr);
  kv.set("d_lwr_relative", r.d_lwr_relative);
  kv.set("profile_distance", r.profile_distance);
  kv.set("position_drift_m", r.position_drift);
  return kv.str();
}

}  // namespace sapling
