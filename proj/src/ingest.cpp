#include "sapling/ingest.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "sapling/error.hpp"

namespace sapling {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary PLY I/O assumes a little-endian host");

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

/// Iterates lines; the callback receives (1-based line number, line without
/// trailing '\r').
template <typename F>
void for_each_line(std::string_view text, F&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(++line_no, line);
    pos = end + 1;
  }
}

std::size_t parse_count(std::string_view s, std::optional<std::size_t> line = std::nullopt) {
  unsigned long long v = 0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorKind::Parse, "expected a non-negative integer, got '" + std::string(s) + "'",
                line);
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

// helpers --------------------------------------------------------------------

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

double parse_double(std::string_view text, std::optional<std::size_t> line) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::Parse, "not a number: '" + std::string(text) + "'", line);
  }
  if (!std::isfinite(v)) throw Error(ErrorKind::Parse, "non-finite number: '" + std::string(text) + "'", line);
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::vector<std::string> split_fields(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t end = line.find(sep, pos);
    out.emplace_back(trim(line.substr(pos, end == std::string_view::npos ? std::string_view::npos
                                                                        : end - pos)));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

// TUM --------------------------------------------------------------------------

Trajectory parse_trajectory(std::string_view text, const std::string& frame_id) {
  std::vector<Pose> poses;
  for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') return;
    const auto fields = split_ws(line);
    if (fields.size() != 8) {
      throw Error(ErrorKind::Parse,
                  "expected 8 fields (timestamp tx ty tz qx qy qz qw), got " +
                      std::to_string(fields.size()),
                  line_no);
    }
    double v[8];
    for (int k = 0; k < 8; ++k) {
      v[k] = parse_double(fields[k], line_no);
      if (!std::isfinite(v[k])) throw Error(ErrorKind::Parse, "non-finite value", line_no);
    }
    Quat q = quat_wxyz(v[7], v[4], v[5], v[6]);
    const double norm = q.norm();
    if (std::abs(norm - 1.0) > 1e-3) {
      throw Error(ErrorKind::Range, "quaternion norm " + format_double(norm) + " is not unit",
                  line_no);
    }
    q.normalize();
    if (!poses.empty() && !(v[0] > poses.back().timestamp)) {
      throw Error(ErrorKind::Range, "timestamps not strictly increasing", line_no);
    }
    poses.push_back(Pose{v[0], q, Vec3(v[1], v[2], v[3])});
  });
  if (poses.empty()) throw Error(ErrorKind::Parse, "trajectory contains no poses");
  return Trajectory(frame_id, std::move(poses));
}

std::string write_trajectory(const Trajectory& trajectory) {
  std::string out = "# timestamp tx ty tz qx qy qz qw\n";
  for (const Pose& p : trajectory.poses()) {
    const double vals[8] = {p.timestamp,     p.translation.x(), p.translation.y(),
                            p.translation.z(), p.rotation.x(),    p.rotation.y(),
                            p.rotation.z(),    p.rotation.w()};
    for (int k = 0; k < 8; ++k) {
      if (k) out += ' ';
      out += format_double(vals[k]);
    }
    out += '\n';
  }
  return out;
}

// GNSS ---------------------------------------------------------------------------

GeoTrack parse_gnss(std::string_view text, const GnssOptions& options) {
  int col_t = -1, col_lat = -1, col_lon = -1, col_alt = -1;
  std::size_t ncols = 0;
  bool have_header = false;
  std::vector<GeoFix> fixes;

  for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') return;
    const auto fields = split_fields(line, ',');
    if (!have_header) {
      for (std::size_t k = 0; k < fields.size(); ++k) {
        const std::string& name = fields[k];
        const int idx = static_cast<int>(k);
        if (name == "timestamp") col_t = idx;
        else if (name == "lat") col_lat = idx;
        else if (name == "lon") col_lon = idx;
        else if (name == "alt") col_alt = idx;
      }
      if (col_t < 0 || col_lat < 0 || col_lon < 0) {
        throw Error(ErrorKind::Parse, "GNSS header must name timestamp, lat and lon columns",
                    line_no);
      }
      ncols = fields.size();
      have_header = true;
      return;
    }
    if (fields.size() != ncols) {
      throw Error(ErrorKind::Parse,
                  "expected " + std::to_string(ncols) + " columns, got " +
                      std::to_string(fields.size()),
                  line_no);
    }
    GeoFix fix;
    fix.timestamp = parse_double(fields[col_t], line_no) + options.time_offset;
    fix.latitude = parse_double(fields[col_lat], line_no);
    fix.longitude = parse_double(fields[col_lon], line_no);
    if (col_alt >= 0 && !fields[col_alt].empty()) {
      fix.altitude = parse_double(fields[col_alt], line_no);
      fix.has_altitude = true;
    }
    try {
      validate(fix);
    } catch (const Error& e) {
      throw Error(e.kind(), e.what(), line_no);
    }
    if (!fixes.empty() && !(fix.timestamp > fixes.back().timestamp)) {
      throw Error(ErrorKind::Range, "GNSS timestamps not strictly increasing", line_no);
    }
    fixes.push_back(fix);
  });

  if (!have_header) throw Error(ErrorKind::Parse, "GNSS file has no header row");
  if (fixes.empty()) throw Error(ErrorKind::Parse, "GNSS file has no fixes");
  if (options.anchor) return GeoTrack(std::move(fixes), *options.anchor);
  return GeoTrack(std::move(fixes));
}

std::string write_gnss(const GeoTrack& track) {
  const bool alt = std::any_of(track.fixes().begin(), track.fixes().end(),
                               [](const GeoFix& f) { return f.has_altitude; });
  std::string out = alt ? "timestamp,lat,lon,alt\n" : "timestamp,lat,lon\n";
  for (const GeoFix& f : track.fixes()) {
    out += format_double(f.timestamp) + ',' + format_double(f.latitude) + ',' +
           format_double(f.longitude);
    if (alt) out += ',' + format_double(f.altitude);
    out += '\n';
  }
  return out;
}

// PLY ----------------------------------------------------------------------------

namespace {

std::optional<PlyType> ply_type_from_name(std::string_view name) {
  if (name == "char" || name == "int8") return PlyType::Int8;
  if (name == "uchar" || name == "uint8") return PlyType::UInt8;
  if (name == "short" || name == "int16") return PlyType::Int16;
  if (name == "ushort" || name == "uint16") return PlyType::UInt16;
  if (name == "int" || name == "int32") return PlyType::Int32;
  if (name == "uint" || name == "uint32") return PlyType::UInt32;
  if (name == "float" || name == "float32") return PlyType::Float32;
  if (name == "double" || name == "float64") return PlyType::Float64;
  return std::nullopt;
}

std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 0;
}

double read_binary_scalar(const char* p, PlyType t) {
  switch (t) {
    case PlyType::Int8: { std::int8_t v; std::memcpy(&v, p, 1); return v; }
    case PlyType::UInt8: { std::uint8_t v; std::memcpy(&v, p, 1); return v; }
    case PlyType::Int16: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
    case PlyType::UInt16: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
    case PlyType::Int32: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
    case PlyType::UInt32: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
    case PlyType::Float32: { float v; std::memcpy(&v, p, 4); return v; }
    case PlyType::Float64: { double v; std::memcpy(&v, p, 8); return v; }
  }
  return 0.0;
}

struct VertexLayout {
  int x = -1, y = -1, z = -1, r = -1, g = -1, b = -1;
};

VertexLayout vertex_layout(const PlyElement& vertex) {
  VertexLayout lay;
  for (std::size_t k = 0; k < vertex.properties.size(); ++k) {
    const PlyProperty& p = vertex.properties[k];
    const int idx = static_cast<int>(k);
    if (p.name == "x") lay.x = idx;
    else if (p.name == "y") lay.y = idx;
    else if (p.name == "z") lay.z = idx;
    else if (p.name == "red") lay.r = idx;
    else if (p.name == "green") lay.g = idx;
    else if (p.name == "blue") lay.b = idx;
  }
  if (lay.x < 0 || lay.y < 0 || lay.z < 0) {
    throw Error(ErrorKind::Parse, "vertex element lacks x/y/z properties");
  }
  for (int c : {lay.x, lay.y, lay.z}) {
    const PlyProperty& p = vertex.properties[c];
    if (p.is_list || (p.type != PlyType::Float32 && p.type != PlyType::Float64)) {
      throw Error(ErrorKind::Parse, "unsupported type for vertex property '" + p.name +
                                        "' (expected float or double)");
    }
  }
  const int declared = (lay.r >= 0) + (lay.g >= 0) + (lay.b >= 0);
  if (declared == 3) {
    for (int c : {lay.r, lay.g, lay.b}) {
      const PlyProperty& p = vertex.properties[c];
      if (p.is_list || p.type != PlyType::UInt8) {
        throw Error(ErrorKind::Parse,
                    "unsupported type for color property '" + p.name + "' (expected uchar)");
      }
    }
  } else {
    lay.r = lay.g = lay.b = -1;
  }
  return lay;
}

/// Cursor over the binary payload with bounds checks.
class BinaryReader {
 public:
  explicit BinaryReader(std::string_view data) : data_(data) {}

  const char* take(std::size_t n) {
    if (data_.size() - pos_ < n) throw Error(ErrorKind::Parse, "truncated PLY payload");
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

/// Cursor over whitespace-separated ASCII tokens.
class AsciiReader {
 public:
  explicit AsciiReader(std::string_view data) : data_(data) {}

  std::string_view next() {
    while (pos_ < data_.size() && is_space(data_[pos_])) ++pos_;
    if (pos_ >= data_.size()) throw Error(ErrorKind::Parse, "truncated PLY payload");
    const std::size_t start = pos_;
    while (pos_ < data_.size() && !is_space(data_[pos_])) ++pos_;
    return data_.substr(start, pos_ - start);
  }
  double next_number() {
    const std::string_view tok = next();
    return parse_double(tok);
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

const PlyElement* PlyHeader::vertex() const {
  for (const auto& e : elements) {
    if (e.name == "vertex") return &e;
  }
  return nullptr;
}

PlyHeader parse_ply_header(std::string_view bytes) {
  PlyHeader header;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool have_format = false;
  bool done = false;

  while (pos < bytes.size()) {
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) break;
    std::string_view line = bytes.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;

    if (line_no == 1) {
      if (trim(line) != "ply") throw Error(ErrorKind::Parse, "missing 'ply' magic", line_no);
      continue;
    }
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") {
      done = true;
      break;
    }
    if (tok[0] == "format") {
      if (tok.size() != 3) throw Error(ErrorKind::Parse, "malformed format line", line_no);
      if (tok[1] == "ascii") header.format = PlyFormat::Ascii;
      else if (tok[1] == "binary_little_endian") header.format = PlyFormat::BinaryLittleEndian;
      else if (tok[1] == "binary_big_endian")
        throw Error(ErrorKind::Parse, "binary_big_endian PLY is not supported", line_no);
      else throw Error(ErrorKind::Parse, "unknown PLY format '" + std::string(tok[1]) + "'", line_no);
      have_format = true;
      continue;
    }
    if (tok[0] == "element") {
      if (tok.size() != 3) throw Error(ErrorKind::Parse, "malformed element line", line_no);
      PlyElement el;
      el.name = std::string(tok[1]);
      el.count = parse_count(tok[2], line_no);
      header.elements.push_back(std::move(el));
      continue;
    }
    if (tok[0] == "property") {
      if (header.elements.empty()) {
        throw Error(ErrorKind::Parse, "property before any element", line_no);
      }
      PlyProperty prop;
      if (tok.size() == 3) {
        auto t = ply_type_from_name(tok[1]);
        if (!t) throw Error(ErrorKind::Parse, "unknown property type '" + std::string(tok[1]) + "'", line_no);
        prop.type = *t;
        prop.name = std::string(tok[2]);
      } else if (tok.size() == 5 && tok[1] == "list") {
        auto ct = ply_type_from_name(tok[2]);
        auto t = ply_type_from_name(tok[3]);
        if (!ct || !t) throw Error(ErrorKind::Parse, "unknown list property type", line_no);
        if (*ct == PlyType::Float32 || *ct == PlyType::Float64) {
          throw Error(ErrorKind::Parse, "list count type must be integral", line_no);
        }
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *t;
        prop.name = std::string(tok[4]);
      } else {
        throw Error(ErrorKind::Parse, "malformed property line", line_no);
      }
      header.elements.back().properties.push_back(std::move(prop));
      continue;
    }
    throw Error(ErrorKind::Parse, "unexpected header keyword '" + std::string(tok[0]) + "'", line_no);
  }
  if (!done) throw Error(ErrorKind::Parse, "PLY header not terminated by end_header");
  if (!have_format) throw Error(ErrorKind::Parse, "PLY header has no format line");
  if (!header.vertex()) throw Error(ErrorKind::Parse, "PLY has no vertex element");
  header.body_offset = pos;
  return header;
}

PointCloud parse_ply(std::string_view bytes, const std::string& frame_id) {
  const PlyHeader header = parse_ply_header(bytes);
  const PlyElement& vertex = *header.vertex();
  const VertexLayout lay = vertex_layout(vertex);
  const bool colored = lay.r >= 0;
  const std::string_view body = bytes.substr(header.body_offset);

  PointCloud cloud;
  cloud.frame_id = frame_id;

  if (header.format == PlyFormat::BinaryLittleEndian) {
    BinaryReader in(body);
    for (const PlyElement& el : header.elements) {
      const bool is_vertex = &el == &vertex;
      if (el.properties.empty()) continue;  // occupies no payload bytes
      bool fixed = true;
      std::size_t stride = 0;
      for (const auto& p : el.properties) {
        if (p.is_list) fixed = false;
        else stride += ply_type_size(p.type);
      }
      if (fixed && stride > 0 && el.count > in.remaining() / stride) {
        throw Error(ErrorKind::Parse, "truncated PLY payload (element '" + el.name + "')");
      }
      if (is_vertex) {
        cloud.points.reserve(el.count);
        if (colored) cloud.colors.reserve(el.count);
      }
      std::vector<double> row(el.properties.size());
      for (std::size_t i = 0; i < el.count; ++i) {
        for (std::size_t k = 0; k < el.properties.size(); ++k) {
          const PlyProperty& p = el.properties[k];
          if (p.is_list) {
            const double n = read_binary_scalar(in.take(ply_type_size(p.count_type)), p.count_type);
            if (n < 0) throw Error(ErrorKind::Parse, "negative list length");
            in.take(static_cast<std::size_t>(n) * ply_type_size(p.type));
          } else {
            row[k] = read_binary_scalar(in.take(ply_type_size(p.type)), p.type);
          }
        }
        if (is_vertex) {
          cloud.points.emplace_back(row[lay.x], row[lay.y], row[lay.z]);
          if (colored) {
            cloud.colors.push_back(Rgb{static_cast<std::uint8_t>(row[lay.r]),
                                       static_cast<std::uint8_t>(row[lay.g]),
                                       static_cast<std::uint8_t>(row[lay.b])});
          }
        }
      }
      if (is_vertex) break;  // trailing elements are not needed
    }
  } else {
    AsciiReader in(body);
    for (const PlyElement& el : header.elements) {
      const bool is_vertex = &el == &vertex;
      if (el.properties.empty()) continue;
      if (is_vertex) {
        const std::size_t plausible = body.size() / 2 + 1;
        cloud.points.reserve(std::min(el.count, plausible));
      }
      std::vector<double> row(el.properties.size());
      for (std::size_t i = 0; i < el.count; ++i) {
        for (std::size_t k = 0; k < el.properties.size(); ++k) {
          const PlyProperty& p = el.properties[k];
          if (p.is_list) {
            const std::size_t n = parse_count(in.next());
            for (std::size_t m = 0; m < n; ++m) in.next();
          } else {
            row[k] = in.next_number();
          }
        }
        if (is_vertex) {
          cloud.points.emplace_back(row[lay.x], row[lay.y], row[lay.z]);
          if (colored) {
            Rgb c;
            std::uint8_t* ch[3] = {&c.r, &c.g, &c.b};
            const int idx[3] = {lay.r, lay.g, lay.b};
            for (int m = 0; m < 3; ++m) {
              const double v = row[idx[m]];
              if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v)) {
                throw Error(ErrorKind::Parse, "color value out of uchar range");
              }
              *ch[m] = static_cast<std::uint8_t>(v);
            }
            cloud.colors.push_back(c);
          }
        }
      }
      if (is_vertex) break;
    }
  }
  for (const auto& p : cloud.points) {
    if (!p.allFinite()) throw Error(ErrorKind::Parse, "non-finite vertex coordinate");
  }
  return cloud;
}

std::string write_ply(const PointCloud& cloud, PlyFormat format, PlyScalar scalar) {
  cloud.validate();
  const char* type = scalar == PlyScalar::Float64 ? "double" : "float";
  std::string out = "ply\n";
  out += format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
  if (!cloud.frame_id.empty()) out += "comment frame " + cloud.frame_id + "\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += std::string("property ") + type + " x\n";
  out += std::string("property ") + type + " y\n";
  out += std::string("property ") + type + " z\n";
  if (cloud.has_colors()) {
    out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  }
  out += "end_header\n";

  if (format == PlyFormat::BinaryLittleEndian) {
    const std::size_t stride =
        (scalar == PlyScalar::Float64 ? 24 : 12) + (cloud.has_colors() ? 3 : 0);
    out.reserve(out.size() + stride * cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.points[i];
      for (int k = 0; k < 3; ++k) {
        if (scalar == PlyScalar::Float64) {
          const double v = p[k];
          out.append(reinterpret_cast<const char*>(&v), sizeof v);
        } else {
          const float v = static_cast<float>(p[k]);
          out.append(reinterpret_cast<const char*>(&v), sizeof v);
        }
      }
      if (cloud.has_colors()) {
        const Rgb& c = cloud.colors[i];
        out.push_back(static_cast<char>(c.r));
        out.push_back(static_cast<char>(c.g));
        out.push_back(static_cast<char>(c.b));
      }
    }
  } else {
    char buf[64];
    const int digits = scalar == PlyScalar::Float64 ? 17 : 9;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.points[i];
      for (int k = 0; k < 3; ++k) {
        const double v = scalar == PlyScalar::Float64 ? p[k] : static_cast<float>(p[k]);
        auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, digits);
        if (k) out += ' ';
        out.append(buf, res.ptr);
      }
      if (cloud.has_colors()) {
        const Rgb& c = cloud.colors[i];
        out += ' ' + std::to_string(c.r) + ' ' + std::to_string(c.g) + ' ' + std::to_string(c.b);
      }
      out += '\n';
    }
  }
  return out;
}

// KeyValueFile -------------------------------------------------------------------

KeyValueFile KeyValueFile::parse(std::string_view text) {
  KeyValueFile kv;
  for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') return;
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) {
      throw Error(ErrorKind::Parse, "expected 'key: value'", line_no);
    }
    const std::string key(trim(line.substr(0, colon)));
    if (kv.contains(key)) throw Error(ErrorKind::Parse, "duplicate key '" + key + "'", line_no);
    kv.entries_.emplace_back(key, std::string(trim(line.substr(colon + 1))));
  });
  return kv;
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void KeyValueFile::set(const std::string& key, double value) { set(key, format_double(value)); }
void KeyValueFile::set(const std::string& key, long long value) { set(key, std::to_string(value)); }

bool KeyValueFile::contains(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == key; });
}

const std::string& KeyValueFile::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw Error(ErrorKind::NotFound, "missing key '" + key + "'");
}

double KeyValueFile::get_double(const std::string& key) const {
  try {
    return parse_double(get(key));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NotFound) throw;
    throw Error(ErrorKind::Parse, "key '" + key + "': " + e.what());
  }
}

long long KeyValueFile::get_int(const std::string& key) const {
  const std::string& s = get(key);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::Parse, "key '" + key + "': not an integer: '" + s + "'");
  }
  return v;
}

std::string KeyValueFile::str() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + ": " + v + "\n";
  return out;
}

}  // namespace sapling
