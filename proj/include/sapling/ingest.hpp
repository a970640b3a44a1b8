#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sapling/model.hpp"

namespace sapling {

// TUM trajectories -------------------------------------------------------------

/// Parses `timestamp tx ty tz qx qy qz qw` lines; `#` comment lines and blank
/// lines are skipped. Quaternions within 1e-3 of unit norm are renormalised.
Trajectory parse_trajectory(std::string_view text, const std::string& frame_id = "M1");
std::string write_trajectory(const Trajectory& trajectory);

// GNSS CSV ---------------------------------------------------------------------

struct GnssOptions {
  std::optional<GeoFix> anchor;  // defaults to the first fix
  double time_offset = 0.0;      // seconds added to every GNSS timestamp
};

/// CSV with a header naming `timestamp`, `lat`, `lon` and optionally `alt`.
GeoTrack parse_gnss(std::string_view text, const GnssOptions& options = {});
std::string write_gnss(const GeoTrack& track);

// PLY --------------------------------------------------------------------------

enum class PlyFormat { Ascii, BinaryLittleEndian };
enum class PlyScalar { Float32, Float64 };

enum class PlyType : unsigned char { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float32;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;  // only meaningful for lists
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  PlyFormat format = PlyFormat::Ascii;
  std::vector<PlyElement> elements;
  std::size_t body_offset = 0;  // byte offset of the first payload byte

  const PlyElement* vertex() const;
};

PlyHeader parse_ply_header(std::string_view bytes);
PointCloud parse_ply(std::string_view bytes, const std::string& frame_id = {});

/// Binary output is bit-exact for Float64; ASCII prints 17 (Float64) or
/// 9 (Float32) significant digits.
std::string write_ply(const PointCloud& cloud, PlyFormat format,
                      PlyScalar scalar = PlyScalar::Float64);

// key:value text -----------------------------------------------------------------

/// Ordered `key: value` lines. Blank lines and `#` comments are ignored.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::string_view text);

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);

  bool contains(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string str() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// helpers --------------------------------------------------------------------

/// Shortest round-trippable decimal representation.
std::string format_double(double value);
/// Strict full-string parse of a finite number; throws Parse otherwise.
double parse_double(std::string_view text, std::optional<std::size_t> line = std::nullopt);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Splits on `sep`, trimming ASCII whitespace from each field.
std::vector<std::string> split_fields(std::string_view line, char sep);

}  // namespace sapling
