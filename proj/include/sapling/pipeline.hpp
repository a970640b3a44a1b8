#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sapling/georef.hpp"
#include "sapling/ingest.hpp"
#include "sapling/leafwood.hpp"
#include "sapling/registry.hpp"
#include "sapling/sfmalign.hpp"
#include "sapling/skeleton.hpp"
#include "sapling/traits.hpp"

namespace sapling {

/// `key = value` lines, `#` comments. Duplicate keys throw Config.
std::vector<std::pair<std::string, std::string>> parse_flat_config(std::string_view text);

struct PipelineConfig {
  std::filesystem::path slam;
  std::filesystem::path gnss;
  std::filesystem::path manifest;
  std::filesystem::path output;  // registry root
  std::string date;              // capture date recorded for every sapling, YYYY-MM-DD

  GnssOptions gnss_options;
  AssociationOptions association;
  RegistrationOptions registration;
  SkeletonizeParams topology_skeleton;                          // downsampled, pruned
  SkeletonizeParams segmentation_skeleton = full_resolution_params();
  LeafWoodParams leafwood;
  HeightParams height;

  /// Relative paths in the file resolve against `base_dir`. Unknown keys and
  /// missing input files throw Config / NotFound.
  static PipelineConfig parse(std::string_view text, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
  void validate() const;
};

struct SaplingFailure {
  std::string sapling_id;
  std::string session_id;
  std::string stage;
  std::string kind;
  std::string message;
};

struct SaplingOutcome {
  TraitReport report;
  RegistrationResult registration;
  std::size_t topology_vertices = 0;
  std::size_t segmentation_vertices = 0;
};

struct PipelineResult {
  EarthTransform earth;
  Registry registry;  // existing records under `output` plus this run's
  std::vector<SaplingOutcome> succeeded;
  std::vector<SaplingFailure> failed;
};

/// Georeferences the SLAM map, then processes every manifest row
/// independently on `jobs` worker threads; a failing sapling is recorded
/// and skipped. Artifacts go to <output>/<sapling>/<session>/ and the
/// registry index is rewritten once at the end.
PipelineResult pipeline_run(const PipelineConfig& config, std::size_t jobs = 1);

}  // namespace sapling
