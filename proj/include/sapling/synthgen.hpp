#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sapling/georef.hpp"
#include "sapling/model.hpp"
#include "sapling/sfmalign.hpp"
#include "sapling/traits.hpp"

namespace sapling::synth {

struct BranchSpec {
  double attach_height = 0.0;  // metres along the stem
  double azimuth = 0.0;        // radians, from +x towards +y
  double elevation = 0.0;      // radians above horizontal
  double length = 0.0;
  double radius = 0.0;
};

/// Parametric sapling: a vertical tapered stem, straight cylindrical
/// branches rooted on the stem axis, and flattened ellipsoidal leaves
/// clustered at every tip (branch tips and the stem apex).
struct SaplingSpec {
  std::uint64_t seed = 1;
  double stem_height = 0.9;
  double stem_radius = 0.01;
  double stem_top_radius = 0.006;
  std::vector<BranchSpec> branches;
  std::size_t leaves_per_tip = 0;
  double leaf_radius = 0.03;
  double density = 60000.0;  // surface points per square metre
  double noise = 0.0005;     // metres, isotropic Gaussian
  bool mid_branch_leaves = false;
  // Leaf arrangement. 0 draws it from `seed` along with the sampling; any
  // other value fixes each tip's cluster independently of `seed`, so two
  // captures of one plant share their leaves.
  std::uint64_t leaf_seed = 0;

  void validate() const;
};

struct SyntheticSapling {
  PointCloud cloud;                  // frame "local", stem base at the origin
  std::vector<std::uint8_t> is_leaf; // 1 = leaf, 0 = wood, per point
  SkeletonGraph skeleton;            // stem/branch topology, root at the base
  TraitReport truth;
};

SyntheticSapling generate(const SaplingSpec& spec);

/// Canonical shapes used by the tests and acceptance suite.
SaplingSpec cylinder_spec(std::uint64_t seed, double radius, double length = 0.5,
                          std::size_t points = 20000);
SaplingSpec y_tree_spec(std::uint64_t seed);
SaplingSpec broom_spec(std::uint64_t seed);
/// Leafy sapling family; `variant` in [0, 10) selects the architecture.
SaplingSpec leafy_spec(std::size_t variant, std::uint64_t seed);

/// Same architecture with every leaf removed.
SaplingSpec defoliated(const SaplingSpec& spec);
/// Same architecture without its highest branch.
SaplingSpec without_top_branch(const SaplingSpec& spec);

std::string write_spec(const SaplingSpec& spec);
SaplingSpec parse_spec(std::string_view text);

// plots ----------------------------------------------------------------------------

enum class Variant { Unchanged, Defoliated, Pruned };

struct PlotSpec {
  std::uint64_t seed = 7;         // sampling noise; vary per session
  std::uint64_t layout_seed = 11; // positions, architectures, planted transforms
  std::size_t n_saplings = 5;
  GeoFix anchor{0.0, 51.775, -1.339, 100.0, true};
  double gnss_noise = 1.0;      // metres, per horizontal axis
  double sfm_noise = 0.0;       // metres, SfM camera-position noise in the map frame
  double earth_yaw = 0.6;       // planted map -> ENU rotation (radians)
  Vec2 earth_shift{35.0, -20.0};
  double earth_up = 3.5;
  std::string session_id = "s1";
  double start_time = 1000.0;
  std::vector<Variant> variants;  // per sapling; Unchanged when absent
  double point_density = 0.0;     // overrides leafy_spec density when > 0
};

struct PlantedSapling {
  std::string sapling_id;
  Vec3 map_position;               // stem base in M1
  SimilarityTransform sfm_to_map;  // planted F -> M1
  SaplingSpec spec;
  SyntheticSapling sapling;        // in sapling-local coordinates
  GeoPosition geo;                 // true location of the stem base
};

struct SyntheticSession {
  Trajectory slam;   // M1, lawnmower traverse with a dome loop per sapling
  GeoTrack gnss;
  EarthTransform planted_earth;
  std::vector<ManifestRow> manifest;       // paths relative to the session directory
  std::vector<Trajectory> sfm;             // per sapling, frame F_<id>
  std::vector<PointCloud> sfm_clouds;      // per sapling, in its SfM frame
  std::vector<PlantedSapling> saplings;
};

std::string write_plot_spec(const PlotSpec& spec);
/// Keys as written by write_plot_spec; absent keys keep their defaults.
/// `variants` is a comma list of unchanged/defoliated/pruned.
PlotSpec parse_plot_spec(std::string_view text);

SyntheticSession generate_plot(const PlotSpec& spec);

/// Writes slam.tum, gnss.csv, manifest.csv, sfm/<id>.tum, clouds/<id>.ply
/// and truth.txt into `dir`.
void write_session(const SyntheticSession& session, const std::filesystem::path& dir);

}  // namespace sapling::synth
