// Command-line front end. Data goes to stdout, errors to stderr as single
// `error ...` lines; exit 0 on success, 1 on data errors, 2 on usage errors.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "sapling/error.hpp"
#include "sapling/georef.hpp"
#include "sapling/ingest.hpp"
#include "sapling/leafwood.hpp"
#include "sapling/pipeline.hpp"
#include "sapling/registry.hpp"
#include "sapling/sfmalign.hpp"
#include "sapling/skeleton.hpp"
#include "sapling/synthgen.hpp"
#include "sapling/traits.hpp"

namespace fs = std::filesystem;
using namespace sapling;

namespace {

constexpr int kDataError = 1;
constexpr int kUsageError = 2;

// Messages are quoted so the line splits cleanly on spaces.
std::string quoted(const std::string& text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

void report_error(const Error& e, const std::string& context = {}) {
  std::cerr << "error kind=" << to_string(e.kind());
  if (e.line()) std::cerr << " line=" << *e.line();
  if (!context.empty()) std::cerr << ' ' << context;
  std::cerr << " message=" << quoted(e.what()) << '\n';
}

int exit_code(const Error& e) { return e.kind() == ErrorKind::Config ? kUsageError : kDataError; }

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") std::cout << text;
  else write_file(out, text);
}

PointCloud load_cloud(const std::string& path, const std::string& frame = {}) {
  return parse_ply(read_file(path), frame);
}

SkeletonizeParams load_params(const std::string& path, bool full) {
  SkeletonizeParams params = full ? full_resolution_params() : SkeletonizeParams{};
  if (!path.empty()) {
    for (const auto& [key, value] : parse_flat_config(read_file(path))) apply_override(params, key, value);
  }
  return params;
}

// subcommands ------------------------------------------------------------------------

struct GeorefArgs {
  std::string traj, gnss, out;
  std::optional<std::size_t> u;
  double max_gap = 0.25;
  double time_offset = 0.0;
};

int run_georef(const GeorefArgs& a) {
  const Trajectory traj = parse_trajectory(read_file(a.traj));
  GnssOptions gnss_options;
  gnss_options.time_offset = a.time_offset;
  const GeoTrack track = parse_gnss(read_file(a.gnss), gnss_options);
  AssociationOptions options;
  options.first_u = a.u;
  options.max_gap = a.max_gap;
  emit(write_earth_transform(georeference(traj, track, options)), a.out);
  return 0;
}

struct RegisterArgs {
  std::string manifest, slam, out_dir;
  double max_gap = 0.05;
};

int run_register(const RegisterArgs& a) {
  const Trajectory slam = parse_trajectory(read_file(a.slam));
  const fs::path base = fs::path(a.manifest).parent_path();
  const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  RegistrationOptions options;
  options.max_gap = a.max_gap;

  int status = 0;
  std::cout << "sapling_id session_id scale rms_m pairs coplanar_warning\n";
  for (const ManifestRow& row : parse_manifest(read_file(a.manifest))) {
    try {
      const std::string frame = "F_" + row.sapling_id;
      const Trajectory sfm = parse_trajectory(read_file(resolve(row.sfm_traj_path)), frame);
      const auto sub = extract_subtrajectory(slam, row.t_start, row.t_end, row.sapling_id, row.session_id);
      const RegistrationResult r = register_sfm(sfm, sub, options);
      const PointCloud cloud = transform_cloud(load_cloud(resolve(row.cloud_path), frame), r.transform,
                                               slam.frame_id());
      const fs::path dir = fs::path(a.out_dir) / row.sapling_id / row.session_id;
      write_file(dir / "aligned.tum", write_trajectory(r.aligned));
      write_file(dir / "transform.txt",
                 write_similarity_transform(r.transform, r.rms_residual, r.pair_count, r.coplanar_warning));
      write_file(dir / "cloud.ply", write_ply(cloud, PlyFormat::BinaryLittleEndian));
      std::cout << row.sapling_id << ' ' << row.session_id << ' ' << format_double(r.transform.scale) << ' '
                << format_double(r.rms_residual) << ' ' << r.pair_count << ' ' << r.coplanar_warning << '\n';
    } catch (const Error& e) {
      report_error(e, "sapling=" + row.sapling_id + " session=" + row.session_id);
      status = kDataError;
    }
  }
  return status;
}

struct SkeletonizeArgs {
  std::string cloud, out, params;
  std::optional<double> voxel;
  bool full = false;
  bool no_prune = false;
};

int run_skeletonize(const SkeletonizeArgs& a) {
  SkeletonizeParams params = load_params(a.params, a.full);
  if (a.voxel) params.voxel = *a.voxel;
  if (a.no_prune) params.prune = false;
  const SkeletonizeResult r = skeletonize(load_cloud(a.cloud), params);
  write_file(a.out, write_skeleton(r.skeleton));
  std::cout << r.skeleton.vertex_count() << ' ' << r.skeleton.edges.size() << ' '
            << count_bifurcations(r.skeleton) << ' ' << r.iterations << ' ' << r.converged << '\n';
  return 0;
}

struct SegmentArgs {
  std::string cloud, skel, out_leaf, out_wood;
  std::size_t hops = LeafWoodParams{}.terminal_hops;
  std::optional<double> radius;
  bool keep_root = false;
};

int run_segment(const SegmentArgs& a) {
  LeafWoodParams params;
  params.terminal_hops = a.hops;
  params.radius = a.radius;
  params.exclude_root_chain = !a.keep_root;
  const Segmentation seg = segment_leaf_wood(load_cloud(a.cloud), parse_skeleton(read_file(a.skel)), params);
  write_file(a.out_leaf, write_ply(seg.leaf, PlyFormat::BinaryLittleEndian));
  write_file(a.out_wood, write_ply(seg.wood, PlyFormat::BinaryLittleEndian));
  std::cout << seg.leaf.size() << ' ' << seg.wood.size() << ' ' << format_double(leaf_wood_ratio(seg)) << '\n';
  return 0;
}

struct TraitsArgs {
  std::string cloud, skel, leaf, wood, earth, out;
  std::string sapling_id = "sapling";
  std::string session_id = "session";
};

int run_traits(const TraitsArgs& a) {
  Segmentation seg;
  seg.leaf = load_cloud(a.leaf);
  seg.wood = load_cloud(a.wood);
  const TraitReport report =
      compute_traits(load_cloud(a.cloud), parse_skeleton(read_file(a.skel)), seg,
                     parse_earth_transform(read_file(a.earth)), a.sapling_id, a.session_id, HeightParams{});
  write_file(fs::path(a.out) / "report.txt", write_trait_report(report));
  write_file(fs::path(a.out) / "profile.csv", write_profile_csv(report.leaf_profile));
  std::cout << write_trait_report(report);
  return 0;
}

struct RegistryAddArgs {
  std::string root, date, cloud, skel, leaf, wood, report;
};

int run_registry_add(const RegistryAddArgs& a) {
  const fs::path report_dir(a.report);
  const TraitReport report = parse_trait_report(read_file(report_dir / "report.txt"),
                                                read_file(report_dir / "profile.csv"));
  const SaplingRecord record = make_record(report, a.date);
  Registry registry = fs::exists(fs::path(a.root) / "index.csv") ? Registry::load(a.root) : Registry{};
  registry.add(record);

  using names = ArtifactNames;
  const fs::path dir = record_dir(a.root, report.sapling_id, report.session_id);
  const std::pair<const std::string*, std::string> copies[] = {
      {&a.cloud, names::cloud}, {&a.skel, names::skeleton}, {&a.leaf, names::leaf}, {&a.wood, names::wood},
      {nullptr, names::report}, {nullptr, names::profile}};
  for (const auto& [src, name] : copies) {
    const fs::path from = src ? fs::path(*src) : report_dir / name;
    write_file(dir / name, read_file(from));
  }
  registry.save(a.root);
  std::cout << report.sapling_id << ' ' << report.session_id << ' ' << registry.size() << '\n';
  return 0;
}

struct RegistryDiffArgs {
  std::string root, sapling, a, b;
};

int run_registry_diff(const RegistryDiffArgs& a) {
  std::cout << write_change_report(change_report(Registry::load(a.root), a.sapling, a.a, a.b));
  return 0;
}

int run_registry_list(const std::string& root, const std::string& sapling) {
  const Registry registry = Registry::load(root);
  if (sapling.empty()) {
    std::cout << registry.index_csv();
    return 0;
  }
  Registry subset;
  for (const SaplingRecord& r : registry.lookup(sapling)) subset.add(r);
  std::cout << subset.index_csv();
  return 0;
}

struct SynthArgs {
  std::string spec, out;
};

int run_synth_sapling(const SynthArgs& a) {
  const synth::SyntheticSapling s = synth::generate(synth::parse_spec(read_file(a.spec)));
  std::vector<std::size_t> leaf, wood;
  for (std::size_t i = 0; i < s.cloud.size(); ++i) (s.is_leaf[i] ? leaf : wood).push_back(i);
  const fs::path dir(a.out);
  write_file(dir / "cloud.ply", write_ply(s.cloud, PlyFormat::BinaryLittleEndian));
  write_file(dir / "leaf.ply", write_ply(s.cloud.subset(leaf), PlyFormat::BinaryLittleEndian));
  write_file(dir / "wood.ply", write_ply(s.cloud.subset(wood), PlyFormat::BinaryLittleEndian));
  write_file(dir / "skel.txt", write_skeleton(s.skeleton));
  write_file(dir / "report.txt", write_trait_report(s.truth));
  write_file(dir / "profile.csv", write_profile_csv(s.truth.leaf_profile));
  std::cout << s.cloud.size() << ' ' << leaf.size() << ' ' << wood.size() << '\n';
  return 0;
}

int run_synth_plot(const SynthArgs& a) {
  const synth::SyntheticSession session = synth::generate_plot(synth::parse_plot_spec(read_file(a.spec)));
  synth::write_session(session, a.out);
  std::cout << session.slam.size() << ' ' << session.gnss.size() << ' ' << session.manifest.size() << '\n';
  return 0;
}

struct SynthPresetArgs {
  std::string shape = "leafy";
  std::size_t variant = 0;
  std::uint64_t seed = 1;
  double radius = 0.01;
};

int run_synth_preset(const SynthPresetArgs& a) {
  synth::SaplingSpec spec;
  if (a.shape == "cylinder") spec = synth::cylinder_spec(a.seed, a.radius);
  else if (a.shape == "y") spec = synth::y_tree_spec(a.seed);
  else if (a.shape == "broom") spec = synth::broom_spec(a.seed);
  else spec = synth::leafy_spec(a.variant, a.seed);
  std::cout << synth::write_spec(spec);
  return 0;
}

int run_pipeline(const std::string& config_path, std::size_t jobs) {
  const PipelineResult result = pipeline_run(PipelineConfig::load(config_path), jobs);
  std::cout << "sapling_id session_id height_m bifurcations lwr lat lon\n";
  for (const SaplingOutcome& o : result.succeeded) {
    const TraitReport& r = o.report;
    std::cout << r.sapling_id << ' ' << r.session_id << ' ' << format_double(r.height) << ' '
              << r.bifurcations << ' ' << format_double(r.lwr) << ' ' << format_double(r.latitude) << ' '
              << format_double(r.longitude) << '\n';
  }
  for (const SaplingFailure& f : result.failed) {
    std::cerr << "error kind=" << f.kind << " sapling=" << f.sapling_id << " session=" << f.session_id
              << " stage=" << f.stage << " message=" << quoted(f.message) << '\n';
  }
  return result.failed.empty() ? 0 : kDataError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sapling trait pipeline: georeferencing, registration, skeletons, traits, registry"};
  app.require_subcommand(1);
  int status = 0;

  auto* georef = app.add_subcommand("georef", "Fit the map-to-earth transform");
  georef->require_subcommand(1);
  GeorefArgs ga;
  auto* fit = georef->add_subcommand("fit", "Fit from a SLAM trajectory and a GNSS track");
  fit->add_option("--traj", ga.traj, "SLAM trajectory (TUM)")->required()->check(CLI::ExistingFile);
  fit->add_option("--gnss", ga.gnss, "GNSS CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--u", ga.u, "Use only the first u fixes");
  fit->add_option("--max-gap", ga.max_gap, "Max pose/fix time gap (s)")->capture_default_str();
  fit->add_option("--time-offset", ga.time_offset, "Added to GNSS timestamps (s)")->capture_default_str();
  fit->add_option("--out", ga.out, "Output file (stdout when omitted)");
  fit->callback([&] { status = run_georef(ga); });

  RegisterArgs ra;
  auto* reg = app.add_subcommand("register", "Align per-sapling SfM reconstructions to the map");
  reg->add_option("--manifest", ra.manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  reg->add_option("--slam", ra.slam, "SLAM trajectory (TUM)")->required()->check(CLI::ExistingFile);
  reg->add_option("--out-dir", ra.out_dir, "Output directory")->required();
  reg->add_option("--max-gap", ra.max_gap, "Max SfM/SLAM time gap (s)")->capture_default_str();
  reg->callback([&] { status = run_register(ra); });

  SkeletonizeArgs ka;
  auto* skel = app.add_subcommand("skeletonize", "Extract a curve skeleton from a point cloud");
  skel->add_option("--cloud", ka.cloud, "Input PLY")->required()->check(CLI::ExistingFile);
  skel->add_option("--voxel", ka.voxel, "Voxel size (m); 0 disables downsampling");
  skel->add_option("--out", ka.out, "Output skeleton file")->required();
  skel->add_option("--params", ka.params, "key=value parameter file")->check(CLI::ExistingFile);
  skel->add_flag("--full", ka.full, "Full-resolution settings used for segmentation");
  skel->add_flag("--no-prune", ka.no_prune, "Keep short branches");
  skel->callback([&] { status = run_skeletonize(ka); });

  SegmentArgs sa;
  auto* seg = app.add_subcommand("segment", "Split a cloud into leaf and wood; prints N_l N_w LWR");
  seg->add_option("--cloud", sa.cloud, "Input PLY")->required()->check(CLI::ExistingFile);
  seg->add_option("--skel", sa.skel, "Full-resolution skeleton")->required()->check(CLI::ExistingFile);
  seg->add_option("--out-leaf", sa.out_leaf, "Leaf PLY")->required();
  seg->add_option("--out-wood", sa.out_wood, "Wood PLY")->required();
  seg->add_option("--hops", sa.hops, "Graph dilation of the terminal set")->capture_default_str();
  seg->add_option("--radius", sa.radius, "Leaf iff within this distance of a terminal vertex");
  seg->add_flag("--keep-root", sa.keep_root, "Allow a degree-1 root to be terminal");
  seg->callback([&] { status = run_segment(sa); });

  TraitsArgs ta;
  auto* traits = app.add_subcommand("traits", "Compute height, bifurcations, LWR, leaf profile and location");
  traits->add_option("--cloud", ta.cloud, "Map-frame PLY")->required()->check(CLI::ExistingFile);
  traits->add_option("--skel", ta.skel, "Pruned skeleton")->required()->check(CLI::ExistingFile);
  traits->add_option("--leaf", ta.leaf, "Leaf PLY")->required()->check(CLI::ExistingFile);
  traits->add_option("--wood", ta.wood, "Wood PLY")->required()->check(CLI::ExistingFile);
  traits->add_option("--earth", ta.earth, "Earth transform file")->required()->check(CLI::ExistingFile);
  traits->add_option("--out", ta.out, "Output directory")->required();
  traits->add_option("--sapling", ta.sapling_id, "Sapling id")->capture_default_str();
  traits->add_option("--session", ta.session_id, "Session id")->capture_default_str();
  traits->callback([&] { status = run_traits(ta); });

  auto* registry = app.add_subcommand("registry", "Longitudinal record store");
  registry->require_subcommand(1);
  RegistryAddArgs raa;
  auto* add = registry->add_subcommand("add", "Add one record and its artifacts");
  add->add_option("--root", raa.root, "Registry root")->required();
  add->add_option("--date", raa.date, "Capture date YYYY-MM-DD")->required();
  add->add_option("--cloud", raa.cloud, "Map-frame PLY")->required()->check(CLI::ExistingFile);
  add->add_option("--skel", raa.skel, "Skeleton file")->required()->check(CLI::ExistingFile);
  add->add_option("--leaf", raa.leaf, "Leaf PLY")->required()->check(CLI::ExistingFile);
  add->add_option("--wood", raa.wood, "Wood PLY")->required()->check(CLI::ExistingFile);
  add->add_option("--report", raa.report, "Directory holding report.txt and profile.csv")
      ->required()
      ->check(CLI::ExistingDirectory);
  add->callback([&] { status = run_registry_add(raa); });
  RegistryDiffArgs rda;
  auto* diff = registry->add_subcommand("diff", "Change report between two sessions (b - a)");
  diff->add_option("--root", rda.root, "Registry root")->required()->check(CLI::ExistingDirectory);
  diff->add_option("--sapling", rda.sapling, "Sapling id")->required();
  diff->add_option("--a", rda.a, "Earlier session id")->required();
  diff->add_option("--b", rda.b, "Later session id")->required();
  diff->callback([&] { status = run_registry_diff(rda); });
  std::string list_root, list_sapling;
  auto* list = registry->add_subcommand("list", "Print the index, optionally for one sapling");
  list->add_option("--root", list_root, "Registry root")->required()->check(CLI::ExistingDirectory);
  list->add_option("--sapling", list_sapling, "Sapling id");
  list->callback([&] { status = run_registry_list(list_root, list_sapling); });

  auto* synth_cmd = app.add_subcommand("synth", "Synthetic saplings and plots");
  synth_cmd->require_subcommand(1);
  SynthArgs sy_sap, sy_plot;
  auto* sy1 = synth_cmd->add_subcommand("sapling", "Generate one labelled sapling");
  sy1->add_option("--spec", sy_sap.spec, "Sapling spec file")->required()->check(CLI::ExistingFile);
  sy1->add_option("--out", sy_sap.out, "Output directory")->required();
  sy1->callback([&] { status = run_synth_sapling(sy_sap); });
  auto* sy2 = synth_cmd->add_subcommand("plot", "Generate a capture session");
  sy2->add_option("--spec", sy_plot.spec, "Plot spec file")->required()->check(CLI::ExistingFile);
  sy2->add_option("--out", sy_plot.out, "Output directory")->required();
  sy2->callback([&] { status = run_synth_plot(sy_plot); });
  SynthPresetArgs pa;
  auto* sy3 = synth_cmd->add_subcommand("preset", "Print a built-in sapling spec");
  sy3->add_option("--shape", pa.shape, "cylinder, y, broom or leafy")
      ->check(CLI::IsMember({"cylinder", "y", "broom", "leafy"}))
      ->capture_default_str();
  sy3->add_option("--variant", pa.variant, "Leafy architecture 0-9")->check(CLI::Range(0, 9))->capture_default_str();
  sy3->add_option("--seed", pa.seed, "Seed")->capture_default_str();
  sy3->add_option("--radius", pa.radius, "Cylinder radius (m)")->capture_default_str();
  sy3->callback([&] { status = run_synth_preset(pa); });

  auto* pipeline = app.add_subcommand("pipeline", "End-to-end processing");
  pipeline->require_subcommand(1);
  std::string config_path;
  std::size_t jobs = 1;
  auto* run = pipeline->add_subcommand("run", "Run every manifest row and update the registry");
  run->add_option("--config", config_path, "key = value config file")->required()->check(CLI::ExistingFile);
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  run->callback([&] { status = run_pipeline(config_path, jobs); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error kind=usage message=" << quoted(e.what()) << '\n';
    return kUsageError;
  } catch (const Error& e) {
    report_error(e);
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error kind=internal message=" << quoted(e.what()) << '\n';
    return kDataError;
  }
  return status;
}
