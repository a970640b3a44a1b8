#include "sapling/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <thread>

#include "sapling/error.hpp"
#include "sapling/ingest.hpp"

namespace sapling {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_flat_config(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Config, "expected 'key = value'", line_no);
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw Error(ErrorKind::Config, "empty key", line_no);
    for (const auto& [k, v] : out) {
      if (k == key) throw Error(ErrorKind::Config, "duplicate key '" + k + "'", line_no);
    }
    out.emplace_back(key, value);
  }
  return out;
}

namespace {

double config_number(const std::string& key, const std::string& value) {
  try {
    return parse_double(value);
  } catch (const Error&) {
    throw Error(ErrorKind::Config, "'" + key + "' expects a number, got '" + value + "'");
  }
}

std::size_t config_count(const std::string& key, const std::string& value) {
  const double v = config_number(key, value);
  if (v < 0.0 || v != std::floor(v)) throw Error(ErrorKind::Config, "'" + key + "' expects a count");
  return static_cast<std::size_t>(v);
}

bool config_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw Error(ErrorKind::Config, "'" + key + "' expects true/false");
}

fs::path resolve(const fs::path& base, const std::string& value) {
  const fs::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

PipelineConfig PipelineConfig::parse(std::string_view text, const fs::path& base_dir) {
  PipelineConfig c;
  for (const auto& [key, value] : parse_flat_config(text)) {
    if (key == "slam") c.slam = resolve(base_dir, value);
    else if (key == "gnss") c.gnss = resolve(base_dir, value);
    else if (key == "manifest") c.manifest = resolve(base_dir, value);
    else if (key == "output") c.output = resolve(base_dir, value);
    else if (key == "date") c.date = value;
    else if (key == "gnss.time_offset") c.gnss_options.time_offset = config_number(key, value);
    else if (key == "georef.u") c.association.first_u = config_count(key, value);
    else if (key == "georef.max_gap") c.association.max_gap = config_number(key, value);
    else if (key == "register.max_gap") c.registration.max_gap = config_number(key, value);
    else if (key == "register.coplanar_ratio") c.registration.coplanar_ratio = config_number(key, value);
    else if (key.rfind("skeleton.", 0) == 0) apply_override(c.topology_skeleton, key.substr(9), value);
    else if (key.rfind("segmentation.", 0) == 0) apply_override(c.segmentation_skeleton, key.substr(13), value);
    else if (key == "leafwood.terminal_hops") c.leafwood.terminal_hops = config_count(key, value);
    else if (key == "leafwood.exclude_root_chain") c.leafwood.exclude_root_chain = config_bool(key, value);
    else if (key == "leafwood.radius") c.leafwood.radius = config_number(key, value);
    else if (key == "traits.k_neighbors") c.height.k_neighbors = config_count(key, value);
    else if (key == "traits.std_ratio") c.height.std_ratio = config_number(key, value);
    else if (key == "traits.percentiles") c.height.use_percentiles = config_bool(key, value);
    else throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  return parse(read_file(path), path.parent_path());
}

void PipelineConfig::validate() const {
  const std::pair<const char*, const fs::path*> inputs[] = {
      {"slam", &slam}, {"gnss", &gnss}, {"manifest", &manifest}};
  for (const auto& [name, p] : inputs) {
    if (p->empty()) throw Error(ErrorKind::Config, std::string("missing required key '") + name + "'");
    if (!fs::exists(*p)) throw Error(ErrorKind::NotFound, std::string(name) + " file not found: " + p->string());
  }
  if (output.empty()) throw Error(ErrorKind::Config, "missing required key 'output'");
  if (date.empty()) throw Error(ErrorKind::Config, "missing required key 'date'");
  try {
    validate_date(date);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  topology_skeleton.contraction.validate();
  topology_skeleton.topology.validate();
  segmentation_skeleton.contraction.validate();
  segmentation_skeleton.topology.validate();
  if (leafwood.radius && !(*leafwood.radius > 0.0)) {
    throw Error(ErrorKind::Config, "leafwood.radius must be positive");
  }
}

namespace {

struct StageError {
  std::string stage;
  std::string kind;
  std::string message;
};

SaplingOutcome process_row(const PipelineConfig& config, const Trajectory& slam, const EarthTransform& earth,
                           const ManifestRow& row, std::string& stage) {
  const fs::path base = config.manifest.parent_path();
  const std::string frame = "F_" + row.sapling_id;

  stage = "register";
  const Trajectory sfm = parse_trajectory(read_file(resolve(base, row.sfm_traj_path)), frame);
  const Subtrajectory sub = extract_subtrajectory(slam, row.t_start, row.t_end, row.sapling_id, row.session_id);
  RegistrationResult registration = register_sfm(sfm, sub, config.registration);
  const PointCloud sfm_cloud = parse_ply(read_file(resolve(base, row.cloud_path)), frame);
  const PointCloud cloud = transform_cloud(sfm_cloud, registration.transform, slam.frame_id());

  stage = "skeletonize";
  const SkeletonizeResult topo = skeletonize(cloud, config.topology_skeleton);

  stage = "skeletonize_full";
  const SkeletonizeResult full = skeletonize(cloud, config.segmentation_skeleton);

  stage = "segment";
  const Segmentation seg = segment_leaf_wood(cloud, full.skeleton, config.leafwood);

  stage = "traits";
  TraitReport report = compute_traits(cloud, topo.skeleton, seg, earth, row.sapling_id, row.session_id, config.height);

  stage = "store";
  write_artifacts(config.output, report, cloud, topo.skeleton, seg);
  const fs::path dir = record_dir(config.output, row.sapling_id, row.session_id);
  write_file(dir / "skel_full.txt", write_skeleton(full.skeleton));
  write_file(dir / "transform.txt",
             write_similarity_transform(registration.transform, registration.rms_residual,
                                        registration.pair_count, registration.coplanar_warning));
  write_file(dir / "aligned.tum", write_trajectory(registration.aligned));
  write_file(dir / "earth.txt", write_earth_transform(earth));
  return SaplingOutcome{std::move(report), std::move(registration), topo.skeleton.vertex_count(),
                        full.skeleton.vertex_count()};
}

}  // namespace

PipelineResult pipeline_run(const PipelineConfig& config, std::size_t jobs) {
  config.validate();
  PipelineResult result;

  const Trajectory slam = parse_trajectory(read_file(config.slam), "M1");
  const GeoTrack track = parse_gnss(read_file(config.gnss), config.gnss_options);
  result.earth = georeference(slam, track, config.association);
  const std::vector<ManifestRow> rows = parse_manifest(read_file(config.manifest));

  if (fs::exists(config.output / "index.csv")) result.registry = Registry::load(config.output);

  // Each worker owns whole saplings; results land in per-row slots.
  std::vector<std::optional<SaplingOutcome>> outcomes(rows.size());
  std::vector<std::optional<StageError>> errors(rows.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      std::string stage = "start";
      try {
        if (result.registry.contains(rows[i].sapling_id, rows[i].session_id)) {
          stage = "registry";
          throw Error(ErrorKind::Duplicate, "record (" + rows[i].sapling_id + ", " + rows[i].session_id +
                                                ") already exists in the registry");
        }
        outcomes[i] = process_row(config, slam, result.earth, rows[i], stage);
      } catch (const Error& e) {
        errors[i] = StageError{stage, to_string(e.kind()), e.what()};
      } catch (const std::exception& e) {
        errors[i] = StageError{stage, "internal", e.what()};
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(rows.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  // Single writer: registry updates happen here, in manifest order.
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (errors[i]) {
      result.failed.push_back({rows[i].sapling_id, rows[i].session_id, errors[i]->stage, errors[i]->kind,
                               errors[i]->message});
      continue;
    }
    try {
      result.registry.add(make_record(outcomes[i]->report, config.date));
      result.succeeded.push_back(std::move(*outcomes[i]));
    } catch (const Error& e) {
      result.failed.push_back({rows[i].sapling_id, rows[i].session_id, "registry", to_string(e.kind()), e.what()});
    }
  }
  result.registry.save(config.output);
  return result;
}

}  // namespace sapling
