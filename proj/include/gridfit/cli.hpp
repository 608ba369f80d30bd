#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridfit/config.hpp"
#include "gridfit/eikonal1d.hpp"
#include "gridfit/errors.hpp"
#include "gridfit/extract.hpp"
#include "gridfit/ingest.hpp"
#include "gridfit/metrics.hpp"
#include "gridfit/optim.hpp"

namespace gridfit::cli {

struct ReconstructOptions {
  std::string config_path;        // empty = defaults
  std::string input_path;
  std::string out_dir;
  std::string mesh_format = "obj";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> margin;
  std::optional<double> subsample_fraction;
  // Direct schedule/loss overrides for scripted runs and sweeps.
  std::optional<std::string> stages_spec;  // e.g. "32:2x200,64:2x200" res:epochs x iters
  std::optional<double> prune_threshold;
  std::optional<double> epsilon;
  std::optional<double> lambda_c;
  std::optional<double> lambda_n;
  std::optional<double> lambda_v;
};

inline RunConfig load_or_default_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return RunConfig::load(path);
}

inline std::vector<Stage> parse_stages_spec(const std::string& spec, const Stage& proto) {
  std::vector<Stage> stages;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    Stage s = proto;
    int res = 0, epochs = 0, iters = 0;
    if (std::sscanf(item.c_str(), "%d:%dx%d", &res, &epochs, &iters) != 3)
      throw ConfigError("bad stage spec '" + item + "' (want res:epochsxiters)");
    s.res = res;
    s.epochs = epochs;
    s.iterations_per_epoch = iters;
    stages.push_back(s);
  }
  if (stages.empty()) throw ConfigError("empty stage spec");
  return stages;
}

inline RunConfig resolve_config(const ReconstructOptions& opt) {
  RunConfig cfg = load_or_default_config(opt.config_path);
  if (opt.seed) {
    cfg.seed = *opt.seed;
    cfg.schedule.seed = *opt.seed;
  } else {
    cfg.schedule.seed = cfg.seed;
  }
  if (opt.threads) cfg.threads = *opt.threads;
  if (opt.margin) cfg.ingest.margin = *opt.margin;
  if (opt.subsample_fraction) cfg.ingest.subsample_fraction = *opt.subsample_fraction;
  if (opt.stages_spec)
    cfg.schedule.stages = parse_stages_spec(*opt.stages_spec, Stage{64, 1, 0.9, 100, 0.1, 5000});
  if (opt.prune_threshold)
    for (Stage& s : cfg.schedule.stages) s.prune_threshold = *opt.prune_threshold;
  if (opt.epsilon) cfg.loss.epsilon = *opt.epsilon;
  if (opt.lambda_c) cfg.loss.lambda_c = *opt.lambda_c;
  if (opt.lambda_n) cfg.loss.lambda_n = *opt.lambda_n;
  if (opt.lambda_v) cfg.loss.lambda_v = *opt.lambda_v;
  cfg.validate();
  return cfg;
}

struct ReconstructArtifacts {
  std::filesystem::path mesh;
  std::filesystem::path checkpoint;
  std::filesystem::path transform;
  std::filesystem::path resolved_config;
  std::filesystem::path log;
  double first_total = 0.0, last_total = 0.0;
};

/// Full pipeline: ingest -> optimize -> extract -> write artifacts under
/// out_dir. Returns the paths written.
inline ReconstructArtifacts run_reconstruct(const ReconstructOptions& opt) {
  RunConfig cfg = resolve_config(opt);
  if (opt.input_path.empty()) throw ConfigError("missing input path");
  if (opt.out_dir.empty()) throw ConfigError("missing output directory");
  if (opt.mesh_format != "obj" && opt.mesh_format != "ply")
    throw ConfigError("mesh format must be obj or ply");

  PointCloud raw = load_points(opt.input_path);
  if (raw.positions.empty()) throw InputError("input cloud is empty: " + opt.input_path);
  std::mt19937_64 ingest_rng(cfg.seed);
  if (cfg.ingest.subsample_fraction < 1.0)
    raw = subsample(raw, cfg.ingest.subsample_fraction, ingest_rng);
  PointCloud pc = normalize(raw, cfg.ingest.margin);

  std::filesystem::create_directories(opt.out_dir);
  ReconstructArtifacts art;
  std::filesystem::path dir(opt.out_dir);
  art.mesh = dir / ("mesh." + opt.mesh_format);
  art.checkpoint = dir / "checkpoint.vscg";
  art.transform = dir / "transform.json";
  art.resolved_config = dir / "config.resolved.json";
  art.log = dir / "log.jsonl";

  cfg.save(art.resolved_config.string());
  pc.transform.save(art.transform.string());

  std::ofstream log(art.log);
  if (!log) throw IoError("cannot open for writing: " + art.log.string());
  bool first = true;
  LogSink sink = [&](const IterationRecord& rec) {
    if (first) {
      art.first_total = rec.report.total;
      first = false;
    }
    art.last_total = rec.report.total;
    log << rec.to_json().dump() << "\n";
  };

  ScalarGrid grid = reconstruct(pc, cfg.loss, cfg.schedule, sink, cfg.threads);
  grid.save(art.checkpoint.string());

  TriMesh mesh = marching_cubes(grid, 0.0);
  write_mesh(mesh, art.mesh.string(),
             opt.mesh_format == "obj" ? MeshFormat::obj : MeshFormat::ply, pc.transform);
  return art;
}

struct EvalOptions {
  std::string mesh_path;
  std::string gt_path;
  std::string scan_path;       // optional; one-sided distances use gt if empty
  std::string transform_path;  // optional; enables normalized-unit reporting
  std::string csv_path;        // optional
  double tau = 0.01;           // normalized units
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  bool require_ncs = false;
};

inline MetricReport run_eval(const EvalOptions& opt) {
  if (opt.mesh_path.empty() || opt.gt_path.empty())
    throw ConfigError("eval needs --mesh and --gt");
  TriMesh mesh = read_mesh(opt.mesh_path);
  if (mesh.empty()) throw InputError("mesh has no triangles: " + opt.mesh_path);
  PointCloud gt = load_points(opt.gt_path);
  PointCloud scan = opt.scan_path.empty() ? gt : load_points(opt.scan_path);

  Transform transform;
  if (!opt.transform_path.empty()) transform = Transform::load(opt.transform_path);

  std::mt19937_64 rng(opt.seed);
  OrientedPoints samples = sample_mesh(mesh, opt.samples, rng);

  MetricReport rep;
  rep.scale = transform.scale;
  rep.tau = opt.tau;
  rep.recon_samples = samples.positions.size();
  rep.gt_points = gt.size();
  rep.scan_points = scan.size();

  PairwiseDistances vs_gt = chamfer_hausdorff(samples.positions, gt.positions);
  rep.d_c = vs_gt.chamfer;
  rep.d_h = vs_gt.hausdorff;
  PairwiseDistances vs_scan = chamfer_hausdorff(samples.positions, scan.positions);
  rep.d_c_one = vs_scan.chamfer_one;
  rep.d_h_one = vs_scan.hausdorff_one;

  double tau_original = opt.tau / transform.scale;  // tau is in normalized units
  rep.f_score = f_score(samples.positions, gt.positions, tau_original);

  if (gt.has_normals()) {
    OrientedPoints gt_oriented{gt.positions, gt.normals};
    rep.ncs = normal_consistency(samples, gt_oriented);
  } else if (opt.require_ncs) {
    throw InputError("normal consistency requested but ground truth has no normals");
  }

  if (!opt.csv_path.empty()) {
    std::ofstream csv(opt.csv_path);
    if (!csv) throw IoError("cannot open for writing: " + opt.csv_path);
    csv << MetricReport::csv_header() << "\n" << rep.csv_row() << "\n";
  }
  return rep;
}

struct AblateOptions {
  std::string config_path;
  std::string input_path;
  std::string out_dir;
  std::string sweep;  // "epsilon=0,1e-2" | "lambda_c=0,1e-6" | "drop=normals,viscosity,coarea"
  std::optional<std::string> stages_spec;
  std::optional<double> prune_threshold;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::size_t samples = 20000;
};

struct AblateRow {
  std::string setting;
  double area = 0.0;
  std::size_t components = 0;
  bool watertight = false;
  double d_c_one = 0.0, d_h_one = 0.0;
  std::filesystem::path mesh;
};

/// One reconstruction per sweep setting with a shared seed; emits a
/// comparison CSV keyed by setting name.
inline std::vector<AblateRow> run_ablate(const AblateOptions& opt) {
  if (opt.sweep.empty()) throw ConfigError("empty sweep");
  auto eq = opt.sweep.find('=');
  if (eq == std::string::npos) throw ConfigError("sweep must look like key=v1,v2,...");
  std::string key = opt.sweep.substr(0, eq);
  std::vector<std::string> items;
  {
    std::stringstream ss(opt.sweep.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) items.push_back(item);
  }
  if (items.empty()) throw ConfigError("sweep list is empty");
  if (key != "epsilon" && key != "lambda_c" && key != "drop")
    throw ConfigError("sweep key must be epsilon, lambda_c, or drop");

  std::filesystem::create_directories(opt.out_dir);
  std::vector<AblateRow> rows;

  for (const std::string& item : items) {
    ReconstructOptions ropt;
    ropt.config_path = opt.config_path;
    ropt.input_path = opt.input_path;
    ropt.stages_spec = opt.stages_spec;
    ropt.prune_threshold = opt.prune_threshold;
    ropt.seed = opt.seed;
    ropt.threads = opt.threads;
    std::string name;
    if (key == "epsilon") {
      ropt.epsilon = std::stod(item);
      name = "epsilon_" + item;
    } else if (key == "lambda_c") {
      ropt.lambda_c = std::stod(item);
      name = "lambda_c_" + item;
    } else {
      if (item == "normals") ropt.lambda_n = 0.0;
      else if (item == "viscosity") ropt.epsilon = 0.0;
      else if (item == "coarea") ropt.lambda_c = 0.0;
      else throw ConfigError("drop target must be normals, viscosity, or coarea");
      name = "drop_" + item;
    }
    ropt.out_dir = (std::filesystem::path(opt.out_dir) / name).string();
    ReconstructArtifacts art = run_reconstruct(ropt);

    TriMesh mesh = read_mesh(art.mesh.string());
    AblateRow row;
    row.setting = name;
    row.mesh = art.mesh;
    if (!mesh.empty()) {
      row.area = mesh_area(mesh);
      row.components = connected_components(mesh);
      row.watertight = is_watertight(mesh);
      PointCloud input = load_points(opt.input_path);
      std::mt19937_64 rng(opt.seed.value_or(0));
      OrientedPoints samples = sample_mesh(mesh, opt.samples, rng);
      PairwiseDistances d = chamfer_hausdorff(samples.positions, input.positions);
      row.d_c_one = d.chamfer_one;
      row.d_h_one = d.hausdorff_one;
    }
    rows.push_back(row);
  }

  std::ofstream csv(std::filesystem::path(opt.out_dir) / "ablation.csv");
  if (!csv) throw IoError("cannot write ablation.csv under " + opt.out_dir);
  csv << "setting,area,components,watertight,d_c_one_sided,d_h_one_sided,mesh\n";
  for (const AblateRow& r : rows) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%.9g,%zu,%d,%.9g,%.9g,%s\n", r.setting.c_str(), r.area,
                  r.components, r.watertight ? 1 : 0, r.d_c_one, r.d_h_one,
                  r.mesh.filename().string().c_str());
    csv << buf;
  }
  return rows;
}

struct DemoOptions {
  std::string out_dir;
  int res = 64;
  double epsilon = 1e-2;
};

inline EikonalDemoResult run_demo_eikonal_1d(const DemoOptions& opt) {
  if (opt.out_dir.empty()) throw ConfigError("missing output directory");
  std::filesystem::create_directories(opt.out_dir);
  EikonalDemoResult r = run_eikonal_demo_1d(opt.res, 0.25, 0.75, opt.epsilon);
  write_eikonal_demo_csv(r, (std::filesystem::path(opt.out_dir) / "profiles.csv").string());
  nlohmann::json j = {{"epsilon", r.epsilon},
                      {"eikonal", {{"sdf", r.eikonal_sdf}, {"zigzag", r.eikonal_zigzag}}},
                      {"viscosity", {{"sdf", r.viscosity_sdf}, {"zigzag", r.viscosity_zigzag}}}};
  std::ofstream out(std::filesystem::path(opt.out_dir) / "losses.json");
  if (!out) throw IoError("cannot write losses.json under " + opt.out_dir);
  out << j.dump(2) << "\n";
  return r;
}

/// Serializes an error as one JSON object on stderr; returns the exit code.
inline int report_error(const std::exception& e) {
  const char* kind = "internal";
  if (auto* ge = dynamic_cast<const Error*>(&e)) kind = ge->kind().c_str();
  else if (dynamic_cast<const std::domain_error*>(&e) ||
           dynamic_cast<const std::invalid_argument*>(&e) ||
           dynamic_cast<const std::out_of_range*>(&e))
    kind = "input";
  nlohmann::json j = {{"error", {{"kind", kind}, {"message", e.what()}}}};
  std::cerr << j.dump() << std::endl;
  return 1;
}

}  // namespace gridfit::cli
