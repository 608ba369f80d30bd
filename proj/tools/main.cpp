#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "gridfit/cli.hpp"
#include "gridfit/parallel.hpp"

namespace {

template <class T>
void add_optional(CLI::App* cmd, const std::string& flag, std::optional<T>& slot,
                  const std::string& help) {
  cmd->add_option_function<T>(flag, [&slot](const T& v) { slot = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid-based implicit surface reconstruction from oriented point clouds"};
  app.require_subcommand(1);

  gridfit::cli::ReconstructOptions ropt;
  auto* rec = app.add_subcommand("reconstruct", "Fit a signed-distance grid and extract a mesh");
  rec->add_option("--input", ropt.input_path, "Input point cloud (.xyz or .ply)")->required();
  rec->add_option("--out", ropt.out_dir, "Run directory for all outputs")->required();
  rec->add_option("--config", ropt.config_path, "Config JSON (defaults when omitted)");
  rec->add_option("--mesh-format", ropt.mesh_format, "obj or ply (default obj)");
  add_optional<std::uint64_t>(rec, "--seed", ropt.seed, "Override the RNG seed");
  add_optional<int>(rec, "--threads", ropt.threads, "Worker threads (1 = bitwise deterministic)");
  add_optional<double>(rec, "--margin", ropt.margin, "Normalization margin in (0, 0.5)");
  add_optional<double>(rec, "--subsample", ropt.subsample_fraction,
                       "Keep this fraction of input points (0, 1]");
  add_optional<std::string>(rec, "--stages", ropt.stages_spec,
                            "Override schedule, e.g. 32:2x200,64:2x200 (res:epochsxiters)");
  add_optional<double>(rec, "--prune-threshold", ropt.prune_threshold,
                       "Override the prune threshold for all stages");
  add_optional<double>(rec, "--epsilon", ropt.epsilon, "Viscosity coefficient override");
  add_optional<double>(rec, "--lambda-c", ropt.lambda_c, "Coarea weight override");
  add_optional<double>(rec, "--lambda-n", ropt.lambda_n, "Normal-loss weight override");
  add_optional<double>(rec, "--lambda-v", ropt.lambda_v, "Viscosity-loss weight override");

  gridfit::cli::EvalOptions eopt;
  auto* ev = app.add_subcommand("eval", "Evaluate a reconstructed mesh against point sets");
  ev->add_option("--mesh", eopt.mesh_path, "Reconstructed mesh (.obj or .ply)")->required();
  ev->add_option("--gt", eopt.gt_path, "Ground-truth point cloud")->required();
  ev->add_option("--scan", eopt.scan_path, "Input scan for one-sided distances");
  ev->add_option("--transform", eopt.transform_path, "transform.json from the run directory");
  ev->add_option("--csv", eopt.csv_path, "Also write a CSV row here");
  ev->add_option("--tau", eopt.tau, "F-score threshold in normalized units (default 0.01)");
  ev->add_option("--samples", eopt.samples, "Mesh surface samples (default 100000)");
  ev->add_option("--seed", eopt.seed, "Sampling seed");
  ev->add_flag("--ncs", eopt.require_ncs, "Fail if normals are unavailable for NCS");

  gridfit::cli::AblateOptions aopt;
  auto* ab = app.add_subcommand("ablate", "Sweep a loss setting and compare reconstructions");
  ab->add_option("--input", aopt.input_path, "Input point cloud")->required();
  ab->add_option("--outdir", aopt.out_dir, "Output directory")->required();
  ab->add_option("--sweep", aopt.sweep,
                 "epsilon=v1,v2 | lambda_c=v1,v2 | drop=normals,viscosity,coarea")
      ->required();
  ab->add_option("--config", aopt.config_path, "Config JSON (defaults when omitted)");
  ab->add_option("--samples", aopt.samples, "Mesh samples per setting for the CSV metrics");
  add_optional<std::string>(ab, "--stages", aopt.stages_spec, "Schedule override (see reconstruct)");
  add_optional<double>(ab, "--prune-threshold", aopt.prune_threshold, "Prune threshold override");
  add_optional<std::uint64_t>(ab, "--seed", aopt.seed, "Shared seed for all settings");
  add_optional<int>(ab, "--threads", aopt.threads, "Worker threads");

  gridfit::cli::DemoOptions dopt;
  auto* dem = app.add_subcommand("demo-eikonal-1d",
                                 "1D eikonal degeneracy study: distance profile vs zigzag");
  dem->add_option("--outdir", dopt.out_dir, "Output directory")->required();
  dem->add_option("--res", dopt.res, "1D grid cells (default 64)");
  dem->add_option("--epsilon", dopt.epsilon, "Viscosity coefficient (default 1e-2)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (rec->parsed()) {
      if (!ropt.threads) ropt.threads = gridfit::default_threads();
      gridfit::cli::run_reconstruct(ropt);
      return 0;
    }
    if (ev->parsed()) {
      gridfit::MetricReport rep = gridfit::cli::run_eval(eopt);
      std::cout << rep.to_json().dump(2) << std::endl;
      return 0;
    }
    if (ab->parsed()) {
      if (!aopt.threads) aopt.threads = gridfit::default_threads();
      gridfit::cli::run_ablate(aopt);
      return 0;
    }
    if (dem->parsed()) {
      gridfit::EikonalDemoResult r = gridfit::cli::run_demo_eikonal_1d(dopt);
      nlohmann::json j = {{"epsilon", r.epsilon},
                          {"eikonal", {{"sdf", r.eikonal_sdf}, {"zigzag", r.eikonal_zigzag}}},
                          {"viscosity", {{"sdf", r.viscosity_sdf}, {"zigzag", r.viscosity_zigzag}}}};
      std::cout << j.dump(2) << std::endl;
      return 0;
    }
  } catch (const std::exception& e) {
    return gridfit::cli::report_error(e);
  }
  return 0;
}
