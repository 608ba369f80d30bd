#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "json.hpp"

#include "gridfit/errors.hpp"
#include "gridfit/losses.hpp"
#include "gridfit/optim.hpp"

namespace gridfit {

struct IngestOptions {
  double margin = 0.1;
  double subsample_fraction = 1.0;
};

struct MetricOptions {
  double tau = 0.01;               // F-score threshold, normalized units
  std::size_t mesh_samples = 100000;
};

// Everything a run needs, serialized as one human-editable JSON file. The
// defaults are the reference full-scale settings: three doubling stages
// (64 -> 128 -> 256) with 5/5/3 epochs of 12800 iterations, pruning at 0.9,
// 10% voxel batches, Adam at 1e-3.
struct RunConfig {
  LossConfig loss;
  AdamParams adam;
  Schedule schedule;
  IngestOptions ingest;
  MetricOptions metrics;
  std::uint64_t seed = 0;
  int threads = 1;

  RunConfig() {
    schedule.stages = {
        {64, 5, 0.9, 12800, 0.1, 5000},
        {128, 5, 0.9, 12800, 0.1, 5000},
        {256, 3, 0.9, 12800, 0.1, 5000},
    };
  }

  void validate() const {
    loss.validate();
    schedule.validate();
    if (!(ingest.margin > 0.0 && ingest.margin < 0.5))
      throw ConfigError("ingest.margin must be in (0, 0.5)");
    if (!(ingest.subsample_fraction > 0.0 && ingest.subsample_fraction <= 1.0))
      throw ConfigError("ingest.subsample_fraction must be in (0, 1]");
    if (!(metrics.tau > 0.0)) throw ConfigError("metrics.tau must be positive");
    if (metrics.mesh_samples < 1) throw ConfigError("metrics.mesh_samples must be >= 1");
    if (!(adam.lr > 0.0)) throw ConfigError("adam.lr must be positive");
    if (threads < 1) throw ConfigError("threads must be >= 1");
  }

  nlohmann::json to_json() const {
    nlohmann::json stages = nlohmann::json::array();
    for (const Stage& s : schedule.stages)
      stages.push_back({{"res", s.res},
                        {"epochs", s.epochs},
                        {"prune_threshold", s.prune_threshold},
                        {"iterations_per_epoch", s.iterations_per_epoch},
                        {"voxel_batch_fraction", s.voxel_batch_fraction},
                        {"point_batch_size", s.point_batch_size}});
    return {
        {"loss",
         {{"lambda_p", loss.lambda_p},
          {"lambda_n", loss.lambda_n},
          {"lambda_v", loss.lambda_v},
          {"lambda_c", loss.lambda_c},
          {"epsilon", loss.epsilon},
          {"beta", loss.beta}}},
        {"adam",
         {{"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps_hat", adam.eps_hat}}},
        {"schedule", {{"stages", stages}, {"seed", schedule.seed}}},
        {"ingest",
         {{"margin", ingest.margin}, {"subsample_fraction", ingest.subsample_fraction}}},
        {"metrics", {{"tau", metrics.tau}, {"mesh_samples", metrics.mesh_samples}}},
        {"seed", seed},
        {"threads", threads},
    };
  }

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
      if (auto it = j.find("loss"); it != j.end()) {
        c.loss.lambda_p = it->value("lambda_p", c.loss.lambda_p);
        c.loss.lambda_n = it->value("lambda_n", c.loss.lambda_n);
        c.loss.lambda_v = it->value("lambda_v", c.loss.lambda_v);
        c.loss.lambda_c = it->value("lambda_c", c.loss.lambda_c);
        c.loss.epsilon = it->value("epsilon", c.loss.epsilon);
        c.loss.beta = it->value("beta", c.loss.beta);
      }
      if (auto it = j.find("adam"); it != j.end()) {
        c.adam.lr = it->value("lr", c.adam.lr);
        c.adam.beta1 = it->value("beta1", c.adam.beta1);
        c.adam.beta2 = it->value("beta2", c.adam.beta2);
        c.adam.eps_hat = it->value("eps_hat", c.adam.eps_hat);
      }
      if (auto it = j.find("schedule"); it != j.end()) {
        c.schedule.seed = it->value("seed", c.schedule.seed);
        if (auto st = it->find("stages"); st != it->end()) {
          c.schedule.stages.clear();
          for (const auto& js : *st) {
            Stage s;
            s.res = js.value("res", s.res);
            s.epochs = js.value("epochs", s.epochs);
            s.prune_threshold = js.value("prune_threshold", s.prune_threshold);
            s.iterations_per_epoch = js.value("iterations_per_epoch", s.iterations_per_epoch);
            s.voxel_batch_fraction = js.value("voxel_batch_fraction", s.voxel_batch_fraction);
            s.point_batch_size = js.value("point_batch_size", s.point_batch_size);
            c.schedule.stages.push_back(s);
          }
        }
      }
      if (auto it = j.find("ingest"); it != j.end()) {
        c.ingest.margin = it->value("margin", c.ingest.margin);
        c.ingest.subsample_fraction = it->value("subsample_fraction", c.ingest.subsample_fraction);
      }
      if (auto it = j.find("metrics"); it != j.end()) {
        c.metrics.tau = it->value("tau", c.metrics.tau);
        c.metrics.mesh_samples = it->value("mesh_samples", c.metrics.mesh_samples);
      }
      c.seed = j.value("seed", c.seed);
      c.threads = j.value("threads", c.threads);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return c;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << to_json().dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ": " + e.what());
    }
    return from_json(j);
  }
};

inline bool operator==(const Stage& a, const Stage& b) {
  return a.res == b.res && a.epochs == b.epochs && a.prune_threshold == b.prune_threshold &&
         a.iterations_per_epoch == b.iterations_per_epoch &&
         a.voxel_batch_fraction == b.voxel_batch_fraction &&
         a.point_batch_size == b.point_batch_size;
}

inline bool operator==(const RunConfig& a, const RunConfig& b) {
  return a.loss.lambda_p == b.loss.lambda_p && a.loss.lambda_n == b.loss.lambda_n &&
         a.loss.lambda_v == b.loss.lambda_v && a.loss.lambda_c == b.loss.lambda_c &&
         a.loss.epsilon == b.loss.epsilon && a.loss.beta == b.loss.beta &&
         a.adam.lr == b.adam.lr && a.adam.beta1 == b.adam.beta1 && a.adam.beta2 == b.adam.beta2 &&
         a.adam.eps_hat == b.adam.eps_hat && a.schedule.stages == b.schedule.stages &&
         a.schedule.seed == b.schedule.seed && a.ingest.margin == b.ingest.margin &&
         a.ingest.subsample_fraction == b.ingest.subsample_fraction &&
         a.metrics.tau == b.metrics.tau && a.metrics.mesh_samples == b.metrics.mesh_samples &&
         a.seed == b.seed && a.threads == b.threads;
}

}  // namespace gridfit
