#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advrank/attacks.hpp"
#include "advrank/data.hpp"
#include "advrank/ranking.hpp"
#include "advrank/zoo.hpp"

namespace advrank {

struct DatasetSpec {
  std::string generator = "blobs";  // blobs | rings | idx
  int n = 4000;
  int num_classes = 4;
  int dim = 16;
  float spread = 0.12f;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::string idx_images;
  std::string idx_labels;
  int idx_limit = 0;
  int downsample_to = 0;
};

struct ZooSpec {
  std::string victim;
  std::string surrogate;
  std::vector<std::string> f0;
};

struct NoiseSpec {
  float std = 16.0f / 255.0f;
  int draws = 10;
  std::uint64_t seed = 0;
};

struct E2Spec {
  int perturbations = 20;
  int trials = 100;
  std::uint64_t seed = 0;
  // Optional attack overrides for the perturbation-ranking run. Candidate
  // diversity needs the random start to survive the iterations, so e2
  // typically wants fewer/shorter steps than e1. 0 means inherit.
  int steps = 0;
  float step_size = 0.0f;
};

// Fully materialized run configuration: every field the experiments depend on
// has an explicit value here, so the manifest echo leaves nothing implicit.
struct RunConfig {
  int version = 1;
  std::uint64_t seed = 42;
  int workers = 0;  // 0 -> hardware concurrency
  DatasetSpec dataset;
  ZooSpec zoo;
  TrainConfig train;
  AttackConfig attack;
  std::vector<Strategy> strategies;
  std::vector<double> k_anchors = {0.05, 0.10, 0.20};
  NoiseSpec noise;
  E2Spec e2;
};

// Parses and validates a config, deriving any seed that the file leaves
// unset from the master seed (which seed_override replaces when given).
RunConfig parse_run_config(const nlohmann::json& j,
                           std::optional<std::uint64_t> seed_override = std::nullopt);

RunConfig load_run_config(const std::string& path,
                          std::optional<std::uint64_t> seed_override = std::nullopt);

nlohmann::json to_json(const RunConfig& cfg);

// The configuration bundled with the demo subcommand.
nlohmann::json demo_config_json();

// Dataset construction + split as dictated by the config.
std::pair<Dataset, Dataset> build_dataset(const DatasetSpec& spec);

// The attack used by the perturbation-ranking run: the main attack with the
// e2 step overrides applied.
AttackConfig e2_attack(const RunConfig& cfg);

// Per-architecture training seed: train.seed plus the registry position.
std::int64_t arch_train_seed(const RunConfig& cfg, const std::string& arch);

}  // namespace advrank
