#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "json.hpp"
#include "rifair/model.h"

namespace rifair {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

struct RunConfig {
  std::filesystem::path schema;
  std::filesystem::path data;
  std::filesystem::path model;    // checkpoint to read; train writes <out>/model.json
  std::filesystem::path results;  // attack output to read; defaults to <out>/results.jsonl
  std::filesystem::path out = "out";
  std::string mode = "all";
  int steps = 10;
  double tau_dec = 0.5;
  long long budget = -1;  // required by manipulate
  std::string strategy = "all";
  std::uint64_t seed = 0;

  TrainConfig train;
  double test_fraction = 0.2;
  double epsilon = 0.1;
  int grid_points = 5;
  std::size_t similar_cap = 64;
  std::size_t limit = 0;  // attack only the first N test instances; 0 for all
  unsigned threads = 0;
  std::size_t plots = 3;  // instances whose trajectories are exported
  double rif_tolerance = 0.5;
  double percentile = 0.95;
  bool timestamps = true;  // metadata.created in written reports
};

// Each command writes into cfg.out and returns an exit code. DataError and
// NumericAbort propagate; run_command maps them to exit codes.
int cmd_train(const RunConfig& cfg, std::ostream& log);
int cmd_attack(const RunConfig& cfg, std::ostream& log);
int cmd_evaluate(const RunConfig& cfg, std::ostream& log);
int cmd_manipulate(const RunConfig& cfg, std::ostream& log);

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log, std::ostream& err);

// Checkpoint file: model parameters plus the split and data it was trained on.
struct Checkpoint {
  Mlp model;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  std::string dataset_hash;
  nlohmann::json train_config;
};
nlohmann::json checkpoint_json(const Checkpoint& c);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace rifair
