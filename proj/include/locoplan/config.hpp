#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "locoplan/dataset.hpp"
#include "locoplan/initializer.hpp"
#include "locoplan/model.hpp"
#include "locoplan/solver.hpp"
#include "locoplan/terrain.hpp"
#include "locoplan/transcription.hpp"

namespace locoplan {

// Knobs of the dataset-generation / training / comparison pipeline.
struct TrainSettings {
  int task_count = 300;      // training tasks sampled per run
  int holdout_count = 50;    // evaluation tasks (disjoint seed stream)
  int bootstrap_budget = 100;  // solver iterations for the heuristic solves
  int cycle_budget = 25;       // solver iterations inside the training loop
  int loop_count = 2;
  int min_dataset = 20;      // abort a cycle when the filter keeps fewer
  uint64_t seed = 7;
  std::vector<int> hidden_sizes{128, 128};  // first cycle; later cycles
                                            // append one layer of this width
  InitializerNet::TrainOptions net;
};

// Everything a run needs, loadable from a JSON file (comments allowed).
struct RunConfig {
  std::string environment = "flat";  // flat | single_pallet | double_pallet
  ProblemConfig problem;
  RobotParams robot;
  SolveOptions solver;
  TaskSpace task_space;  // defaults derived from the environment
  TrainSettings train;
  std::filesystem::path output_dir = "runs";
  std::string run_name = "run";
  int workers = 0;  // 0: hardware concurrency

  void validate() const;  // throws std::invalid_argument
};

Terrain make_terrain(const std::string& environment);

// Parse a config file. Unknown keys and malformed values throw
// std::invalid_argument with the offending key in the message.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& json_text);

}  // namespace locoplan
