#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "locoplan/initializer.hpp"
#include "locoplan/terrain.hpp"
#include "locoplan/transcription.hpp"

namespace locoplan {

// Uniform box of start poses with a fixed goal pose, one per environment.
struct TaskSpace {
  // Start x is absolute: the step front edge sits at x = 0, so the default
  // box is 0.5-1.5 m back from the step (flat terrain keeps the same box
  // for comparability).
  Eigen::Vector2d x_range{-1.5, -0.5};
  Eigen::Vector2d y_range{-0.75, 0.75};   // start y relative to the goal
  Eigen::Vector2d yaw_range{-0.5235987755982988, 0.5235987755982988};
  Eigen::Vector3d goal_position{0.6, 0.0, 0.42};
  double goal_yaw = 0.0;
  double start_height = 0.42;  // base height at the start pose
  std::string environment_id = "flat";

  // Defaults per terrain: the goal stands on (or past) the last plateau,
  // the start box sits in the flat approach zone in front of it.
  static TaskSpace ForTerrain(const Terrain& terrain);

  void validate() const;  // throws std::invalid_argument
};

// Independent uniform samples over the box; deterministic per seed.
std::vector<Task> sample_tasks(const TaskSpace& space, int n, uint64_t seed);

// One solve outcome with everything the training and comparison stages
// need: the task, how it was initialized, the solver summary, the
// validator verdicts and the solution itself (in the full layout).
struct ExperimentRecord {
  Task task;
  std::string initializer = "heuristic";  // heuristic | learned
  std::string variant = "full";           // full | fixed_phase | fixed_phase_and_feet
  int budget = 0;                         // iteration budget of this solve
  uint64_t layout_hash = 0;
  bool converged = false;
  int iterations = 0;
  double cost = 0.0;
  double violation = 0.0;
  double wall_time_ms = 0.0;
  bool strict_pass = false;
  bool executable_pass = false;
  double position_drift = 0.0;
  Eigen::VectorXd solution;  // full-layout primal point (may be empty)
};

// JSON-lines persistence; doubles round-trip bit-exactly.
void save_tasks(const std::filesystem::path& path,
                const std::vector<Task>& tasks);
std::vector<Task> load_tasks(const std::filesystem::path& path);

void append_records(const std::filesystem::path& path,
                    const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> load_records(const std::filesystem::path& path);

// Flat binary vector file: 8-byte magic, format version, layout hash,
// length, doubles. Loading against a different layout hash throws.
void save_vector(const std::filesystem::path& path, const Eigen::VectorXd& x,
                 uint64_t layout_hash);
Eigen::VectorXd load_vector(const std::filesystem::path& path,
                            uint64_t expected_layout_hash);

// Network persistence: the same header in front of the net payload, plus a
// human-readable JSON sidecar (<path>.json) describing the net.
void save_net(const std::filesystem::path& path, const InitializerNet& net,
              uint64_t layout_hash, const std::string& environment_id,
              const std::string& gait);
InitializerNet load_net(const std::filesystem::path& path,
                        uint64_t expected_layout_hash);

struct CostStatistics {
  int count = 0;
  double median = 0.0;
  double iqr = 0.0;
  double tail_fraction = 0.0;  // fraction of costs >= g_max
};
CostStatistics cost_statistics(const std::vector<double>& costs, double g_max);

// Fixed-width histogram as CSV (bin_low, bin_high, count).
void export_histogram(const std::filesystem::path& path,
                      const std::vector<double>& costs, int bins = 30);

// runs/<name>/{tasks.jsonl, records.jsonl, nets/, histograms/}; creates the
// directories on construction.
struct RunPaths {
  std::filesystem::path root;
  std::filesystem::path tasks_file;
  std::filesystem::path records_file;
  std::filesystem::path nets_dir;
  std::filesystem::path histograms_dir;

  static RunPaths Create(const std::filesystem::path& runs_root,
                         const std::string& name);
  static RunPaths Open(const std::filesystem::path& runs_root,
                       const std::string& name);  // throws if missing
};

}  // namespace locoplan
