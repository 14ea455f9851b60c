#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "locoplan/config.hpp"
#include "locoplan/dataset.hpp"
#include "locoplan/initializer.hpp"
#include "locoplan/solver.hpp"

namespace locoplan {

// Held-out evaluation tasks: a seed stream disjoint from the training
// sample, deterministic per config.
std::vector<Task> holdout_tasks(const RunConfig& config);

// Cost weights rescaled so every term contributes O(1) at the heuristic
// guess of a representative (centered) task. Useful when porting to a new
// environment; the shipped configs pin tuned weights instead.
std::map<std::string, double> auto_scale_weights(const RunConfig& config);

// Sample the training tasks and run the bootstrap solves (heuristic init at
// the bootstrap budget) in parallel. Overwrites tasks.jsonl/records.jsonl.
// Returns the bootstrap records in task order.
std::vector<ExperimentRecord> run_gen_dataset(const RunConfig& config,
                                              const RunPaths& paths);

struct CycleMetrics {
  int cycle = 0;
  double g_max = 0.0;        // filter threshold used this cycle
  double retention = 0.0;    // fraction of converged solutions kept
  int dataset_size = 0;      // |D_good|
  double convergence_rate = 0.0;  // of the post-training re-solves
  CostStatistics resolve_stats;   // costs of converged re-solves;
                                  // tail fraction vs the bootstrap g_max
  InitializerNet::TrainStats train_stats;
};

struct TrainOutcome {
  InitializerNet net;            // final cycle's network
  double bootstrap_g_max = 0.0;  // threshold selected on the bootstrap
  double bootstrap_retention = 0.0;
  std::vector<CycleMetrics> cycles;
};

// The retraining loop: filter -> supervised fit -> re-solve every task from
// the learned guess, for loop_count cycles. Persists each cycle's net,
// cost histogram and metrics under the run directory. Requires
// run_gen_dataset artifacts; throws when a filter keeps fewer than
// train.min_dataset pairs.
TrainOutcome run_train(const RunConfig& config, const RunPaths& paths);

struct CompareCell {
  std::string initializer;  // heuristic | learned
  std::string variant;      // full | fixed_phase | fixed_phase_and_feet
  int budget = 0;
  int tasks = 0;
  int converged = 0;
  int executable_passes = 0;
  int strict_passes = 0;
  double median_iterations = 0.0;  // over converged solves
  double median_cost = 0.0;        // over converged solves
  double mean_per_iteration_ms = 0.0;
};

struct CompareOutcome {
  std::vector<CompareCell> cells;
  const CompareCell* find(const std::string& initializer,
                          const std::string& variant, int budget) const;
};

// Budget sweep over the held-out tasks: heuristic/full, learned/full,
// learned/fixed_phase and learned/fixed_phase_and_feet at every budget.
// Writes compare.csv under the run directory plus cost histograms.
// Requires a trained net in the run directory.
CompareOutcome run_compare(const RunConfig& config, const RunPaths& paths,
                           const std::vector<int>& budgets);

void write_compare_csv(const std::filesystem::path& path,
                       const CompareOutcome& outcome);

// Solve one task end to end (used by the CLI and the comparison arms):
// builds the problem, solves under the given variant and budget, validates
// and packages the outcome. guess must be in the full layout.
ExperimentRecord solve_task(const RunConfig& config, const Terrain& terrain,
                            const Task& task, const Eigen::VectorXd& guess,
                            const std::string& initializer_label,
                            SolveVariant variant, int budget);

}  // namespace locoplan
