#include "locoplan/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "locoplan/validator.hpp"

namespace locoplan {
namespace {

using nlohmann::json;

int worker_count(const RunConfig& config) {
  if (config.workers > 0) return config.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Index-parallel map: deterministic because every slot is owned by exactly
// one task index and the work itself is seed-free.
template <typename Fn>
void parallel_for(int n, int workers, const Fn& fn) {
  if (n <= 0) return;
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SolveVariant variant_from_name(const std::string& name) {
  if (name == "full") return SolveVariant::kFull;
  if (name == "fixed_phase") return SolveVariant::kFixedPhase;
  if (name == "fixed_phase_and_feet") return SolveVariant::kFixedPhaseAndFeet;
  throw std::invalid_argument("unknown variant: " + name);
}

std::filesystem::path cycle_net_path(const RunPaths& paths, int cycle) {
  return paths.nets_dir / ("cycle" + std::to_string(cycle) + ".net");
}

// The most recent trained network of a run.
std::pair<std::filesystem::path, int> final_net_path(const RunConfig& config,
                                                     const RunPaths& paths) {
  for (int c = config.train.loop_count; c >= 1; --c) {
    const std::filesystem::path p = cycle_net_path(paths, c);
    if (std::filesystem::exists(p)) return {p, c};
  }
  throw std::runtime_error("no trained net found under " +
                           paths.nets_dir.string() + "; run train first");
}

struct SolveState {
  bool converged = false;
  double cost = std::numeric_limits<double>::infinity();
  Eigen::VectorXd solution;
};

std::vector<double> converged_costs(const std::vector<SolveState>& states) {
  std::vector<double> costs;
  for (const SolveState& s : states) {
    if (s.converged) costs.push_back(s.cost);
  }
  return costs;
}

}  // namespace

std::vector<Task> holdout_tasks(const RunConfig& config) {
  // Disjoint seed stream from the training sample.
  return sample_tasks(config.task_space, config.train.holdout_count,
                      config.train.seed ^ 0x9e3779b97f4a7c15ULL);
}

std::map<std::string, double> auto_scale_weights(const RunConfig& config) {
  const Terrain terrain = make_terrain(config.environment);
  Task task;
  task.initial_base_position = {
      config.task_space.goal_position.x() +
          0.5 * (config.task_space.x_range[0] + config.task_space.x_range[1]),
      config.task_space.goal_position.y(), config.task_space.start_height};
  task.goal_base_position = config.task_space.goal_position;
  task.goal_yaw = config.task_space.goal_yaw;
  task.environment_id = config.task_space.environment_id;

  const NlpProblem problem =
      build(config.problem, terrain, config.robot, task);
  const PrimalGuess guess =
      heuristic_init(config.problem, terrain, config.robot, task);
  const std::map<std::string, double> terms =
      problem.cost_term_values(guess.y);
  std::map<std::string, double> scaled;
  for (const auto& [name, value] : terms) {
    const double current = config.problem.weight(name);
    scaled[name] = value > 1e-9 ? current / value : current;
  }
  return scaled;
}

ExperimentRecord solve_task(const RunConfig& config, const Terrain& terrain,
                            const Task& task, const Eigen::VectorXd& guess,
                            const std::string& initializer_label,
                            SolveVariant variant, int budget) {
  ExperimentRecord rec;
  rec.task = task;
  rec.initializer = initializer_label;
  rec.variant = variant_name(variant);
  rec.budget = budget;
  rec.layout_hash = layout_hash(config.problem);
  try {
    SolveOptions options = config.solver;
    options.max_iterations = budget;
    VariantSolve vs = solve_variant(config.problem, terrain, config.robot,
                                    task, guess, variant, options);
    rec.converged = vs.result.converged;
    rec.iterations = vs.result.iterations;
    rec.cost = vs.result.cost;
    rec.violation = vs.result.violation;
    rec.wall_time_ms = vs.result.wall_time_ms;
    rec.solution = vs.full_x;

    const ValidationReport strict = validate_plan(vs.problem, vs.result.x);
    const ValidationReport exec = validate_plan(
        vs.problem, vs.result.x, ValidationProfile::Executable());
    rec.strict_pass = strict.passed;
    rec.executable_pass = exec.passed;
    rec.position_drift = strict.position_drift;
  } catch (const std::exception&) {
    // A task that cannot even be assembled counts as a failed solve; the
    // statistics treat it like any other non-converged outcome.
    rec.converged = false;
    rec.cost = std::numeric_limits<double>::infinity();
    rec.violation = std::numeric_limits<double>::infinity();
  }
  return rec;
}

std::vector<ExperimentRecord> run_gen_dataset(const RunConfig& config,
                                              const RunPaths& paths) {
  const Terrain terrain = make_terrain(config.environment);
  const std::vector<Task> tasks =
      sample_tasks(config.task_space, config.train.task_count,
                   config.train.seed);
  save_tasks(paths.tasks_file, tasks);
  std::filesystem::remove(paths.records_file);

  std::vector<ExperimentRecord> records(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), worker_count(config),
               [&](int i) {
                 const PrimalGuess guess = heuristic_init(
                     config.problem, terrain, config.robot, tasks[i]);
                 records[i] = solve_task(config, terrain, tasks[i], guess.y,
                                         "heuristic", SolveVariant::kFull,
                                         config.train.bootstrap_budget);
               });
  append_records(paths.records_file, records);
  return records;
}

TrainOutcome run_train(const RunConfig& config, const RunPaths& paths) {
  const Terrain terrain = make_terrain(config.environment);
  const std::vector<Task> tasks = load_tasks(paths.tasks_file);
  const VariableLayout layout = VariableLayout::Build(config.problem);

  // Bootstrap outcomes, in task order.
  std::vector<SolveState> states;
  for (const ExperimentRecord& r : load_records(paths.records_file)) {
    if (r.initializer != "heuristic") continue;
    if (r.layout_hash != layout.hash()) {
      throw std::runtime_error("records were produced for another layout");
    }
    states.push_back({r.converged, r.cost, r.solution});
  }
  if (states.size() != tasks.size()) {
    throw std::runtime_error("records do not cover the task set; re-run "
                             "dataset generation");
  }

  const Eigen::VectorXd weights = category_weights(layout);
  Eigen::MatrixXd all_features(tasks.size(), kTaskFeatureCount);
  for (size_t i = 0; i < tasks.size(); ++i) {
    all_features.row(i) = task_features(tasks[i], terrain).transpose();
  }

  {
    const std::vector<double> costs = converged_costs(states);
    if (!costs.empty()) {
      export_histogram(paths.histograms_dir / "bootstrap_costs.csv", costs);
    }
  }

  TrainOutcome outcome;
  json metrics = json::array();
  for (int cycle = 1; cycle <= config.train.loop_count; ++cycle) {
    const std::vector<double> costs = converged_costs(states);
    if (static_cast<int>(costs.size()) < config.train.min_dataset) {
      throw std::runtime_error(
          "cycle " + std::to_string(cycle) + ": only " +
          std::to_string(costs.size()) + " converged solutions available");
    }
    const FilterThreshold threshold = select_cost_threshold(costs);
    if (cycle == 1) {
      outcome.bootstrap_g_max = threshold.g_max;
      outcome.bootstrap_retention = threshold.retention;
    }

    // D_good = converged pairs below the threshold.
    std::vector<int> kept;
    for (size_t i = 0; i < states.size(); ++i) {
      if (states[i].converged && states[i].cost < threshold.g_max) {
        kept.push_back(static_cast<int>(i));
      }
    }
    if (static_cast<int>(kept.size()) < config.train.min_dataset) {
      throw std::runtime_error(
          "cycle " + std::to_string(cycle) + ": filter kept " +
          std::to_string(kept.size()) + " of " +
          std::to_string(states.size()) + " (g_max " +
          std::to_string(threshold.g_max) + "), need " +
          std::to_string(config.train.min_dataset));
    }
    Eigen::MatrixXd inputs(kept.size(), kTaskFeatureCount);
    Eigen::MatrixXd targets(kept.size(), layout.total());
    for (size_t k = 0; k < kept.size(); ++k) {
      inputs.row(k) = all_features.row(kept[k]);
      targets.row(k) = states[kept[k]].solution.transpose();
    }

    // Later cycles get one extra hidden layer (more data to fit).
    std::vector<int> sizes;
    sizes.push_back(kTaskFeatureCount);
    for (int h : config.train.hidden_sizes) sizes.push_back(h);
    for (int extra = 1; extra < cycle; ++extra) {
      sizes.push_back(config.train.hidden_sizes.back());
    }
    sizes.push_back(layout.total());

    InitializerNet net(sizes, config.train.seed * 1000 + cycle);
    InitializerNet::TrainOptions train_options = config.train.net;
    train_options.seed = config.train.seed + cycle;
    const InitializerNet::TrainStats train_stats =
        net.train(inputs, targets, weights, train_options);
    save_net(cycle_net_path(paths, cycle), net, layout.hash(),
             config.environment, gait_name(config.problem.gait));

    // Re-solve the whole task set from the learned guess.
    std::vector<ExperimentRecord> records(tasks.size());
    parallel_for(static_cast<int>(tasks.size()), worker_count(config),
                 [&](int i) {
                   const PrimalGuess guess = learned_init(
                       net, config.problem, terrain, tasks[i]);
                   records[i] = solve_task(config, terrain, tasks[i], guess.y,
                                           "learned", SolveVariant::kFull,
                                           config.train.cycle_budget);
                 });
    append_records(paths.records_file, records);

    int converged = 0;
    for (size_t i = 0; i < tasks.size(); ++i) {
      states[i] = {records[i].converged, records[i].cost,
                   records[i].solution};
      converged += records[i].converged ? 1 : 0;
    }

    CycleMetrics m;
    m.cycle = cycle;
    m.g_max = threshold.g_max;
    m.retention = threshold.retention;
    m.dataset_size = static_cast<int>(kept.size());
    m.convergence_rate =
        static_cast<double>(converged) / static_cast<double>(tasks.size());
    m.train_stats = train_stats;
    const std::vector<double> resolve_costs = converged_costs(states);
    if (!resolve_costs.empty()) {
      m.resolve_stats =
          cost_statistics(resolve_costs, outcome.bootstrap_g_max);
      export_histogram(paths.histograms_dir /
                           ("cycle" + std::to_string(cycle) + "_costs.csv"),
                       resolve_costs);
    }
    outcome.cycles.push_back(m);
    outcome.net = std::move(net);

    metrics.push_back(
        {{"cycle", m.cycle},
         {"g_max", m.g_max},
         {"retention", m.retention},
         {"dataset_size", m.dataset_size},
         {"convergence_rate", m.convergence_rate},
         {"resolve_median_cost", m.resolve_stats.median},
         {"resolve_iqr", m.resolve_stats.iqr},
         {"resolve_tail_fraction", m.resolve_stats.tail_fraction},
         {"train_epochs", m.train_stats.epochs},
         {"train_loss", m.train_stats.train_loss},
         {"validation_loss", m.train_stats.validation_loss}});
  }

  std::ofstream os(paths.root / "metrics.json");
  os << json{{"bootstrap_g_max", outcome.bootstrap_g_max},
             {"bootstrap_retention", outcome.bootstrap_retention},
             {"cycles", metrics}}
            .dump(2)
     << '\n';
  return outcome;
}

const CompareCell* CompareOutcome::find(const std::string& initializer,
                                        const std::string& variant,
                                        int budget) const {
  for (const CompareCell& c : cells) {
    if (c.initializer == initializer && c.variant == variant &&
        c.budget == budget) {
      return &c;
    }
  }
  return nullptr;
}

CompareOutcome run_compare(const RunConfig& config, const RunPaths& paths,
                           const std::vector<int>& budgets) {
  const Terrain terrain = make_terrain(config.environment);
  const auto [net_path, net_cycle] = final_net_path(config, paths);
  const InitializerNet net =
      load_net(net_path, layout_hash(config.problem));
  const std::vector<Task> tasks = holdout_tasks(config);
  const int n = static_cast<int>(tasks.size());

  struct Arm {
    std::string initializer;
    std::string variant;
  };
  const std::vector<Arm> arms = {{"heuristic", "full"},
                                 {"learned", "full"},
                                 {"learned", "fixed_phase"},
                                 {"learned", "fixed_phase_and_feet"}};

  CompareOutcome outcome;
  const int max_budget = budgets.empty()
                             ? 0
                             : *std::max_element(budgets.begin(), budgets.end());
  for (const int budget : budgets) {
    for (const Arm& arm : arms) {
      std::vector<ExperimentRecord> records(n);
      parallel_for(n, worker_count(config), [&](int i) {
        const PrimalGuess guess =
            arm.initializer == "learned"
                ? learned_init(net, config.problem, terrain, tasks[i])
                : heuristic_init(config.problem, terrain, config.robot,
                                 tasks[i]);
        records[i] = solve_task(config, terrain, tasks[i], guess.y,
                                arm.initializer,
                                variant_from_name(arm.variant), budget);
      });

      CompareCell cell;
      cell.initializer = arm.initializer;
      cell.variant = arm.variant;
      cell.budget = budget;
      cell.tasks = n;
      std::vector<double> iters, costs, per_it;
      for (const ExperimentRecord& r : records) {
        cell.converged += r.converged ? 1 : 0;
        cell.executable_passes += r.executable_pass ? 1 : 0;
        cell.strict_passes += r.strict_pass ? 1 : 0;
        if (r.converged) {
          iters.push_back(r.iterations);
          costs.push_back(r.cost);
        }
        if (r.iterations > 0) {
          per_it.push_back(r.wall_time_ms / r.iterations);
        }
      }
      cell.median_iterations = median_of(iters);
      cell.median_cost = median_of(costs);
      if (!per_it.empty()) {
        double sum = 0.0;
        for (const double v : per_it) sum += v;
        cell.mean_per_iteration_ms = sum / static_cast<double>(per_it.size());
      }
      outcome.cells.push_back(cell);

      if (budget == max_budget && !costs.empty()) {
        export_histogram(paths.histograms_dir /
                             ("compare_" + arm.initializer + "_" +
                              arm.variant + "_b" + std::to_string(budget) +
                              ".csv"),
                         costs);
      }
    }
  }
  write_compare_csv(paths.root / "compare.csv", outcome);
  return outcome;
}

void write_compare_csv(const std::filesystem::path& path,
                       const CompareOutcome& outcome) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "initializer,variant,budget,tasks,converged,executable_passes,"
        "strict_passes,median_iterations,median_cost,mean_per_iteration_ms\n";
  os.precision(10);
  for (const CompareCell& c : outcome.cells) {
    os << c.initializer << ',' << c.variant << ',' << c.budget << ','
       << c.tasks << ',' << c.converged << ',' << c.executable_passes << ','
       << c.strict_passes << ',' << c.median_iterations << ','
       << c.median_cost << ',' << c.mean_per_iteration_ms << '\n';
  }
}

}  // namespace locoplan
