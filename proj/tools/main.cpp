// Command-line front end: optimization, dataset generation, initializer
// training, budget comparison, plan validation and histogram export.
//
// Exit codes: 0 success, 2 config error, 3 solve failure, 4 validation
// failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "locoplan/config.hpp"
#include "locoplan/dataset.hpp"
#include "locoplan/initializer.hpp"
#include "locoplan/pipeline.hpp"
#include "locoplan/solver.hpp"
#include "locoplan/validator.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolve = 3;
constexpr int kExitValidation = 4;

using namespace locoplan;

std::string default_config_path() {
  if (const char* env = std::getenv("LOCOPLAN_CONFIG")) return env;
  return "";
}

RunConfig load_config_or_exit(const std::string& path) {
  if (path.empty()) {
    std::cerr << "error: no config file (use --config or LOCOPLAN_CONFIG)\n";
    std::exit(kExitConfig);
  }
  try {
    return load_run_config(path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    std::exit(kExitConfig);
  }
}

void write_report_json(const std::filesystem::path& path,
                       const ValidationReport& report) {
  nlohmann::json j{{"passed", report.passed},
                   {"rollout_ok", report.rollout_ok},
                   {"audit_ok", report.audit_ok},
                   {"position_drift", report.position_drift},
                   {"orientation_drift", report.orientation_drift},
                   {"failure_reason", report.failure_reason},
                   {"audit", report.audit}};
  std::ofstream os(path);
  os << j.dump(2) << '\n';
}

void write_trace_csv(const std::filesystem::path& path,
                     const SolveResult& result) {
  std::ofstream os(path);
  os << "iteration,cost,violation,step_norm,step_scale,wall_ms\n";
  os.precision(10);
  for (size_t i = 0; i < result.trace.size(); ++i) {
    const IterationStat& s = result.trace[i];
    os << i << ',' << s.cost << ',' << s.violation << ',' << s.step_norm
       << ',' << s.step_scale << ',' << s.wall_ms << '\n';
  }
}

int cmd_optimize(const RunConfig& config, const std::string& init,
                 const std::string& net_file, const std::string& guess_file,
                 const std::string& mode, const std::string& out_dir,
                 std::optional<double> start_x, std::optional<double> start_y,
                 std::optional<double> start_yaw) {
  const Terrain terrain = make_terrain(config.environment);

  Task task;
  task.environment_id = config.task_space.environment_id;
  task.goal_base_position = config.task_space.goal_position;
  task.goal_yaw = config.task_space.goal_yaw;
  const Eigen::Vector2d& xr = config.task_space.x_range;
  const Eigen::Vector2d& yr = config.task_space.y_range;
  task.initial_base_position = {
      start_x ? *start_x : 0.5 * (xr[0] + xr[1]),
      config.task_space.goal_position.y() +
          (start_y ? *start_y : 0.5 * (yr[0] + yr[1])),
      config.task_space.start_height};
  task.initial_yaw = start_yaw ? *start_yaw : 0.0;

  const uint64_t hash = layout_hash(config.problem);
  Eigen::VectorXd guess;
  try {
    if (init == "heuristic") {
      guess = heuristic_init(config.problem, terrain, config.robot, task).y;
    } else if (init == "learned") {
      const InitializerNet net = load_net(net_file, hash);
      guess = learned_init(net, config.problem, terrain, task).y;
    } else if (init == "file") {
      guess = load_vector(guess_file, hash);
    } else {
      std::cerr << "error: unknown init '" << init << "'\n";
      return kExitConfig;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    SolveVariant variant = SolveVariant::kFull;
    if (mode == "fixed_phase") variant = SolveVariant::kFixedPhase;
    else if (mode == "fixed_phase_and_feet") variant = SolveVariant::kFixedPhaseAndFeet;
    else if (mode != "full") {
      std::cerr << "error: unknown mode '" << mode << "'\n";
      return kExitConfig;
    }

    VariantSolve vs = solve_variant(config.problem, terrain, config.robot,
                                    task, guess, variant, config.solver);
    const std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);
    save_vector(out / "plan.bin", vs.full_x, hash);
    write_trace_csv(out / "trace.csv", vs.result);

    const ValidationReport report = validate_plan(vs.problem, vs.result.x);
    write_report_json(out / "validation.json", report);

    const double per_it =
        vs.result.iterations > 0
            ? vs.result.wall_time_ms / vs.result.iterations
            : 0.0;
    std::cout << "mode=" << mode << " converged=" << vs.result.converged
              << " iterations=" << vs.result.iterations
              << " cost=" << vs.result.cost
              << " violation=" << vs.result.violation
              << " per_iteration_ms=" << per_it
              << " validation=" << (report.passed ? "pass" : "fail") << '\n';

    if (!vs.result.converged) {
      std::cerr << "error: solve did not converge: " << vs.result.message
                << '\n';
      return kExitSolve;
    }
    if (!report.passed) {
      std::cerr << "error: validation failed: " << report.failure_reason
                << '\n';
      return kExitValidation;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolve;
  }
}

int cmd_validate(const RunConfig& config, const std::string& plan_file) {
  try {
    const Terrain terrain = make_terrain(config.environment);
    const Eigen::VectorXd x =
        load_vector(plan_file, layout_hash(config.problem));
    // The stored plan carries its boundary poses; rebuild the problem around
    // them so the validator sees the same task.
    Task task;
    task.environment_id = config.task_space.environment_id;
    const VariableLayout layout = VariableLayout::Build(config.problem);
    task.initial_base_position = {x[layout.base_lin_var(0, 0, false)],
                                  x[layout.base_lin_var(0, 1, false)],
                                  x[layout.base_lin_var(0, 2, false)]};
    task.initial_yaw = x[layout.base_ang_var(0, 2, false)];
    const int last = layout.base_node_count() - 1;
    task.goal_base_position = {x[layout.base_lin_var(last, 0, false)],
                               x[layout.base_lin_var(last, 1, false)],
                               x[layout.base_lin_var(last, 2, false)]};
    task.goal_yaw = x[layout.base_ang_var(last, 2, false)];

    const NlpProblem problem =
        build(config.problem, terrain, config.robot, task);
    const ValidationReport report = validate_plan(problem, x);
    std::cout << (report.passed ? "pass" : "fail")
              << " position_drift=" << report.position_drift
              << " orientation_drift=" << report.orientation_drift;
    for (const auto& [key, violation] : report.audit) {
      std::cout << ' ' << key << '=' << violation;
    }
    std::cout << '\n';
    return report.passed ? kExitOk : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

int cmd_export_histograms(const RunConfig& config) {
  try {
    const RunPaths paths =
        RunPaths::Open(config.output_dir, config.run_name);
    const std::vector<ExperimentRecord> records =
        load_records(paths.records_file);
    std::map<std::string, std::vector<double>> costs;
    for (const ExperimentRecord& r : records) {
      if (r.converged) costs[r.initializer].push_back(r.cost);
    }
    for (const auto& [initializer, values] : costs) {
      export_histogram(paths.histograms_dir / (initializer + "_costs.csv"),
                       values);
      std::cout << initializer << ": " << values.size()
                << " converged records\n";
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-based trajectory optimization with learned warm starts"};
  app.require_subcommand(1);

  std::string config_path = default_config_path();
  app.add_option("--config", config_path,
                 "Run config file (default: $LOCOPLAN_CONFIG)");

  // Shared overrides.
  std::optional<int> workers;
  app.add_option("--workers", workers, "Worker threads (0 = all cores)");
  std::optional<std::string> run_name;
  app.add_option("--run-name", run_name, "Run directory name override");

  auto* optimize = app.add_subcommand("optimize", "Solve a single task");
  std::string init = "heuristic", net_file, guess_file, mode = "full",
              out_dir = "plan_out";
  std::optional<double> start_x, start_y, start_yaw;
  optimize->add_option("--init", init, "heuristic | learned | file");
  optimize->add_option("--net", net_file, "Net file for --init learned");
  optimize->add_option("--guess", guess_file, "Vector file for --init file");
  optimize->add_option("--mode", mode,
                       "full | fixed_phase | fixed_phase_and_feet");
  optimize->add_option("--out", out_dir, "Output directory");
  optimize->add_option("--start-x", start_x,
                       "Start x (absolute; step front edge at x = 0)");
  optimize->add_option("--start-y", start_y, "Start y relative to the goal");
  optimize->add_option("--start-yaw", start_yaw, "Start yaw (rad)");

  auto* gen = app.add_subcommand("gen-dataset",
                                 "Sample tasks and run bootstrap solves");
  std::optional<int> gen_n;
  std::optional<uint64_t> gen_seed;
  gen->add_option("-n,--tasks", gen_n, "Task count override");
  gen->add_option("--seed", gen_seed, "Seed override");

  auto* train = app.add_subcommand("train-init",
                                   "Run the retraining loop on a dataset");

  auto* compare = app.add_subcommand(
      "compare", "Budget sweep over held-out tasks for both initializers");
  std::vector<int> budgets{0, 5, 15, 50};
  compare->add_option("--budgets", budgets, "Iteration budgets");

  auto* validate = app.add_subcommand("validate", "Validate a stored plan");
  std::string plan_file;
  validate->add_option("--plan", plan_file, "Plan file")->required();

  auto* hist = app.add_subcommand("export-histograms",
                                  "Re-export cost histograms from records");

  CLI11_PARSE(app, argc, argv);

  RunConfig config = load_config_or_exit(config_path);
  if (workers) config.workers = *workers;
  if (run_name) config.run_name = *run_name;

  try {
    if (optimize->parsed()) {
      return cmd_optimize(config, init, net_file, guess_file, mode, out_dir,
                          start_x, start_y, start_yaw);
    }
    if (gen->parsed()) {
      if (gen_n) config.train.task_count = *gen_n;
      if (gen_seed) config.train.seed = *gen_seed;
      config.validate();
      const RunPaths paths =
          RunPaths::Create(config.output_dir, config.run_name);
      const std::vector<ExperimentRecord> records =
          run_gen_dataset(config, paths);
      int converged = 0;
      for (const ExperimentRecord& r : records) converged += r.converged;
      std::cout << "tasks=" << records.size() << " converged=" << converged
                << " -> " << paths.records_file.string() << '\n';
      return kExitOk;
    }
    if (train->parsed()) {
      const RunPaths paths =
          RunPaths::Open(config.output_dir, config.run_name);
      const TrainOutcome outcome = run_train(config, paths);
      std::cout << "bootstrap g_max=" << outcome.bootstrap_g_max
                << " retention=" << outcome.bootstrap_retention << '\n';
      for (const CycleMetrics& m : outcome.cycles) {
        std::cout << "cycle " << m.cycle << ": dataset=" << m.dataset_size
                  << " convergence=" << m.convergence_rate
                  << " median_cost=" << m.resolve_stats.median
                  << " tail=" << m.resolve_stats.tail_fraction << '\n';
      }
      return kExitOk;
    }
    if (compare->parsed()) {
      const RunPaths paths =
          RunPaths::Open(config.output_dir, config.run_name);
      const CompareOutcome outcome = run_compare(config, paths, budgets);
      for (const CompareCell& c : outcome.cells) {
        std::cout << c.initializer << '/' << c.variant << " budget="
                  << c.budget << " executable=" << c.executable_passes << '/'
                  << c.tasks << " median_iters=" << c.median_iterations
                  << " per_it_ms=" << c.mean_per_iteration_ms << '\n';
      }
      return kExitOk;
    }
    if (validate->parsed()) return cmd_validate(config, plan_file);
    if (hist->parsed()) return cmd_export_histograms(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolve;
  }
  return kExitConfig;
}
