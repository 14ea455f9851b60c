#include "locoplan/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace locoplan {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) {
  throw std::invalid_argument("config: " + what);
}

// Reject unknown keys so typos surface as config errors instead of
// silently keeping a default.
void check_keys(const json& obj, const std::string& block,
                std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) bad("unknown key '" + key + "' in " + block);
  }
}

template <typename T>
void get_if(const json& obj, const char* key, T* out) {
  if (auto it = obj.find(key); it != obj.end()) *out = it->get<T>();
}

void get_range(const json& obj, const char* key, Eigen::Vector2d* out) {
  if (auto it = obj.find(key); it != obj.end()) {
    const auto v = it->get<std::vector<double>>();
    if (v.size() != 2) bad(std::string(key) + " must be [lo, hi]");
    *out = Eigen::Vector2d(v[0], v[1]);
  }
}

void get_vec3(const json& obj, const char* key, Eigen::Vector3d* out) {
  if (auto it = obj.find(key); it != obj.end()) {
    const auto v = it->get<std::vector<double>>();
    if (v.size() != 3) bad(std::string(key) + " must be [x, y, z]");
    *out = Eigen::Vector3d(v[0], v[1], v[2]);
  }
}

void parse_problem(const json& obj, ProblemConfig* p) {
  check_keys(obj, "problem",
             {"horizon", "base_dt", "step_count", "gait",
              "optimize_phase_durations", "dynamics_samples_per_dt",
              "cost_weights", "deriv_weights", "normal_force_reference",
              "edge_sigma", "swing_clearance", "base_clearance",
              "duration_min", "duration_max"});
  get_if(obj, "horizon", &p->horizon);
  get_if(obj, "base_dt", &p->base_dt);
  get_if(obj, "step_count", &p->step_count);
  if (auto it = obj.find("gait"); it != obj.end()) {
    p->gait = gait_from_name(it->get<std::string>());
  }
  get_if(obj, "optimize_phase_durations", &p->optimize_phase_durations);
  get_if(obj, "dynamics_samples_per_dt", &p->dynamics_samples_per_dt);
  if (auto it = obj.find("cost_weights"); it != obj.end()) {
    for (const auto& [key, value] : it->items()) {
      p->cost_weights[key] = value.get<double>();
    }
  }
  if (auto it = obj.find("deriv_weights"); it != obj.end()) {
    for (const auto& [key, value] : it->items()) {
      p->deriv_weights[key] = value.get<double>();
    }
  }
  get_if(obj, "normal_force_reference", &p->normal_force_reference);
  get_if(obj, "edge_sigma", &p->edge_sigma);
  get_if(obj, "swing_clearance", &p->swing_clearance);
  get_if(obj, "base_clearance", &p->base_clearance);
  get_if(obj, "duration_min", &p->duration_min);
  get_if(obj, "duration_max", &p->duration_max);
}

void parse_robot(const json& obj, RobotParams* r) {
  check_keys(obj, "robot",
             {"mass", "inertia_diagonal", "kinematic_box_half_extents",
              "max_force", "friction_coefficient"});
  get_if(obj, "mass", &r->mass);
  if (auto it = obj.find("inertia_diagonal"); it != obj.end()) {
    Eigen::Vector3d d;
    get_vec3(obj, "inertia_diagonal", &d);
    r->inertia = d.asDiagonal();
  }
  get_vec3(obj, "kinematic_box_half_extents", &r->kinematic_box_half_extents);
  get_if(obj, "max_force", &r->max_force);
  get_if(obj, "friction_coefficient", &r->friction_coefficient);
}

void parse_solver(const json& obj, SolveOptions* s) {
  check_keys(obj, "solver",
             {"max_iterations", "constraint_tol", "optimality_tol",
              "initial_penalty", "penalty_growth", "inner_iterations",
              "verbose"});
  get_if(obj, "max_iterations", &s->max_iterations);
  get_if(obj, "constraint_tol", &s->constraint_tol);
  get_if(obj, "optimality_tol", &s->optimality_tol);
  get_if(obj, "initial_penalty", &s->initial_penalty);
  get_if(obj, "penalty_growth", &s->penalty_growth);
  get_if(obj, "inner_iterations", &s->inner_iterations);
  get_if(obj, "verbose", &s->verbose);
}

void parse_task_space(const json& obj, TaskSpace* t) {
  check_keys(obj, "task_space",
             {"x_range", "y_range", "yaw_range", "goal_position", "goal_yaw",
              "start_height"});
  get_range(obj, "x_range", &t->x_range);
  get_range(obj, "y_range", &t->y_range);
  get_range(obj, "yaw_range", &t->yaw_range);
  get_vec3(obj, "goal_position", &t->goal_position);
  get_if(obj, "goal_yaw", &t->goal_yaw);
  get_if(obj, "start_height", &t->start_height);
}

void parse_train(const json& obj, TrainSettings* t) {
  check_keys(obj, "train",
             {"task_count", "holdout_count", "bootstrap_budget",
              "cycle_budget", "loop_count", "min_dataset", "seed",
              "hidden_sizes", "epochs", "batch_size", "learning_rate",
              "momentum", "patience"});
  get_if(obj, "task_count", &t->task_count);
  get_if(obj, "holdout_count", &t->holdout_count);
  get_if(obj, "bootstrap_budget", &t->bootstrap_budget);
  get_if(obj, "cycle_budget", &t->cycle_budget);
  get_if(obj, "loop_count", &t->loop_count);
  get_if(obj, "min_dataset", &t->min_dataset);
  get_if(obj, "seed", &t->seed);
  get_if(obj, "hidden_sizes", &t->hidden_sizes);
  get_if(obj, "epochs", &t->net.max_epochs);
  get_if(obj, "batch_size", &t->net.batch_size);
  get_if(obj, "learning_rate", &t->net.learning_rate);
  get_if(obj, "momentum", &t->net.momentum);
  get_if(obj, "patience", &t->net.patience);
}

}  // namespace

Terrain make_terrain(const std::string& environment) {
  if (environment == "flat") return Terrain::Flat();
  if (environment == "single_pallet") return Terrain::SinglePallet();
  if (environment == "double_pallet") return Terrain::DoublePallet();
  bad("unknown environment '" + environment + "'");
}

void RunConfig::validate() const {
  problem.validate();
  robot.validate();
  task_space.validate();
  make_terrain(environment);
  if (train.task_count < 1 || train.holdout_count < 1) {
    bad("train.task_count and train.holdout_count must be >= 1");
  }
  if (train.loop_count < 1) bad("train.loop_count must be >= 1");
  if (train.bootstrap_budget < 1 || train.cycle_budget < 0) {
    bad("training budgets must be positive");
  }
  if (train.hidden_sizes.empty()) bad("train.hidden_sizes must be non-empty");
  for (int h : train.hidden_sizes) {
    if (h < 1) bad("hidden layer sizes must be positive");
  }
  if (workers < 0) bad("workers must be >= 0");
  if (run_name.empty()) bad("run_name must be non-empty");
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text, nullptr, /*allow_exceptions=*/true,
                       /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    bad(std::string("parse error: ") + e.what());
  }
  if (!root.is_object()) bad("top level must be an object");
  check_keys(root, "top level",
             {"environment", "problem", "robot", "solver", "task_space",
              "train", "output_dir", "run_name", "workers"});

  RunConfig cfg;
  get_if(root, "environment", &cfg.environment);
  const Terrain terrain = make_terrain(cfg.environment);
  cfg.task_space = TaskSpace::ForTerrain(terrain);

  if (auto it = root.find("problem"); it != root.end()) {
    parse_problem(*it, &cfg.problem);
  }
  if (auto it = root.find("robot"); it != root.end()) {
    parse_robot(*it, &cfg.robot);
  }
  if (auto it = root.find("solver"); it != root.end()) {
    parse_solver(*it, &cfg.solver);
  }
  if (auto it = root.find("task_space"); it != root.end()) {
    parse_task_space(*it, &cfg.task_space);
  }
  if (auto it = root.find("train"); it != root.end()) {
    parse_train(*it, &cfg.train);
  }
  if (auto it = root.find("output_dir"); it != root.end()) {
    cfg.output_dir = it->get<std::string>();
  }
  get_if(root, "run_name", &cfg.run_name);
  get_if(root, "workers", &cfg.workers);

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) bad("cannot open " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace locoplan
