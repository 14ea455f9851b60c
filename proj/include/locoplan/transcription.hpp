#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "locoplan/model.hpp"
#include "locoplan/spline.hpp"
#include "locoplan/terrain.hpp"

namespace locoplan {

enum class Gait { kTrot, kWalk };

std::string gait_name(Gait g);
Gait gait_from_name(const std::string& name);

// Initial and goal base pose; the input of the initializer maps.
struct Task {
  Eigen::Vector3d initial_base_position = Eigen::Vector3d::Zero();
  double initial_yaw = 0.0;
  Eigen::Vector3d goal_base_position = Eigen::Vector3d::Zero();
  double goal_yaw = 0.0;
  std::string environment_id = "flat";
};

struct ProblemConfig {
  double horizon = 3.5;          // s
  double base_dt = 0.1;          // s
  int step_count = 14;
  Gait gait = Gait::kTrot;
  bool optimize_phase_durations = true;
  // Sampling density of the soft translational-balance cost between the
  // hard dynamics collocation points (samples per base_dt interval).
  int dynamics_samples_per_dt = 4;

  // Term weights; every unit-less default is a tuning choice, not a
  // published value. Keys: base_z_velocity, base_angular_velocity,
  // force_tangential, force_normal, edge, swing_height.
  std::map<std::string, double> cost_weights;
  std::map<std::string, double> deriv_weights;

  double normal_force_reference = -1.0;  // <0: mass*g/(legs*duty fraction)
  double edge_sigma = 0.08;              // m
  double swing_clearance = 0.06;         // m
  double base_clearance = 0.30;          // m
  double duration_min = 0.05;            // s
  double duration_max = 1.5;             // s

  void validate() const;  // throws std::invalid_argument
  double weight(const std::string& key) const;
  double deriv_weight(const std::string& key) const;
};

// N = 12 T/dt + 20 S + 120, plus 2 S when phase durations are optimized.
int variable_count(const ProblemConfig& config);

struct PhaseSchedule {
  struct Phase {
    bool is_stance;
    double duration;
  };
  std::vector<Phase> phases;  // alternating, starts and ends in stance
  double total() const;
  bool in_stance(double t) const;
  // Index of the stance phase active at t (swing times resolve to the
  // previous stance).
  int stance_index(double t) const;
};

// Default interleaved gait timeline: swings of equal duration separated by
// full-support intervals, swing twice as long as support.
std::array<PhaseSchedule, 4> default_schedules(const ProblemConfig& config);
std::array<int, 4> swing_counts(const ProblemConfig& config);

enum class VarCategory { kBaseLin, kBaseAng, kFootPos, kForce, kDuration };

// Offsets of every variable group in the flat decision vector.
class VariableLayout {
 public:
  struct Foot {
    int swing_count = 0;
    int stance_pos_start = 0;  // (k+1) nodes * 3
    int apex_start = 0;        // k nodes * 5: [px, py, pz, vx, vy]
    int force_start = 0;       // (2k+4) nodes * 6: [F, Fdot]
    int duration_start = -1;   // 2k: [initial stance, swings..., mid stances...]
  };

  static VariableLayout Build(const ProblemConfig& config);

  int total() const { return total_; }
  int base_node_count() const { return base_nodes_; }
  const std::array<Foot, 4>& feet() const { return feet_; }

  int base_lin_var(int node, int comp, bool deriv) const;
  int base_ang_var(int node, int comp, bool deriv) const;
  int stance_pos_var(int foot, int stance, int comp) const;
  int apex_var(int foot, int swing, int comp) const;  // comp in [0,5)
  int force_var(int foot, int var_node, int comp) const;  // comp in [0,6)
  int force_var_node_count(int foot) const;
  int duration_var(int foot, int j) const;  // -1 when phases fixed
  int duration_count() const;

  VarCategory category(int var) const { return categories_[var]; }
  const std::vector<VarCategory>& categories() const { return categories_; }

  uint64_t hash() const { return hash_; }

 private:
  int total_ = 0;
  int base_nodes_ = 0;
  int base_lin_start_ = 0;
  int base_ang_start_ = 0;
  std::array<Foot, 4> feet_;
  std::vector<VarCategory> categories_;
  uint64_t hash_ = 0;
};

uint64_t layout_hash(const ProblemConfig& config);

// A primal vector together with the layout it was produced for.
struct PrimalGuess {
  Eigen::VectorXd y;
  uint64_t layout_hash = 0;
};

// Linear map from decision variables to a scalar spline parameter.
struct ScalarRef {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;  // (variable, coefficient)
  double value(const Eigen::VectorXd& x) const;
};

// Mapping from the decision vector to the parameters of one 3-d spline.
// Implicit phase structure (null swing forces, fixed stance feet, zero
// transition derivatives, zero apex z-velocity) is encoded here as
// constants and aliased indices rather than as constraint rows.
struct SplineMap {
  struct NodeRef {
    std::array<int, 3> value_idx{-1, -1, -1};
    Eigen::Vector3d value_const = Eigen::Vector3d::Zero();
    std::array<int, 3> deriv_idx{-1, -1, -1};
    Eigen::Vector3d deriv_const = Eigen::Vector3d::Zero();
  };
  std::vector<NodeRef> nodes;
  std::vector<ScalarRef> durations;

  Spline materialize(const Eigen::VectorXd& x) const;
  // Chain rule: given d(out)/d(spline value at t) for m outputs, scatter
  // the full Jacobian (node values, node derivatives, durations) into
  // triplets at the given row offset.
  void scatter(const Eigen::MatrixXd& d_out_d_val, const SplineJacobian& jac,
               int row_offset,
               std::vector<Eigen::Triplet<double>>* out) const;
};

// Materialized trajectory view of a decision vector.
struct Reconstruction {
  std::vector<Spline> base;       // [linear, angular]
  std::vector<Spline> foot_motion;
  std::vector<Spline> foot_force;
  std::array<PhaseSchedule, 4> schedules;  // actual durations from x

  const Spline& base_linear() const { return base[0]; }
  const Spline& base_angular() const { return base[1]; }
};

class ConstraintBlock {
 public:
  virtual ~ConstraintBlock() = default;
  virtual std::string name() const = 0;
  virtual int rows() const = 0;
  virtual void bounds(Eigen::VectorXd* lo, Eigen::VectorXd* hi,
                      int offset) const = 0;
  virtual void eval(const Eigen::VectorXd& x, const Reconstruction& rec,
                    Eigen::VectorXd* out, int offset) const = 0;
  virtual void jacobian(const Eigen::VectorXd& x, const Reconstruction& rec,
                        int row_offset,
                        std::vector<Eigen::Triplet<double>>* out) const = 0;
};

// Cost terms in least-squares residual form: J = sum_i r_i(y)^2. The
// residual Jacobians are exact, so the solver can exploit Gauss-Newton
// curvature while cost value and gradient stay analytic.
class CostBlock {
 public:
  virtual ~CostBlock() = default;
  virtual std::string name() const = 0;
  virtual int residual_count() const = 0;
  virtual void eval(const Eigen::VectorXd& x, const Reconstruction& rec,
                    Eigen::VectorXd* r, int offset) const = 0;
  virtual void jacobian(const Eigen::VectorXd& x, const Reconstruction& rec,
                        int row_offset,
                        std::vector<Eigen::Triplet<double>>* out) const = 0;
};

struct BlockInfo {
  std::string name;
  int row_start = 0;
  int rows = 0;
};

// Immutable problem data shared by all constraint and cost blocks.
struct ProblemContext {
  ProblemConfig config;
  RobotParams robot;
  Terrain terrain;
  Task task;
  VariableLayout layout;
  std::vector<SplineMap> maps;  // [base_lin, base_ang, foot0..3, force0..3]
  std::array<PhaseSchedule, 4> default_schedules;

  const SplineMap& base_lin_map() const { return maps[0]; }
  const SplineMap& base_ang_map() const { return maps[1]; }
  const SplineMap& foot_map(int f) const { return maps[2 + f]; }
  const SplineMap& force_map(int f) const { return maps[6 + f]; }
};

class NlpProblem {
 public:
  int var_count() const { return ctx_->layout.total(); }
  int constraint_count() const { return constraint_rows_; }
  int cost_residual_count() const { return cost_rows_; }

  const Eigen::VectorXd& lower_bounds() const { return x_lo_; }
  const Eigen::VectorXd& upper_bounds() const { return x_hi_; }
  const Eigen::VectorXd& row_lower() const { return c_lo_; }
  const Eigen::VectorXd& row_upper() const { return c_hi_; }

  Reconstruction reconstruct(const Eigen::VectorXd& x) const;

  void eval_constraints(const Eigen::VectorXd& x, Eigen::VectorXd* out) const;
  void constraint_jacobian(const Eigen::VectorXd& x,
                           std::vector<Eigen::Triplet<double>>* out) const;
  void cost_residuals(const Eigen::VectorXd& x, Eigen::VectorXd* out) const;
  void cost_jacobian(const Eigen::VectorXd& x,
                     std::vector<Eigen::Triplet<double>>* out) const;
  // Total cost and (optionally) its analytic gradient.
  double cost(const Eigen::VectorXd& x, Eigen::VectorXd* grad = nullptr) const;

  // Worst bound-scaled constraint violation of x.
  double max_violation(const Eigen::VectorXd& x) const;

  // Per-cost-term values at x, keyed by term name (used for weight
  // auto-scaling).
  std::map<std::string, double> cost_term_values(const Eigen::VectorXd& x) const;

  const std::vector<BlockInfo>& constraint_blocks() const { return c_infos_; }
  const VariableLayout& layout() const { return ctx_->layout; }
  const ProblemConfig& config() const { return ctx_->config; }
  const RobotParams& robot() const { return ctx_->robot; }
  const Terrain& terrain() const { return ctx_->terrain; }
  const Task& task() const { return ctx_->task; }
  const ProblemContext& context() const { return *ctx_; }

  // Pin variables to fixed values by appending equality rows (the
  // make-constraint treatment: the variables stay in the system, so the
  // iteration cost reflects the added rows rather than a smaller problem).
  void freeze_variables(const std::vector<int>& indices,
                        const Eigen::VectorXd& values);

  friend NlpProblem build(const ProblemConfig&, const Terrain&,
                          const RobotParams&, const Task&,
                          const std::array<PhaseSchedule, 4>*);

 private:
  std::shared_ptr<const ProblemContext> ctx_;
  std::vector<std::unique_ptr<ConstraintBlock>> constraints_;
  std::vector<std::unique_ptr<CostBlock>> costs_;
  std::vector<BlockInfo> c_infos_;
  int constraint_rows_ = 0;
  int cost_rows_ = 0;
  Eigen::VectorXd x_lo_, x_hi_, c_lo_, c_hi_;
};

// Assemble the full NLP. Throws std::invalid_argument on an inconsistent
// config and std::runtime_error when the task is unreachable (goal too far
// for the available steps). When phase durations are fixed,
// schedule_override replaces the default gait timing (used to re-solve with
// the phases of an earlier solution baked in).
NlpProblem build(const ProblemConfig& config, const Terrain& terrain,
                 const RobotParams& robot, const Task& task,
                 const std::array<PhaseSchedule, 4>* schedule_override = nullptr);

// Copy the shared variable groups between two layouts of the same gait
// structure (used when moving a primal point to a layout with or without
// phase-duration variables). Throws on structural mismatch.
Eigen::VectorXd transfer_vector(const VariableLayout& from,
                                const VariableLayout& to,
                                const Eigen::VectorXd& x);

// Actual per-foot schedules encoded in a decision vector.
std::array<PhaseSchedule, 4> schedules_from_vector(
    const VariableLayout& layout, const ProblemConfig& config,
    const Eigen::VectorXd& x);

// Inverse of schedules_from_vector: write per-foot phase durations into the
// duration variables of a vector in the given layout (no-op when the layout
// has no duration variables).
void write_durations(const VariableLayout& layout,
                     const std::array<PhaseSchedule, 4>& schedules,
                     Eigen::VectorXd* x);

}  // namespace locoplan
