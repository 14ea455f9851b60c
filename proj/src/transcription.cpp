#include "locoplan/transcription.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace locoplan {
namespace {

// 4-point Gauss-Legendre rule on [0, 1] (weights sum to one).
constexpr int kQuad = 4;
constexpr double kQuadXi[kQuad] = {
    0.5 - 0.8611363115940526 / 2.0, 0.5 - 0.3399810435848563 / 2.0,
    0.5 + 0.3399810435848563 / 2.0, 0.5 + 0.8611363115940526 / 2.0};
constexpr double kQuadW[kQuad] = {
    0.3478548451374538 / 2.0, 0.6521451548625461 / 2.0,
    0.6521451548625461 / 2.0, 0.3478548451374538 / 2.0};

constexpr double kMinSegmentDuration = 1e-6;
constexpr double kInf = std::numeric_limits<double>::infinity();

using Triplets = std::vector<Eigen::Triplet<double>>;
using Ctx = std::shared_ptr<const ProblemContext>;

// Trajectory splines must stay evaluable at t = horizon even while the
// optimizer explores duration values whose sum drifts off the horizon.
Eigen::Vector3d eval3(const Spline& s, double t, int order) {
  t = std::clamp(t, 0.0, s.total_duration());
  return s.eval(t, order);
}

uint64_t fnv1a(const std::string& text) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

double default_weight(const std::string& key) {
  if (key == "base_z_velocity") return 1.0;
  if (key == "base_angular_velocity") return 1.0;
  if (key == "force_tangential") return 1e-3;
  if (key == "force_normal") return 1e-3;
  if (key == "edge") return 10.0;
  if (key == "swing_height") return 10.0;
  if (key == "swing_collision") return 1000.0;
  if (key == "duration") return 2.0;
  if (key == "dynamic_consistency") return 400.0;
  throw std::invalid_argument("unknown cost term: " + key);
}

double default_deriv_weight(const std::string& key) {
  if (key == "base_z_velocity") return 0.05;
  if (key == "base_angular_velocity") return 0.05;
  if (key == "force_tangential") return 1e-4;
  if (key == "force_normal") return 1e-4;
  if (key == "edge" || key == "swing_height" || key == "swing_collision" ||
      key == "duration") {
    return 0.0;
  }
  throw std::invalid_argument("unknown cost term: " + key);
}

}  // namespace

std::string gait_name(Gait g) {
  return g == Gait::kTrot ? "trot" : "walk";
}

Gait gait_from_name(const std::string& name) {
  if (name == "trot") return Gait::kTrot;
  if (name == "walk") return Gait::kWalk;
  throw std::invalid_argument("unknown gait: " + name);
}

void ProblemConfig::validate() const {
  if (!(horizon > 0.0) || !(base_dt > 0.0)) {
    throw std::invalid_argument("horizon and base_dt must be positive");
  }
  const double ratio = horizon / base_dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw std::invalid_argument("horizon must be a multiple of base_dt");
  }
  if (step_count < 1) throw std::invalid_argument("step_count must be >= 1");
  if (dynamics_samples_per_dt < 1) {
    throw std::invalid_argument("dynamics_samples_per_dt must be >= 1");
  }
  if (gait == Gait::kTrot && step_count % 2 != 0) {
    throw std::invalid_argument("trot needs an even step count");
  }
  if (!(duration_min > 0.0) || !(duration_max > duration_min)) {
    throw std::invalid_argument("invalid phase duration bounds");
  }
  if (!(edge_sigma > 0.0)) throw std::invalid_argument("edge_sigma must be > 0");
  const auto& sched = default_schedules(*this);
  for (const auto& s : sched) {
    for (const auto& p : s.phases) {
      if (p.duration < duration_min - 1e-12 ||
          p.duration > duration_max + 1e-12) {
        throw std::invalid_argument(
            "default phase durations fall outside the duration bounds; "
            "adjust horizon, step count or bounds");
      }
    }
  }
}

double ProblemConfig::weight(const std::string& key) const {
  const auto it = cost_weights.find(key);
  return it != cost_weights.end() ? it->second : default_weight(key);
}

double ProblemConfig::deriv_weight(const std::string& key) const {
  const auto it = deriv_weights.find(key);
  return it != deriv_weights.end() ? it->second : default_deriv_weight(key);
}

int variable_count(const ProblemConfig& config) {
  config.validate();
  const int grid = static_cast<int>(std::round(config.horizon / config.base_dt));
  int n = 12 * grid + 20 * config.step_count + 120;
  if (config.optimize_phase_durations) n += 2 * config.step_count;
  return n;
}

double PhaseSchedule::total() const {
  double t = 0.0;
  for (const auto& p : phases) t += p.duration;
  return t;
}

bool PhaseSchedule::in_stance(double t) const {
  double cum = 0.0;
  for (const auto& p : phases) {
    cum += p.duration;
    if (t < cum) return p.is_stance;
  }
  return phases.empty() ? true : phases.back().is_stance;
}

int PhaseSchedule::stance_index(double t) const {
  double cum = 0.0;
  int stance = -1;
  for (const auto& p : phases) {
    if (p.is_stance) ++stance;
    cum += p.duration;
    if (t < cum) return std::max(stance, 0);
  }
  return std::max(stance, 0);
}

namespace {

// Swing slot assignment per gait: slot index -> feet swinging in that slot.
// Feet are LF=0, RF=1, LH=2, RH=3.
std::vector<std::vector<int>> swing_slots(Gait gait, int step_count) {
  std::vector<std::vector<int>> slots;
  if (gait == Gait::kTrot) {
    const int n = step_count / 2;
    for (int i = 0; i < n; ++i) {
      slots.push_back(i % 2 == 0 ? std::vector<int>{0, 3}
                                 : std::vector<int>{1, 2});
    }
  } else {
    static constexpr int kWalkOrder[4] = {2, 0, 3, 1};  // LH, LF, RH, RF
    for (int i = 0; i < step_count; ++i) {
      slots.push_back({kWalkOrder[i % 4]});
    }
  }
  return slots;
}

}  // namespace

std::array<PhaseSchedule, 4> default_schedules(const ProblemConfig& config) {
  const auto slots = swing_slots(config.gait, config.step_count);
  const int n = static_cast<int>(slots.size());
  // (n + 1) supports interleave n swings; each swing lasts two supports.
  const double t_support = config.horizon / (3.0 * n + 1.0);
  const double t_swing = 2.0 * t_support;

  std::array<PhaseSchedule, 4> out;
  for (int f = 0; f < 4; ++f) {
    double prev_end = 0.0;
    PhaseSchedule s;
    for (int i = 0; i < n; ++i) {
      if (std::find(slots[i].begin(), slots[i].end(), f) == slots[i].end()) {
        continue;
      }
      const double start = (3.0 * i + 1.0) * t_support;
      s.phases.push_back({true, start - prev_end});
      s.phases.push_back({false, t_swing});
      prev_end = start + t_swing;
    }
    s.phases.push_back({true, config.horizon - prev_end});
    out[f] = std::move(s);
  }
  return out;
}

std::array<int, 4> swing_counts(const ProblemConfig& config) {
  const auto slots = swing_slots(config.gait, config.step_count);
  std::array<int, 4> counts{0, 0, 0, 0};
  for (const auto& slot : slots) {
    for (int f : slot) ++counts[f];
  }
  return counts;
}

VariableLayout VariableLayout::Build(const ProblemConfig& config) {
  config.validate();
  VariableLayout l;
  l.base_nodes_ =
      static_cast<int>(std::round(config.horizon / config.base_dt)) + 1;
  l.base_lin_start_ = 0;
  l.base_ang_start_ = 6 * l.base_nodes_;
  int off = 12 * l.base_nodes_;

  const auto counts = swing_counts(config);
  for (int f = 0; f < 4; ++f) {
    Foot& foot = l.feet_[f];
    foot.swing_count = counts[f];
    const int k = counts[f];
    foot.stance_pos_start = off;
    off += 3 * (k + 1);
    foot.apex_start = off;
    off += 5 * k;
    foot.force_start = off;
    off += 6 * (2 * k + 4);
    foot.duration_start = config.optimize_phase_durations ? off : -1;
    if (config.optimize_phase_durations) off += 2 * k;
  }
  l.total_ = off;

  l.categories_.assign(l.total_, VarCategory::kBaseLin);
  for (int i = 6 * l.base_nodes_; i < 12 * l.base_nodes_; ++i) {
    l.categories_[i] = VarCategory::kBaseAng;
  }
  for (int f = 0; f < 4; ++f) {
    const Foot& foot = l.feet_[f];
    const int k = foot.swing_count;
    for (int i = foot.stance_pos_start; i < foot.apex_start; ++i) {
      l.categories_[i] = VarCategory::kFootPos;
    }
    for (int i = foot.apex_start; i < foot.force_start; ++i) {
      l.categories_[i] = VarCategory::kFootPos;
    }
    for (int i = foot.force_start; i < foot.force_start + 6 * (2 * k + 4);
         ++i) {
      l.categories_[i] = VarCategory::kForce;
    }
    if (foot.duration_start >= 0) {
      for (int i = foot.duration_start; i < foot.duration_start + 2 * k; ++i) {
        l.categories_[i] = VarCategory::kDuration;
      }
    }
  }

  std::string desc = "layout:v1;h=" + std::to_string(config.horizon) +
                     ";dt=" + std::to_string(config.base_dt) +
                     ";s=" + std::to_string(config.step_count) +
                     ";g=" + gait_name(config.gait) +
                     ";opt=" + (config.optimize_phase_durations ? "1" : "0");
  l.hash_ = fnv1a(desc);
  return l;
}

int VariableLayout::base_lin_var(int node, int comp, bool deriv) const {
  return base_lin_start_ + 6 * node + (deriv ? 3 : 0) + comp;
}

int VariableLayout::base_ang_var(int node, int comp, bool deriv) const {
  return base_ang_start_ + 6 * node + (deriv ? 3 : 0) + comp;
}

int VariableLayout::stance_pos_var(int foot, int stance, int comp) const {
  return feet_[foot].stance_pos_start + 3 * stance + comp;
}

int VariableLayout::apex_var(int foot, int swing, int comp) const {
  return feet_[foot].apex_start + 5 * swing + comp;
}

int VariableLayout::force_var(int foot, int var_node, int comp) const {
  return feet_[foot].force_start + 6 * var_node + comp;
}

int VariableLayout::force_var_node_count(int foot) const {
  return 2 * feet_[foot].swing_count + 4;
}

int VariableLayout::duration_var(int foot, int j) const {
  const Foot& f = feet_[foot];
  return f.duration_start < 0 ? -1 : f.duration_start + j;
}

int VariableLayout::duration_count() const {
  int n = 0;
  for (const auto& f : feet_) {
    if (f.duration_start >= 0) n += 2 * f.swing_count;
  }
  return n;
}

uint64_t layout_hash(const ProblemConfig& config) {
  return VariableLayout::Build(config).hash();
}

double ScalarRef::value(const Eigen::VectorXd& x) const {
  double v = constant;
  for (const auto& [idx, coeff] : terms) v += coeff * x[idx];
  return v;
}

Spline SplineMap::materialize(const Eigen::VectorXd& x) const {
  std::vector<Node> out;
  out.reserve(nodes.size());
  for (const NodeRef& n : nodes) {
    Eigen::VectorXd v = n.value_const, d = n.deriv_const;
    for (int c = 0; c < 3; ++c) {
      if (n.value_idx[c] >= 0) v[c] = x[n.value_idx[c]];
      if (n.deriv_idx[c] >= 0) d[c] = x[n.deriv_idx[c]];
    }
    out.emplace_back(std::move(v), std::move(d));
  }
  std::vector<double> durs;
  durs.reserve(durations.size());
  for (const ScalarRef& r : durations) {
    durs.push_back(std::max(r.value(x), kMinSegmentDuration));
  }
  return Spline(std::move(out), std::move(durs));
}

void SplineMap::scatter(const Eigen::MatrixXd& d_out_d_val,
                        const SplineJacobian& jac, int row_offset,
                        Triplets* out) const {
  const int m = static_cast<int>(d_out_d_val.rows());
  const NodeRef& a = nodes[jac.segment];
  const NodeRef& b = nodes[jac.segment + 1];
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < m; ++i) {
      const double g = d_out_d_val(i, c);
      if (g == 0.0) continue;
      if (a.value_idx[c] >= 0) {
        out->emplace_back(row_offset + i, a.value_idx[c], g * jac.w_start_value);
      }
      if (a.deriv_idx[c] >= 0) {
        out->emplace_back(row_offset + i, a.deriv_idx[c], g * jac.w_start_deriv);
      }
      if (b.value_idx[c] >= 0) {
        out->emplace_back(row_offset + i, b.value_idx[c], g * jac.w_end_value);
      }
      if (b.deriv_idx[c] >= 0) {
        out->emplace_back(row_offset + i, b.deriv_idx[c], g * jac.w_end_deriv);
      }
    }
  }
  for (int j = 0; j < static_cast<int>(durations.size()); ++j) {
    if (durations[j].terms.empty()) continue;
    const Eigen::VectorXd v = d_out_d_val * jac.d_duration.col(j);
    if (v.isZero(0.0)) continue;
    for (const auto& [idx, coeff] : durations[j].terms) {
      for (int i = 0; i < m; ++i) {
        if (v[i] != 0.0) out->emplace_back(row_offset + i, idx, v[i] * coeff);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Map assembly
// ---------------------------------------------------------------------------

namespace {

SplineMap make_base_map(const VariableLayout& l, double dt, bool angular) {
  SplineMap map;
  for (int i = 0; i < l.base_node_count(); ++i) {
    SplineMap::NodeRef n;
    for (int c = 0; c < 3; ++c) {
      n.value_idx[c] =
          angular ? l.base_ang_var(i, c, false) : l.base_lin_var(i, c, false);
      n.deriv_idx[c] =
          angular ? l.base_ang_var(i, c, true) : l.base_lin_var(i, c, true);
    }
    map.nodes.push_back(n);
  }
  map.durations.assign(l.base_node_count() - 1, ScalarRef{dt, {}});
  return map;
}

// Duration of phase j in the per-foot variable ordering
// [initial stance, swings..., mid stances...] as a linear form.
struct DurationForms {
  std::vector<ScalarRef> vars;  // 2k entries
  ScalarRef final_stance;       // horizon minus the sum of the others
};

DurationForms duration_forms(const VariableLayout& l, int foot,
                             const PhaseSchedule& defaults, double horizon,
                             bool optimize) {
  const int k = l.feet()[foot].swing_count;
  DurationForms out;
  // Default phase list is [st0, sw0, st1, sw1, ..., st_k].
  auto default_dur = [&](int j) {
    if (j == 0) return defaults.phases[0].duration;
    if (j <= k) return defaults.phases[2 * (j - 1) + 1].duration;
    return defaults.phases[2 * (j - k)].duration;  // mid stance j - k
  };
  out.final_stance.constant = horizon;
  for (int j = 0; j < 2 * k; ++j) {
    ScalarRef r;
    if (optimize) {
      r.terms.emplace_back(l.duration_var(foot, j), 1.0);
      out.final_stance.terms.emplace_back(l.duration_var(foot, j), -1.0);
    } else {
      r.constant = default_dur(j);
      out.final_stance.constant -= default_dur(j);
    }
    out.vars.push_back(std::move(r));
  }
  return out;
}

ScalarRef scaled(const ScalarRef& r, double s) {
  ScalarRef out;
  out.constant = r.constant * s;
  for (const auto& [idx, coeff] : r.terms) out.terms.emplace_back(idx, coeff * s);
  return out;
}

// Foot motion: [P0, P0, A0, P1, P1, A1, ..., A_{k-1}, Pk, Pk] with stance
// feet pinned (repeated node, zero derivative) and the swing split into two
// segments through the apex node. The apex z-derivative is structurally
// zero, stance transitions have zero derivatives.
SplineMap make_foot_map(const VariableLayout& l, int foot,
                        const DurationForms& durs) {
  const int k = l.feet()[foot].swing_count;
  SplineMap map;
  auto stance_node = [&](int s) {
    SplineMap::NodeRef n;
    for (int c = 0; c < 3; ++c) n.value_idx[c] = l.stance_pos_var(foot, s, c);
    return n;
  };
  auto apex_node = [&](int j) {
    SplineMap::NodeRef n;
    for (int c = 0; c < 3; ++c) n.value_idx[c] = l.apex_var(foot, j, c);
    n.deriv_idx[0] = l.apex_var(foot, j, 3);
    n.deriv_idx[1] = l.apex_var(foot, j, 4);
    return n;
  };

  map.nodes.push_back(stance_node(0));
  map.nodes.push_back(stance_node(0));
  map.durations.push_back(k == 0 ? durs.final_stance : durs.vars[0]);
  for (int j = 0; j < k; ++j) {
    map.nodes.push_back(apex_node(j));
    map.nodes.push_back(stance_node(j + 1));
    map.nodes.push_back(stance_node(j + 1));
    const ScalarRef half = scaled(durs.vars[1 + j], 0.5);
    map.durations.push_back(half);
    map.durations.push_back(half);
    map.durations.push_back(j + 1 < k ? durs.vars[k + 1 + j]
                                      : durs.final_stance);
  }
  return map;
}

// Contact force: three polynomials per stance (two free interior nodes),
// one null segment per swing. Transition nodes are structurally zero; the
// outer t = 0 and t = horizon nodes are free variables.
SplineMap make_force_map(const VariableLayout& l, int foot,
                         const DurationForms& durs) {
  const int k = l.feet()[foot].swing_count;
  SplineMap map;
  auto var_node = [&](int vn) {
    SplineMap::NodeRef n;
    for (int c = 0; c < 3; ++c) {
      n.value_idx[c] = l.force_var(foot, vn, c);
      n.deriv_idx[c] = l.force_var(foot, vn, c + 3);
    }
    return n;
  };
  const SplineMap::NodeRef zero{};  // all constants, all zero

  for (int s = 0; s <= k; ++s) {
    const ScalarRef third =
        scaled(s == 0 ? (k == 0 ? durs.final_stance : durs.vars[0])
               : s < k ? durs.vars[k + s]
                       : durs.final_stance,
               1.0 / 3.0);
    map.nodes.push_back(s == 0 ? var_node(0) : zero);
    map.nodes.push_back(var_node(2 * s + 1));
    map.nodes.push_back(var_node(2 * s + 2));
    map.durations.push_back(third);
    map.durations.push_back(third);
    map.durations.push_back(third);
    if (s == k) {
      map.nodes.push_back(var_node(2 * k + 3));
    } else {
      map.nodes.push_back(zero);
      map.durations.push_back(durs.vars[1 + s]);  // swing: null force
    }
  }
  return map;
}

// ---------------------------------------------------------------------------
// Constraint blocks
// ---------------------------------------------------------------------------

std::vector<double> grid_times(const ProblemConfig& c) {
  const int n = static_cast<int>(std::round(c.horizon / c.base_dt)) + 1;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = std::min(i * c.base_dt, c.horizon);
  return out;
}

// Dynamics rows are scaled by 1/mass so they read in acceleration units and
// share a magnitude scale with the geometric rows.
class DynamicsBlock final : public ConstraintBlock {
 public:
  explicit DynamicsBlock(Ctx ctx) : ctx_(std::move(ctx)) {
    // Hard collocation at the grid times only; inter-sample consistency is
    // handled by the dynamic_consistency cost so the feasible manifold
    // stays wide enough for fast convergence.
    for (const double t : grid_times(ctx_->config)) {
      samples_.push_back({t, true});
    }
    scale_ = 1.0 / ctx_->robot.mass;
  }
  std::string name() const override { return "dynamics"; }
  int rows() const override {
    int n = 0;
    for (const Sample& s : samples_) n += s.full ? 6 : 3;
    return n;
  }
  void bounds(Eigen::VectorXd* lo, Eigen::VectorXd* hi,
              int offset) const override {
    lo->segment(offset, rows()).setZero();
    hi->segment(offset, rows()).setZero();
  }
  void eval(const Eigen::VectorXd&, const Reconstruction& rec,
            Eigen::VectorXd* out, int offset) const override {
    int row = offset;
    for (const Sample& s : samples_) {
      const BaseState st = base_state(rec, s.t);
      std::vector<Eigen::Vector3d> feet, forces;
      gather(rec, s.t, &feet, &forces);
      const Vector6d r = scale_ * srbd_residual(st, feet, forces, ctx_->robot);
      if (s.full) {
        out->segment<6>(row) = r;
        row += 6;
      } else {
        out->segment<3>(row) = r.head<3>();
        row += 3;
      }
    }
  }
  void jacobian(const Eigen::VectorXd&, const Reconstruction& rec,
                int row_offset, Triplets* out) const override {
    int row = row_offset;
    for (const Sample& s : samples_) {
      const double t = s.t;
      const BaseState st = base_state(rec, t);
      std::vector<Eigen::Vector3d> feet, forces;
      gather(rec, t, &feet, &forces);
      const SrbdJacobian jac =
          srbd_residual_jacobian(st, feet, forces, ctx_->robot);
      const SplineMap& lin = ctx_->base_lin_map();

      if (!s.full) {
        // Translational balance only: m (a - g) - sum f.
        lin.scatter(scale_ * jac.d_linear_acceleration.topRows<3>(),
                    param_jacobian(rec.base_linear(), t, 2), row, out);
        for (int f = 0; f < 4; ++f) {
          ctx_->force_map(f).scatter(scale_ * jac.d_force[f].topRows<3>(),
                                     param_jacobian(rec.foot_force[f], t, 0),
                                     row, out);
        }
        row += 3;
        continue;
      }

      const AngularKinematics kin = angular_kinematics(
          st.orientation, eval3(rec.base_angular(), t, 1),
          eval3(rec.base_angular(), t, 2));

      lin.scatter(scale_ * jac.d_position,
                  param_jacobian(rec.base_linear(), t, 0), row, out);
      lin.scatter(scale_ * jac.d_linear_acceleration,
                  param_jacobian(rec.base_linear(), t, 2), row, out);

      const SplineMap& ang = ctx_->base_ang_map();
      const Matrix63d m0 = jac.d_orientation +
                           jac.d_angular_velocity * kin.d_omega_d_euler +
                           jac.d_angular_acceleration * kin.d_omega_dot_d_euler;
      const Matrix63d m1 = jac.d_angular_velocity * kin.d_omega_d_rate +
                           jac.d_angular_acceleration * kin.d_omega_dot_d_rate;
      const Matrix63d m2 =
          jac.d_angular_acceleration * kin.d_omega_dot_d_accel;
      ang.scatter(scale_ * m0, param_jacobian(rec.base_angular(), t, 0), row,
                  out);
      ang.scatter(scale_ * m1, param_jacobian(rec.base_angular(), t, 1), row,
                  out);
      ang.scatter(scale_ * m2, param_jacobian(rec.base_angular(), t, 2), row,
                  out);

      for (int f = 0; f < 4; ++f) {
        ctx_->foot_map(f).scatter(scale_ * jac.d_foot_position[f],
                                  param_jacobian(rec.foot_motion[f], t, 0),
                                  row, out);
        ctx_->force_map(f).scatter(scale_ * jac.d_force[f],
                                   param_jacobian(rec.foot_force[f], t, 0),
                                   row, out);
      }
      row += 6;
    }
  }

 private:
  BaseState base_state(const Reconstruction& rec, double t) const {
    BaseState st;
    st.position = eval3(rec.base_linear(), t, 0);
    st.linear_acceleration = eval3(rec.base_linear(), t, 2);
    st.orientation = eval3(rec.base_angular(), t, 0);
    const AngularKinematics kin = angular_kinematics(
        st.orientation, eval3(rec.base_angular(), t, 1),
        eval3(rec.base_angular(), t, 2));
    st.angular_velocity = kin.omega;
    st.angular_acceleration = kin.omega_dot;
    return st;
  }
  void gather(const Reconstruction& rec, double t,
              std::vector<Eigen::Vector3d>* feet,
              std::vector<Eigen::Vector3d>* forces) const {
    for (int f = 0; f < 4; ++f) {
      feet->push_back(eval3(rec.foot_motion[f], t, 0));
      forces->push_back(eval3(rec.foot_force[f], t, 0));
    }
  }

  struct Sample {
    double t;
    bool full;  // all six rows vs translational rows only
  };

  Ctx ctx_;
  std::vector<Sample> samples_;
  double scale_ = 1.0;
};

// Foot position expressed in the base frame must stay inside a box around
// the nominal leg attachment, sampled at the grid and the grid midpoints.
class KinematicBoxBlock final : public ConstraintBlock {
 public:
  explicit KinematicBoxBlock(Ctx ctx) : ctx_(std::move(ctx)) {
    times_ = grid_times(ctx_->config);
    const size_t n = times_.size();
    for (size_t i = 0; i + 1 < n; ++i) {
      for (int q = 1; q < 4; ++q) {
        times_.push_back(times_[i] + q * ctx_->config.base_dt / 4.0);
      }
    }
    std::sort(times_.begin(), times_.end());
  }
  std::string name() const override { return "kinematic_box"; }
  int rows() const override { return 12 * static_cast<int>(times_.size()); }
  void bounds(Eigen::VectorXd* lo, Eigen::VectorXd* hi,
              int offset) const override {
    const Eigen::Vector3d& half = ctx_->robot.kinematic_box_half_extents;
    for (int i = 0; i < rows() / 3; ++i) {
      lo->segment<3>(offset + 3 * i) = -half;
      hi->segment<3>(offset + 3 * i) = half;
    }
  }
  void eval(const Eigen::VectorXd&, const Reconstruction& rec,
            Eigen::VectorXd* out, int offset) const override {
    int row = offset;
    for (const double t : times_) {
      const Eigen::Vector3d r = eval3(rec.base_linear(), t, 0);
      const Eigen::Matrix3d rot =
          euler_rotation(eval3(rec.base_angular(), t, 0));
      for (int f = 0; f < 4; ++f) {
        const Eigen::Vector3d p = eval3(rec.foot_motion[f], t, 0);
        out->segment<3>(row) = rot.transpose() * (p - r) -
                               ctx_->robot.nominal_foot_offsets[f];
        row += 3;
      }
    }
  }
  void jacobian(const Eigen::VectorXd&, const Reconstruction& rec,
                int row_offset, Triplets* out) const override {
    int row = row_offset;
    for (const double t : times_) {
      const Eigen::Vector3d r = eval3(rec.base_linear(), t, 0);
      const Eigen::Vector3d e = eval3(rec.base_angular(), t, 0);
      const Eigen::Matrix3d rot_t = euler_rotation(e).transpose();
      const auto rot_partials = euler_rotation_partials(e);
      const SplineJacobian lin_jac = param_jacobian(rec.base_linear(), t, 0);
      const SplineJacobian ang_jac = param_jacobian(rec.base_angular(), t, 0);
      for (int f = 0; f < 4; ++f) {
        const Eigen::Vector3d p = eval3(rec.foot_motion[f], t, 0);
        Eigen::Matrix3d d_euler;
        for (int j = 0; j < 3; ++j) {
          d_euler.col(j) = rot_partials[j].transpose() * (p - r);
        }
        ctx_->base_lin_map().scatter(-rot_t, lin_jac, row, out);
        ctx_->base_ang_map().scatter(d_euler, ang_jac, row, out);
        ctx_->foot_map(f).scatter(rot_t,
                                  param_jacobian(rec.foot_motion[f], t, 0),
                                  row, out);
        row += 3;
      }
    }
  }

 private:
  Ctx ctx_;
  std::vector<double> times_;
};

// Linearized friction pyramid on every variable force node. The normal
// force upper/lower limits live in the variable bounds.
class FrictionBlock final : public ConstraintBlock {
 public:
  explicit FrictionBlock(Ctx ctx) : ctx_(std::move(ctx)) {
    for (int f = 0; f < 4; ++f) {
      for (int vn = 0; vn < ctx_->layout.force_var_node_count(f); ++vn) {
        nodes_.emplace_back(f, vn);
      }
    }
  }
  std::string name() const override { return "friction_pyramid"; }
  int rows() const override { return 4 * static_cast<int>(nodes_.size()); }
  void bounds(Eigen::VectorXd* lo, Eigen::VectorXd* hi,
              int offset) const override {
    lo->segment(offset, rows()).setZero();
    hi->segment(offset, rows()).setConstant(kInf);
  }
  void eval(const Eigen::VectorXd& x, const Reconstruction&,
            Eigen::VectorXd* out, int offset) const override {
    const double mu = ctx_->robot.friction_coefficient;
    int row = offset;
    for (const auto& [f, vn] : nodes_) {
      const double fx = x[ctx_->layout.force_var(f, vn, 0)];
      const double fy = x[ctx_->layout.force_var(f, vn, 1)];
      const double fz = x[ctx_->layout.force_var(f, vn, 2)];
      (*out)[row++] = mu * fz - fx;
      (*out)[row++] = mu * fz + fx;
      (*out)[row++] = mu * fz - fy;
      (*out)[row++] = mu * fz + fy;
    }
  }
  void jacobian(const Eigen::VectorXd&, const Reconstruction&, int row_offset,
                Triplets* out) const override {
    const double mu = ctx_->robot.friction_coefficient;
    int row = row_offset;
    for (const auto& [f, vn] : nodes_) {
      const int ix = ctx_->layout.force_var(f, vn, 0);
      const int iy = ctx_->layout.force_var(f, vn, 1);
      const int iz = ctx_->layout.force_var(f, vn, 2);
      out->emplace_back(row, iz, mu);
      out->emplace_back(row++, ix, -1.0);
      out->emplace_back(row, iz, mu);
      out->emplace_back(row++, ix, 1.0);
      out->emplace_back(row, iz, mu);
      out->emplace_back(row++, iy, -1.0);
      out->emplace_back(row, iz, mu);
      out->emplace_back(row++, iy, 1.0);
    }
  }

 private:
  Ctx ctx_;
  std::vector<std::pair<int, int>> nodes_;
};

// Every stance foothold sits on the terrain surface.
class TerrainContactBlock final : public ConstraintBlock {
 public:
  explicit TerrainContactBlock(Ctx ctx) : ctx_(std::move(ctx)) {
    for (int f = 0; f < 4; ++f) {
      for (int s = 0; s <= ctx_->layout.feet()[f].swing_count; ++s) {
        nodes_.emplace_back(f, s);
      }
    }
  }
  std::string name() const override { return "terrain_contact"; }
  int rows() const override { return static_cast<int>(nodes_.size()); }
  void bounds(Eigen::VectorXd* lo, Eigen::VectorXd* hi,
              int offset) const override {
    lo->segment(offset, rows()).setZero();
    hi->segment(offset, rows()).setZero();
  }
  void eval(const Eigen::VectorXd& x, const Reconstruction&,
            Eigen::VectorXd* out, int offset) const override {
    int row = offset;
    for (const auto& [f, s] : nodes_) {
      const double px = x[ctx_->layout.stance_pos_var(f, s, 0)];
      const double py = x[ctx_->layout.stance_pos_var(f, s, 1)];
      const double pz = x[ctx_->layout.stance_pos_var(f, s, 2)];
      (*out)[row++] = pz - ctx_->terrain.height_at(px, py);
    }
  }
  void jacobian(const Eigen::VectorXd& x, const Reconstruction&,
                int row_offset, Triplets* out) const override {
    int row = row_offset;
    for (const auto& [f, s] : nodes_) {
      const double px = x[ctx_->layout.stance_pos_var(f, s, 0)];
      const double py = x[ctx_->layout.stance_pos_var(f, s, 1)];
      const Eigen::Vector2d g = ctx_->terrain.height_gradient(px, py);
      out->emplace_back(row, ctx_->layout.stance_pos_var(f, s, 0), -g.x());
      out->emplace_back(row, ctx_->layout.stance_pos_var(f, s, 1), -g.y());
      out->emplace_back(row, ctx_->layout.stance_pos_var(f, s, 2), 1.0);
      ++row;
    }
  }

 private:
  Ctx ctx_;
  std::vector<std::pair<int, int>> nodes_;
};

// Base height above every currently loaded foothold, sampled on the grid
// using the nominal contact timing.
class BaseClearanceBlock final : public ConstraintBlock {
 public:
  explicit BaseClearanceBlock(Ctx ctx) : ctx_(std::move(ctx)) {
    for (const double t : grid_times(ctx_->config)) {
      for (int f = 0; f < 4; ++f) {
        const PhaseSchedule& sched = ctx_->default_schedules[f];
        if (!sched.in_stance(t)) continue;
        entries_.push_back({t, f, sched.stance_index(t)});
      }
    }
  }
  std::string name() const override { return "base_clearance"; }
  int rows() const override { return static_cast<int>(entries_.size()); }
  void bounds(Eigen::VectorXd* lo, Eigen::VectorXd* hi,
              int offset) const override {
    lo->segment(offset, rows()).setConstant(ctx_->config.base_clearance);
    hi->segment(offset, rows()).setConstant(kInf);
  }
  void eval(const Eigen::VectorXd& x, const Reconstruction& rec,
            Eigen::VectorXd* out, int offset) const override {
    int row = offset;
    for (const auto& e : entries_) {
      const double base_z = eval3(rec.base_linear(), e.t, 0).z();
      (*out)[row++] = base_z - x[ctx_->layout.stance_pos_var(e.foot, e.stance, 2)];
    }
  }
  void jacobian(const Eigen::VectorXd&, const Reconstruction& rec,
                int row_offset, Triplets* out) const override {
    Eigen::MatrixXd sel(1, 3);
    sel << 0.0, 0.0, 1.0;
    int row = row_offset;
    for (const auto& e : entries_) {
      ctx_->base_lin_map().scatter(sel, param_jacobian(rec.base_linear(), e.t, 0),
                                   row, out);
      out->emplace_back(row, ctx_->layout.stance_pos_var(e.foot, e.stance, 2),
                        -1.0);
      ++row;
    }
  }

 private:
  struct Entry {
    double t;
    int foot;
    int stance;
  };
  Ctx ctx_;
  std::vector<Entry> entries_;
};

// Swing apex above both the departing and the landing foothold.
class SwingClearanceBlock final : public ConstraintBlock {
 public:
  explicit SwingClearanceBlock(Ctx ctx) : ctx_(std::move(ctx)) {}
  std::string name() const override { return "swing_clearance"; }
  int rows() const override {
    int n = 0;
    for (const auto& f : ctx_->layout.feet()) n += 2 * f.swing_count;
    return n;
  }
  void bounds(Eigen::VectorXd* lo, Eigen::VectorXd* hi,
              int offset) const override {
    lo->segment(offset, rows()).setConstant(ctx_->config.swing_clearance);
    hi->segment(offset, rows()).setConstant(kInf);
  }
  void eval(const Eigen::VectorXd& x, const Reconstruction&,
            Eigen::VectorXd* out, int offset) const override {
    int row = offset;
    for (int f = 0; f < 4; ++f) {
      for (int j = 0; j < ctx_->layout.feet()[f].swing_count; ++j) {
        const double az = x[ctx_->layout.apex_var(f, j, 2)];
        (*out)[row++] = az - x[ctx_->layout.stance_pos_var(f, j, 2)];
        (*out)[row++] = az - x[ctx_->layout.stance_pos_var(f, j + 1, 2)];
      }
    }
  }
  void jacobian(const Eigen::VectorXd&, const Reconstruction&, int row_offset,
                Triplets* out) const override {
    int row = row_offset;
    for (int f = 0; f < 4; ++f) {
      for (int j = 0; j < ctx_->layout.feet()[f].swing_count; ++j) {
        const int az = ctx_->layout.apex_var(f, j, 2);
        out->emplace_back(row, az, 1.0);
        out->emplace_back(row++, ctx_->layout.stance_pos_var(f, j, 2), -1.0);
        out->emplace_back(row, az, 1.0);
        out->emplace_back(row++, ctx_->layout.stance_pos_var(f, j + 1, 2), -1.0);
      }
    }
  }

 private:
  Ctx ctx_;
};

// The final stance duration is the horizon minus the explicit phase
// durations; it has to respect the same range as the explicit ones.
class DurationRangeBlock final : public ConstraintBlock {
 public:
  explicit DurationRangeBlock(Ctx ctx) : ctx_(std::move(ctx)) {
    for (int f = 0; f < 4; ++f) {
      if (ctx_->layout.feet()[f].swing_count > 0 &&
          ctx_->layout.feet()[f].duration_start >= 0) {
        feet_.push_back(f);
      }
    }
  }
  std::string name() const override { return "final_stance_duration"; }
  int rows() const override { return static_cast<int>(feet_.size()); }
  void bounds(Eigen::VectorXd* lo, Eigen::VectorXd* hi,
              int offset) const override {
    lo->segment(offset, rows()).setConstant(ctx_->config.duration_min);
    hi->segment(offset, rows()).setConstant(ctx_->config.duration_max);
  }
  void eval(const Eigen::VectorXd& x, const Reconstruction&,
            Eigen::VectorXd* out, int offset) const override {
    int row = offset;
    for (const int f : feet_) {
      double v = ctx_->config.horizon;
      const int k = ctx_->layout.feet()[f].swing_count;
      for (int j = 0; j < 2 * k; ++j) v -= x[ctx_->layout.duration_var(f, j)];
      (*out)[row++] = v;
    }
  }
  void jacobian(const Eigen::VectorXd&, const Reconstruction&, int row_offset,
                Triplets* out) const override {
    int row = row_offset;
    for (const int f : feet_) {
      const int k = ctx_->layout.feet()[f].swing_count;
      for (int j = 0; j < 2 * k; ++j) {
        out->emplace_back(row, ctx_->layout.duration_var(f, j), -1.0);
      }
      ++row;
    }
  }

 private:
  Ctx ctx_;
  std::vector<int> feet_;
};

// Equality rows for explicitly frozen variables (used when re-solving with
// parts of the plan held fixed).
class FrozenBlock final : public ConstraintBlock {
 public:
  FrozenBlock(std::vector<int> indices, Eigen::VectorXd values)
      : indices_(std::move(indices)), values_(std::move(values)) {}
  std::string name() const override { return "frozen_variables"; }
  int rows() const override { return static_cast<int>(indices_.size()); }
  void bounds(Eigen::VectorXd* lo, Eigen::VectorXd* hi,
              int offset) const override {
    lo->segment(offset, rows()).setZero();
    hi->segment(offset, rows()).setZero();
  }
  void eval(const Eigen::VectorXd& x, const Reconstruction&,
            Eigen::VectorXd* out, int offset) const override {
    for (int i = 0; i < rows(); ++i) {
      (*out)[offset + i] = x[indices_[i]] - values_[i];
    }
  }
  void jacobian(const Eigen::VectorXd&, const Reconstruction&, int row_offset,
                Triplets* out) const override {
    for (int i = 0; i < rows(); ++i) {
      out->emplace_back(row_offset + i, indices_[i], 1.0);
    }
  }

 private:
  std::vector<int> indices_;
  Eigen::VectorXd values_;
};

// ---------------------------------------------------------------------------
// Cost blocks
// ---------------------------------------------------------------------------

const Spline& pick_spline(const Reconstruction& rec, int map_index) {
  if (map_index < 2) return rec.base[map_index];
  if (map_index < 6) return rec.foot_motion[map_index - 2];
  return rec.foot_force[map_index - 6];
}

// Gauss-Legendre residual form of the smoothing integral
//   w * sum_d wd_d Int ( (x_d^(o) - ref_d)^2 + dw * (x_d^(o+1))^2 ) dt.
// Each quadrature point contributes sqrt(w wd W_q Delta)-scaled residuals,
// so sum r^2 reproduces the integral exactly and the Jacobian carries the
// exact duration sensitivity (quadrature times move with the durations, so
// preceding-segment terms cancel).
class IntegralCostBlock final : public CostBlock {
 public:
  IntegralCostBlock(Ctx ctx, std::string name, int map_index, int order,
                    const Eigen::Vector3d& dim_weights, double deriv_weight,
                    std::vector<int> segments, const Eigen::Vector3d& ref,
                    double weight)
      : ctx_(std::move(ctx)),
        name_(std::move(name)),
        map_index_(map_index),
        order_(order),
        deriv_weight_(deriv_weight),
        ref_(ref),
        segments_(std::move(segments)) {
    if (segments_.empty()) {
      const int n =
          static_cast<int>(ctx_->maps[map_index_].durations.size());
      for (int j = 0; j < n; ++j) segments_.push_back(j);
    }
    for (int d = 0; d < 3; ++d) {
      if (dim_weights[d] > 0.0) {
        dims_.push_back(d);
        scales_.push_back(std::sqrt(weight * dim_weights[d]));
      }
    }
  }

  std::string name() const override { return name_; }
  int residual_count() const override {
    const int per_point =
        static_cast<int>(dims_.size()) * (deriv_weight_ > 0.0 ? 2 : 1);
    return static_cast<int>(segments_.size()) * kQuad * per_point;
  }

  void eval(const Eigen::VectorXd&, const Reconstruction& rec,
            Eigen::VectorXd* r, int offset) const override {
    const Spline& s = pick_spline(rec, map_index_);
    int row = offset;
    for (const int seg : segments_) {
      const double delta = s.durations()[seg];
      for (int q = 0; q < kQuad; ++q) {
        const double t = s.segment_start(seg) + kQuadXi[q] * delta;
        const double root = std::sqrt(kQuadW[q] * delta);
        const Eigen::VectorXd x0 = s.eval(t, order_);
        for (size_t i = 0; i < dims_.size(); ++i) {
          (*r)[row++] = scales_[i] * root * (x0[dims_[i]] - ref_[dims_[i]]);
        }
        if (deriv_weight_ > 0.0) {
          const Eigen::VectorXd x1 = s.eval(t, order_ + 1);
          const double droot = root * std::sqrt(deriv_weight_);
          for (size_t i = 0; i < dims_.size(); ++i) {
            (*r)[row++] = scales_[i] * droot * x1[dims_[i]];
          }
        }
      }
    }
  }

  void jacobian(const Eigen::VectorXd&, const Reconstruction& rec,
                int row_offset, Triplets* out) const override {
    const Spline& s = pick_spline(rec, map_index_);
    const SplineMap& map = ctx_->maps[map_index_];
    const int m = static_cast<int>(dims_.size());
    int row = row_offset;
    for (const int seg : segments_) {
      const double delta = s.durations()[seg];
      for (int q = 0; q < kQuad; ++q) {
        const double t = s.segment_start(seg) + kQuadXi[q] * delta;
        const double root = std::sqrt(kQuadW[q] * delta);
        const Eigen::VectorXd x0 = s.eval(t, order_);
        const Eigen::VectorXd x1 = s.eval(t, order_ + 1);

        row = emit(map, s, t, seg, row, m, root, x0, x1,
                   /*use_ref=*/true, order_, out);
        if (deriv_weight_ > 0.0) {
          const Eigen::VectorXd x2 = s.eval(t, order_ + 2);
          row = emit(map, s, t, seg, row, m, root * std::sqrt(deriv_weight_),
                     x1, x2, /*use_ref=*/false, order_ + 1, out);
        }
      }
    }
  }

 private:
  // Emit one group of per-dimension residual rows for derivative `order`
  // with value vector x0 and next-derivative x1 at quadrature point t.
  int emit(const SplineMap& map, const Spline& s, double t, int seg, int row,
           int m, double root, const Eigen::VectorXd& x0,
           const Eigen::VectorXd& x1, bool use_ref, int order,
           Triplets* out) const {
    SplineJacobian jac = param_jacobian(s, t, order);
    const double delta = s.durations()[seg];
    const double xi = (t - s.segment_start(seg)) / delta;
    // Total duration derivative of the residual (quadrature point moves
    // with the segment, sqrt(Delta) scale included via the value chain):
    //   d/dDelta [root(Delta) (x - ref)] =
    //     root [ (x - ref) / (2 Delta) + xi x' + dx/dDelta|_s ].
    Eigen::VectorXd dcol = jac.d_duration.col(seg);
    for (int d = 0; d < 3; ++d) {
      const double dev = use_ref ? x0[d] - ref_[d] : x0[d];
      dcol[d] += dev / (2.0 * delta) + xi * x1[d];
    }
    jac.d_duration.setZero();
    jac.d_duration.col(seg) = dcol;

    Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(m, 3);
    for (int i = 0; i < m; ++i) sel(i, dims_[i]) = scales_[i] * root;
    map.scatter(sel, jac, row, out);
    return row + m;
  }

  Ctx ctx_;
  std::string name_;
  int map_index_;
  int order_;
  double deriv_weight_;
  Eigen::Vector3d ref_;
  std::vector<int> segments_;
  std::vector<int> dims_;
  std::vector<double> scales_;
};

// Foothold-to-edge proximity penalty: residual exp(-d^2 / (4 sigma^2)) per
// foothold, so the cost contribution is the Gaussian exp(-d^2 / (2 sigma^2)).
class EdgeCostBlock final : public CostBlock {
 public:
  EdgeCostBlock(Ctx ctx, double weight)
      : ctx_(std::move(ctx)), scale_(std::sqrt(weight)) {
    for (int f = 0; f < 4; ++f) {
      for (int s = 0; s <= ctx_->layout.feet()[f].swing_count; ++s) {
        nodes_.emplace_back(f, s);
      }
    }
  }
  std::string name() const override { return "edge"; }
  int residual_count() const override {
    return static_cast<int>(nodes_.size());
  }
  void eval(const Eigen::VectorXd& x, const Reconstruction&, Eigen::VectorXd* r,
            int offset) const override {
    const double s2 = ctx_->config.edge_sigma * ctx_->config.edge_sigma;
    int row = offset;
    for (const auto& [f, s] : nodes_) {
      const double px = x[ctx_->layout.stance_pos_var(f, s, 0)];
      const double py = x[ctx_->layout.stance_pos_var(f, s, 1)];
      const auto ed = ctx_->terrain.edge_distance(px, py);
      (*r)[row++] = std::isfinite(ed.distance)
                        ? scale_ * std::exp(-ed.distance * ed.distance /
                                            (4.0 * s2))
                        : 0.0;
    }
  }
  void jacobian(const Eigen::VectorXd& x, const Reconstruction&,
                int row_offset, Triplets* out) const override {
    const double s2 = ctx_->config.edge_sigma * ctx_->config.edge_sigma;
    int row = row_offset;
    for (const auto& [f, s] : nodes_) {
      const double px = x[ctx_->layout.stance_pos_var(f, s, 0)];
      const double py = x[ctx_->layout.stance_pos_var(f, s, 1)];
      const auto ed = ctx_->terrain.edge_distance(px, py);
      if (std::isfinite(ed.distance)) {
        const double g = scale_ *
                         std::exp(-ed.distance * ed.distance / (4.0 * s2)) *
                         (-ed.distance / (2.0 * s2));
        out->emplace_back(row, ctx_->layout.stance_pos_var(f, s, 0),
                          g * ed.gradient.x());
        out->emplace_back(row, ctx_->layout.stance_pos_var(f, s, 1),
                          g * ed.gradient.y());
      }
      ++row;
    }
  }

 private:
  Ctx ctx_;
  double scale_;
  std::vector<std::pair<int, int>> nodes_;
};

// Keeps the swing apex near the preferred clearance over the adjacent
// footholds (a regularizer; the hard floor is the clearance constraint).
// Pulls every swing apex to swing_clearance above the highest of the two
// footholds and the terrain under the apex itself, so swings over a step
// aim above the step top instead of the mean foothold height. The max is
// smoothed (log-sum-exp) to stay differentiable when the candidates tie,
// which is the common flat-ground case.
class SwingHeightCostBlock final : public CostBlock {
 public:
  SwingHeightCostBlock(Ctx ctx, double weight)
      : ctx_(std::move(ctx)), scale_(std::sqrt(weight)) {}
  std::string name() const override { return "swing_height"; }
  int residual_count() const override {
    int n = 0;
    for (const auto& f : ctx_->layout.feet()) n += f.swing_count;
    return n;
  }
  void eval(const Eigen::VectorXd& x, const Reconstruction&, Eigen::VectorXd* r,
            int offset) const override {
    int row = offset;
    for (int f = 0; f < 4; ++f) {
      for (int j = 0; j < ctx_->layout.feet()[f].swing_count; ++j) {
        const double az = x[ctx_->layout.apex_var(f, j, 2)];
        double m, w0, w1, wt;
        smooth_max(x, f, j, &m, &w0, &w1, &wt);
        (*r)[row++] = scale_ * (az - m - ctx_->config.swing_clearance);
      }
    }
  }
  void jacobian(const Eigen::VectorXd& x, const Reconstruction&,
                int row_offset, Triplets* out) const override {
    int row = row_offset;
    for (int f = 0; f < 4; ++f) {
      for (int j = 0; j < ctx_->layout.feet()[f].swing_count; ++j) {
        double m, w0, w1, wt;
        smooth_max(x, f, j, &m, &w0, &w1, &wt);
        const double ax = x[ctx_->layout.apex_var(f, j, 0)];
        const double ay = x[ctx_->layout.apex_var(f, j, 1)];
        const Eigen::Vector2d g = ctx_->terrain.height_gradient(ax, ay);
        out->emplace_back(row, ctx_->layout.apex_var(f, j, 2), scale_);
        out->emplace_back(row, ctx_->layout.stance_pos_var(f, j, 2),
                          -scale_ * w0);
        out->emplace_back(row, ctx_->layout.stance_pos_var(f, j + 1, 2),
                          -scale_ * w1);
        out->emplace_back(row, ctx_->layout.apex_var(f, j, 0),
                          -scale_ * wt * g.x());
        out->emplace_back(row, ctx_->layout.apex_var(f, j, 1),
                          -scale_ * wt * g.y());
        ++row;
      }
    }
  }

 private:
  static constexpr double kTemperature = 0.01;  // m, smoothing of the max
  void smooth_max(const Eigen::VectorXd& x, int f, int j, double* m,
                  double* w0, double* w1, double* wt) const {
    const double z0 = x[ctx_->layout.stance_pos_var(f, j, 2)];
    const double z1 = x[ctx_->layout.stance_pos_var(f, j + 1, 2)];
    const double ax = x[ctx_->layout.apex_var(f, j, 0)];
    const double ay = x[ctx_->layout.apex_var(f, j, 1)];
    const double zt = ctx_->terrain.height_at(ax, ay);
    const double top = std::max({z0, z1, zt});
    const double e0 = std::exp((z0 - top) / kTemperature);
    const double e1 = std::exp((z1 - top) / kTemperature);
    const double et = std::exp((zt - top) / kTemperature);
    const double sum = e0 + e1 + et;
    *m = top + kTemperature * std::log(sum);
    *w0 = e0 / sum;
    *w1 = e1 / sum;
    *wt = et / sum;
  }

  Ctx ctx_;
  double scale_;
};

// Softplus penalty on the swing foot dipping under the terrain (plus a
// small margin) at fixed sample times inside each nominal swing window.
// Node-level constraints cannot see the spline crossing a step edge
// between nodes; this cost samples the interior. Times come from the
// default schedule, so with optimized phase durations the samples are
// approximate; the duration regularizer keeps the timing close.
class SwingCollisionCostBlock final : public CostBlock {
 public:
  static constexpr double kMargin = 0.05;       // m above the terrain
  static constexpr double kSharpness = 0.01;    // m, softplus temperature

  SwingCollisionCostBlock(Ctx ctx, double weight) : ctx_(std::move(ctx)) {
    // Dense fractions: with optimized durations the true swing window can
    // drift from the default schedule, so the samples need to blanket it.
    const std::array<double, 13> fractions{0.08, 0.15, 0.22, 0.29, 0.36,
                                           0.43, 0.50, 0.57, 0.64, 0.71,
                                           0.78, 0.85, 0.92};
    for (int f = 0; f < 4; ++f) {
      double t0 = 0.0;
      for (const auto& phase : ctx_->default_schedules[f].phases) {
        if (!phase.is_stance) {
          const double measure = phase.duration / fractions.size();
          for (const double a : fractions) {
            samples_.push_back({f, t0 + a * phase.duration,
                                std::sqrt(weight * measure)});
          }
        }
        t0 += phase.duration;
      }
    }
  }
  std::string name() const override { return "swing_collision"; }
  int residual_count() const override {
    return static_cast<int>(samples_.size());
  }
  void eval(const Eigen::VectorXd&, const Reconstruction& rec,
            Eigen::VectorXd* r, int offset) const override {
    for (size_t i = 0; i < samples_.size(); ++i) {
      const Sample& s = samples_[i];
      const Eigen::Vector3d p = eval3(rec.foot_motion[s.foot], s.t, 0);
      const double u =
          ctx_->terrain.height_at(p.x(), p.y()) + kMargin - p.z();
      (*r)[offset + static_cast<int>(i)] = s.scale * softplus(u);
    }
  }
  void jacobian(const Eigen::VectorXd&, const Reconstruction& rec,
                int row_offset, Triplets* out) const override {
    for (size_t i = 0; i < samples_.size(); ++i) {
      const Sample& s = samples_[i];
      const Eigen::Vector3d p = eval3(rec.foot_motion[s.foot], s.t, 0);
      const double u =
          ctx_->terrain.height_at(p.x(), p.y()) + kMargin - p.z();
      const Eigen::Vector2d g = ctx_->terrain.height_gradient(p.x(), p.y());
      const double slope = s.scale * logistic(u);
      Eigen::Matrix<double, 1, 3> d;
      d << slope * g.x(), slope * g.y(), -slope;
      ctx_->foot_map(s.foot).scatter(
          d, param_jacobian(rec.foot_motion[s.foot], s.t, 0),
          row_offset + static_cast<int>(i), out);
    }
  }

 private:
  static double softplus(double u) {
    if (u > 40.0 * kSharpness) return u;
    return kSharpness * std::log1p(std::exp(u / kSharpness));
  }
  static double logistic(double u) {
    return 1.0 / (1.0 + std::exp(-u / kSharpness));
  }

  struct Sample {
    int foot;
    double t;
    double scale;
  };
  Ctx ctx_;
  std::vector<Sample> samples_;
};

// Soft Newton-Euler balance residuals between the hard collocation points.
// The base acceleration is linear per segment while the forces are cubic,
// so the dynamics constraint at the grid leaves the in-segment acceleration
// slope free; penalizing the full rigid-body residual at interior and
// left-limit samples keeps the open-loop drift per interval near zero
// without thinning the feasible manifold with extra equality rows. Scaled
// by 1/mass like the hard dynamics rows.
class DynamicConsistencyCostBlock final : public CostBlock {
 public:
  DynamicConsistencyCostBlock(Ctx ctx, double weight) : ctx_(std::move(ctx)) {
    const std::vector<double> grid = grid_times(ctx_->config);
    const int sub = std::max(ctx_->config.dynamics_samples_per_dt, 1);
    std::vector<double> fractions;
    for (int j = 1; j < sub; ++j) {
      fractions.push_back(static_cast<double>(j) / sub);
    }
    fractions.push_back(1.0 - 1e-7);
    for (size_t i = 0; i + 1 < grid.size(); ++i) {
      const double len = grid[i + 1] - grid[i];
      const double measure = len / static_cast<double>(fractions.size());
      for (const double s : fractions) {
        times_.push_back(grid[i] + len * s);
        scales_.push_back(std::sqrt(weight * measure) / ctx_->robot.mass);
      }
    }
  }
  std::string name() const override { return "dynamic_consistency"; }
  int residual_count() const override {
    return 6 * static_cast<int>(times_.size());
  }
  void eval(const Eigen::VectorXd&, const Reconstruction& rec,
            Eigen::VectorXd* r, int offset) const override {
    for (size_t i = 0; i < times_.size(); ++i) {
      const double t = times_[i];
      const BaseState st = base_state(rec, t);
      std::vector<Eigen::Vector3d> feet, forces;
      gather(rec, t, &feet, &forces);
      r->segment<6>(offset + 6 * static_cast<int>(i)) =
          scales_[i] * srbd_residual(st, feet, forces, ctx_->robot);
    }
  }
  void jacobian(const Eigen::VectorXd&, const Reconstruction& rec,
                int row_offset, Triplets* out) const override {
    for (size_t i = 0; i < times_.size(); ++i) {
      const double t = times_[i];
      const int row = row_offset + 6 * static_cast<int>(i);
      const double sc = scales_[i];
      const BaseState st = base_state(rec, t);
      std::vector<Eigen::Vector3d> feet, forces;
      gather(rec, t, &feet, &forces);
      const SrbdJacobian jac =
          srbd_residual_jacobian(st, feet, forces, ctx_->robot);
      const AngularKinematics kin = angular_kinematics(
          st.orientation, eval3(rec.base_angular(), t, 1),
          eval3(rec.base_angular(), t, 2));

      const SplineMap& lin = ctx_->base_lin_map();
      lin.scatter(sc * jac.d_position,
                  param_jacobian(rec.base_linear(), t, 0), row, out);
      lin.scatter(sc * jac.d_linear_acceleration,
                  param_jacobian(rec.base_linear(), t, 2), row, out);

      const SplineMap& ang = ctx_->base_ang_map();
      const Matrix63d m0 = jac.d_orientation +
                           jac.d_angular_velocity * kin.d_omega_d_euler +
                           jac.d_angular_acceleration * kin.d_omega_dot_d_euler;
      const Matrix63d m1 = jac.d_angular_velocity * kin.d_omega_d_rate +
                           jac.d_angular_acceleration * kin.d_omega_dot_d_rate;
      const Matrix63d m2 =
          jac.d_angular_acceleration * kin.d_omega_dot_d_accel;
      ang.scatter(sc * m0, param_jacobian(rec.base_angular(), t, 0), row, out);
      ang.scatter(sc * m1, param_jacobian(rec.base_angular(), t, 1), row, out);
      ang.scatter(sc * m2, param_jacobian(rec.base_angular(), t, 2), row, out);

      for (int f = 0; f < 4; ++f) {
        ctx_->foot_map(f).scatter(sc * jac.d_foot_position[f],
                                  param_jacobian(rec.foot_motion[f], t, 0),
                                  row, out);
        ctx_->force_map(f).scatter(sc * jac.d_force[f],
                                   param_jacobian(rec.foot_force[f], t, 0),
                                   row, out);
      }
    }
  }

 private:
  BaseState base_state(const Reconstruction& rec, double t) const {
    BaseState st;
    st.position = eval3(rec.base_linear(), t, 0);
    st.linear_acceleration = eval3(rec.base_linear(), t, 2);
    st.orientation = eval3(rec.base_angular(), t, 0);
    const AngularKinematics kin = angular_kinematics(
        st.orientation, eval3(rec.base_angular(), t, 1),
        eval3(rec.base_angular(), t, 2));
    st.angular_velocity = kin.omega;
    st.angular_acceleration = kin.omega_dot;
    return st;
  }
  void gather(const Reconstruction& rec, double t,
              std::vector<Eigen::Vector3d>* feet,
              std::vector<Eigen::Vector3d>* forces) const {
    for (int f = 0; f < 4; ++f) {
      feet->push_back(eval3(rec.foot_motion[f], t, 0));
      forces->push_back(eval3(rec.foot_force[f], t, 0));
    }
  }

  Ctx ctx_;
  std::vector<double> times_;
  std::vector<double> scales_;
};

// Quadratic pull of the phase durations toward the default gait timing.
// Without it the force cost rewards collapsing stance phases (a shorter
// stance integrates less force error), which drags the timing into an
// infeasible corner where the dependent final stance vanishes.
class DurationRegCostBlock final : public CostBlock {
 public:
  DurationRegCostBlock(Ctx ctx, double weight)
      : ctx_(std::move(ctx)), scale_(std::sqrt(weight)) {
    for (int f = 0; f < 4; ++f) {
      const int k = ctx_->layout.feet()[f].swing_count;
      if (k == 0 || ctx_->layout.feet()[f].duration_start < 0) continue;
      const auto& ph = ctx_->default_schedules[f].phases;
      vars_.push_back(ctx_->layout.duration_var(f, 0));
      refs_.push_back(ph[0].duration);
      for (int j = 0; j < k; ++j) {
        vars_.push_back(ctx_->layout.duration_var(f, 1 + j));
        refs_.push_back(ph[2 * j + 1].duration);
      }
      for (int m = 1; m < k; ++m) {
        vars_.push_back(ctx_->layout.duration_var(f, k + m));
        refs_.push_back(ph[2 * m].duration);
      }
    }
  }
  std::string name() const override { return "duration"; }
  int residual_count() const override { return static_cast<int>(vars_.size()); }
  void eval(const Eigen::VectorXd& x, const Reconstruction&, Eigen::VectorXd* r,
            int offset) const override {
    for (size_t i = 0; i < vars_.size(); ++i) {
      (*r)[offset + static_cast<int>(i)] = scale_ * (x[vars_[i]] - refs_[i]);
    }
  }
  void jacobian(const Eigen::VectorXd&, const Reconstruction&, int row_offset,
                Triplets* out) const override {
    for (size_t i = 0; i < vars_.size(); ++i) {
      out->emplace_back(row_offset + static_cast<int>(i), vars_[i], scale_);
    }
  }

 private:
  Ctx ctx_;
  double scale_;
  std::vector<int> vars_;
  std::vector<double> refs_;
};

std::vector<int> force_stance_segments(int swing_count) {
  std::vector<int> out;
  for (int s = 0; s <= swing_count; ++s) {
    out.push_back(4 * s);
    out.push_back(4 * s + 1);
    out.push_back(4 * s + 2);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// NlpProblem
// ---------------------------------------------------------------------------

Reconstruction NlpProblem::reconstruct(const Eigen::VectorXd& x) const {
  Reconstruction rec;
  rec.base.push_back(ctx_->base_lin_map().materialize(x));
  rec.base.push_back(ctx_->base_ang_map().materialize(x));
  for (int f = 0; f < 4; ++f) {
    rec.foot_motion.push_back(ctx_->foot_map(f).materialize(x));
  }
  for (int f = 0; f < 4; ++f) {
    rec.foot_force.push_back(ctx_->force_map(f).materialize(x));
  }
  rec.schedules = schedules_from_vector(ctx_->layout, ctx_->config, x);
  return rec;
}

void NlpProblem::eval_constraints(const Eigen::VectorXd& x,
                                  Eigen::VectorXd* out) const {
  out->resize(constraint_rows_);
  const Reconstruction rec = reconstruct(x);
  for (size_t i = 0; i < constraints_.size(); ++i) {
    constraints_[i]->eval(x, rec, out, c_infos_[i].row_start);
  }
}

void NlpProblem::constraint_jacobian(const Eigen::VectorXd& x,
                                     Triplets* out) const {
  const Reconstruction rec = reconstruct(x);
  for (size_t i = 0; i < constraints_.size(); ++i) {
    constraints_[i]->jacobian(x, rec, c_infos_[i].row_start, out);
  }
}

void NlpProblem::cost_residuals(const Eigen::VectorXd& x,
                                Eigen::VectorXd* out) const {
  out->resize(cost_rows_);
  const Reconstruction rec = reconstruct(x);
  int offset = 0;
  for (const auto& block : costs_) {
    block->eval(x, rec, out, offset);
    offset += block->residual_count();
  }
}

void NlpProblem::cost_jacobian(const Eigen::VectorXd& x, Triplets* out) const {
  const Reconstruction rec = reconstruct(x);
  int offset = 0;
  for (const auto& block : costs_) {
    block->jacobian(x, rec, offset, out);
    offset += block->residual_count();
  }
}

double NlpProblem::cost(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
  Eigen::VectorXd r;
  cost_residuals(x, &r);
  if (grad != nullptr) {
    grad->setZero(var_count());
    Triplets trips;
    cost_jacobian(x, &trips);
    for (const auto& t : trips) {
      (*grad)[t.col()] += 2.0 * t.value() * r[t.row()];
    }
  }
  return r.squaredNorm();
}

double NlpProblem::max_violation(const Eigen::VectorXd& x) const {
  Eigen::VectorXd c;
  eval_constraints(x, &c);
  double v = 0.0;
  for (int i = 0; i < c.size(); ++i) {
    v = std::max({v, c_lo_[i] - c[i], c[i] - c_hi_[i]});
  }
  return v;
}

std::map<std::string, double> NlpProblem::cost_term_values(
    const Eigen::VectorXd& x) const {
  Eigen::VectorXd r;
  cost_residuals(x, &r);
  std::map<std::string, double> out;
  int offset = 0;
  for (const auto& block : costs_) {
    out[block->name()] +=
        r.segment(offset, block->residual_count()).squaredNorm();
    offset += block->residual_count();
  }
  return out;
}

void NlpProblem::freeze_variables(const std::vector<int>& indices,
                                  const Eigen::VectorXd& values) {
  if (static_cast<int>(indices.size()) != values.size()) {
    throw std::invalid_argument("freeze_variables size mismatch");
  }
  auto block = std::make_unique<FrozenBlock>(indices, values);
  const int rows = block->rows();
  c_infos_.push_back({block->name(), constraint_rows_, rows});
  c_lo_.conservativeResize(constraint_rows_ + rows);
  c_hi_.conservativeResize(constraint_rows_ + rows);
  block->bounds(&c_lo_, &c_hi_, constraint_rows_);
  constraint_rows_ += rows;
  constraints_.push_back(std::move(block));
}

std::array<PhaseSchedule, 4> schedules_from_vector(
    const VariableLayout& layout, const ProblemConfig& config,
    const Eigen::VectorXd& x) {
  std::array<PhaseSchedule, 4> out = default_schedules(config);
  if (!config.optimize_phase_durations) return out;
  for (int f = 0; f < 4; ++f) {
    const int k = layout.feet()[f].swing_count;
    if (k == 0) continue;
    PhaseSchedule s;
    double used = 0.0;
    auto push = [&](bool stance, double d) {
      d = std::max(d, kMinSegmentDuration);
      s.phases.push_back({stance, d});
      used += d;
    };
    push(true, x[layout.duration_var(f, 0)]);
    for (int j = 0; j < k; ++j) {
      push(false, x[layout.duration_var(f, 1 + j)]);
      if (j + 1 < k) push(true, x[layout.duration_var(f, k + 1 + j)]);
    }
    s.phases.push_back(
        {true, std::max(config.horizon - used, kMinSegmentDuration)});
    out[f] = std::move(s);
  }
  return out;
}

Eigen::VectorXd transfer_vector(const VariableLayout& from,
                                const VariableLayout& to,
                                const Eigen::VectorXd& x) {
  if (from.base_node_count() != to.base_node_count()) {
    throw std::invalid_argument("transfer_vector: base grid mismatch");
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(to.total());
  for (int i = 0; i < from.base_node_count(); ++i) {
    for (int c = 0; c < 3; ++c) {
      for (const bool deriv : {false, true}) {
        out[to.base_lin_var(i, c, deriv)] = x[from.base_lin_var(i, c, deriv)];
        out[to.base_ang_var(i, c, deriv)] = x[from.base_ang_var(i, c, deriv)];
      }
    }
  }
  for (int f = 0; f < 4; ++f) {
    const int k = from.feet()[f].swing_count;
    if (k != to.feet()[f].swing_count) {
      throw std::invalid_argument("transfer_vector: swing count mismatch");
    }
    for (int s = 0; s <= k; ++s) {
      for (int c = 0; c < 3; ++c) {
        out[to.stance_pos_var(f, s, c)] = x[from.stance_pos_var(f, s, c)];
      }
    }
    for (int j = 0; j < k; ++j) {
      for (int c = 0; c < 5; ++c) {
        out[to.apex_var(f, j, c)] = x[from.apex_var(f, j, c)];
      }
    }
    for (int vn = 0; vn < from.force_var_node_count(f); ++vn) {
      for (int c = 0; c < 6; ++c) {
        out[to.force_var(f, vn, c)] = x[from.force_var(f, vn, c)];
      }
    }
    if (from.feet()[f].duration_start >= 0 && to.feet()[f].duration_start >= 0) {
      for (int j = 0; j < 2 * k; ++j) {
        out[to.duration_var(f, j)] = x[from.duration_var(f, j)];
      }
    }
  }
  return out;
}

void write_durations(const VariableLayout& layout,
                     const std::array<PhaseSchedule, 4>& schedules,
                     Eigen::VectorXd* x) {
  for (int f = 0; f < 4; ++f) {
    const int k = layout.feet()[f].swing_count;
    if (k == 0 || layout.feet()[f].duration_start < 0) continue;
    const auto& ph = schedules[f].phases;
    (*x)[layout.duration_var(f, 0)] = ph[0].duration;
    for (int j = 0; j < k; ++j) {
      (*x)[layout.duration_var(f, 1 + j)] = ph[2 * j + 1].duration;
    }
    for (int m = 1; m < k; ++m) {
      (*x)[layout.duration_var(f, k + m)] = ph[2 * m].duration;
    }
  }
}

NlpProblem build(const ProblemConfig& config, const Terrain& terrain,
                 const RobotParams& robot, const Task& task,
                 const std::array<PhaseSchedule, 4>* schedule_override) {
  config.validate();
  robot.validate();

  auto ctx = std::make_shared<ProblemContext>();
  ctx->config = config;
  ctx->robot = robot;
  ctx->terrain = terrain;
  ctx->task = task;
  ctx->layout = VariableLayout::Build(config);
  ctx->default_schedules =
      schedule_override != nullptr ? *schedule_override
                                   : default_schedules(config);
  if (schedule_override != nullptr) {
    const auto counts = swing_counts(config);
    for (int f = 0; f < 4; ++f) {
      if (static_cast<int>(ctx->default_schedules[f].phases.size()) !=
          2 * counts[f] + 1) {
        throw std::invalid_argument("schedule override shape mismatch");
      }
    }
  }

  // Reachability: the average stride a foot has to cover per swing must fit
  // the leg workspace with margin.
  const double dist =
      (task.goal_base_position - task.initial_base_position).head<2>().norm();
  const auto counts = swing_counts(config);
  const double max_stride = 4.0 * robot.kinematic_box_half_extents.x();
  for (int f = 0; f < 4; ++f) {
    const double stride = counts[f] > 0 ? dist / counts[f] : dist;
    if (stride > max_stride) {
      throw std::runtime_error("task goal unreachable with this step count");
    }
  }

  ctx->maps.push_back(make_base_map(ctx->layout, config.base_dt, false));
  ctx->maps.push_back(make_base_map(ctx->layout, config.base_dt, true));
  std::array<DurationForms, 4> forms;
  for (int f = 0; f < 4; ++f) {
    forms[f] = duration_forms(ctx->layout, f, ctx->default_schedules[f],
                              config.horizon, config.optimize_phase_durations);
    ctx->maps.push_back(make_foot_map(ctx->layout, f, forms[f]));
  }
  for (int f = 0; f < 4; ++f) {
    ctx->maps.push_back(make_force_map(ctx->layout, f, forms[f]));
  }

  NlpProblem p;
  p.ctx_ = ctx;
  const VariableLayout& l = ctx->layout;

  // Variable bounds.
  p.x_lo_ = Eigen::VectorXd::Constant(l.total(), -kInf);
  p.x_hi_ = Eigen::VectorXd::Constant(l.total(), kInf);
  for (int f = 0; f < 4; ++f) {
    for (int vn = 0; vn < l.force_var_node_count(f); ++vn) {
      for (int c = 0; c < 2; ++c) {
        p.x_lo_[l.force_var(f, vn, c)] = -robot.max_force;
        p.x_hi_[l.force_var(f, vn, c)] = robot.max_force;
      }
      p.x_lo_[l.force_var(f, vn, 2)] = 0.0;
      p.x_hi_[l.force_var(f, vn, 2)] = robot.max_force;
    }
    const int k = l.feet()[f].swing_count;
    for (int j = 0; j < (config.optimize_phase_durations ? 2 * k : 0); ++j) {
      p.x_lo_[l.duration_var(f, j)] = config.duration_min;
      p.x_hi_[l.duration_var(f, j)] = config.duration_max;
    }
  }
  // Boundary conditions pin the first and last base node (pose reached at
  // rest, level attitude).
  const int last = l.base_node_count() - 1;
  auto pin = [&](int var, double v) {
    p.x_lo_[var] = v;
    p.x_hi_[var] = v;
  };
  for (int c = 0; c < 3; ++c) {
    pin(l.base_lin_var(0, c, false), task.initial_base_position[c]);
    pin(l.base_lin_var(0, c, true), 0.0);
    pin(l.base_ang_var(0, c, false), c == 2 ? task.initial_yaw : 0.0);
    pin(l.base_ang_var(0, c, true), 0.0);
    pin(l.base_lin_var(last, c, false), task.goal_base_position[c]);
    pin(l.base_lin_var(last, c, true), 0.0);
    pin(l.base_ang_var(last, c, false), c == 2 ? task.goal_yaw : 0.0);
    pin(l.base_ang_var(last, c, true), 0.0);
  }

  // Constraint blocks.
  p.constraints_.push_back(std::make_unique<DynamicsBlock>(ctx));
  p.constraints_.push_back(std::make_unique<KinematicBoxBlock>(ctx));
  p.constraints_.push_back(std::make_unique<FrictionBlock>(ctx));
  p.constraints_.push_back(std::make_unique<TerrainContactBlock>(ctx));
  p.constraints_.push_back(std::make_unique<BaseClearanceBlock>(ctx));
  p.constraints_.push_back(std::make_unique<SwingClearanceBlock>(ctx));
  if (config.optimize_phase_durations) {
    p.constraints_.push_back(std::make_unique<DurationRangeBlock>(ctx));
  }
  int rows = 0;
  for (const auto& block : p.constraints_) {
    p.c_infos_.push_back({block->name(), rows, block->rows()});
    rows += block->rows();
  }
  p.constraint_rows_ = rows;
  p.c_lo_.resize(rows);
  p.c_hi_.resize(rows);
  for (size_t i = 0; i < p.constraints_.size(); ++i) {
    p.constraints_[i]->bounds(&p.c_lo_, &p.c_hi_, p.c_infos_[i].row_start);
  }

  // Cost blocks.
  p.costs_.push_back(std::make_unique<IntegralCostBlock>(
      ctx, "base_z_velocity", 0, 1, Eigen::Vector3d(0, 0, 1),
      config.deriv_weight("base_z_velocity"), std::vector<int>{},
      Eigen::Vector3d::Zero(), config.weight("base_z_velocity")));
  p.costs_.push_back(std::make_unique<IntegralCostBlock>(
      ctx, "base_angular_velocity", 1, 1, Eigen::Vector3d(1, 1, 1),
      config.deriv_weight("base_angular_velocity"), std::vector<int>{},
      Eigen::Vector3d::Zero(), config.weight("base_angular_velocity")));
  for (int f = 0; f < 4; ++f) {
    const auto segs = force_stance_segments(l.feet()[f].swing_count);
    const double duty =
        [&] {
          double stance = 0.0;
          for (const auto& ph : ctx->default_schedules[f].phases) {
            if (ph.is_stance) stance += ph.duration;
          }
          return stance / config.horizon;
        }();
    const double fref =
        config.normal_force_reference >= 0.0
            ? config.normal_force_reference
            : robot.mass * (-robot.gravity.z()) / (robot.leg_count * duty);
    p.costs_.push_back(std::make_unique<IntegralCostBlock>(
        ctx, "force_tangential", 6 + f, 0, Eigen::Vector3d(1, 1, 0),
        config.deriv_weight("force_tangential"), segs, Eigen::Vector3d::Zero(),
        config.weight("force_tangential")));
    p.costs_.push_back(std::make_unique<IntegralCostBlock>(
        ctx, "force_normal", 6 + f, 0, Eigen::Vector3d(0, 0, 1),
        config.deriv_weight("force_normal"), segs,
        Eigen::Vector3d(0, 0, fref), config.weight("force_normal")));
  }
  if (terrain.kind() != TerrainKind::kFlat) {
    p.costs_.push_back(
        std::make_unique<EdgeCostBlock>(ctx, config.weight("edge")));
  }
  p.costs_.push_back(std::make_unique<SwingHeightCostBlock>(
      ctx, config.weight("swing_height")));
  if (terrain.kind() != TerrainKind::kFlat) {
    p.costs_.push_back(std::make_unique<SwingCollisionCostBlock>(
        ctx, config.weight("swing_collision")));
  }
  if (config.optimize_phase_durations) {
    p.costs_.push_back(
        std::make_unique<DurationRegCostBlock>(ctx, config.weight("duration")));
  }
  p.costs_.push_back(std::make_unique<DynamicConsistencyCostBlock>(
      ctx, config.weight("dynamic_consistency")));
  p.cost_rows_ = 0;
  for (const auto& block : p.costs_) p.cost_rows_ += block->residual_count();

  return p;
}

}  // namespace locoplan
