#include "locoplan/solver.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <chrono>
#include <cstdio>
#include <cmath>
#include <limits>

namespace locoplan {
namespace {

using SpMat = Eigen::SparseMatrix<double>;

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMultiplierCap = 1e12;

struct RowKind {
  bool is_eq;
  bool has_lo;
  bool has_hi;
};

struct Multipliers {
  Eigen::VectorXd eq;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct Workspace {
  const NlpProblem& p;
  const SolveOptions& opt;
  std::vector<RowKind> kinds;
  Multipliers mult;
  double rho;

  explicit Workspace(const NlpProblem& problem, const SolveOptions& options)
      : p(problem), opt(options), rho(options.initial_penalty) {
    const int m = p.constraint_count();
    kinds.resize(m);
    for (int i = 0; i < m; ++i) {
      const double lo = p.row_lower()[i], hi = p.row_upper()[i];
      kinds[i] = {lo == hi, std::isfinite(lo), std::isfinite(hi)};
    }
    mult.eq = Eigen::VectorXd::Zero(m);
    mult.lo = Eigen::VectorXd::Zero(m);
    mult.hi = Eigen::VectorXd::Zero(m);
  }

  double cost_value(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    if (opt.feasibility_only) {
      if (grad != nullptr) grad->setZero(p.var_count());
      return 0.0;
    }
    return p.cost(x, grad);
  }

  // Augmented Lagrangian value at x given constraint values c.
  double merit(double f, const Eigen::VectorXd& c) const {
    double m = f;
    for (int i = 0; i < c.size(); ++i) {
      const double lo = p.row_lower()[i], hi = p.row_upper()[i];
      if (kinds[i].is_eq) {
        const double ce = c[i] - lo;
        m += mult.eq[i] * ce + 0.5 * rho * ce * ce;
      } else {
        if (kinds[i].has_lo) {
          const double t = std::max(0.0, mult.lo[i] - rho * (c[i] - lo));
          m += (t * t - mult.lo[i] * mult.lo[i]) / (2.0 * rho);
        }
        if (kinds[i].has_hi) {
          const double t = std::max(0.0, mult.hi[i] - rho * (hi - c[i]));
          m += (t * t - mult.hi[i] * mult.hi[i]) / (2.0 * rho);
        }
      }
    }
    return m;
  }

  // Per-row scalar y such that grad(AL) = grad(f) + Jc^T y, plus the
  // Gauss-Newton penalty weight (rho on the active set).
  void row_terms(const Eigen::VectorXd& c, Eigen::VectorXd* y,
                 Eigen::VectorXd* w) const {
    y->setZero(c.size());
    w->setZero(c.size());
    for (int i = 0; i < c.size(); ++i) {
      const double lo = p.row_lower()[i], hi = p.row_upper()[i];
      if (kinds[i].is_eq) {
        (*y)[i] = mult.eq[i] + rho * (c[i] - lo);
        (*w)[i] = rho;
        continue;
      }
      if (kinds[i].has_lo) {
        const double t = std::max(0.0, mult.lo[i] - rho * (c[i] - lo));
        if (t > 0.0) {
          (*y)[i] -= t;
          (*w)[i] = rho;
        }
      }
      if (kinds[i].has_hi) {
        const double t = std::max(0.0, mult.hi[i] - rho * (hi - c[i]));
        if (t > 0.0) {
          (*y)[i] += t;
          (*w)[i] = rho;
        }
      }
    }
  }

  void update_multipliers(const Eigen::VectorXd& c) {
    for (int i = 0; i < c.size(); ++i) {
      const double lo = p.row_lower()[i], hi = p.row_upper()[i];
      if (kinds[i].is_eq) {
        mult.eq[i] = std::clamp(mult.eq[i] + rho * (c[i] - lo),
                                -kMultiplierCap, kMultiplierCap);
        continue;
      }
      if (kinds[i].has_lo) {
        mult.lo[i] = std::min(std::max(0.0, mult.lo[i] - rho * (c[i] - lo)),
                              kMultiplierCap);
      }
      if (kinds[i].has_hi) {
        mult.hi[i] = std::min(std::max(0.0, mult.hi[i] - rho * (hi - c[i])),
                              kMultiplierCap);
      }
    }
  }
};

Eigen::VectorXd project(const NlpProblem& p, Eigen::VectorXd x) {
  for (int i = 0; i < x.size(); ++i) {
    x[i] = std::clamp(x[i], p.lower_bounds()[i], p.upper_bounds()[i]);
  }
  return x;
}

double violation(const NlpProblem& p, const Eigen::VectorXd& c) {
  double v = 0.0;
  for (int i = 0; i < c.size(); ++i) {
    v = std::max({v, p.row_lower()[i] - c[i], c[i] - p.row_upper()[i]});
  }
  return v;
}

// First-order optimality: fit multipliers to the active rows by least
// squares over the free variables and measure the residual gradient.
bool first_order_optimal(const NlpProblem& p, const SolveOptions& opt,
                         const Eigen::VectorXd& x,
                         const Eigen::VectorXd& f_grad, const SpMat& jc,
                         const Eigen::VectorXd& c) {
  const double act_tol = 10.0 * opt.constraint_tol;
  std::vector<int> row_index(c.size(), -1);
  int m_act = 0;
  for (int i = 0; i < c.size(); ++i) {
    const double lo = p.row_lower()[i], hi = p.row_upper()[i];
    const bool active = (lo == hi) ||
                        (std::isfinite(lo) && c[i] - lo <= act_tol) ||
                        (std::isfinite(hi) && hi - c[i] <= act_tol);
    if (active) row_index[i] = m_act++;
  }
  std::vector<int> col_index(x.size(), -1);
  int n_free = 0;
  for (int j = 0; j < x.size(); ++j) {
    if (x[j] - p.lower_bounds()[j] > 1e-8 &&
        p.upper_bounds()[j] - x[j] > 1e-8) {
      col_index[j] = n_free++;
    }
  }

  Eigen::VectorXd g_free(n_free);
  for (int j = 0; j < x.size(); ++j) {
    if (col_index[j] >= 0) g_free[col_index[j]] = f_grad[j];
  }
  const double scale = 1.0 + g_free.lpNorm<Eigen::Infinity>();

  if (m_act == 0) {
    return g_free.lpNorm<Eigen::Infinity>() <= opt.optimality_tol * scale;
  }

  std::vector<Eigen::Triplet<double>> trips;
  for (int j = 0; j < jc.outerSize(); ++j) {
    if (col_index[j] < 0) continue;
    for (SpMat::InnerIterator it(jc, j); it; ++it) {
      if (row_index[it.row()] >= 0) {
        trips.emplace_back(row_index[it.row()], col_index[j], it.value());
      }
    }
  }
  SpMat a(m_act, n_free);
  a.setFromTriplets(trips.begin(), trips.end());

  SpMat normal = SpMat(a * a.transpose());
  SpMat eye(m_act, m_act);
  eye.setIdentity();
  normal += 1e-10 * eye;
  Eigen::SimplicialLDLT<SpMat> ldlt(normal);
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::VectorXd nu = ldlt.solve(-(a * g_free));
  const Eigen::VectorXd resid = g_free + a.transpose() * nu;
  return resid.lpNorm<Eigen::Infinity>() <= opt.optimality_tol * scale;
}

// Least-squares multiplier fit at a near-feasible starting point. With
// zero multipliers the first augmented-Lagrangian subproblem is biased
// away from the constrained optimum by O(1/rho), which throws away the
// advantage of a good warm start; seeding the multipliers from the same
// active-set fit the optimality test uses removes that bias.
void warm_start_multipliers(const NlpProblem& p, const SolveOptions& opt,
                            const Eigen::VectorXd& x,
                            const Eigen::VectorXd& f_grad, const SpMat& jc,
                            const Eigen::VectorXd& c, Workspace* ws) {
  const double act_tol = 10.0 * opt.constraint_tol;
  std::vector<int> row_index(c.size(), -1);
  int m_act = 0;
  for (int i = 0; i < c.size(); ++i) {
    const double lo = p.row_lower()[i], hi = p.row_upper()[i];
    const bool active = (lo == hi) ||
                        (std::isfinite(lo) && c[i] - lo <= act_tol) ||
                        (std::isfinite(hi) && hi - c[i] <= act_tol);
    if (active) row_index[i] = m_act++;
  }
  if (m_act == 0) return;
  std::vector<int> col_index(x.size(), -1);
  int n_free = 0;
  for (int j = 0; j < x.size(); ++j) {
    if (x[j] - p.lower_bounds()[j] > 1e-8 &&
        p.upper_bounds()[j] - x[j] > 1e-8) {
      col_index[j] = n_free++;
    }
  }
  Eigen::VectorXd g_free(n_free);
  for (int j = 0; j < x.size(); ++j) {
    if (col_index[j] >= 0) g_free[col_index[j]] = f_grad[j];
  }
  std::vector<Eigen::Triplet<double>> trips;
  for (int j = 0; j < jc.outerSize(); ++j) {
    if (col_index[j] < 0) continue;
    for (SpMat::InnerIterator it(jc, j); it; ++it) {
      if (row_index[it.row()] >= 0) {
        trips.emplace_back(row_index[it.row()], col_index[j], it.value());
      }
    }
  }
  SpMat a(m_act, n_free);
  a.setFromTriplets(trips.begin(), trips.end());
  SpMat normal = SpMat(a * a.transpose());
  SpMat eye(m_act, m_act);
  eye.setIdentity();
  normal += 1e-8 * eye;
  Eigen::SimplicialLDLT<SpMat> ldlt(normal);
  if (ldlt.info() != Eigen::Success) return;
  const Eigen::VectorXd nu = ldlt.solve(-(a * g_free));

  for (int i = 0; i < c.size(); ++i) {
    if (row_index[i] < 0) continue;
    const double y = std::clamp(nu[row_index[i]], -kMultiplierCap,
                                kMultiplierCap);
    const double lo = p.row_lower()[i], hi = p.row_upper()[i];
    if (lo == hi) {
      ws->mult.eq[i] = y;
    } else {
      // row_terms uses y = -mult_lo + mult_hi on active inequality rows.
      if (std::isfinite(lo) && y < 0.0) ws->mult.lo[i] = -y;
      if (std::isfinite(hi) && y > 0.0) ws->mult.hi[i] = y;
    }
  }
}

// Per-foot linear forms of the dependent final stance duration,
// value = horizon - sum of the foot's duration variables. The spline
// segment behind this form degenerates as the value approaches zero
// (duration Jacobians scale like 1/duration^2), so the line search keeps
// every form strictly positive with a fraction-to-boundary rule.
struct DurationForm {
  std::vector<int> vars;
  double horizon;
  double value(const Eigen::VectorXd& x) const {
    double v = horizon;
    for (int j : vars) v -= x[j];
    return v;
  }
};

std::vector<DurationForm> dependent_duration_forms(const NlpProblem& p) {
  std::vector<DurationForm> forms;
  const VariableLayout& layout = p.layout();
  for (int f = 0; f < 4; ++f) {
    const auto& foot = layout.feet()[f];
    if (foot.duration_start < 0 || foot.swing_count == 0) continue;
    DurationForm form;
    form.horizon = p.config().horizon;
    for (int j = 0; j < 2 * foot.swing_count; ++j) {
      form.vars.push_back(layout.duration_var(f, j));
    }
    forms.push_back(std::move(form));
  }
  return forms;
}

}  // namespace

SolveResult solve(const NlpProblem& problem, const Eigen::VectorXd& x0,
                  const SolveOptions& options) {
  const double t_start = now_ms();
  const int n = problem.var_count();
  if (x0.size() != n) {
    throw std::invalid_argument("solve: initial point has wrong size");
  }

  Workspace ws(problem, options);
  Eigen::VectorXd x = project(problem, x0);

  // Repair initial points whose duration variables leave no room for the
  // dependent final stance (possible for predicted warm starts).
  const std::vector<DurationForm> dur_forms = dependent_duration_forms(problem);
  const double dur_floor = problem.config().duration_min;
  for (const DurationForm& form : dur_forms) {
    for (int pass = 0; pass < 5 && form.value(x) < dur_floor; ++pass) {
      double sum = form.horizon - form.value(x);
      const double f = (form.horizon - dur_floor) / std::max(sum, 1e-12);
      for (int j : form.vars) x[j] *= f;
      x = project(problem, x);
    }
  }

  SpMat eye(n, n);
  eye.setIdentity();

  double nu_damp = options.initial_damping;
  // Feasibility target for the safeguarded multiplier update: multipliers
  // are refreshed only when the iterate is close enough to feasible,
  // otherwise the penalty grows (classic LANCELOT-style schedule).
  double eta = 1.0 / std::pow(ws.rho, 0.1);

  SolveResult out;
  Eigen::VectorXd c, f_grad, r;

  // Near-feasible starting points (predicted warm starts) carry usable
  // multiplier information; fit it once up front. Far starts do not.
  problem.eval_constraints(x, &c);
  if (violation(problem, c) <= options.warm_start_viol) {
    std::vector<Eigen::Triplet<double>> jc_trips;
    problem.constraint_jacobian(x, &jc_trips);
    SpMat jc(problem.constraint_count(), n);
    jc.setFromTriplets(jc_trips.begin(), jc_trips.end());
    ws.cost_value(x, &f_grad);
    warm_start_multipliers(problem, options, x, f_grad, jc, c, &ws);
  }

  auto finish = [&](bool converged, const std::string& msg) {
    out.converged = converged;
    out.message = msg;
    problem.eval_constraints(x, &c);
    out.violation = violation(problem, c);
    out.cost = problem.cost(x);
    out.x = x;
    out.wall_time_ms = now_ms() - t_start;
    return out;
  };

  while (true) {
    bool inner_stalled = false;
    for (int inner = 0; inner < options.inner_iterations; ++inner) {
      const double t_iter = now_ms();
      // Full evaluation at x.
      problem.eval_constraints(x, &c);
      std::vector<Eigen::Triplet<double>> jc_trips;
      problem.constraint_jacobian(x, &jc_trips);
      SpMat jc(problem.constraint_count(), n);
      jc.setFromTriplets(jc_trips.begin(), jc_trips.end());

      const double f = ws.cost_value(x, &f_grad);
      const double viol = violation(problem, c);

      if (viol <= options.constraint_tol &&
          first_order_optimal(problem, options, x, f_grad, jc, c)) {
        return finish(true, "converged");
      }
      if (out.iterations >= options.max_iterations) {
        return finish(false, "iteration limit");
      }

      // Augmented-Lagrangian gradient and Gauss-Newton model.
      Eigen::VectorXd y, w;
      ws.row_terms(c, &y, &w);
      const Eigen::VectorXd g = f_grad + jc.transpose() * y;

      SpMat h(n, n);
      if (!options.feasibility_only) {
        std::vector<Eigen::Triplet<double>> jf_trips;
        problem.cost_jacobian(x, &jf_trips);
        SpMat jf(problem.cost_residual_count(), n);
        jf.setFromTriplets(jf_trips.begin(), jf_trips.end());
        h = SpMat(2.0 * (jf.transpose() * jf));
      }
      h += SpMat(jc.transpose() * (w.asDiagonal() * jc));

      // Reduce the Newton system to the free variables: pinned variables
      // (lo == hi) and variables pressed against a bound by the gradient
      // would otherwise dominate the step only for projection to undo it.
      std::vector<int> free_index(n, -1);
      int n_free = 0;
      for (int j = 0; j < n; ++j) {
        const double lo = problem.lower_bounds()[j];
        const double hi = problem.upper_bounds()[j];
        const double eps = 1e-11 * (1.0 + std::abs(x[j]));
        if (lo == hi) continue;
        if (x[j] - lo <= eps && g[j] > 0.0) continue;
        if (hi - x[j] <= eps && g[j] < 0.0) continue;
        free_index[j] = n_free++;
      }
      Eigen::VectorXd g_free(n_free);
      std::vector<Eigen::Triplet<double>> h_trips;
      for (int j = 0; j < n; ++j) {
        if (free_index[j] < 0) continue;
        g_free[free_index[j]] = g[j];
        for (SpMat::InnerIterator it(h, j); it; ++it) {
          if (free_index[it.row()] >= 0) {
            h_trips.emplace_back(free_index[it.row()], free_index[j],
                                 it.value());
          }
        }
      }
      SpMat h_free(n_free, n_free);
      h_free.setFromTriplets(h_trips.begin(), h_trips.end());
      SpMat eye_free(n_free, n_free);
      eye_free.setIdentity();

      const double m0 = ws.merit(f, c);
      bool accepted = false;
      while (!accepted) {
        Eigen::SimplicialLLT<SpMat> llt(SpMat(h_free + nu_damp * eye_free));
        if (llt.info() != Eigen::Success) {
          nu_damp *= 10.0;
          if (nu_damp > 1e10) break;
          continue;
        }
        const Eigen::VectorXd d_free = llt.solve(-g_free);
        Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
        for (int j = 0; j < n; ++j) {
          if (free_index[j] >= 0) d[j] = d_free[free_index[j]];
        }
        double alpha = 1.0;
        for (int ls = 0; ls < options.max_line_search; ++ls) {
          const Eigen::VectorXd xt = project(problem, x + alpha * d);
          const Eigen::VectorXd dx = xt - x;
          if (dx.lpNorm<Eigen::Infinity>() < 1e-14) break;
          bool degenerate = false;
          for (const DurationForm& form : dur_forms) {
            if (form.value(xt) < 0.005 * std::max(form.value(x), 1e-6)) {
              degenerate = true;
              break;
            }
          }
          if (degenerate) {
            alpha *= 0.5;
            continue;
          }
          Eigen::VectorXd ct;
          problem.eval_constraints(xt, &ct);
          const double ft = ws.cost_value(xt, nullptr);
          const double mt = ws.merit(ft, ct);
          const double pred = g.dot(dx);
          const bool ok = pred < 0.0
                              ? mt <= m0 + options.armijo_slope * pred
                              : mt < m0 - 1e-12;
          if (ok) {
            x = xt;
            accepted = true;
            ++out.iterations;
            IterationStat stat;
            stat.cost = ft;
            stat.violation = violation(problem, ct);
            stat.step_norm = dx.norm();
            stat.wall_ms = now_ms() - t_iter;
            stat.step_scale = alpha;
            out.trace.push_back(stat);
            // Levenberg-Marquardt-style damping control: a full step means
            // the local model is trustworthy, a heavily cut step means the
            // unregularized direction overshoots.
            if (alpha >= 0.9) {
              nu_damp = std::max(nu_damp * 0.35, 1e-9);
            } else if (alpha < 0.25) {
              nu_damp = std::min(nu_damp * std::min(0.25 / alpha, 16.0), 1e8);
            }
            // Inner subproblem solved to working accuracy: move on to the
            // multiplier update instead of polishing further.
            if (m0 - mt <= 1e-6 * (1.0 + std::abs(m0)) ||
                dx.lpNorm<Eigen::Infinity>() < 1e-10) {
              inner = options.inner_iterations;
            }
            break;
          }
          alpha *= 0.5;
        }
        if (!accepted) {
          nu_damp *= 10.0;
          if (nu_damp > 1e10) break;
        }
      }
      if (!accepted) {
        inner_stalled = true;
        break;
      }
    }

    // Outer update.
    problem.eval_constraints(x, &c);
    const double viol = violation(problem, c);
    if (options.verbose) {
      std::fprintf(stderr,
                   "outer: it=%d viol=%.3e rho=%.1e eta=%.3e cost=%.4e %s\n",
                   out.iterations, viol, ws.rho, eta, problem.cost(x),
                   viol <= std::max(eta, options.constraint_tol) ? "mult"
                                                                 : "rho");
    }
    if (viol <= std::max(eta, options.constraint_tol)) {
      ws.update_multipliers(c);
      eta = std::max(eta / std::pow(ws.rho, 0.9),
                     0.1 * options.constraint_tol);
    } else {
      ws.rho = std::min(ws.rho * options.penalty_growth, options.max_penalty);
      eta = std::max(1.0 / std::pow(ws.rho, 0.1),
                     0.1 * options.constraint_tol);
    }

    if (inner_stalled && ws.rho >= options.max_penalty) {
      // One last optimality check with the updated multipliers.
      std::vector<Eigen::Triplet<double>> jc_trips;
      problem.constraint_jacobian(x, &jc_trips);
      SpMat jc(problem.constraint_count(), n);
      jc.setFromTriplets(jc_trips.begin(), jc_trips.end());
      ws.cost_value(x, &f_grad);
      if (viol <= options.constraint_tol &&
          first_order_optimal(problem, options, x, f_grad, jc, c)) {
        return finish(true, "converged");
      }
      return finish(false, "stalled");
    }
    if (inner_stalled) nu_damp = options.initial_damping;
    if (out.iterations >= options.max_iterations) {
      std::vector<Eigen::Triplet<double>> jc_trips;
      problem.constraint_jacobian(x, &jc_trips);
      SpMat jc(problem.constraint_count(), n);
      jc.setFromTriplets(jc_trips.begin(), jc_trips.end());
      ws.cost_value(x, &f_grad);
      if (viol <= options.constraint_tol &&
          first_order_optimal(problem, options, x, f_grad, jc, c)) {
        return finish(true, "converged");
      }
      return finish(false, "iteration limit");
    }
  }
}

std::string variant_name(SolveVariant v) {
  switch (v) {
    case SolveVariant::kFull:
      return "full";
    case SolveVariant::kFixedPhase:
      return "fixed_phase";
    case SolveVariant::kFixedPhaseAndFeet:
      return "fixed_phase_and_feet";
  }
  return "unknown";
}

VariantSolve solve_variant(const ProblemConfig& config, const Terrain& terrain,
                           const RobotParams& robot, const Task& task,
                           const Eigen::VectorXd& full_guess, SolveVariant v,
                           const SolveOptions& options) {
  const VariableLayout full_layout = VariableLayout::Build(config);
  if (full_guess.size() != full_layout.total()) {
    throw std::invalid_argument("solve_variant: guess has wrong size");
  }

  if (v == SolveVariant::kFull) {
    NlpProblem p = build(config, terrain, robot, task);
    SolveResult res = solve(p, full_guess, options);
    Eigen::VectorXd full_x = res.x;
    return {std::move(res), std::move(p), std::move(full_x)};
  }

  const auto schedules = schedules_from_vector(full_layout, config, full_guess);
  ProblemConfig fixed = config;
  fixed.optimize_phase_durations = false;
  NlpProblem p = build(fixed, terrain, robot, task, &schedules);
  Eigen::VectorXd x0 = transfer_vector(full_layout, p.layout(), full_guess);

  if (v == SolveVariant::kFixedPhaseAndFeet) {
    std::vector<int> frozen;
    for (int f = 0; f < 4; ++f) {
      const int k = p.layout().feet()[f].swing_count;
      for (int s = 0; s <= k; ++s) {
        for (int c = 0; c < 3; ++c) {
          frozen.push_back(p.layout().stance_pos_var(f, s, c));
        }
      }
      for (int j = 0; j < k; ++j) {
        for (int c = 0; c < 5; ++c) {
          frozen.push_back(p.layout().apex_var(f, j, c));
        }
      }
    }
    Eigen::VectorXd values(frozen.size());
    for (size_t i = 0; i < frozen.size(); ++i) values[i] = x0[frozen[i]];
    p.freeze_variables(frozen, values);
  }

  SolveResult res = solve(p, x0, options);
  Eigen::VectorXd full_x = transfer_vector(p.layout(), full_layout, res.x);
  write_durations(full_layout, schedules, &full_x);
  return {std::move(res), std::move(p), std::move(full_x)};
}

}  // namespace locoplan
