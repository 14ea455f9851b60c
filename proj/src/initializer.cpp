#include "locoplan/initializer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace locoplan {
namespace {

double smoothstep(double u) { return u * u * (3.0 - 2.0 * u); }
double smoothstep_rate(double u) { return 6.0 * u * (1.0 - u); }

Eigen::Matrix2d yaw_rotation(double yaw) {
  Eigen::Matrix2d r;
  r << std::cos(yaw), -std::sin(yaw), std::sin(yaw), std::cos(yaw);
  return r;
}

// Start/end times of each stance phase of a schedule.
std::vector<std::pair<double, double>> stance_intervals(
    const PhaseSchedule& s) {
  std::vector<std::pair<double, double>> out;
  double t = 0.0;
  for (const auto& p : s.phases) {
    if (p.is_stance) out.emplace_back(t, t + p.duration);
    t += p.duration;
  }
  return out;
}

}  // namespace

PrimalGuess heuristic_init(const ProblemConfig& config, const Terrain& terrain,
                           const RobotParams& robot, const Task& task) {
  const VariableLayout layout = VariableLayout::Build(config);
  const auto schedules = default_schedules(config);
  const double horizon = config.horizon;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.total());

  const Eigen::Vector3d delta =
      task.goal_base_position - task.initial_base_position;
  const double dyaw = task.goal_yaw - task.initial_yaw;

  auto base_at = [&](double u) -> Eigen::Vector3d {
    return task.initial_base_position + smoothstep(u) * delta;
  };
  auto yaw_at = [&](double u) {
    return task.initial_yaw + smoothstep(u) * dyaw;
  };

  // Base nodes: smoothstep interpolation (zero boundary velocities), lifted
  // above the terrain under the path.
  const int nb = layout.base_node_count();
  for (int i = 0; i < nb; ++i) {
    const double u = static_cast<double>(i) / (nb - 1);
    Eigen::Vector3d pos = base_at(u);
    pos.z() = std::max(pos.z(), terrain.height_at(pos.x(), pos.y()) +
                                    config.base_clearance + 0.02);
    const Eigen::Vector3d vel = delta * smoothstep_rate(u) / horizon;
    for (int c = 0; c < 3; ++c) {
      x[layout.base_lin_var(i, c, false)] = pos[c];
      x[layout.base_lin_var(i, c, true)] = vel[c];
      x[layout.base_ang_var(i, c, false)] = c == 2 ? yaw_at(u) : 0.0;
      x[layout.base_ang_var(i, c, true)] =
          c == 2 ? dyaw * smoothstep_rate(u) / horizon : 0.0;
    }
  }

  for (int f = 0; f < 4; ++f) {
    const int k = layout.feet()[f].swing_count;
    const Eigen::Vector2d offset =
        robot.nominal_foot_offsets[f].head<2>();

    // Evenly spread footholds along the straight path, offset by the leg
    // attachment rotated with the interpolated heading.
    for (int s = 0; s <= k; ++s) {
      const double u = k > 0 ? static_cast<double>(s) / k : 0.5;
      const Eigen::Vector2d base_xy =
          task.initial_base_position.head<2>() + u * delta.head<2>();
      const Eigen::Vector2d p = base_xy + yaw_rotation(yaw_at(u)) * offset;
      x[layout.stance_pos_var(f, s, 0)] = p.x();
      x[layout.stance_pos_var(f, s, 1)] = p.y();
      x[layout.stance_pos_var(f, s, 2)] = terrain.height_at(p.x(), p.y());
    }

    for (int j = 0; j < k; ++j) {
      Eigen::Vector3d a, b;
      for (int c = 0; c < 3; ++c) {
        a[c] = x[layout.stance_pos_var(f, j, c)];
        b[c] = x[layout.stance_pos_var(f, j + 1, c)];
      }
      x[layout.apex_var(f, j, 0)] = 0.5 * (a.x() + b.x());
      x[layout.apex_var(f, j, 1)] = 0.5 * (a.y() + b.y());
      x[layout.apex_var(f, j, 2)] =
          std::max(a.z(), b.z()) + config.swing_clearance + 0.02;
      // Mid-swing velocity of the minimum-acceleration profile.
      const double t_swing = schedules[f].phases[2 * j + 1].duration;
      x[layout.apex_var(f, j, 3)] = 1.5 * (b.x() - a.x()) / t_swing;
      x[layout.apex_var(f, j, 4)] = 1.5 * (b.y() - a.y()) / t_swing;
    }

    // Vertical forces sharing the weight among the currently loaded feet.
    auto loaded = [&](double t) {
      int n = 0;
      for (int g = 0; g < 4; ++g) {
        if (schedules[g].in_stance(t)) ++n;
      }
      return std::max(n, 1);
    };
    const auto intervals = stance_intervals(schedules[f]);
    std::vector<double> node_times;
    node_times.push_back(0.0);
    for (const auto& [a, b] : intervals) {
      const double d = b - a;
      node_times.push_back(a + d / 3.0);
      node_times.push_back(a + 2.0 * d / 3.0);
    }
    node_times.push_back(horizon);
    const double weight = robot.mass * (-robot.gravity.z());
    for (int vn = 0; vn < layout.force_var_node_count(f); ++vn) {
      x[layout.force_var(f, vn, 2)] = weight / loaded(node_times[vn]);
    }
  }

  write_durations(layout, schedules, &x);
  return PrimalGuess{std::move(x), layout.hash()};
}

Eigen::VectorXd task_features(const Task& task, const Terrain& terrain) {
  Eigen::VectorXd f(kTaskFeatureCount);
  const Eigen::Vector3d delta =
      task.goal_base_position - task.initial_base_position;
  const Eigen::Vector2d local =
      yaw_rotation(-task.initial_yaw) * delta.head<2>();
  f[0] = local.x();
  f[1] = local.y();
  f[2] = delta.z();
  f[3] = task.goal_yaw - task.initial_yaw;
  const double edge = terrain
                          .edge_distance(task.initial_base_position.x(),
                                         task.initial_base_position.y())
                          .distance;
  f[4] = std::min(edge, 10.0);
  f[5] = task.initial_yaw;
  return f;
}

// ---------------------------------------------------------------------------
// InitializerNet
// ---------------------------------------------------------------------------

InitializerNet::InitializerNet(std::vector<int> layer_sizes, uint64_t seed)
    : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) {
    throw std::invalid_argument("network needs at least input and output");
  }
  std::mt19937_64 rng(seed);
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int fan_in = sizes_[l], fan_out = sizes_[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  in_mean_ = Eigen::VectorXd::Zero(sizes_.front());
  in_std_ = Eigen::VectorXd::Ones(sizes_.front());
  out_mean_ = Eigen::VectorXd::Zero(sizes_.back());
  out_std_ = Eigen::VectorXd::Ones(sizes_.back());
}

int InitializerNet::input_size() const { return sizes_.front(); }
int InitializerNet::output_size() const { return sizes_.back(); }

void InitializerNet::set_normalization(const Eigen::VectorXd& in_mean,
                                       const Eigen::VectorXd& in_std,
                                       const Eigen::VectorXd& out_mean,
                                       const Eigen::VectorXd& out_std) {
  in_mean_ = in_mean;
  in_std_ = in_std.cwiseMax(1e-8);
  out_mean_ = out_mean;
  out_std_ = out_std.cwiseMax(1e-8);
}

Eigen::VectorXd InitializerNet::forward_normalized(
    const Eigen::VectorXd& in, std::vector<Eigen::VectorXd>* acts) const {
  Eigen::VectorXd a = in;
  if (acts != nullptr) acts->push_back(a);
  for (size_t l = 0; l < weights_.size(); ++l) {
    a = weights_[l] * a + biases_[l];
    if (l + 1 < weights_.size()) a = a.array().tanh();
    if (acts != nullptr) acts->push_back(a);
  }
  return a;
}

Eigen::VectorXd InitializerNet::predict(const Eigen::VectorXd& input) const {
  const Eigen::VectorXd xn =
      (input - in_mean_).cwiseQuotient(in_std_);
  const Eigen::VectorXd yn = forward_normalized(xn, nullptr);
  return yn.cwiseProduct(out_std_) + out_mean_;
}

double InitializerNet::sample_loss_gradient(
    const Eigen::VectorXd& input_normalized,
    const Eigen::VectorXd& target_normalized,
    const Eigen::VectorXd& output_weights,
    std::vector<Eigen::MatrixXd>* d_weights,
    std::vector<Eigen::VectorXd>* d_biases) const {
  std::vector<Eigen::VectorXd> acts;
  const Eigen::VectorXd out = forward_normalized(input_normalized, &acts);
  const Eigen::VectorXd err = out - target_normalized;
  const double loss = err.cwiseProduct(err).dot(output_weights);

  d_weights->assign(weights_.size(), Eigen::MatrixXd());
  d_biases->assign(biases_.size(), Eigen::VectorXd());
  Eigen::VectorXd delta = 2.0 * output_weights.cwiseProduct(err);
  for (int l = static_cast<int>(weights_.size()) - 1; l >= 0; --l) {
    (*d_weights)[l] = delta * acts[l].transpose();
    (*d_biases)[l] = delta;
    if (l > 0) {
      delta = (weights_[l].transpose() * delta).cwiseProduct(
          (1.0 - acts[l].array().square()).matrix());
    }
  }
  return loss;
}

InitializerNet::TrainStats InitializerNet::train(
    const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
    const Eigen::VectorXd& output_weights, const TrainOptions& options) {
  const int n = static_cast<int>(inputs.rows());
  if (n != targets.rows() || inputs.cols() != input_size() ||
      targets.cols() != output_size()) {
    throw std::invalid_argument("training data shape mismatch");
  }
  if (n < 4) throw std::invalid_argument("too few training samples");

  // Fit normalization on the full set.
  Eigen::VectorXd in_mean = inputs.colwise().mean();
  Eigen::VectorXd out_mean = targets.colwise().mean();
  Eigen::VectorXd in_std =
      ((inputs.rowwise() - in_mean.transpose()).array().square().colwise().sum() /
       n).sqrt();
  Eigen::VectorXd out_std =
      ((targets.rowwise() - out_mean.transpose()).array().square().colwise().sum() /
       n).sqrt();
  set_normalization(in_mean, in_std, out_mean, out_std);

  Eigen::MatrixXd xn = (inputs.rowwise() - in_mean_.transpose()).array().rowwise() /
                       in_std_.transpose().array();
  Eigen::MatrixXd yn = (targets.rowwise() - out_mean_.transpose()).array().rowwise() /
                       out_std_.transpose().array();

  // Scale-normalized weights keep the loss O(1) regardless of the weight
  // vector's magnitude.
  Eigen::VectorXd w = output_weights * (output_weights.size() /
                                        output_weights.sum());
  w /= output_size();

  std::mt19937_64 rng(options.seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  // A validation split below a handful of samples is pure noise, and
  // restoring the best-validation weights from it destroys the fit; in
  // that regime early-stop on the training loss instead.
  int n_val = static_cast<int>(n * options.validation_fraction);
  if (n_val < 3) n_val = 0;
  std::vector<int> val_idx(order.begin(), order.begin() + n_val);
  std::vector<int> train_idx(order.begin() + n_val, order.end());

  auto set_loss = [&](const std::vector<int>& idx) {
    double total = 0.0;
    for (const int i : idx) {
      const Eigen::VectorXd err =
          forward_normalized(xn.row(i), nullptr) - yn.row(i).transpose();
      total += err.cwiseProduct(err).dot(w);
    }
    return total / std::max<size_t>(idx.size(), 1);
  };

  std::vector<Eigen::MatrixXd> vel_w, grad_w, acc_w;
  std::vector<Eigen::VectorXd> vel_b, grad_b, acc_b;
  for (size_t l = 0; l < weights_.size(); ++l) {
    vel_w.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
    vel_b.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
    acc_w.push_back(vel_w.back());
    acc_b.push_back(vel_b.back());
  }

  TrainStats stats;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> best_w = weights_;
  std::vector<Eigen::VectorXd> best_b = biases_;
  Eigen::VectorXd best_om = out_mean_, best_os = out_std_;
  int since_best = 0;

  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    for (size_t start = 0; start < train_idx.size();
         start += options.batch_size) {
      const size_t end =
          std::min(start + options.batch_size, train_idx.size());
      for (auto& m : acc_w) m.setZero();
      for (auto& v : acc_b) v.setZero();
      for (size_t s = start; s < end; ++s) {
        const int i = train_idx[s];
        std::vector<Eigen::MatrixXd> dw;
        std::vector<Eigen::VectorXd> db;
        sample_loss_gradient(xn.row(i), yn.row(i), w, &dw, &db);
        for (size_t l = 0; l < weights_.size(); ++l) {
          acc_w[l] += dw[l];
          acc_b[l] += db[l];
        }
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (size_t l = 0; l < weights_.size(); ++l) {
        vel_w[l] = options.momentum * vel_w[l] -
                   options.learning_rate * scale * acc_w[l];
        vel_b[l] = options.momentum * vel_b[l] -
                   options.learning_rate * scale * acc_b[l];
        weights_[l] += vel_w[l];
        biases_[l] += vel_b[l];
      }
    }

    stats.epochs = epoch + 1;
    const double monitored =
        val_idx.empty() ? set_loss(train_idx) : set_loss(val_idx);
    if (monitored < best_val * (1.0 - 1e-4)) {
      best_val = monitored;
      best_w = weights_;
      best_b = biases_;
      since_best = 0;
    } else if (++since_best >= options.patience) {
      break;
    }
  }
  weights_ = best_w;
  biases_ = best_b;
  stats.train_loss = set_loss(train_idx);
  stats.validation_loss = val_idx.empty() ? stats.train_loss
                                          : set_loss(val_idx);
  return stats;
}

// ---------------------------------------------------------------------------
// Serialization (raw little-endian stream; file framing lives in dataset.cpp)
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("truncated network stream");
  return v;
}

void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
  write_pod<int32_t>(os, static_cast<int32_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Eigen::VectorXd read_vector(std::istream& is) {
  const int32_t n = read_pod<int32_t>(is);
  Eigen::VectorXd v(n);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw std::runtime_error("truncated network stream");
  return v;
}

}  // namespace

void InitializerNet::save(std::ostream& os) const {
  write_pod<int32_t>(os, static_cast<int32_t>(sizes_.size()));
  for (const int s : sizes_) write_pod<int32_t>(os, static_cast<int32_t>(s));
  write_vector(os, in_mean_);
  write_vector(os, in_std_);
  write_vector(os, out_mean_);
  write_vector(os, out_std_);
  for (size_t l = 0; l < weights_.size(); ++l) {
    write_pod<int32_t>(os, static_cast<int32_t>(weights_[l].rows()));
    write_pod<int32_t>(os, static_cast<int32_t>(weights_[l].cols()));
    os.write(reinterpret_cast<const char*>(weights_[l].data()),
             static_cast<std::streamsize>(weights_[l].size() * sizeof(double)));
    write_vector(os, biases_[l]);
  }
}

InitializerNet InitializerNet::load(std::istream& is) {
  InitializerNet net;
  const int32_t n_layers = read_pod<int32_t>(is);
  net.sizes_.resize(n_layers);
  for (int i = 0; i < n_layers; ++i) net.sizes_[i] = read_pod<int32_t>(is);
  net.in_mean_ = read_vector(is);
  net.in_std_ = read_vector(is);
  net.out_mean_ = read_vector(is);
  net.out_std_ = read_vector(is);
  for (int l = 0; l + 1 < n_layers; ++l) {
    const int32_t rows = read_pod<int32_t>(is);
    const int32_t cols = read_pod<int32_t>(is);
    Eigen::MatrixXd w(rows, cols);
    is.read(reinterpret_cast<char*>(w.data()),
            static_cast<std::streamsize>(w.size() * sizeof(double)));
    if (!is) throw std::runtime_error("truncated network stream");
    net.weights_.push_back(std::move(w));
    net.biases_.push_back(read_vector(is));
  }
  return net;
}

Eigen::VectorXd category_weights(const VariableLayout& layout) {
  Eigen::VectorXd w(layout.total());
  for (int i = 0; i < layout.total(); ++i) {
    switch (layout.category(i)) {
      case VarCategory::kBaseLin:
      case VarCategory::kDuration:
      case VarCategory::kForce:
        w[i] = 4.0;
        break;
      default:
        w[i] = 1.0;
    }
  }
  return w;
}

FilterThreshold select_cost_threshold(std::vector<double> costs,
                                      double min_keep, double max_keep) {
  FilterThreshold out;
  if (costs.empty()) return out;
  std::sort(costs.begin(), costs.end());
  const int n = static_cast<int>(costs.size());
  if (n == 1) {
    out.g_max = costs[0];
    out.retention = 1.0;
    return out;
  }

  // Knee of the sorted curve: the point with the largest distance to the
  // chord between the extremes.
  const double x0 = 0.0, y0 = costs.front();
  const double x1 = n - 1.0, y1 = costs.back();
  const double dx = x1 - x0, dy = y1 - y0;
  const double norm = std::hypot(dx, dy);
  int knee = 0;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double dist =
        norm > 0.0 ? std::abs(dy * i - dx * costs[i] + x1 * y0 - y1 * x0) / norm
                   : 0.0;
    if (dist > best) {
      best = dist;
      knee = i;
    }
  }
  double g_max = costs[knee];
  auto retention_of = [&](double g) {
    return static_cast<double>(std::upper_bound(costs.begin(), costs.end(), g) -
                               costs.begin()) /
           n;
  };
  double r = retention_of(g_max);
  if (r < min_keep || r > max_keep) {
    // Fall back to the midpoint of the admissible retention window.
    const double target = 0.5 * (min_keep + max_keep);
    const int idx = std::clamp(static_cast<int>(std::ceil(target * n)) - 1, 0,
                               n - 1);
    g_max = costs[idx];
    r = retention_of(g_max);
  }
  out.g_max = g_max;
  out.retention = r;
  return out;
}

PrimalGuess learned_init(const InitializerNet& net, const ProblemConfig& config,
                         const Terrain& terrain, const Task& task) {
  const VariableLayout layout = VariableLayout::Build(config);
  if (!net.valid() || net.output_size() != layout.total()) {
    throw std::invalid_argument(
        "learned_init: net output does not match the layout");
  }
  PrimalGuess guess;
  guess.y = net.predict(task_features(task, terrain));
  guess.layout_hash = layout.hash();
  for (int f = 0; f < 4; ++f) {
    const int k = layout.feet()[f].swing_count;
    if (layout.feet()[f].duration_start < 0) continue;
    for (int j = 0; j < 2 * k; ++j) {
      double& d = guess.y[layout.duration_var(f, j)];
      d = std::clamp(d, config.duration_min, config.duration_max);
    }
  }
  return guess;
}

}  // namespace locoplan
