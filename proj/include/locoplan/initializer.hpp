#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "locoplan/transcription.hpp"

namespace locoplan {

// Hand-designed warm start: smoothstep base motion between the boundary
// poses, evenly spread footholds snapped to the terrain, vertical forces
// sharing the weight among the loaded feet, default gait timing.
PrimalGuess heuristic_init(const ProblemConfig& config, const Terrain& terrain,
                           const RobotParams& robot, const Task& task);

// Input features of the learned initializer: goal offset in the initial
// base frame (x, y, z), yaw change, edge distance at the start pose, and
// the absolute initial yaw.
constexpr int kTaskFeatureCount = 6;
Eigen::VectorXd task_features(const Task& task, const Terrain& terrain);

// Small fully connected network (tanh hidden layers, linear output) with
// per-dimension input/output normalization baked in. All arithmetic is
// plain Eigen; training is SGD with momentum on a weighted squared error.
class InitializerNet {
 public:
  InitializerNet() = default;
  // layer_sizes includes the input and output widths.
  InitializerNet(std::vector<int> layer_sizes, uint64_t seed);

  bool valid() const { return !weights_.empty(); }
  int input_size() const;
  int output_size() const;
  const std::vector<int>& layer_sizes() const { return sizes_; }

  Eigen::VectorXd predict(const Eigen::VectorXd& input) const;

  // Normalization statistics (identity until train() fits them).
  void set_normalization(const Eigen::VectorXd& in_mean,
                         const Eigen::VectorXd& in_std,
                         const Eigen::VectorXd& out_mean,
                         const Eigen::VectorXd& out_std);

  void save(std::ostream& os) const;
  static InitializerNet load(std::istream& is);

  struct TrainOptions {
    int max_epochs = 2000;
    int batch_size = 16;
    double learning_rate = 1e-2;
    double momentum = 0.9;
    double validation_fraction = 0.15;
    int patience = 30;  // epochs without validation improvement
    uint64_t seed = 1;
  };

  struct TrainStats {
    int epochs = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
  };

  // Weighted regression: minimizes mean_i sum_d w_d (net(x_i)_d - y_i_d)^2
  // in normalized output space. Rows of inputs/targets are samples.
  TrainStats train(const Eigen::MatrixXd& inputs,
                   const Eigen::MatrixXd& targets,
                   const Eigen::VectorXd& output_weights,
                   const TrainOptions& options);

  // Gradient of the weighted loss for one sample, via backprop; exposed for
  // finite-difference verification.
  double sample_loss_gradient(const Eigen::VectorXd& input_normalized,
                              const Eigen::VectorXd& target_normalized,
                              const Eigen::VectorXd& output_weights,
                              std::vector<Eigen::MatrixXd>* d_weights,
                              std::vector<Eigen::VectorXd>* d_biases) const;

  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  std::vector<Eigen::MatrixXd>& mutable_weights() { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }
  std::vector<Eigen::VectorXd>& mutable_biases() { return biases_; }
  const Eigen::VectorXd& input_mean() const { return in_mean_; }
  const Eigen::VectorXd& input_std() const { return in_std_; }
  const Eigen::VectorXd& output_mean() const { return out_mean_; }
  const Eigen::VectorXd& output_std() const { return out_std_; }

 private:
  Eigen::VectorXd forward_normalized(const Eigen::VectorXd& in,
                                     std::vector<Eigen::VectorXd>* acts) const;

  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
  Eigen::VectorXd in_mean_, in_std_, out_mean_, out_std_;
};

// Learned warm start: network prediction reshaped into the layout, with
// phase durations clamped to their bounds. Throws when the net's output
// size does not match the layout.
PrimalGuess learned_init(const InitializerNet& net, const ProblemConfig& config,
                         const Terrain& terrain, const Task& task);

// Per-variable regression weights from the variable categories (base
// position, phase durations and contact forces are emphasized).
Eigen::VectorXd category_weights(const VariableLayout& layout);

// Cost threshold for dataset filtering: knee of the sorted cost curve
// (largest distance to the chord), clamped so the retained fraction stays
// within [min_keep, max_keep]; falls back to the mid quantile of that
// window otherwise. Input: costs of the converged samples.
struct FilterThreshold {
  double g_max = 0.0;
  double retention = 0.0;  // fraction of the converged samples kept
};
FilterThreshold select_cost_threshold(std::vector<double> costs,
                                      double min_keep = 0.15,
                                      double max_keep = 0.40);

}  // namespace locoplan
