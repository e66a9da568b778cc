#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "bathy/error.hpp"
#include "bathy/forward_model.hpp"
#include "bathy/kriging.hpp"
#include "bathy/realization.hpp"
#include "bathy/synthetic.hpp"

namespace bathy {

enum class Activation { relu, tanh };

struct MLPArchitecture {
  Index input_dim = 0;
  std::vector<Index> hidden{2000, 2000};
  Index output_dim = 0;
  Activation activation = Activation::relu;

  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

// Inputs are standardized per component; network outputs map back to meters
// as output_shift + output_scale * z.
struct Normalization {
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;
  Eigen::VectorXd output_shift;
  double output_scale = 1.0;

  static Normalization identity(Index input_dim, Index output_dim);

  Eigen::VectorXd normalize_input(const Eigen::VectorXd& y) const;
  Eigen::VectorXd normalize_target(const Eigen::VectorXd& x) const;
  Eigen::VectorXd denormalize_output(const Eigen::VectorXd& z) const;
};

struct MLPParameters {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::relu;
  Normalization normalization;

  Index input_dim() const { return layers.front().weight.cols(); }
  Index output_dim() const { return layers.back().weight.rows(); }
  void validate() const;
};

// Weights uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)), zero biases,
// identity normalization.
MLPParameters initialize_parameters(const MLPArchitecture& arch, std::uint64_t seed);

// Raw network in normalized coordinates.
Eigen::VectorXd network_output(const MLPParameters& params, const Eigen::VectorXd& z);

// Posterior-mean estimate in meters for a raw measurement vector.
Eigen::VectorXd forward(const MLPParameters& params, const Eigen::VectorXd& y);
// Column-wise forward; each column is evaluated exactly as forward() would.
Eigen::MatrixXd forward_batch(const MLPParameters& params, const Eigen::MatrixXd& ys);
Field predict(const MLPParameters& params, const GridSpec& grid, const Eigen::VectorXd& y);

struct LossGradient {
  double loss = 0.0;
  std::vector<DenseLayer> gradient;
};

// Batch mean of squared vector errors in normalized coordinates, with its
// gradient by backpropagation. Columns are samples.
LossGradient loss_and_gradient(const MLPParameters& params, const Eigen::MatrixXd& inputs,
                               const Eigen::MatrixXd& targets);

struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Index batch_size = 64;
  Index epochs = 50;
  std::uint64_t seed = 0;
  // Target shift; the mean training target when absent.
  std::optional<Eigen::VectorXd> prior_mean;
  // Fit normalization statistics on the training set; identity otherwise.
  bool normalize = true;

  void validate() const;
};

// Architecture and optimizer presets. "desk" trains in minutes on one core;
// "paper" is the [2000, 2000] network and takes hours.
struct NetworkProfile {
  std::vector<Index> hidden;
  Index epochs = 50;
  double learning_rate = 1e-4;
  Index batch_size = 64;
};
NetworkProfile network_profile(std::string_view name);

struct TrainResult {
  MLPParameters params;
  std::vector<double> loss_history;  // mean batch loss per epoch
};

// Carries the last parameters whose epoch finished with a finite loss.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, MLPParameters last_finite, std::vector<double> history)
      : NumericError(what), last_finite_(std::move(last_finite)), history_(std::move(history)) {}

  const MLPParameters& last_finite() const { return last_finite_; }
  const std::vector<double>& history() const { return history_; }

 private:
  MLPParameters last_finite_;
  std::vector<double> history_;
};

Normalization fit_normalization(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                                const std::optional<Eigen::VectorXd>& prior_mean);

// Mini-batch Adam on the empirical mean squared error. Deterministic given config.seed.
TrainResult train(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, const MLPArchitecture& arch,
                  const TrainConfig& config);
TrainResult train(const TrainingDataset& dataset, const MLPArchitecture& arch, const TrainConfig& config);

// Checkpoint: little-endian f64 payload behind a shape header.
void save_checkpoint(const std::filesystem::path& path, const MLPParameters& params);
MLPParameters load_checkpoint(const std::filesystem::path& path);
void write_loss_history(const std::filesystem::path& path, const std::vector<double>& history);

using MeanEstimator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// x_c = x_u - mu + tau(y + v - H (x_u - mu)), with (x_u, v) from conditioning_draw.
Eigen::VectorXd network_bootstrap_realization(const MeanEstimator& estimator, const ConditioningDraw& draw,
                                              const Field& prior_mean, const ObservationModel& model,
                                              const Eigen::VectorXd& y);

// Noise draws use R scaled by noise.theta2.
RealizationBatch sample_posterior_dnn(const MeanEstimator& estimator, const GaussianPrior& prior,
                                      const ObservationModel& model, NoiseScaling noise, const Eigen::VectorXd& y,
                                      Index count, std::uint64_t seed);
RealizationBatch sample_posterior_dnn(const MLPParameters& params, const GaussianPrior& prior,
                                      const ObservationModel& model, NoiseScaling noise, const Eigen::VectorXd& y,
                                      Index count, std::uint64_t seed);

}  // namespace bathy
