#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "bathy/kriging.hpp"
#include "bathy/mlp.hpp"

namespace bathy {

// Network prediction corrected by a Kriging update of its residual:
//   corrected = dnn + gain (y - H dnn)
// Uncertainty comes from the Kriging posterior covariance, which does not
// depend on the mean used.
struct HybridResult {
  Field dnn_mean;
  Field corrected_mean;
  std::shared_ptr<const Eigen::MatrixXd> posterior_covariance;
  Theta theta;
};

struct HybridOptions {
  // Re-fit (theta1, theta2) by evidence with the network prediction as prior
  // mean instead of reusing the supplied ones.
  bool reestimate_theta = false;
  std::vector<double> grid_theta1 = default_theta_grid();
  std::vector<double> grid_theta2 = default_theta_grid();
};

// `prior` carries theta1; `noise` carries theta2.
HybridResult dnn_kriging(const MeanEstimator& estimator, const GaussianPrior& prior, const ObservationModel& model,
                         NoiseScaling noise, const Eigen::VectorXd& y, const HybridOptions& options = {});
HybridResult dnn_kriging(const MLPParameters& params, const GaussianPrior& prior, const ObservationModel& model,
                         NoiseScaling noise, const Eigen::VectorXd& y, const HybridOptions& options = {});

// corrected_mean + Cholesky draws of the posterior covariance.
RealizationBatch sample_hybrid(const HybridResult& result, Index count, std::uint64_t seed);

}  // namespace bathy
