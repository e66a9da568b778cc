#include "bathy/hybrid.hpp"

#include "bathy/error.hpp"

namespace bathy {

HybridResult dnn_kriging(const MeanEstimator& estimator, const GaussianPrior& prior, const ObservationModel& model,
                         NoiseScaling noise, const Eigen::VectorXd& y, const HybridOptions& options) {
  if (y.size() != model.measurement_count()) throw ValidationError("dnn_kriging: measurement length mismatch");
  Field dnn_mean(prior.grid(), estimator(y));
  Theta theta{prior.theta1(), noise.theta2};
  GaussianPrior residual_prior = prior.with_mean(dnn_mean);
  if (options.reestimate_theta) {
    theta = grid_search_theta(residual_prior, model, y, options.grid_theta1, options.grid_theta2).theta;
    residual_prior = residual_prior.with_theta1(theta.theta1);
  }
  PosteriorGaussian post = make_posterior(residual_prior, model, NoiseScaling{theta.theta2}, y);
  return {std::move(dnn_mean), std::move(post.mean),
          std::make_shared<const Eigen::MatrixXd>(std::move(post.covariance)), theta};
}

HybridResult dnn_kriging(const MLPParameters& params, const GaussianPrior& prior, const ObservationModel& model,
                         NoiseScaling noise, const Eigen::VectorXd& y, const HybridOptions& options) {
  params.validate();
  if (params.input_dim() != model.measurement_count() || params.output_dim() != prior.size()) {
    throw ValidationError("network dimensions do not match the observation model and prior");
  }
  return dnn_kriging([&params](const Eigen::VectorXd& v) { return forward(params, v); }, prior, model, noise, y,
                     options);
}

RealizationBatch sample_hybrid(const HybridResult& result, Index count, std::uint64_t seed) {
  if (!result.posterior_covariance) throw ValidationError("hybrid result has no posterior covariance");
  return sample_gaussian_realizations(result.corrected_mean, *result.posterior_covariance, count, seed);
}

}  // namespace bathy
