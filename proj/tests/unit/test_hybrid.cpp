#include <doctest.h>

#include <random>

#include "bathy/error.hpp"
#include "bathy/hybrid.hpp"
#include "bathy/synthetic.hpp"
#include "oracles.hpp"

using namespace bathy;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("a constant prior-mean estimator reduces to kriging") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 5; ++t) {
    const auto inst = oracle::random_instance(rng, 16, 6);
    const NoiseScaling noise{-0.5};
    const VectorXd mu = inst.prior.mean().values();
    const HybridResult r = dnn_kriging([&](const VectorXd&) { return mu; }, inst.prior, inst.model, noise, inst.y);
    const PosteriorGaussian post = make_posterior(inst.prior, inst.model, noise, inst.y);
    CHECK((r.corrected_mean.values() - post.mean.values()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(r.dnn_mean.values() == mu);
    CHECK(*r.posterior_covariance == post.covariance);
    CHECK(r.theta == Theta{inst.prior.theta1(), -0.5});
  }
}

TEST_CASE("zero residual leaves the network estimate unchanged") {
  const GridSpec g(3, 4, 1.0, 1.0);
  const ObservationModel model(build_point_rows({{0, 0}, {1, 2}, {2, 3}}, g), VectorXd::Constant(3, 0.01), 3);
  const GaussianPrior prior = GaussianPrior::exponential(Field::constant(g, 0.0));
  std::mt19937_64 rng(2);
  const VectorXd base = oracle::gaussian_vector(rng, 12);
  // tau copies the measurements into the observed points of an arbitrary field.
  const MeanEstimator tau = [&](const VectorXd& y) {
    VectorXd x = base;
    x[0] = y[0];
    x[6] = y[1];
    x[11] = y[2];
    return x;
  };
  const VectorXd y = oracle::gaussian_vector(rng, 3);
  const HybridResult r = dnn_kriging(tau, prior, model, {}, y);
  CHECK((r.corrected_mean.values() - r.dnn_mean.values()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("the correction is affine in the network estimate") {
  std::mt19937_64 rng(3);
  const auto inst = oracle::random_instance(rng, 12, 5);
  const NoiseScaling noise{0.2};
  const VectorXd tau = oracle::gaussian_vector(rng, 12), delta = oracle::gaussian_vector(rng, 12);
  const HybridResult a = dnn_kriging([&](const VectorXd&) { return tau; }, inst.prior, inst.model, noise, inst.y);
  const HybridResult b =
      dnn_kriging([&](const VectorXd&) -> VectorXd { return tau + delta; }, inst.prior, inst.model, noise, inst.y);
  const MatrixXd gain = compute_gain(inst.prior, inst.model, noise);
  const VectorXd expect = delta - gain * (inst.model.forward() * delta);
  CHECK(((b.corrected_mean.values() - a.corrected_mean.values()) - expect).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("the correction never increases the weighted misfit") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto inst = oracle::random_instance(rng, 16, 7);
    const NoiseScaling noise{oracle::uniform(rng, -1.0, 1.0)};
    const VectorXd tau = oracle::gaussian_vector(rng, 16) * 3.0;
    const HybridResult r = dnn_kriging([&](const VectorXd&) { return tau; }, inst.prior, inst.model, noise, inst.y);
    CHECK(inst.model.weighted_misfit(inst.y, r.corrected_mean.values()) <=
          inst.model.weighted_misfit(inst.y, r.dnn_mean.values()));
  }

  // Jump field on the default layout with a smooth (jump-free) stand-in estimate.
  const GridSpec g(26, 38, 1.0, 1.0);
  const ObservationModel model = ObservationModel::from_layout(default_layout(g), g);
  const auto surveys = make_base_surveys(g, 2, 5);
  JumpSpec jump;
  jump.corner = {6, 10};
  const Field truth = add_jump(surveys[0], jump);
  const VectorXd y = observe(model, truth, 9);
  const GaussianPrior prior = GaussianPrior::exponential(average_field(surveys), 0.75, 0.5);
  const HybridResult r =
      dnn_kriging([&](const VectorXd&) { return surveys[1].values(); }, prior, model, {-1.0}, y);
  CHECK(model.weighted_misfit(y, r.corrected_mean.values()) <= model.weighted_misfit(y, r.dnn_mean.values()));
}

TEST_CASE("re-estimating theta uses the network estimate as prior mean") {
  std::mt19937_64 rng(5);
  const auto inst = oracle::random_instance(rng, 12, 6);
  const VectorXd tau = oracle::gaussian_vector(rng, 12);
  HybridOptions opts;
  opts.reestimate_theta = true;
  const HybridResult r = dnn_kriging([&](const VectorXd&) { return tau; }, inst.prior, inst.model, {}, inst.y, opts);
  const ThetaFit fit = grid_search_theta(inst.prior.with_mean(Field(inst.prior.grid(), tau)), inst.model, inst.y,
                                         default_theta_grid(), default_theta_grid());
  CHECK(r.theta == fit.theta);
}

TEST_CASE("hybrid sampling") {
  std::mt19937_64 rng(6);
  const auto inst = oracle::random_instance(rng, 9, 4);
  const VectorXd tau = oracle::gaussian_vector(rng, 9);
  const HybridResult r = dnn_kriging([&](const VectorXd&) { return tau; }, inst.prior, inst.model, {}, inst.y);
  CHECK(sample_hybrid(r, 0, 1).empty());
  const RealizationBatch batch = sample_hybrid(r, 2000, 2);
  const VectorXd se = r.posterior_covariance->diagonal().cwiseSqrt() / std::sqrt(2000.0);
  CHECK(((batch.mean() - r.corrected_mean.values()).cwiseAbs().array() <= 3.0 * se.array()).all());
  CHECK(oracle::rel_frobenius(oracle::empirical_covariance(batch.samples()), *r.posterior_covariance) < 0.15);
}
