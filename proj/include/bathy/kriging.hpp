#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bathy/forward_model.hpp"
#include "bathy/grid.hpp"
#include "bathy/random.hpp"
#include "bathy/realization.hpp"

namespace bathy {

// Gaussian prior N(mu, Q) with Q = 10^theta1 * Q0. Q0 is factorized once at
// construction; if jitter was needed it is folded into the stored Q0 so every
// route sees the same matrix. Copies share Q0 and its factor.
class GaussianPrior {
 public:
  GaussianPrior(Field mean, Eigen::MatrixXd base_covariance, double theta1 = 0.0);

  // Q0 from the unit-scale exponential kernel exp(-d / range).
  static GaussianPrior exponential(Field mean, double range = 0.75, double theta1 = 0.0);

  const Field& mean() const { return mean_; }
  const GridSpec& grid() const { return mean_.grid(); }
  Index size() const { return mean_.size(); }
  double theta1() const { return theta1_; }
  double scale() const;

  const Eigen::MatrixXd& base_covariance() const { return *base_covariance_; }
  const Eigen::MatrixXd& base_factor() const { return *base_factor_; }
  Eigen::MatrixXd covariance() const;

  GaussianPrior with_theta1(double theta1) const;
  GaussianPrior with_mean(Field mean) const;

  // mu + 10^(theta1/2) L0 u
  Eigen::VectorXd draw(Rng& rng) const;

 private:
  GaussianPrior(Field mean, std::shared_ptr<const Eigen::MatrixXd> cov,
                std::shared_ptr<const Eigen::MatrixXd> factor, double theta1);

  Field mean_;
  std::shared_ptr<const Eigen::MatrixXd> base_covariance_;
  std::shared_ptr<const Eigen::MatrixXd> base_factor_;
  double theta1_;
};

// R = 10^theta2 * R0, R0 being the model's own noise variances.
struct NoiseScaling {
  double theta2 = 0.0;
};

struct Theta {
  double theta1 = 0.0;
  double theta2 = 0.0;

  friend bool operator==(const Theta&, const Theta&) = default;
};

struct PosteriorGaussian {
  Field mean;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd gain;
};

// Information form (Q^-1 + H^T R^-1 H)^-1 H^T R^-1, evaluated through
// Q = L L^T as L (I + B^T B)^-1 B^T R^-1/2 with B = R^-1/2 H L.
Eigen::MatrixXd compute_gain(const GaussianPrior& prior, const ObservationModel& model, NoiseScaling noise);

// Data-space form Q H^T (H Q H^T + R)^-1.
Eigen::MatrixXd compute_gain_data_space(const GaussianPrior& prior, const ObservationModel& model,
                                        NoiseScaling noise);

// mu + gain (y - H mu)
Field posterior_mean(const GaussianPrior& prior, const ObservationModel& model, NoiseScaling noise,
                     const Eigen::VectorXd& y);
Field apply_gain(const Field& mean, const Eigen::MatrixXd& gain, const ObservationModel& model,
                 const Eigen::VectorXd& y);

// (Q^-1 + H^T R^-1 H)^-1, via the same factorization as compute_gain.
Eigen::MatrixXd posterior_covariance(const GaussianPrior& prior, const ObservationModel& model, NoiseScaling noise);

// Q - gain H Q
Eigen::MatrixXd posterior_covariance_update_form(const GaussianPrior& prior, const ObservationModel& model,
                                                 NoiseScaling noise);

PosteriorGaussian make_posterior(const GaussianPrior& prior, const ObservationModel& model, NoiseScaling noise,
                                 const Eigen::VectorXd& y);

// log N(y; H mu, 10^theta1 H Q0 H^T + 10^theta2 R0). The prior's own theta1 is ignored.
double log_evidence(const GaussianPrior& prior, const ObservationModel& model, Theta theta,
                    const Eigen::VectorXd& y);

struct EvidenceSample {
  Theta theta;
  double log_evidence = 0.0;  // NaN where S was not positive definite
};

struct ThetaFit {
  Theta theta;
  double log_evidence = 0.0;
  std::vector<EvidenceSample> surface;  // theta1-major, grids ascending
};

// {-2, -1.75, ..., 1}
std::vector<double> default_theta_grid();

// Maximizes the summed log evidence of independent measurement vectors over
// the Cartesian grid. Ties go to the lexicographically smallest (theta1, theta2).
ThetaFit grid_search_theta(const GaussianPrior& prior, const ObservationModel& model,
                           std::span<const Eigen::VectorXd> ys, std::vector<double> grid_theta1,
                           std::vector<double> grid_theta2);
ThetaFit grid_search_theta(const GaussianPrior& prior, const ObservationModel& model, const Eigen::VectorXd& y,
                           std::vector<double> grid_theta1, std::vector<double> grid_theta2);

// mean + L u_k with L the (jittered) Cholesky factor of covariance.
RealizationBatch sample_gaussian_realizations(const Field& mean, const Eigen::MatrixXd& covariance, Index count,
                                             std::uint64_t seed);
RealizationBatch sample_posterior_cholesky(const PosteriorGaussian& posterior, Index count, std::uint64_t seed);

// Unconditional prior draw and measurement-noise draw for realization k.
// Both the Kriging and network bootstraps consume these, so equal seeds give
// matched draws.
struct ConditioningDraw {
  Eigen::VectorXd prior_sample;  // x_u ~ N(mu, Q)
  Eigen::VectorXd noise;         // v ~ N(0, R)
};
ConditioningDraw conditioning_draw(const GaussianPrior& prior, const ObservationModel& scaled_model,
                                   std::uint64_t seed, Index k);

// x_c = x_u + gain (y + v - H x_u)
Eigen::VectorXd bootstrap_realization(const ConditioningDraw& draw, const Eigen::MatrixXd& gain,
                                      const ObservationModel& model, const Eigen::VectorXd& y);

RealizationBatch sample_posterior_bootstrap(const GaussianPrior& prior, const ObservationModel& model,
                                            NoiseScaling noise, const Eigen::VectorXd& y, Index count,
                                            std::uint64_t seed);

}  // namespace bathy
