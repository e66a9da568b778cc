#include "bathy/kriging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>

#include "bathy/covariance.hpp"
#include "bathy/error.hpp"
#include "bathy/parallel.hpp"

namespace bathy {

namespace {

std::shared_ptr<const Eigen::MatrixXd> share(Eigen::MatrixXd m) {
  return std::make_shared<const Eigen::MatrixXd>(std::move(m));
}

void check_dimensions(const GaussianPrior& prior, const ObservationModel& model) {
  if (model.field_size() != prior.size()) {
    throw ValidationError("observation model expects fields of size " + std::to_string(model.field_size()) +
                          ", prior has " + std::to_string(prior.size()));
  }
}

void check_measurements(const ObservationModel& model, const Eigen::VectorXd& y) {
  if (y.size() != model.measurement_count()) {
    throw ValidationError("measurement vector has length " + std::to_string(y.size()) + ", model expects " +
                          std::to_string(model.measurement_count()));
  }
}

Eigen::LLT<Eigen::MatrixXd> factorize_spd(const Eigen::MatrixXd& a, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    const Eigen::VectorXd diag = a.diagonal();
    std::ostringstream msg;
    msg << what << " (" << a.rows() << "x" << a.cols() << ") is not positive definite; diagonal range "
        << diag.minCoeff() << " .. " << diag.maxCoeff();
    throw NumericError(msg.str());
  }
  return llt;
}

// Q = L L^T, B = R^{-1/2} H L, M = I + B^T B.
struct InformationSystem {
  Eigen::MatrixXd prior_factor;
  Eigen::VectorXd inv_sqrt_noise;
  Eigen::MatrixXd whitened;  // B
  Eigen::LLT<Eigen::MatrixXd> precision;

  InformationSystem(const GaussianPrior& prior, const ObservationModel& model, NoiseScaling noise) {
    check_dimensions(prior, model);
    const ObservationModel scaled = model.with_noise_scale(noise.theta2);
    prior_factor = std::sqrt(prior.scale()) * prior.base_factor();
    inv_sqrt_noise = scaled.noise_variance().array().rsqrt();
    whitened = inv_sqrt_noise.asDiagonal() * (model.forward() * prior_factor.triangularView<Eigen::Lower>());
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(prior.size(), prior.size());
    m.selfadjointView<Eigen::Lower>().rankUpdate(whitened.transpose());
    precision = factorize_spd(m, "whitened posterior precision");
  }

  Eigen::MatrixXd gain() const {
    const Eigen::MatrixXd rhs = whitened.transpose() * inv_sqrt_noise.asDiagonal();
    return prior_factor.triangularView<Eigen::Lower>() * precision.solve(rhs);
  }

  Eigen::MatrixXd covariance() const {
    // L M^{-1} L^T = (U^-1 L^T)^T (U^-1 L^T) with M = U^T U.
    Eigen::MatrixXd half = prior_factor.transpose();
    precision.matrixL().solveInPlace(half);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(half.cols(), half.cols());
    cov.selfadjointView<Eigen::Lower>().rankUpdate(half.transpose());
    Eigen::MatrixXd full = cov.selfadjointView<Eigen::Lower>();
    return full;
  }
};

}  // namespace

GaussianPrior::GaussianPrior(Field mean, Eigen::MatrixXd base_covariance, double theta1)
    : mean_(std::move(mean)), theta1_(theta1) {
  if (base_covariance.rows() != mean_.size() || base_covariance.cols() != mean_.size()) {
    throw ValidationError("prior covariance dimension does not match mean");
  }
  if (!std::isfinite(theta1)) throw ValidationError("theta1 must be finite");
  if (!base_covariance.isApprox(base_covariance.transpose(), 1e-12)) {
    throw ValidationError("prior covariance is not symmetric");
  }
  const double diag_scale = base_covariance.diagonal().cwiseAbs().maxCoeff();
  JitteredCholesky chol;
  try {
    // No jitter first; only fall back to the jitter ladder when needed.
    chol = cholesky_with_jitter(base_covariance, 0.0, 0);
  } catch (const NumericError&) {
    chol = cholesky_with_jitter(base_covariance, kRelativeJitter * diag_scale);
    base_covariance.diagonal().array() += chol.jitter;
  }
  base_covariance_ = share(std::move(base_covariance));
  base_factor_ = share(std::move(chol.lower));
}

GaussianPrior::GaussianPrior(Field mean, std::shared_ptr<const Eigen::MatrixXd> cov,
                             std::shared_ptr<const Eigen::MatrixXd> factor, double theta1)
    : mean_(std::move(mean)), base_covariance_(std::move(cov)), base_factor_(std::move(factor)), theta1_(theta1) {}

GaussianPrior GaussianPrior::exponential(Field mean, double range, double theta1) {
  const KernelSpec kernel{KernelFamily::exponential, 1.0, range};
  Eigen::MatrixXd q0 = build_covariance(kernel, mean.grid());
  return GaussianPrior(std::move(mean), std::move(q0), theta1);
}

double GaussianPrior::scale() const { return std::pow(10.0, theta1_); }

Eigen::MatrixXd GaussianPrior::covariance() const { return scale() * *base_covariance_; }

GaussianPrior GaussianPrior::with_theta1(double theta1) const {
  if (!std::isfinite(theta1)) throw ValidationError("theta1 must be finite");
  return GaussianPrior(mean_, base_covariance_, base_factor_, theta1);
}

GaussianPrior GaussianPrior::with_mean(Field mean) const {
  if (!(mean.grid() == mean_.grid())) throw ValidationError("prior mean grid mismatch");
  return GaussianPrior(std::move(mean), base_covariance_, base_factor_, theta1_);
}

Eigen::VectorXd GaussianPrior::draw(Rng& rng) const {
  const Eigen::VectorXd u = standard_normal(rng, size());
  const Eigen::VectorXd lu = base_factor_->triangularView<Eigen::Lower>() * u;
  return mean_.values() + std::sqrt(scale()) * lu;
}

Eigen::MatrixXd compute_gain(const GaussianPrior& prior, const ObservationModel& model, NoiseScaling noise) {
  return InformationSystem(prior, model, noise).gain();
}

Eigen::MatrixXd compute_gain_data_space(const GaussianPrior& prior, const ObservationModel& model,
                                        NoiseScaling noise) {
  check_dimensions(prior, model);
  const ObservationModel scaled = model.with_noise_scale(noise.theta2);
  const Eigen::MatrixXd qht = prior.scale() * (prior.base_covariance() * model.forward().transpose());
  Eigen::MatrixXd s = model.forward() * qht;
  s.diagonal() += scaled.noise_variance();
  const auto llt = factorize_spd(s, "innovation covariance H Q H^T + R");
  return llt.solve(qht.transpose()).transpose();
}

Field apply_gain(const Field& mean, const Eigen::MatrixXd& gain, const ObservationModel& model,
                 const Eigen::VectorXd& y) {
  check_measurements(model, y);
  if (gain.rows() != mean.size() || gain.cols() != y.size()) throw ValidationError("gain has wrong shape");
  return Field(mean.grid(), mean.values() + gain * (y - model.forward() * mean.values()));
}

Field posterior_mean(const GaussianPrior& prior, const ObservationModel& model, NoiseScaling noise,
                     const Eigen::VectorXd& y) {
  check_measurements(model, y);
  return apply_gain(prior.mean(), compute_gain(prior, model, noise), model, y);
}

Eigen::MatrixXd posterior_covariance(const GaussianPrior& prior, const ObservationModel& model, NoiseScaling noise) {
  return InformationSystem(prior, model, noise).covariance();
}

Eigen::MatrixXd posterior_covariance_update_form(const GaussianPrior& prior, const ObservationModel& model,
                                                 NoiseScaling noise) {
  const Eigen::MatrixXd gain = compute_gain_data_space(prior, model, noise);
  const Eigen::MatrixXd q = prior.covariance();
  return q - gain * (model.forward() * q);
}

PosteriorGaussian make_posterior(const GaussianPrior& prior, const ObservationModel& model, NoiseScaling noise,
                                 const Eigen::VectorXd& y) {
  check_measurements(model, y);
  const InformationSystem system(prior, model, noise);
  Eigen::MatrixXd gain = system.gain();
  Field mean = apply_gain(prior.mean(), gain, model, y);
  return {std::move(mean), system.covariance(), std::move(gain)};
}

namespace {

// Evaluates log N(r; 0, s1 * A + s2 * diag(r0)) for a fixed A = H Q0 H^T.
class EvidenceEvaluator {
 public:
  EvidenceEvaluator(const GaussianPrior& prior, const ObservationModel& model)
      : projected_(model.forward() * prior.base_covariance() * model.forward().transpose()),
        noise_(model.noise_variance()) {}

  double operator()(Theta theta, std::span<const Eigen::VectorXd> residuals) const {
    Eigen::MatrixXd s = std::pow(10.0, theta.theta1) * projected_;
    s.diagonal() += std::pow(10.0, theta.theta2) * noise_;
    const auto llt = factorize_spd(s, "evidence covariance S");
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double m = static_cast<double>(s.rows());
    double total = 0.0;
    for (const auto& r : residuals) {
      const Eigen::VectorXd w = llt.matrixL().solve(r);
      total += -0.5 * w.squaredNorm() - 0.5 * log_det - 0.5 * m * std::log(2.0 * std::numbers::pi);
    }
    return total;
  }

 private:
  Eigen::MatrixXd projected_;
  Eigen::VectorXd noise_;
};

std::vector<Eigen::VectorXd> residuals(const GaussianPrior& prior, const ObservationModel& model,
                                       std::span<const Eigen::VectorXd> ys) {
  std::vector<Eigen::VectorXd> out;
  const Eigen::VectorXd predicted = model.forward() * prior.mean().values();
  for (const auto& y : ys) {
    check_measurements(model, y);
    out.push_back(y - predicted);
  }
  return out;
}

}  // namespace

double log_evidence(const GaussianPrior& prior, const ObservationModel& model, Theta theta,
                    const Eigen::VectorXd& y) {
  check_dimensions(prior, model);
  const std::vector<Eigen::VectorXd> ys{y};
  return EvidenceEvaluator(prior, model)(theta, residuals(prior, model, ys));
}

std::vector<double> default_theta_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 12; ++k) grid.push_back(-2.0 + 0.25 * k);
  return grid;
}

ThetaFit grid_search_theta(const GaussianPrior& prior, const ObservationModel& model,
                           std::span<const Eigen::VectorXd> ys, std::vector<double> grid_theta1,
                           std::vector<double> grid_theta2) {
  check_dimensions(prior, model);
  if (grid_theta1.empty() || grid_theta2.empty()) throw ValidationError("theta grids must be non-empty");
  if (ys.empty()) throw ValidationError("grid search needs at least one measurement vector");
  std::sort(grid_theta1.begin(), grid_theta1.end());
  std::sort(grid_theta2.begin(), grid_theta2.end());
  const EvidenceEvaluator evaluate(prior, model);
  const auto res = residuals(prior, model, ys);

  ThetaFit fit;
  fit.log_evidence = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (double t1 : grid_theta1) {
    for (double t2 : grid_theta2) {
      EvidenceSample sample{{t1, t2}, std::numeric_limits<double>::quiet_NaN()};
      try {
        sample.log_evidence = evaluate(sample.theta, res);
      } catch (const NumericError&) {
      }
      if (std::isfinite(sample.log_evidence) && (!any || sample.log_evidence > fit.log_evidence)) {
        fit.theta = sample.theta;
        fit.log_evidence = sample.log_evidence;
        any = true;
      }
      fit.surface.push_back(sample);
    }
  }
  if (!any) throw NumericError("log evidence could not be evaluated at any grid point");
  return fit;
}

ThetaFit grid_search_theta(const GaussianPrior& prior, const ObservationModel& model, const Eigen::VectorXd& y,
                           std::vector<double> grid_theta1, std::vector<double> grid_theta2) {
  const std::vector<Eigen::VectorXd> ys{y};
  return grid_search_theta(prior, model, ys, std::move(grid_theta1), std::move(grid_theta2));
}

RealizationBatch sample_gaussian_realizations(const Field& mean, const Eigen::MatrixXd& covariance, Index count,
                                             std::uint64_t seed) {
  if (count < 0) throw ValidationError("realization count must be non-negative");
  const GridSpec& grid = mean.grid();
  if (covariance.rows() != grid.size() || covariance.cols() != grid.size()) {
    throw ValidationError("covariance does not match the mean field");
  }
  if (count == 0) return RealizationBatch(grid, Eigen::MatrixXd(grid.size(), 0));
  const double diag_scale = std::max(covariance.diagonal().maxCoeff(), 1e-300);
  const JitteredCholesky chol = cholesky_with_jitter(covariance, kRelativeJitter * diag_scale);
  Eigen::MatrixXd samples(grid.size(), count);
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t k) {
    Rng rng(derive_seed(seed, "posterior", k));
    const Eigen::VectorXd u = standard_normal(rng, grid.size());
    samples.col(static_cast<Index>(k)) = mean.values() + chol.lower.triangularView<Eigen::Lower>() * u;
  });
  return RealizationBatch(grid, std::move(samples));
}

RealizationBatch sample_posterior_cholesky(const PosteriorGaussian& posterior, Index count, std::uint64_t seed) {
  return sample_gaussian_realizations(posterior.mean, posterior.covariance, count, seed);
}

ConditioningDraw conditioning_draw(const GaussianPrior& prior, const ObservationModel& scaled_model,
                                   std::uint64_t seed, Index k) {
  Rng rng(derive_seed(seed, "conditioning", static_cast<std::uint64_t>(k)));
  ConditioningDraw draw;
  draw.prior_sample = prior.draw(rng);
  draw.noise = (standard_normal(rng, scaled_model.measurement_count()).array() *
                scaled_model.noise_variance().array().sqrt())
                   .matrix();
  return draw;
}

Eigen::VectorXd bootstrap_realization(const ConditioningDraw& draw, const Eigen::MatrixXd& gain,
                                      const ObservationModel& model, const Eigen::VectorXd& y) {
  return draw.prior_sample + gain * (y + draw.noise - model.forward() * draw.prior_sample);
}

RealizationBatch sample_posterior_bootstrap(const GaussianPrior& prior, const ObservationModel& model,
                                            NoiseScaling noise, const Eigen::VectorXd& y, Index count,
                                            std::uint64_t seed) {
  check_dimensions(prior, model);
  check_measurements(model, y);
  if (count < 0) throw ValidationError("realization count must be non-negative");
  if (count == 0) return RealizationBatch(prior.grid(), Eigen::MatrixXd(prior.size(), 0));
  const ObservationModel scaled = model.with_noise_scale(noise.theta2);
  const Eigen::MatrixXd gain = compute_gain(prior, model, noise);
  Eigen::MatrixXd samples(prior.size(), count);
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t k) {
    const auto draw = conditioning_draw(prior, scaled, seed, static_cast<Index>(k));
    samples.col(static_cast<Index>(k)) = bootstrap_realization(draw, gain, model, y);
  });
  return RealizationBatch(prior.grid(), std::move(samples));
}

}  // namespace bathy
