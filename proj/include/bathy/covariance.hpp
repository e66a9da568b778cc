#pragma once

#include <Eigen/Core>

#include "bathy/grid.hpp"

namespace bathy {

enum class KernelFamily { squared_exponential, exponential };

// Stationary kernel over normalized_distance:
//   squared_exponential: scale * exp(-d^2 / range^2)
//   exponential:         scale * exp(-d / range)
struct KernelSpec {
  KernelFamily family = KernelFamily::squared_exponential;
  double scale = 0.15;
  double range = 0.07;

  void validate() const;
  double operator()(double distance) const;
};

inline constexpr Index kDefaultCovarianceCap = 8192;

// Dense n x n kernel matrix over all grid points (no jitter).
Eigen::MatrixXd build_covariance(const KernelSpec& kernel, const GridSpec& grid,
                                 Index max_size = kDefaultCovarianceCap);

struct JitteredCholesky {
  Eigen::MatrixXd lower;  // L with L L^T = A + jitter I
  double jitter = 0.0;
};

// Adds base_jitter to the diagonal, doubling it up to max_doublings times
// until the factorization succeeds. Throws NumericError otherwise.
JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& a, double base_jitter, int max_doublings = 8);

inline constexpr double kRelativeJitter = 1e-10;

}  // namespace bathy
