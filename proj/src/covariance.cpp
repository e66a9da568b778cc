#include "bathy/covariance.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>

#include "bathy/error.hpp"

namespace bathy {

void KernelSpec::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("kernel scale must be positive");
  if (!(range > 0.0) || !std::isfinite(range)) throw ValidationError("kernel range must be positive");
}

double KernelSpec::operator()(double distance) const {
  switch (family) {
    case KernelFamily::squared_exponential:
      return scale * std::exp(-(distance * distance) / (range * range));
    case KernelFamily::exponential:
      return scale * std::exp(-distance / range);
  }
  return 0.0;
}

Eigen::MatrixXd build_covariance(const KernelSpec& kernel, const GridSpec& grid, Index max_size) {
  kernel.validate();
  const Index n = grid.size();
  if (n > max_size) {
    throw SizeError("covariance of size " + std::to_string(n) + " exceeds cap " + std::to_string(max_size));
  }
  // The kernel depends only on |di|, |dj|; tabulate once.
  const Index rows = grid.rows(), cols = grid.cols();
  Eigen::MatrixXd table(rows, cols);
  for (Index di = 0; di < rows; ++di) {
    for (Index dj = 0; dj < cols; ++dj) table(di, dj) = kernel(normalized_distance({0, 0}, {di, dj}, grid));
  }
  Eigen::MatrixXd cov(n, n);
  for (Index a = 0; a < n; ++a) {
    const Index ia = a / cols, ja = a % cols;
    for (Index b = 0; b <= a; ++b) {
      const Index ib = b / cols, jb = b % cols;
      const double v = table(std::abs(ia - ib), std::abs(ja - jb));
      cov(a, b) = v;
      cov(b, a) = v;
    }
  }
  return cov;
}

JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& a, double base_jitter, int max_doublings) {
  if (a.rows() != a.cols()) throw ValidationError("cholesky: matrix is not square");
  double jitter = base_jitter;
  for (int attempt = 0; attempt <= max_doublings; ++attempt, jitter *= 2.0) {
    Eigen::MatrixXd shifted = a;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) {
      JitteredCholesky result{llt.matrixL(), jitter};
      if (result.lower.allFinite()) return result;
    }
  }
  std::ostringstream msg;
  msg << "cholesky failed on " << a.rows() << "x" << a.cols() << " matrix after jitter up to " << jitter / 2.0
      << " (diagonal range " << a.diagonal().minCoeff() << " .. " << a.diagonal().maxCoeff() << ")";
  throw NumericError(msg.str());
}

}  // namespace bathy
