#include "bathy/realization.hpp"

#include <algorithm>
#include <cmath>

#include "bathy/error.hpp"

namespace bathy {

double empirical_quantile(Eigen::VectorXd sample, double q) {
  if (sample.size() == 0) throw ValidationError("quantile of empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile level must lie in [0, 1]");
  std::sort(sample.data(), sample.data() + sample.size());
  const double pos = q * static_cast<double>(sample.size() - 1);
  const auto lo = static_cast<Index>(std::floor(pos));
  const Index hi = std::min<Index>(lo + 1, sample.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return sample[lo] + t * (sample[hi] - sample[lo]);
}

RealizationBatch::RealizationBatch(GridSpec grid, Eigen::MatrixXd samples)
    : grid_(grid), samples_(std::move(samples)) {
  if (samples_.rows() != grid_.size()) throw ValidationError("realization length does not match grid");
  if (empty()) return;
  if (!samples_.allFinite()) throw NumericError("realizations contain non-finite values");
  mean_ = samples_.rowwise().mean();
  if (size() > 1) {
    std_ = ((samples_.colwise() - mean_).array().square().rowwise().sum() / static_cast<double>(size() - 1)).sqrt();
  } else {
    std_ = Eigen::VectorXd::Zero(grid_.size());
  }
  band95_ = quantile_band(0.95);
}

Band RealizationBatch::quantile_band(double level) const {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("band level must lie in (0, 1)");
  if (empty()) throw ValidationError("quantile band of an empty batch");
  const double tail = (1.0 - level) / 2.0;
  Band band{Eigen::VectorXd(grid_.size()), Eigen::VectorXd(grid_.size())};
  for (Index p = 0; p < grid_.size(); ++p) {
    Eigen::VectorXd row = samples_.row(p).transpose();
    band.lo[p] = empirical_quantile(row, tail);
    band.hi[p] = empirical_quantile(std::move(row), 1.0 - tail);
  }
  return band;
}

}  // namespace bathy
