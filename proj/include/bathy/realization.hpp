#pragma once

#include <Eigen/Core>

#include "bathy/grid.hpp"

namespace bathy {

struct Band {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

// A set of conditional realizations stored column-wise, with point-wise
// summaries computed at construction.
class RealizationBatch {
 public:
  RealizationBatch(GridSpec grid, Eigen::MatrixXd samples);

  const GridSpec& grid() const { return grid_; }
  const Eigen::MatrixXd& samples() const { return samples_; }
  Index size() const { return samples_.cols(); }
  bool empty() const { return samples_.cols() == 0; }
  Field realization(Index k) const { return Field(grid_, samples_.col(k)); }

  // Point-wise sample mean and standard deviation (n-1 denominator; zero for a single realization).
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return std_; }

  // Empirical central band containing `level` of the realizations at each point.
  Band quantile_band(double level) const;
  // 2.5% / 97.5% band, cached.
  const Band& band95() const { return band95_; }

 private:
  GridSpec grid_;
  Eigen::MatrixXd samples_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd std_;
  Band band95_;
};

// Linear-interpolated empirical quantile (q in [0, 1]) of a sample.
double empirical_quantile(Eigen::VectorXd sample, double q);

}  // namespace bathy
