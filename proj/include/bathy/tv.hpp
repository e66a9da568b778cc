#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "bathy/forward_model.hpp"
#include "bathy/grid.hpp"

namespace bathy {

struct TVConfig {
  double lambda = 1.0;
  double smoothing_eps = 1e-3;  // meters
  Index max_iters = 2000;
  double grad_tol = 1e-6;
  Index memory = 10;  // L-BFGS correction pairs

  void validate() const;
};

// J(x) = 1/2 (y - Hx)^T R^-1 (y - Hx) + lambda * sum_edges sqrt(dx^2 + eps^2)
// over horizontal and vertical nearest-neighbour edges.
struct TVObjective {
  double value = 0.0;
  double misfit = 0.0;  // the 1/2-weighted data term
  double penalty = 0.0; // lambda times the smoothed variation
  Eigen::VectorXd gradient;
};

TVObjective tv_objective(const Field& x, const Eigen::VectorXd& y, const ObservationModel& model,
                         const TVConfig& config);

// sum_edges sqrt(dx^2 + eps^2)
double smoothed_total_variation(const Field& x, double eps);
// sum_edges |dx|
double total_variation(const Field& x);
Index edge_count(const GridSpec& grid);

struct TVIterate {
  Index iteration = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

struct TVReport {
  double objective = 0.0;
  Index iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  std::vector<TVIterate> history;  // iteration 0 is the initial point
};

struct TVResult {
  Field estimate;
  TVReport report;
};

// L-BFGS with Armijo backtracking; the objective never increases between
// accepted iterates. Stops at grad_tol, max_iters, or when no descent step
// can be found.
TVResult tv_map(const Eigen::VectorXd& y, const ObservationModel& model, const TVConfig& config, const Field& init);

void write_tv_report(const std::filesystem::path& path, const TVReport& report);

}  // namespace bathy
