#include "bathy/tv.hpp"

#include <cmath>
#include <deque>

#include "bathy/error.hpp"
#include "text_io.hpp"

namespace bathy {

void TVConfig::validate() const {
  if (!(lambda >= 0.0)) throw ValidationError("TV lambda must be non-negative");
  if (!(smoothing_eps > 0.0)) throw ValidationError("TV smoothing epsilon must be positive");
  if (max_iters < 1) throw ValidationError("TV max_iters must be >= 1");
  if (!(grad_tol >= 0.0)) throw ValidationError("TV grad_tol must be non-negative");
  if (memory < 1) throw ValidationError("L-BFGS memory must be >= 1");
}

Index edge_count(const GridSpec& grid) {
  return grid.rows() * (grid.cols() - 1) + (grid.rows() - 1) * grid.cols();
}

namespace {

// Visits every edge as (flat index a, flat index b) with b the right or lower neighbour.
template <typename Visit>
void for_each_edge(const GridSpec& grid, Visit&& visit) {
  const Index rows = grid.rows(), cols = grid.cols();
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const Index a = i * cols + j;
      if (j + 1 < cols) visit(a, a + 1);
      if (i + 1 < rows) visit(a, a + cols);
    }
  }
}

}  // namespace

double smoothed_total_variation(const Field& x, double eps) {
  double total = 0.0;
  const auto& v = x.values();
  for_each_edge(x.grid(), [&](Index a, Index b) { total += std::hypot(v[b] - v[a], eps); });
  return total;
}

double total_variation(const Field& x) {
  double total = 0.0;
  const auto& v = x.values();
  for_each_edge(x.grid(), [&](Index a, Index b) { total += std::abs(v[b] - v[a]); });
  return total;
}

TVObjective tv_objective(const Field& x, const Eigen::VectorXd& y, const ObservationModel& model,
                         const TVConfig& config) {
  config.validate();
  if (x.size() != model.field_size() || y.size() != model.measurement_count()) {
    throw ValidationError("tv_objective: dimension mismatch");
  }
  const auto& v = x.values();
  const Eigen::VectorXd weighted = (y - model.forward() * v).cwiseQuotient(model.noise_variance());
  TVObjective out;
  out.misfit = 0.5 * (y - model.forward() * v).dot(weighted);
  out.gradient = -model.forward().transpose() * weighted;
  double variation = 0.0;
  const double eps = config.smoothing_eps, lambda = config.lambda;
  for_each_edge(x.grid(), [&](Index a, Index b) {
    const double d = v[b] - v[a];
    const double s = std::hypot(d, eps);
    variation += s;
    out.gradient[b] += lambda * d / s;
    out.gradient[a] -= lambda * d / s;
  });
  out.penalty = lambda * variation;
  out.value = out.misfit + out.penalty;
  return out;
}

TVResult tv_map(const Eigen::VectorXd& y, const ObservationModel& model, const TVConfig& config, const Field& init) {
  config.validate();
  const GridSpec grid = init.grid();
  auto evaluate = [&](const Eigen::VectorXd& v) {
    TVObjective obj = tv_objective(Field(grid, v), y, model, config);
    if (!std::isfinite(obj.value)) throw NumericError("TV objective is not finite");
    return obj;
  };

  Eigen::VectorXd x = init.values();
  TVObjective current = evaluate(x);
  TVReport report;
  report.history.push_back({0, current.value, current.gradient.norm(), 0.0});

  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;  // (s, y) corrections
  constexpr double kArmijo = 1e-4;
  Index iter = 0;
  while (current.gradient.norm() > config.grad_tol && iter < config.max_iters) {
    // Two-loop recursion for d = -H g.
    Eigen::VectorXd q = current.gradient;
    std::vector<double> alpha(pairs.size());
    for (std::size_t k = pairs.size(); k-- > 0;) {
      const auto& [s, t] = pairs[k];
      alpha[k] = s.dot(q) / t.dot(s);
      q -= alpha[k] * t;
    }
    if (!pairs.empty()) {
      const auto& [s, t] = pairs.back();
      q *= s.dot(t) / t.squaredNorm();
    } else {
      q /= std::max(1.0, current.gradient.norm());
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto& [s, t] = pairs[k];
      const double beta = t.dot(q) / t.dot(s);
      q += (alpha[k] - beta) * s;
    }
    Eigen::VectorXd direction = -q;
    double slope = current.gradient.dot(direction);
    if (!(slope < 0.0)) {
      pairs.clear();
      direction = -current.gradient / std::max(1.0, current.gradient.norm());
      slope = current.gradient.dot(direction);
    }

    double step = 1.0;
    bool accepted = false;
    TVObjective trial;
    Eigen::VectorXd candidate;
    for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
      candidate = x + step * direction;
      trial = evaluate(candidate);
      if (trial.value <= current.value + kArmijo * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (pairs.empty()) break;  // no descent even along the gradient
      pairs.clear();
      continue;
    }
    ++iter;
    Eigen::VectorXd s = candidate - x;
    Eigen::VectorXd t = trial.gradient - current.gradient;
    if (s.dot(t) > 1e-12 * s.norm() * t.norm()) {
      pairs.emplace_back(std::move(s), std::move(t));
      if (static_cast<Index>(pairs.size()) > config.memory) pairs.pop_front();
    }
    x = std::move(candidate);
    current = std::move(trial);
    report.history.push_back({iter, current.value, current.gradient.norm(), step});
  }
  report.objective = current.value;
  report.iterations = iter;
  report.grad_norm = current.gradient.norm();
  report.converged = report.grad_norm <= config.grad_tol;
  return {Field(grid, x), std::move(report)};
}

void write_tv_report(const std::filesystem::path& path, const TVReport& report) {
  auto out = detail::open_output(path);
  out << "iteration,objective,grad_norm,step\n";
  for (const auto& it : report.history) {
    out << it.iteration << ',' << detail::format_double(it.objective) << ',' << detail::format_double(it.grad_norm)
        << ',' << detail::format_double(it.step) << '\n';
  }
  detail::finish_output(out, path);
}

}  // namespace bathy
