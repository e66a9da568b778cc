#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "bathy/error.hpp"
#include "bathy/tv.hpp"
#include "oracles.hpp"

using namespace bathy;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Every grid point observed once plus 2x2 block averages: H has full column rank.
ObservationModel full_rank_model(const GridSpec& g) {
  PointStations all;
  for (Index i = 0; i < g.rows(); ++i)
    for (Index j = 0; j < g.cols(); ++j) all.push_back({i, j});
  CellPartition blocks;
  for (Index i = 0; i + 1 < g.rows(); i += 2)
    for (Index j = 0; j + 1 < g.cols(); j += 2) blocks.push_back({{i, j}, {i + 1, j + 1}});
  return ObservationModel::from_layout({all, blocks}, g, 0.01, 0.001);
}

VectorXd weighted_least_squares(const ObservationModel& model, const VectorXd& y) {
  const MatrixXd h = model.forward();
  const VectorXd w = model.noise_variance().cwiseInverse();
  const MatrixXd normal = h.transpose() * w.asDiagonal() * h;
  return normal.fullPivLu().solve(h.transpose() * w.asDiagonal() * y);
}

}  // namespace

TEST_CASE("objective at the weighted least-squares solution has zero gradient without penalty") {
  const GridSpec g(4, 6, 1.0, 1.0);
  const ObservationModel model = full_rank_model(g);
  std::mt19937_64 rng(1);
  const VectorXd y = oracle::gaussian_vector(rng, model.measurement_count());
  TVConfig cfg;
  cfg.lambda = 0.0;
  const TVObjective obj = tv_objective(Field(g, weighted_least_squares(model, y)), y, model, cfg);
  CHECK(obj.gradient.norm() < 1e-8);
  CHECK(obj.penalty == 0.0);
}

TEST_CASE("constant fields pay only the smoothing floor") {
  const GridSpec g(4, 5, 1.0, 1.0);
  const ObservationModel model = full_rank_model(g);
  TVConfig cfg;
  cfg.lambda = 2.5;
  cfg.smoothing_eps = 0.01;
  const Field c = Field::constant(g, 3.0);
  const VectorXd y = observe(model, c, std::nullopt);
  const TVObjective obj = tv_objective(c, y, model, cfg);
  CHECK(edge_count(g) == 4 * 4 + 3 * 5);
  CHECK(obj.penalty == doctest::Approx(2.5 * 31 * 0.01).epsilon(1e-14));
  CHECK(obj.misfit == doctest::Approx(0.0));
}

TEST_CASE("tv gradient matches finite differences") {
  const GridSpec g(4, 4, 1.0, 1.0);
  std::mt19937_64 rng(2);
  const ObservationModel model(oracle::gaussian_matrix(rng, 7, 16), VectorXd::Constant(7, 0.05), 7);
  const VectorXd y = oracle::gaussian_vector(rng, 7);
  for (double lambda : {0.0, 0.3, 2.0}) {
    TVConfig cfg;
    cfg.lambda = lambda;
    cfg.smoothing_eps = 0.05;
    const VectorXd x = oracle::gaussian_vector(rng, 16);
    const VectorXd analytic = tv_objective(Field(g, x), y, model, cfg).gradient;
    const VectorXd numeric = oracle::finite_difference(
        [&](const VectorXd& v) { return tv_objective(Field(g, v), y, model, cfg).value; }, x, 1e-6);
    CHECK(oracle::max_relative_error(analytic, numeric, 1e-3) < 1e-6);
  }
}

TEST_CASE("smoothed variation approaches the exact one as eps shrinks") {
  const GridSpec g(5, 5, 1.0, 1.0);
  std::mt19937_64 rng(3);
  const Field x(g, oracle::gaussian_vector(rng, 25));
  const double exact = total_variation(x);
  double previous_gap = INFINITY;
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    const double gap = smoothed_total_variation(x, eps) - exact;
    CHECK(gap >= 0.0);
    CHECK(gap < previous_gap);
    previous_gap = gap;
  }
  CHECK(previous_gap <= edge_count(g) * 1e-3);
}

TEST_CASE("tv map without penalty recovers weighted least squares") {
  const GridSpec g(5, 6, 1.0, 1.0);
  const ObservationModel model = full_rank_model(g);
  std::mt19937_64 rng(4);
  const VectorXd y = oracle::gaussian_vector(rng, model.measurement_count());
  TVConfig cfg;
  cfg.lambda = 0.0;
  cfg.grad_tol = 1e-8;
  const TVResult r = tv_map(y, model, cfg, Field::constant(g, 0.0));
  const VectorXd wls = weighted_least_squares(model, y);
  CHECK(std::sqrt((r.estimate.values() - wls).squaredNorm() / 30.0) < 1e-6);
  CHECK(r.report.converged);
  for (std::size_t k = 1; k < r.report.history.size(); ++k)
    CHECK(r.report.history[k].objective <= r.report.history[k - 1].objective);
}

TEST_CASE("adding a constant to the data and start shifts the unpenalized solution") {
  const GridSpec g(4, 6, 1.0, 1.0);
  const ObservationModel model = full_rank_model(g);
  std::mt19937_64 rng(5);
  const VectorXd y = oracle::gaussian_vector(rng, model.measurement_count());
  const Field init(g, oracle::gaussian_vector(rng, 24));
  TVConfig cfg;
  cfg.lambda = 0.0;
  cfg.grad_tol = 1e-9;
  const double c = 4.25;
  const TVResult a = tv_map(y, model, cfg, init);
  const TVResult b = tv_map((y.array() + c).matrix(), model, cfg, Field(g, (init.values().array() + c).matrix()));
  CHECK(((b.estimate.values() - a.estimate.values()).array() - c).abs().maxCoeff() < 1e-6);
}

TEST_CASE("piecewise-constant profile is recovered away from the jump") {
  // Two cross-shore rows sharing one along-shore profile with a step at column 20.
  const GridSpec g(2, 40, 1.0, 1.0);
  VectorXd truth(80);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 40; ++j) truth[i * 40 + j] = j < 20 ? 1.0 : 3.0;
  PointStations all;
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 40; ++j) all.push_back({i, j});
  const ObservationModel model = ObservationModel::from_layout({all, {}}, g, 1e-3, 1e-3);
  const VectorXd y = observe(model, Field(g, truth), 17);
  TVConfig cfg;
  cfg.lambda = 0.05;
  const TVResult r = tv_map(y, model, cfg, Field::constant(g, 2.0));
  double ss = 0.0;
  int count = 0;
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 40; ++j) {
      if (j == 19 || j == 20) continue;
      const double e = r.estimate(i, j) - truth[i * 40 + j];
      ss += e * e;
      ++count;
    }
  CHECK(std::sqrt(ss / count) < 0.1);
  // Edge preservation: the step survives almost intact.
  CHECK(r.estimate(0, 20) - r.estimate(0, 19) > 1.5);
}

TEST_CASE("starting at the truth of a consistent instance") {
  const GridSpec g(4, 6, 1.0, 1.0);
  const ObservationModel model = full_rank_model(g);
  std::mt19937_64 rng(6);
  const Field truth(g, oracle::gaussian_vector(rng, 24));
  const VectorXd y = observe(model, truth, std::nullopt);
  TVConfig cfg;
  cfg.lambda = 0.0;
  const TVResult exact = tv_map(y, model, cfg, truth);
  CHECK(exact.report.iterations <= 3);
  CHECK(exact.report.converged);
  cfg.lambda = 0.1;
  const TVResult penalized = tv_map(y, model, cfg, truth);
  CHECK(penalized.report.objective <= tv_objective(truth, y, model, cfg).value);
}

TEST_CASE("tv configuration validation and report output") {
  TVConfig cfg;
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.smoothing_eps = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);

  const GridSpec g(3, 3, 1.0, 1.0);
  const ObservationModel model = full_rank_model(g);
  cfg = {};
  cfg.max_iters = 5;
  const TVResult r = tv_map(VectorXd::Ones(model.measurement_count()), model, cfg, Field::constant(g, 0.0));
  const auto path = std::filesystem::temp_directory_path() / "bathy_unit" / "tv" / "report.csv";
  write_tv_report(path, r.report);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "iteration,objective,grad_norm,step");
  CHECK(r.report.iterations <= 5);
}
