#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "bathy/forward_model.hpp"
#include "bathy/grid.hpp"
#include "bathy/kriging.hpp"
#include "bathy/mlp.hpp"
#include "bathy/realization.hpp"
#include "bathy/synthetic.hpp"
#include "bathy/tv.hpp"

namespace bathy {

double rmse(const Field& estimate, const Field& reference);

// across_shore: fixed column, varying row. along_shore: fixed row, varying column.
enum class SectionAxis { across_shore, along_shore };

struct Profile {
  SectionAxis axis = SectionAxis::along_shore;
  Index index = 0;
  Eigen::VectorXd position;  // meters along the section
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

Eigen::VectorXd section_values(const Field& field, SectionAxis axis, Index index);

// Zero-width bands.
Profile extract_section(const Field& field, SectionAxis axis, Index index);
// Batch mean with empirical quantile bands at `level`.
Profile extract_section(const RealizationBatch& batch, SectionAxis axis, Index index, double level = 0.95);
// estimate +- z(level) * std.
Profile extract_section(const Field& estimate, const Field& std, SectionAxis axis, Index index, double level = 0.95);

Field std_map(const RealizationBatch& batch);
Field std_map(const Field& mean, const Eigen::MatrixXd& covariance);
Field std_map(const PosteriorGaussian& posterior);

// Two-sided standard normal quantile for a central probability `level`.
double gaussian_band_z(double level);

// Fraction of grid points whose band contains the reference (inclusive).
double coverage(const RealizationBatch& batch, const Field& reference, double level);
double coverage(const Field& estimate, const Field& std, const Field& reference, double level);
double coverage(const PosteriorGaussian& posterior, const Field& reference, double level);
double coverage(const Band& band, const Field& reference);

enum class MethodKind { kriging, dnn, dnn_kriging, tv };

MethodKind parse_method(std::string_view name);
std::string_view method_name(MethodKind kind);

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::kriging;
};

struct TestSurvey {
  std::string id;
  Field truth;
  std::optional<JumpSpec> jump;
};

// Held-out truths: base profile k % |bases| plus a smooth Gaussian
// perturbation and, when `jumps`, one random rectangular jump. Ids t00, t01, ...
std::vector<TestSurvey> make_test_surveys(std::span<const Field> bases, Index count, const KernelSpec& kernel,
                                          bool jumps, std::uint64_t seed, const JumpShape& shape = {});

struct BenchmarkConfig {
  std::vector<double> grid_theta1 = default_theta_grid();
  std::vector<double> grid_theta2 = default_theta_grid();
  // One theta per survey; evidence grid search per survey when absent.
  std::optional<std::vector<Theta>> thetas;
  Index dnn_realizations = 200;
  double level = 0.95;
  TVConfig tv;
  std::uint64_t seed = 0;
};

struct BenchmarkRow {
  std::string survey;
  std::string method;
  double rmse = 0.0;
  double coverage = 0.0;  // NaN when the method has no uncertainty
  double misfit = 0.0;    // R^-1 weighted data misfit of the estimate
  Theta theta;
};

struct MethodSummary {
  std::string method;
  double mean_rmse = 0.0;
  double mean_coverage = 0.0;
  Index best_count = 0;  // surveys on which this method had the lowest RMSE
};

struct SectionExtract {
  std::string survey;
  std::string method;
  Profile profile;
  Eigen::VectorXd reference;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;  // survey-major, methods in registration order
  std::vector<MethodSummary> summary;
  std::vector<SectionExtract> sections;

  const BenchmarkRow& at(std::string_view survey, std::string_view method) const;
};

// Simulates noisy measurements of each survey, runs every method and records
// RMSE, band coverage and data misfit. Learned methods need `network`.
// `prior` supplies the prior mean and Q0; theta comes from the config or a
// per-survey evidence search.
BenchmarkReport run_benchmark(std::span<const TestSurvey> surveys, std::span<const MethodSpec> methods,
                              const ObservationModel& model, const GaussianPrior& prior, const MLPParameters* network,
                              const BenchmarkConfig& config);

// report.csv, summary.csv and sections/<survey>_<method>_<axis>.csv
void write_benchmark(const std::filesystem::path& dir, const BenchmarkReport& report);
void write_section_csv(const std::filesystem::path& path, const Profile& profile,
                       const std::optional<Eigen::VectorXd>& reference);

}  // namespace bathy
