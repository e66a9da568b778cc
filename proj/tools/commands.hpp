#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "bathy/grid.hpp"

namespace bathy::cli {

struct SurveyOptions {
  Index rows = 51;
  Index cols = 75;
  double width = 500.0;
  double length = 750.0;
  Index count = 239;
  std::uint64_t seed = 0;
  std::string out;
};

struct GenerateOptions {
  std::string surveys;
  std::string layout;  // default layout when empty
  std::string out;
  Index per_survey = 400;
  double jump_fraction = 0.5;
  double alpha = 0.15;
  double range = 0.07;
  double jump_height = 12.0;
  double jump_frac_w = 0.44;
  double jump_frac_l = 0.44;
  std::string format = "packed";
  std::uint64_t seed = 0;
};

// Prior, layout and hyper-parameters shared by the inference commands.
struct ProblemOptions {
  std::string prior_mean;  // field file; otherwise the average of `surveys`
  std::string surveys;
  std::string layout;
  double prior_range = 0.75;
  double theta1 = 0.0;
  double theta2 = 0.0;
  std::string theta_file;  // overrides theta1/theta2 when set
};

struct FitGpOptions {
  ProblemOptions problem;
  std::vector<std::string> observations;
  std::string dataset;
  Index max_samples = 500;
  double theta_min = -2.0;
  double theta_max = 1.0;
  double theta_step = 0.25;
  std::string out;
};

struct TrainOptions {
  std::string dataset;
  std::string profile = "desk";
  std::vector<Index> hidden;
  Index epochs = 0;
  Index batch_size = 0;
  double learning_rate = 0.0;
  std::string activation = "relu";
  std::string prior_mean;
  std::uint64_t seed = 0;
  std::string out;
};

struct EstimateOptions {
  ProblemOptions problem;
  std::string method;
  std::string observations;
  std::string checkpoint;
  std::string reference;
  double lambda = 1.0;
  double eps = 1e-3;
  Index max_iters = 2000;
  double grad_tol = 1e-6;
  std::string out;
};

struct SampleOptions {
  ProblemOptions problem;
  std::string method;
  std::string observations;
  std::string checkpoint;
  Index count = 200;
  double level = 0.95;
  bool write_realizations = true;
  std::uint64_t seed = 0;
  std::string out;
};

struct BenchmarkOptions {
  ProblemOptions problem;
  std::string test_surveys;  // base profiles perturbed into held-out truths
  std::string truth;         // or truth fields used as-is
  Index count = 15;
  bool jumps = true;
  double alpha = 0.15;
  double range = 0.07;
  std::string checkpoint;
  std::vector<std::string> methods{"kriging", "dnn", "dnn-kriging", "tv"};
  bool fit_theta = true;  // per-survey evidence search unless a theta file is given
  Index realizations = 200;
  double level = 0.95;
  double lambda = 1.0;
  double eps = 1e-3;
  Index max_iters = 2000;
  std::uint64_t seed = 0;
  std::string out;
};

struct PipelineOptions {
  std::string profile = "desk";
  std::uint64_t seed = 0;
  std::string out;
};

// Each command writes config.json (its resolved options) into its output directory.
void make_base_surveys_cmd(const SurveyOptions& o, const nlohmann::json& resolved);
void generate_cmd(const GenerateOptions& o, const nlohmann::json& resolved);
void fit_gp_cmd(const FitGpOptions& o, const nlohmann::json& resolved);
void train_cmd(const TrainOptions& o, const nlohmann::json& resolved);
void estimate_cmd(const EstimateOptions& o, const nlohmann::json& resolved);
void sample_cmd(const SampleOptions& o, const nlohmann::json& resolved);
void benchmark_cmd(const BenchmarkOptions& o, const nlohmann::json& resolved);

}  // namespace bathy::cli
