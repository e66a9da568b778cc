#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "bathy/error.hpp"
#include "bathy/mlp.hpp"
#include "bathy/parallel.hpp"
#include "bathy/random.hpp"
#include "commands.hpp"
#include "options.hpp"

namespace bathy::cli {

namespace fs = std::filesystem;

namespace {

// Data scale of a pipeline run; the network side comes from network_profile().
struct Profile {
  Index rows, cols;
  Index train_surveys, test_surveys, per_survey;
  Index test_count;
};

const Profile& profile(const std::string& name) {
  static const Profile desk{26, 38, 25, 5, 200, 15};
  static const Profile paper{51, 75, 239, 15, 400, 15};
  if (name == "desk") return desk;
  if (name == "paper") return paper;
  throw ConfigError("unknown profile '" + name + "' (desk, paper)");
}

const std::vector<std::string> kProfiles{"desk", "paper"};

// One subcommand: its options, the --config file, and the action to run.
struct Command {
  CLI::App* app = nullptr;
  std::unique_ptr<OptionSet> options;
  std::string config;
  std::function<void()> action;
};

nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

Command& make_command(std::vector<std::unique_ptr<Command>>& list, CLI::App& app, const std::string& name,
                      const std::string& help) {
  auto cmd = std::make_unique<Command>();
  cmd->app = app.add_subcommand(name, help);
  cmd->app->add_option("--config", cmd->config, "resolved config.json from an earlier run")
      ->check(CLI::ExistingFile);
  cmd->options = std::make_unique<OptionSet>(cmd->app);
  list.push_back(std::move(cmd));
  return *list.back();
}

void add_problem(OptionSet& o, ProblemOptions& p) {
  o.add_path("prior-mean", p.prior_mean, "prior mean field file");
  o.add_path("surveys", p.surveys, "survey directory; its average is the prior mean");
  o.add_path("layout", p.layout, "observation layout file (default layout when empty)");
  o.add("prior-range", p.prior_range, "exponential prior correlation range")->check(CLI::PositiveNumber);
  o.add("theta1", p.theta1, "log10 prior variance scale");
  o.add("theta2", p.theta2, "log10 noise variance scale");
  o.add_path("theta-file", p.theta_file, "theta.csv from fit-gp; overrides theta1/theta2");
}

int invoke(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"bathy"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

int pipeline(const PipelineOptions& o, const nlohmann::json& resolved) {
  if (o.out.empty()) throw ConfigError("missing required option --out");
  const Profile& p = profile(o.profile);
  const fs::path out(o.out);
  fs::create_directories(out);
  {
    std::ofstream cfg(out / "config.json");
    cfg << resolved.dump(2) << '\n';
  }
  auto seed = [&](const char* stream) { return std::to_string(derive_seed(o.seed, stream)); };
  auto path = [&](const char* sub) { return (out / sub).string(); };
  const std::string rows = std::to_string(p.rows), cols = std::to_string(p.cols);

  const std::vector<std::pair<std::string, std::vector<std::string>>> stages{
      {"make-base-surveys",
       {"make-base-surveys", "--rows", rows, "--cols", cols, "--count", std::to_string(p.train_surveys), "--seed",
        seed("train-surveys"), "--out", path("surveys")}},
      {"make-test-surveys",
       {"make-base-surveys", "--rows", rows, "--cols", cols, "--count", std::to_string(p.test_surveys), "--seed",
        seed("test-surveys"), "--out", path("test-surveys")}},
      {"generate",
       {"generate", "--surveys", path("surveys"), "--per-survey", std::to_string(p.per_survey), "--seed",
        seed("generation"), "--out", path("dataset")}},
      {"fit-gp", {"fit-gp", "--dataset", path("dataset"), "--out", path("gp")}},
      {"train",
       {"train", "--dataset", path("dataset"), "--profile", o.profile, "--seed", seed("training"), "--out",
        path("model")}},
      {"benchmark",
       {"benchmark", "--prior-mean", path("dataset/prior_mean.field"), "--layout", path("dataset/layout.txt"),
        "--test-surveys", path("test-surveys"), "--count", std::to_string(p.test_count), "--checkpoint",
        path("model/checkpoint.bin"), "--seed", seed("benchmark"), "--out",
        path("benchmark")}},
  };
  for (const auto& [label, args] : stages) {
    std::clog << "pipeline: stage " << label << '\n';
    const int code = invoke(args);
    if (code != 0) {
      std::cerr << "pipeline: stage '" << label << "' failed with exit code " << code << '\n';
      return code;
    }
  }
  std::clog << "pipeline: benchmark written to " << path("benchmark") << '\n';
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Bathymetry estimation from sparse point and cell-average measurements", "bathy"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  CLI::Option* threads_opt = app.add_option("--threads", threads, "cap on worker threads")->check(CLI::NonNegativeNumber);

  std::vector<std::unique_ptr<Command>> commands;
  int exit_code = 0;

  SurveyOptions surveys;
  {
    Command& c = make_command(commands, app, "make-base-surveys", "write smooth synthetic survey profiles");
    OptionSet& o = *c.options;
    o.add("rows", surveys.rows, "cross-shore grid points")->check(CLI::Range(Index{2}, Index{100000}));
    o.add("cols", surveys.cols, "along-shore grid points")->check(CLI::Range(Index{2}, Index{100000}));
    o.add("width", surveys.width, "cross-shore extent (m)")->check(CLI::PositiveNumber);
    o.add("length", surveys.length, "along-shore extent (m)")->check(CLI::PositiveNumber);
    o.add("count", surveys.count, "number of surveys")->check(CLI::PositiveNumber);
    o.add("seed", surveys.seed, "root seed");
    o.add_path("out", surveys.out, "output directory");
    c.action = [&] { make_base_surveys_cmd(surveys, o.resolved()); };
  }

  GenerateOptions generate;
  {
    Command& c = make_command(commands, app, "generate", "generate (measurement, field) training pairs");
    OptionSet& o = *c.options;
    o.add_path("surveys", generate.surveys, "directory of base survey fields");
    o.add_path("layout", generate.layout, "observation layout file (default layout when empty)");
    o.add_path("out", generate.out, "dataset directory");
    o.add("per-survey", generate.per_survey, "samples per survey")->check(CLI::NonNegativeNumber);
    o.add("jump-fraction", generate.jump_fraction, "fraction of samples with a jump")->check(CLI::Range(0.0, 1.0));
    o.add("alpha", generate.alpha, "perturbation kernel scale")->check(CLI::PositiveNumber);
    o.add("range", generate.range, "perturbation kernel range")->check(CLI::PositiveNumber);
    o.add("jump-height", generate.jump_height, "jump height (m)");
    o.add("jump-frac-w", generate.jump_frac_w, "jump cross-shore fraction")->check(CLI::Range(0.0, 1.0));
    o.add("jump-frac-l", generate.jump_frac_l, "jump along-shore fraction")->check(CLI::Range(0.0, 1.0));
    o.add("format", generate.format, "dataset format")->check(CLI::IsMember({"packed", "text"}));
    o.add("seed", generate.seed, "root seed");
    c.action = [&] { generate_cmd(generate, o.resolved()); };
  }

  FitGpOptions fit;
  {
    Command& c = make_command(commands, app, "fit-gp", "choose theta by marginal-likelihood grid search");
    OptionSet& o = *c.options;
    add_problem(o, fit.problem);
    o.add("observations", fit.observations, "observation files");
    o.add_path("dataset", fit.dataset, "dataset whose measurement vectors are used");
    o.add("max-samples", fit.max_samples, "dataset samples used")->check(CLI::PositiveNumber);
    o.add("theta-min", fit.theta_min, "grid lower end");
    o.add("theta-max", fit.theta_max, "grid upper end");
    o.add("theta-step", fit.theta_step, "grid step")->check(CLI::PositiveNumber);
    o.add_path("out", fit.out, "output directory");
    c.action = [&] { fit_gp_cmd(fit, o.resolved()); };
  }

  TrainOptions train;
  {
    Command& c = make_command(commands, app, "train", "train the posterior-mean network");
    OptionSet& o = *c.options;
    o.add_path("dataset", train.dataset, "dataset directory");
    o.add("profile", train.profile, "architecture preset")->check(CLI::IsMember(kProfiles));
    o.add("hidden", train.hidden, "hidden layer widths (profile default when absent)");
    o.add("epochs", train.epochs, "epochs (profile default when absent)")->check(CLI::NonNegativeNumber);
    o.add("batch-size", train.batch_size, "mini-batch size (profile default when absent)")
        ->check(CLI::PositiveNumber);
    o.add("learning-rate", train.learning_rate, "Adam step size (profile default when absent)");
    o.add("activation", train.activation, "hidden activation")->check(CLI::IsMember({"relu", "tanh"}));
    o.add_path("prior-mean", train.prior_mean, "target shift field (dataset prior_mean.field when absent)");
    o.add("seed", train.seed, "root seed");
    o.add_path("out", train.out, "output directory");
    c.action = [&] {
      const NetworkProfile p = network_profile(train.profile);
      if (!o.given("hidden")) train.hidden = p.hidden;
      if (!o.given("epochs")) train.epochs = p.epochs;
      if (!o.given("learning-rate")) train.learning_rate = p.learning_rate;
      if (!o.given("batch-size")) train.batch_size = p.batch_size;
      train_cmd(train, o.resolved());
    };
  }

  EstimateOptions estimate;
  {
    Command& c = make_command(commands, app, "estimate", "posterior-mean estimate from one observation file");
    OptionSet& o = *c.options;
    add_problem(o, estimate.problem);
    o.add("method", estimate.method, "kriging, dnn, dnn-kriging or tv")
        ->check(CLI::IsMember({"kriging", "dnn", "dnn-kriging", "tv"}));
    o.add_path("observations", estimate.observations, "observation file");
    o.add_path("checkpoint", estimate.checkpoint, "network checkpoint (dnn methods)");
    o.add_path("reference", estimate.reference, "reference field for RMSE");
    o.add("lambda", estimate.lambda, "TV weight")->check(CLI::NonNegativeNumber);
    o.add("eps", estimate.eps, "TV smoothing")->check(CLI::PositiveNumber);
    o.add("max-iters", estimate.max_iters, "TV iteration cap")->check(CLI::PositiveNumber);
    o.add("grad-tol", estimate.grad_tol, "TV gradient tolerance")->check(CLI::NonNegativeNumber);
    o.add_path("out", estimate.out, "output directory");
    c.action = [&] { estimate_cmd(estimate, o.resolved()); };
  }

  SampleOptions sample;
  {
    Command& c = make_command(commands, app, "sample", "conditional realizations");
    OptionSet& o = *c.options;
    add_problem(o, sample.problem);
    o.add("method", sample.method, "cholesky, bootstrap or dnn-bootstrap")
        ->check(CLI::IsMember({"cholesky", "bootstrap", "dnn-bootstrap"}));
    o.add_path("observations", sample.observations, "observation file");
    o.add_path("checkpoint", sample.checkpoint, "network checkpoint (dnn-bootstrap)");
    o.add("count", sample.count, "number of realizations")->check(CLI::NonNegativeNumber);
    o.add("level", sample.level, "central band probability")->check(CLI::Range(0.0, 1.0));
    o.add("write-realizations", sample.write_realizations, "write each realization as a field file");
    o.add("seed", sample.seed, "root seed");
    o.add_path("out", sample.out, "output directory");
    c.action = [&] { sample_cmd(sample, o.resolved()); };
  }

  BenchmarkOptions bench;
  {
    Command& c = make_command(commands, app, "benchmark", "compare methods on held-out synthetic surveys");
    OptionSet& o = *c.options;
    add_problem(o, bench.problem);
    o.add_path("test-surveys", bench.test_surveys, "base profiles for held-out truths");
    o.add_path("truth", bench.truth, "directory of truth fields used as-is");
    o.add("count", bench.count, "number of held-out truths")->check(CLI::PositiveNumber);
    o.add("jumps", bench.jumps, "add a random jump to every truth");
    o.add("alpha", bench.alpha, "perturbation kernel scale")->check(CLI::PositiveNumber);
    o.add("range", bench.range, "perturbation kernel range")->check(CLI::PositiveNumber);
    o.add_path("checkpoint", bench.checkpoint, "network checkpoint");
    o.add("methods", bench.methods, "methods to compare")
        ->check(CLI::IsMember({"kriging", "dnn", "dnn-kriging", "tv"}));
    o.add("fit-theta", bench.fit_theta, "per-survey evidence search when no theta file is given");
    o.add("realizations", bench.realizations, "DNN bootstrap realizations per survey")
        ->check(CLI::NonNegativeNumber);
    o.add("level", bench.level, "band probability")->check(CLI::Range(0.0, 1.0));
    o.add("lambda", bench.lambda, "TV weight")->check(CLI::NonNegativeNumber);
    o.add("eps", bench.eps, "TV smoothing")->check(CLI::PositiveNumber);
    o.add("max-iters", bench.max_iters, "TV iteration cap")->check(CLI::PositiveNumber);
    o.add("seed", bench.seed, "root seed");
    o.add_path("out", bench.out, "output directory");
    c.action = [&] { benchmark_cmd(bench, o.resolved()); };
  }

  PipelineOptions pipe;
  {
    Command& c = make_command(commands, app, "pipeline", "make-base-surveys, generate, fit-gp, train, benchmark");
    OptionSet& o = *c.options;
    o.add("profile", pipe.profile, "desk (minutes) or paper (hours)")->check(CLI::IsMember(kProfiles));
    o.add("seed", pipe.seed, "root seed");
    o.add_path("out", pipe.out, "output directory");
    c.action = [&] { exit_code = pipeline(pipe, o.resolved()); };
  }

  try {
    app.parse(argc, argv);
    if (threads_opt->count() > 0) set_max_threads(static_cast<unsigned>(threads));
    for (auto& cmd : commands) {
      if (!cmd->app->parsed()) continue;
      if (!cmd->config.empty()) cmd->options->apply(load_config(cmd->config));
      cmd->action();
    }
    return exit_code;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "bathy: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "bathy: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace bathy::cli
