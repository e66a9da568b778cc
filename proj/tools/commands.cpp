#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "bathy/error.hpp"
#include "bathy/evaluation.hpp"
#include "bathy/forward_model.hpp"
#include "bathy/hybrid.hpp"
#include "bathy/kriging.hpp"
#include "bathy/mlp.hpp"
#include "bathy/synthetic.hpp"
#include "bathy/tv.hpp"

namespace bathy::cli {

namespace fs = std::filesystem;

namespace {

std::string numbered(const char* prefix, std::size_t k, int width, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu%s", prefix, width, k, suffix);
  return buf;
}

std::string format_value(double v) {
  // nlohmann json renders doubles in shortest round-trip form.
  return std::isfinite(v) ? nlohmann::json(v).dump() : (std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf"));
}

void write_config(const fs::path& dir, const nlohmann::json& resolved) {
  fs::create_directories(dir);
  std::ofstream out(dir / "config.json");
  out << resolved.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + (dir / "config.json").string());
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing required option --") + flag);
}

struct NamedField {
  std::string id;
  Field field;
};

std::vector<NamedField> read_field_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("survey directory '" + dir + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".field") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .field files in '" + dir + "'");
  std::vector<NamedField> out;
  for (const auto& f : files) {
    out.push_back({f.stem().string(), read_field(f)});
    if (!(out.back().field.grid() == out.front().field.grid())) {
      throw ValidationError(f.string() + ": grid differs from " + files.front().string());
    }
  }
  return out;
}

std::vector<Field> fields_of(const std::vector<NamedField>& named) {
  std::vector<Field> out;
  for (const auto& n : named) out.push_back(n.field);
  return out;
}

Field load_prior_mean(const ProblemOptions& p, const std::string& fallback_dir = {}) {
  if (!p.prior_mean.empty()) return read_field(fs::path(p.prior_mean));
  if (!p.surveys.empty()) return average_field(fields_of(read_field_dir(p.surveys)));
  if (!fallback_dir.empty() && fs::exists(fs::path(fallback_dir) / "prior_mean.field")) {
    return read_field(fs::path(fallback_dir) / "prior_mean.field");
  }
  throw ConfigError("a prior mean is required: pass --prior-mean or --surveys");
}

ObservationLayout load_layout(const std::string& path, const GridSpec& grid, const std::string& fallback_dir = {}) {
  if (!path.empty()) return read_layout(fs::path(path));
  if (!fallback_dir.empty() && fs::exists(fs::path(fallback_dir) / "layout.txt")) {
    return read_layout(fs::path(fallback_dir) / "layout.txt");
  }
  return default_layout(grid);
}

Theta read_theta_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open theta file '" + path + "'");
  std::string header, line;
  std::getline(in, header);
  if (header.rfind("theta1,theta2", 0) != 0 || !std::getline(in, line)) {
    throw IoError(path + ": expected a 'theta1,theta2,...' header and one value row");
  }
  Theta t;
  char comma = 0;
  std::istringstream row(line);
  if (!(row >> t.theta1 >> comma >> t.theta2) || comma != ',') throw IoError(path + ": malformed theta row");
  return t;
}

void write_theta_file(const fs::path& path, Theta t, double evidence) {
  std::ofstream out(path);
  out << "theta1,theta2,log_evidence\n"
      << format_value(t.theta1) << ',' << format_value(t.theta2) << ',' << format_value(evidence) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

Theta resolve_theta(const ProblemOptions& p) {
  return p.theta_file.empty() ? Theta{p.theta1, p.theta2} : read_theta_file(p.theta_file);
}

struct Problem {
  GaussianPrior prior;  // carries theta1
  ObservationModel model;
  Theta theta;
};

Problem load_problem(const ProblemOptions& p, const ObservationRecord& obs) {
  const Field mean = load_prior_mean(p);
  const ObservationLayout layout = load_layout(p.layout, mean.grid());
  const ObservationModel from_layout = ObservationModel::from_layout(layout, mean.grid());
  if (obs.values.size() != from_layout.measurement_count() ||
      obs.point_count != static_cast<Index>(layout.stations.size())) {
    throw ValidationError("observation file has " + std::to_string(obs.point_count) + " point and " +
                          std::to_string(obs.values.size() - obs.point_count) +
                          " average measurements, the layout defines " + std::to_string(layout.stations.size()) +
                          " and " + std::to_string(layout.blocks.size()));
  }
  const Theta theta = resolve_theta(p);
  ObservationModel model(from_layout.forward(), obs.variances, obs.point_count);
  return {GaussianPrior::exponential(mean, p.prior_range, theta.theta1), std::move(model), theta};
}

MLPParameters load_network(const std::string& checkpoint, const Problem& problem) {
  require(checkpoint, "checkpoint");
  MLPParameters params = load_checkpoint(fs::path(checkpoint));
  if (params.input_dim() != problem.model.measurement_count() || params.output_dim() != problem.prior.size()) {
    throw ConfigError("checkpoint expects " + std::to_string(params.input_dim()) + " measurements and " +
                      std::to_string(params.output_dim()) + " grid points; the problem has " +
                      std::to_string(problem.model.measurement_count()) + " and " +
                      std::to_string(problem.prior.size()));
  }
  return params;
}

void write_std_csv(const fs::path& path, const Field& sd) {
  std::ofstream out(path);
  out << "point,i,j,std\n";
  for (Index k = 0; k < sd.size(); ++k) {
    const GridCoord c = sd.grid().unflatten(k);
    out << k << ',' << c.i << ',' << c.j << ',' << format_value(sd.values()[k]) << '\n';
  }
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<double> theta_axis(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw ConfigError("theta grid needs step > 0 and max >= min");
  const auto count = static_cast<long>(std::llround((hi - lo) / step));
  std::vector<double> axis;
  for (long k = 0; k <= count; ++k) axis.push_back(lo + step * static_cast<double>(k));
  return axis;
}

}  // namespace

void make_base_surveys_cmd(const SurveyOptions& o, const nlohmann::json& resolved) {
  require(o.out, "out");
  const GridSpec grid(o.rows, o.cols, o.width, o.length);
  const auto surveys = make_base_surveys(grid, o.count, o.seed);
  fs::create_directories(o.out);
  for (std::size_t k = 0; k < surveys.size(); ++k) {
    write_field(fs::path(o.out) / numbered("survey_", k, 4, ".field"), surveys[k]);
  }
  write_config(o.out, resolved);
  std::clog << "make-base-surveys: wrote " << surveys.size() << " surveys to " << o.out << '\n';
}

void generate_cmd(const GenerateOptions& o, const nlohmann::json& resolved) {
  require(o.surveys, "surveys");
  require(o.out, "out");
  const auto surveys = fields_of(read_field_dir(o.surveys));
  const GridSpec& grid = surveys.front().grid();
  const ObservationLayout layout = load_layout(o.layout, grid);
  const ObservationModel model = ObservationModel::from_layout(layout, grid);
  const KernelSpec kernel{KernelFamily::squared_exponential, o.alpha, o.range};
  const JumpShape shape{o.jump_height, o.jump_frac_w, o.jump_frac_l};
  const TrainingDataset ds = generate_dataset(surveys, o.per_survey, o.jump_fraction, model, kernel, o.seed, shape);
  write_dataset(o.out, ds, model, o.format == "text" ? DatasetFormat::text : DatasetFormat::packed);
  write_layout(fs::path(o.out) / "layout.txt", layout);
  write_field(fs::path(o.out) / "prior_mean.field", average_field(surveys));
  write_config(o.out, resolved);
  std::clog << "generate: wrote " << ds.size() << " samples to " << o.out << '\n';
}

void fit_gp_cmd(const FitGpOptions& o, const nlohmann::json& resolved) {
  require(o.out, "out");
  if (o.observations.empty() && o.dataset.empty()) throw ConfigError("fit-gp needs --observations or --dataset");
  const Field mean = load_prior_mean(o.problem, o.dataset);
  const ObservationLayout layout = load_layout(o.problem.layout, mean.grid(), o.dataset);
  ObservationModel model = ObservationModel::from_layout(layout, mean.grid());
  std::vector<Eigen::VectorXd> ys;
  for (const auto& path : o.observations) {
    const ObservationRecord rec = read_observations(fs::path(path));
    if (rec.values.size() != model.measurement_count()) {
      throw ValidationError(path + ": measurement count does not match the layout");
    }
    model = ObservationModel(model.forward(), rec.variances, rec.point_count);
    ys.push_back(rec.values);
  }
  if (!o.dataset.empty()) {
    const TrainingDataset ds = read_dataset(o.dataset);
    if (ds.inputs.rows() != model.measurement_count()) {
      throw ValidationError("dataset measurements do not match the layout");
    }
    const Index take = std::min(o.max_samples, ds.size());
    for (Index k = 0; k < take; ++k) ys.push_back(ds.inputs.col(k));
  }
  const GaussianPrior prior = GaussianPrior::exponential(mean, o.problem.prior_range);
  const auto axis = theta_axis(o.theta_min, o.theta_max, o.theta_step);
  const ThetaFit fit = grid_search_theta(prior, model, ys, axis, axis);
  fs::create_directories(o.out);
  write_theta_file(fs::path(o.out) / "theta.csv", fit.theta, fit.log_evidence);
  std::ofstream surface(fs::path(o.out) / "evidence.csv");
  surface << "theta1,theta2,log_evidence\n";
  for (const auto& s : fit.surface) {
    surface << format_value(s.theta.theta1) << ',' << format_value(s.theta.theta2) << ','
            << format_value(s.log_evidence) << '\n';
  }
  if (!surface) throw IoError("cannot write evidence surface");
  write_config(o.out, resolved);
  std::clog << "fit-gp: theta = (" << fit.theta.theta1 << ", " << fit.theta.theta2 << ") from " << ys.size()
            << " measurement vectors\n";
}

void train_cmd(const TrainOptions& o, const nlohmann::json& resolved) {
  require(o.dataset, "dataset");
  require(o.out, "out");
  const TrainingDataset ds = read_dataset(o.dataset);
  const MLPArchitecture arch{ds.inputs.rows(), o.hidden, ds.targets.rows(),
                             o.activation == "tanh" ? Activation::tanh : Activation::relu};
  TrainConfig cfg;
  cfg.learning_rate = o.learning_rate;
  cfg.batch_size = o.batch_size;
  cfg.epochs = o.epochs;
  cfg.seed = o.seed;
  const fs::path shift = o.prior_mean.empty() ? fs::path(o.dataset) / "prior_mean.field" : fs::path(o.prior_mean);
  if (!o.prior_mean.empty() || fs::exists(shift)) {
    const Field mu = read_field(shift);
    if (!(mu.grid() == ds.grid)) throw ValidationError(shift.string() + ": grid does not match the dataset");
    cfg.prior_mean = mu.values();
  }
  const TrainResult result = train(ds, arch, cfg);
  fs::create_directories(o.out);
  save_checkpoint(fs::path(o.out) / "checkpoint.bin", result.params);
  write_loss_history(fs::path(o.out) / "loss.csv", result.loss_history);
  write_config(o.out, resolved);
  std::clog << "train: " << result.loss_history.size() << " epochs, final loss "
            << (result.loss_history.empty() ? 0.0 : result.loss_history.back()) << '\n';
}

void estimate_cmd(const EstimateOptions& o, const nlohmann::json& resolved) {
  require(o.method, "method");
  require(o.observations, "observations");
  require(o.out, "out");
  const ObservationRecord obs = read_observations(fs::path(o.observations));
  const Problem pb = load_problem(o.problem, obs);
  const NoiseScaling noise{pb.theta.theta2};
  const std::optional<Field> reference =
      o.reference.empty() ? std::nullopt : std::optional<Field>(read_field(fs::path(o.reference)));
  const fs::path out(o.out);
  fs::create_directories(out);

  std::vector<std::pair<std::string, Field>> outputs;
  std::optional<Field> sd;
  const MethodKind kind = parse_method(o.method);
  switch (kind) {
    case MethodKind::kriging: {
      const PosteriorGaussian post = make_posterior(pb.prior, pb.model, noise, obs.values);
      outputs.emplace_back("estimate", post.mean);
      sd = std_map(post);
      break;
    }
    case MethodKind::dnn: {
      const MLPParameters params = load_network(o.checkpoint, pb);
      outputs.emplace_back("estimate", predict(params, pb.prior.grid(), obs.values));
      break;
    }
    case MethodKind::dnn_kriging: {
      const MLPParameters params = load_network(o.checkpoint, pb);
      const HybridResult r = dnn_kriging(params, pb.prior, pb.model, noise, obs.values);
      outputs.emplace_back("dnn", r.dnn_mean);
      outputs.emplace_back("corrected", r.corrected_mean);
      sd = std_map(r.corrected_mean, *r.posterior_covariance);
      break;
    }
    case MethodKind::tv: {
      TVConfig cfg;
      cfg.lambda = o.lambda;
      cfg.smoothing_eps = o.eps;
      cfg.max_iters = o.max_iters;
      cfg.grad_tol = o.grad_tol;
      const Field init = posterior_mean(pb.prior, pb.model, noise, obs.values);
      const TVResult r = tv_map(obs.values, pb.model.with_noise_scale(pb.theta.theta2), cfg, init);
      outputs.emplace_back("estimate", r.estimate);
      write_tv_report(out / "tv_report.csv", r.report);
      break;
    }
  }
  std::ofstream summary(out / "summary.csv");
  summary << "field,rmse\n";
  for (const auto& [name, field] : outputs) {
    write_field(out / (name + ".field"), field);
    summary << name << ',' << (reference ? format_value(rmse(field, *reference)) : std::string()) << '\n';
  }
  if (!summary) throw IoError("cannot write summary");
  if (sd) {
    write_field(out / "std.field", *sd);
    write_std_csv(out / "std.csv", *sd);
  }
  write_config(out, resolved);
  std::clog << "estimate: " << o.method << " -> " << o.out << '\n';
}

void sample_cmd(const SampleOptions& o, const nlohmann::json& resolved) {
  require(o.method, "method");
  require(o.observations, "observations");
  require(o.out, "out");
  const ObservationRecord obs = read_observations(fs::path(o.observations));
  const Problem pb = load_problem(o.problem, obs);
  const NoiseScaling noise{pb.theta.theta2};
  std::optional<RealizationBatch> batch;
  if (o.method == "cholesky") {
    batch = sample_posterior_cholesky(make_posterior(pb.prior, pb.model, noise, obs.values), o.count, o.seed);
  } else if (o.method == "bootstrap") {
    batch = sample_posterior_bootstrap(pb.prior, pb.model, noise, obs.values, o.count, o.seed);
  } else {
    const MLPParameters params = load_network(o.checkpoint, pb);
    batch = sample_posterior_dnn(params, pb.prior, pb.model, noise, obs.values, o.count, o.seed);
  }
  const fs::path out(o.out);
  fs::create_directories(out);
  std::ofstream summary(out / "summary.csv");
  summary << "point,mean,std,lo,hi\n";
  if (!batch->empty()) {
    const Band band = batch->quantile_band(o.level);
    for (Index k = 0; k < pb.prior.size(); ++k) {
      summary << k << ',' << format_value(batch->mean()[k]) << ',' << format_value(batch->stddev()[k]) << ','
              << format_value(band.lo[k]) << ',' << format_value(band.hi[k]) << '\n';
    }
  }
  if (!summary) throw IoError("cannot write summary");
  if (o.write_realizations) {
    for (Index k = 0; k < batch->size(); ++k) {
      write_field(out / "realizations" / numbered("", static_cast<std::size_t>(k), 6, ".field"),
                  batch->realization(k));
    }
  }
  write_config(out, resolved);
  std::clog << "sample: " << batch->size() << " " << o.method << " realizations -> " << o.out << '\n';
}

void benchmark_cmd(const BenchmarkOptions& o, const nlohmann::json& resolved) {
  require(o.out, "out");
  const Field mean = load_prior_mean(o.problem);
  const GridSpec& grid = mean.grid();
  const ObservationModel model = ObservationModel::from_layout(load_layout(o.problem.layout, grid), grid);
  const GaussianPrior prior = GaussianPrior::exponential(mean, o.problem.prior_range);

  std::vector<TestSurvey> surveys;
  if (!o.truth.empty()) {
    for (auto& named : read_field_dir(o.truth)) surveys.push_back({named.id, named.field, std::nullopt});
  } else {
    require(o.test_surveys, "test-surveys");
    const auto bases = fields_of(read_field_dir(o.test_surveys));
    surveys = make_test_surveys(bases, o.count, {KernelFamily::squared_exponential, o.alpha, o.range}, o.jumps,
                                o.seed);
  }
  for (const auto& s : surveys) {
    if (!(s.truth.grid() == grid)) throw ValidationError("test survey " + s.id + " is not on the prior grid");
  }

  std::vector<MethodSpec> methods;
  for (const auto& name : o.methods) methods.push_back({name, parse_method(name)});
  std::optional<MLPParameters> network;
  if (!o.checkpoint.empty()) network = load_checkpoint(fs::path(o.checkpoint));

  BenchmarkConfig cfg;
  cfg.dnn_realizations = o.realizations;
  cfg.level = o.level;
  cfg.tv.lambda = o.lambda;
  cfg.tv.smoothing_eps = o.eps;
  cfg.tv.max_iters = o.max_iters;
  cfg.seed = o.seed;
  if (!o.problem.theta_file.empty()) {
    cfg.thetas = std::vector<Theta>(surveys.size(), read_theta_file(o.problem.theta_file));
  } else if (!o.fit_theta) {
    cfg.thetas = std::vector<Theta>(surveys.size(), Theta{o.problem.theta1, o.problem.theta2});
  }
  const BenchmarkReport report = run_benchmark(surveys, methods, model, prior, network ? &*network : nullptr, cfg);

  const fs::path out(o.out);
  write_benchmark(out, report);
  for (std::size_t s = 0; s < surveys.size(); ++s) {
    write_field(out / "truth" / (surveys[s].id + ".field"), surveys[s].truth);
    // Same draw as inside run_benchmark, so estimate/sample can replay a survey.
    const ObservationRecord rec{model.point_count(),
                                observe(model, surveys[s].truth, derive_seed(o.seed, "measurement", s)),
                                model.noise_variance()};
    write_observations(out / "observations" / (surveys[s].id + ".obs"), rec);
  }
  write_config(out, resolved);
  for (const auto& s : report.summary) {
    std::clog << "benchmark: " << s.method << " mean RMSE " << s.mean_rmse << ", best on " << s.best_count << "/"
              << surveys.size() << '\n';
  }
}

}  // namespace bathy::cli
