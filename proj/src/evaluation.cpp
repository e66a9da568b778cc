#include "bathy/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include <boost/math/distributions/normal.hpp>

#include "bathy/error.hpp"
#include "bathy/hybrid.hpp"
#include "bathy/parallel.hpp"
#include "text_io.hpp"

namespace bathy {

double rmse(const Field& estimate, const Field& reference) {
  if (!(estimate.grid() == reference.grid())) throw ValidationError("rmse: grids differ");
  return std::sqrt((estimate.values() - reference.values()).squaredNorm() / static_cast<double>(estimate.size()));
}

Eigen::VectorXd section_values(const Field& field, SectionAxis axis, Index index) {
  const GridSpec& g = field.grid();
  if (axis == SectionAxis::along_shore) {
    if (index < 0 || index >= g.rows()) throw IndexError("along-shore section row out of range");
    Eigen::VectorXd v(g.cols());
    for (Index j = 0; j < g.cols(); ++j) v[j] = field(index, j);
    return v;
  }
  if (index < 0 || index >= g.cols()) throw IndexError("across-shore section column out of range");
  Eigen::VectorXd v(g.rows());
  for (Index i = 0; i < g.rows(); ++i) v[i] = field(i, index);
  return v;
}

namespace {

Eigen::VectorXd section_positions(const GridSpec& g, SectionAxis axis) {
  if (axis == SectionAxis::along_shore) {
    Eigen::VectorXd p(g.cols());
    for (Index j = 0; j < g.cols(); ++j) p[j] = g.along_shore(j);
    return p;
  }
  Eigen::VectorXd p(g.rows());
  for (Index i = 0; i < g.rows(); ++i) p[i] = g.cross_shore(i);
  return p;
}

}  // namespace

Profile extract_section(const Field& field, SectionAxis axis, Index index) {
  Profile p{axis, index, section_positions(field.grid(), axis), section_values(field, axis, index), {}, {}, {}};
  p.std = Eigen::VectorXd::Zero(p.mean.size());
  p.lo = p.mean;
  p.hi = p.mean;
  return p;
}

Profile extract_section(const RealizationBatch& batch, SectionAxis axis, Index index, double level) {
  if (batch.empty()) throw ValidationError("extract_section: empty batch");
  const GridSpec& g = batch.grid();
  const Band band = level == 0.95 ? batch.band95() : batch.quantile_band(level);
  return {axis,
          index,
          section_positions(g, axis),
          section_values(Field(g, batch.mean()), axis, index),
          section_values(Field(g, batch.stddev()), axis, index),
          section_values(Field(g, band.lo), axis, index),
          section_values(Field(g, band.hi), axis, index)};
}

Profile extract_section(const Field& estimate, const Field& std, SectionAxis axis, Index index, double level) {
  const double z = gaussian_band_z(level);
  Profile p{axis, index, section_positions(estimate.grid(), axis), section_values(estimate, axis, index),
            section_values(std, axis, index), {}, {}};
  p.lo = p.mean - z * p.std;
  p.hi = p.mean + z * p.std;
  return p;
}

Field std_map(const RealizationBatch& batch) {
  if (batch.empty()) throw ValidationError("std_map: empty batch");
  return Field(batch.grid(), batch.stddev());
}

Field std_map(const Field& mean, const Eigen::MatrixXd& covariance) {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw ValidationError("std_map: covariance does not match the grid");
  }
  return Field(mean.grid(), covariance.diagonal().cwiseMax(0.0).cwiseSqrt());
}

Field std_map(const PosteriorGaussian& posterior) { return std_map(posterior.mean, posterior.covariance); }

double gaussian_band_z(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("band level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + level / 2.0);
}

double coverage(const Band& band, const Field& reference) {
  if (band.lo.size() != reference.size() || band.hi.size() != reference.size()) {
    throw ValidationError("coverage: band does not match the reference");
  }
  const auto& r = reference.values().array();
  return ((r >= band.lo.array()) && (r <= band.hi.array())).cast<double>().mean();
}

double coverage(const RealizationBatch& batch, const Field& reference, double level) {
  if (!(batch.grid() == reference.grid())) throw ValidationError("coverage: grids differ");
  return coverage(level == 0.95 ? batch.band95() : batch.quantile_band(level), reference);
}

double coverage(const Field& estimate, const Field& std, const Field& reference, double level) {
  if (!(estimate.grid() == reference.grid()) || !(std.grid() == reference.grid())) {
    throw ValidationError("coverage: grids differ");
  }
  const double z = gaussian_band_z(level);
  return coverage(Band{estimate.values() - z * std.values(), estimate.values() + z * std.values()}, reference);
}

double coverage(const PosteriorGaussian& posterior, const Field& reference, double level) {
  return coverage(posterior.mean, std_map(posterior), reference, level);
}

MethodKind parse_method(std::string_view name) {
  if (name == "kriging") return MethodKind::kriging;
  if (name == "dnn") return MethodKind::dnn;
  if (name == "dnn-kriging") return MethodKind::dnn_kriging;
  if (name == "tv") return MethodKind::tv;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string_view method_name(MethodKind kind) {
  switch (kind) {
    case MethodKind::kriging: return "kriging";
    case MethodKind::dnn: return "dnn";
    case MethodKind::dnn_kriging: return "dnn-kriging";
    case MethodKind::tv: return "tv";
  }
  return "?";
}

const BenchmarkRow& BenchmarkReport::at(std::string_view survey, std::string_view method) const {
  for (const auto& row : rows) {
    if (row.survey == survey && row.method == method) return row;
  }
  throw IndexError("no benchmark row for survey '" + std::string(survey) + "' and method '" + std::string(method) + "'");
}

namespace {

struct MethodOutcome {
  BenchmarkRow row;
  std::vector<SectionExtract> sections;
};

std::vector<std::pair<SectionAxis, Index>> section_choices(const TestSurvey& survey) {
  const GridSpec& g = survey.truth.grid();
  GridCoord centre{g.rows() / 2, g.cols() / 2};
  if (survey.jump) centre = jump_center(g, *survey.jump);
  return {{SectionAxis::across_shore, centre.j}, {SectionAxis::along_shore, centre.i}};
}

}  // namespace

std::vector<TestSurvey> make_test_surveys(std::span<const Field> bases, Index count, const KernelSpec& kernel,
                                          bool jumps, std::uint64_t seed, const JumpShape& shape) {
  if (bases.empty()) throw ValidationError("make_test_surveys needs at least one base survey");
  if (count < 0) throw ValidationError("make_test_surveys: negative count");
  const GridSpec& grid = bases.front().grid();
  const GaussianFieldSampler sampler(kernel, grid);
  std::vector<TestSurvey> out;
  for (Index k = 0; k < count; ++k) {
    const auto u = static_cast<std::uint64_t>(k);
    const Field& base = bases[static_cast<std::size_t>(k) % bases.size()];
    if (!(base.grid() == grid)) throw ValidationError("make_test_surveys: base surveys differ in grid");
    Field truth = sampler.sample(base, derive_seed(seed, "test-field", u));
    std::optional<JumpSpec> jump;
    if (jumps) {
      Rng rng(derive_seed(seed, "test-jump", u));
      jump = random_jump(grid, rng, shape.height, shape.frac_w, shape.frac_l);
      truth = add_jump(truth, *jump);
    }
    char id[32];
    std::snprintf(id, sizeof id, "t%02lld", static_cast<long long>(k));
    out.push_back({id, std::move(truth), jump});
  }
  return out;
}

BenchmarkReport run_benchmark(std::span<const TestSurvey> surveys, std::span<const MethodSpec> methods,
                              const ObservationModel& model, const GaussianPrior& prior, const MLPParameters* network,
                              const BenchmarkConfig& config) {
  if (surveys.empty()) throw ValidationError("benchmark needs at least one survey");
  if (methods.empty()) throw ValidationError("benchmark needs at least one method");
  if (config.thetas && config.thetas->size() != surveys.size()) {
    throw ConfigError("benchmark: one theta per survey is required when thetas are fixed");
  }
  for (const auto& m : methods) {
    if ((m.kind == MethodKind::dnn || m.kind == MethodKind::dnn_kriging) && network == nullptr) {
      throw ConfigError("method '" + m.name + "' needs a trained network checkpoint");
    }
  }
  if (network) {
    network->validate();
    if (network->input_dim() != model.measurement_count() || network->output_dim() != prior.size()) {
      throw ConfigError("network checkpoint does not match the observation model and grid");
    }
  }

  std::vector<std::vector<MethodOutcome>> outcomes(surveys.size());
  parallel_for(surveys.size(), [&](std::size_t s) {
    const TestSurvey& survey = surveys[s];
    const Eigen::VectorXd y = observe(model, survey.truth, derive_seed(config.seed, "measurement", s));
    const Theta theta = config.thetas ? (*config.thetas)[s]
                                      : grid_search_theta(prior, model, y, config.grid_theta1, config.grid_theta2).theta;
    const GaussianPrior fitted = prior.with_theta1(theta.theta1);
    const NoiseScaling noise{theta.theta2};
    const PosteriorGaussian kriging = make_posterior(fitted, model, noise, y);
    const Field kriging_std = std_map(kriging);
    const auto choices = section_choices(survey);

    std::optional<Field> dnn_estimate;
    std::optional<RealizationBatch> dnn_batch;
    auto& out = outcomes[s];
    for (const auto& method : methods) {
      MethodOutcome result;
      result.row.survey = survey.id;
      result.row.method = method.name;
      result.row.theta = theta;
      std::optional<Field> estimate;
      std::optional<Field> std;
      std::optional<Band> band;
      const RealizationBatch* batch = nullptr;
      switch (method.kind) {
        case MethodKind::kriging:
          estimate = kriging.mean;
          std = kriging_std;
          break;
        case MethodKind::dnn:
          if (!dnn_estimate) {
            dnn_estimate = predict(*network, prior.grid(), y);
            dnn_batch = sample_posterior_dnn(*network, fitted, model, noise, y, config.dnn_realizations,
                                             derive_seed(config.seed, "dnn-bootstrap", s));
          }
          estimate = *dnn_estimate;
          if (!dnn_batch->empty()) {
            batch = &*dnn_batch;
            band = config.level == 0.95 ? dnn_batch->band95() : dnn_batch->quantile_band(config.level);
          }
          break;
        case MethodKind::dnn_kriging: {
          const Field tau = predict(*network, prior.grid(), y);
          estimate = apply_gain(tau, kriging.gain, model, y);
          std = kriging_std;
          break;
        }
        case MethodKind::tv: {
          estimate = tv_map(y, model.with_noise_scale(theta.theta2), config.tv, kriging.mean).estimate;
          break;
        }
      }
      if (std) band = Band{estimate->values() - gaussian_band_z(config.level) * std->values(),
                           estimate->values() + gaussian_band_z(config.level) * std->values()};
      result.row.rmse = rmse(*estimate, survey.truth);
      result.row.misfit = model.weighted_misfit(y, estimate->values());
      result.row.coverage = band ? coverage(*band, survey.truth) : std::numeric_limits<double>::quiet_NaN();
      const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(estimate->size());
      for (const auto& [axis, index] : choices) {
        Profile profile;
        if (std) {
          profile = extract_section(*estimate, *std, axis, index, config.level);
        } else if (batch) {
          profile = extract_section(*estimate, axis, index);
          profile.std = section_values(Field(prior.grid(), batch->stddev()), axis, index);
          profile.lo = section_values(Field(prior.grid(), band->lo), axis, index);
          profile.hi = section_values(Field(prior.grid(), band->hi), axis, index);
        } else {
          profile = extract_section(*estimate, axis, index);
        }
        result.sections.push_back({survey.id, method.name, std::move(profile),
                                   section_values(survey.truth, axis, index)});
      }
      out.push_back(std::move(result));
    }
  });

  BenchmarkReport report;
  for (auto& per_survey : outcomes) {
    for (auto& o : per_survey) {
      report.rows.push_back(o.row);
      for (auto& sec : o.sections) report.sections.push_back(std::move(sec));
    }
  }
  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodSummary summary{methods[m].name, 0.0, 0.0, 0};
    Index covered = 0;
    for (std::size_t s = 0; s < surveys.size(); ++s) {
      const auto& row = outcomes[s][m].row;
      summary.mean_rmse += row.rmse;
      if (std::isfinite(row.coverage)) {
        summary.mean_coverage += row.coverage;
        ++covered;
      }
      bool best = true;
      for (std::size_t other = 0; other < methods.size(); ++other) {
        if (outcomes[s][other].row.rmse < row.rmse) best = false;
      }
      if (best) ++summary.best_count;
    }
    summary.mean_rmse /= static_cast<double>(surveys.size());
    summary.mean_coverage =
        covered ? summary.mean_coverage / static_cast<double>(covered) : std::numeric_limits<double>::quiet_NaN();
    report.summary.push_back(summary);
  }
  return report;
}

namespace {
const char* axis_name(SectionAxis axis) { return axis == SectionAxis::across_shore ? "across" : "along"; }
}  // namespace

void write_section_csv(const std::filesystem::path& path, const Profile& profile,
                       const std::optional<Eigen::VectorXd>& reference) {
  auto out = detail::open_output(path);
  out << "position,mean,lo,hi,reference\n";
  for (Index k = 0; k < profile.mean.size(); ++k) {
    out << detail::format_double(profile.position[k]) << ',' << detail::format_double(profile.mean[k]) << ','
        << detail::format_double(profile.lo[k]) << ',' << detail::format_double(profile.hi[k]) << ',';
    if (reference) out << detail::format_double((*reference)[k]);
    out << '\n';
  }
  detail::finish_output(out, path);
}

void write_benchmark(const std::filesystem::path& dir, const BenchmarkReport& report) {
  std::filesystem::create_directories(dir);
  {
    auto out = detail::open_output(dir / "report.csv");
    out << "survey,method,rmse,coverage,misfit,theta1,theta2\n";
    for (const auto& r : report.rows) {
      out << r.survey << ',' << r.method << ',' << detail::format_double(r.rmse) << ','
          << detail::format_double(r.coverage) << ',' << detail::format_double(r.misfit) << ','
          << detail::format_double(r.theta.theta1) << ',' << detail::format_double(r.theta.theta2) << '\n';
    }
    detail::finish_output(out, dir / "report.csv");
  }
  {
    auto out = detail::open_output(dir / "summary.csv");
    out << "method,mean_rmse,mean_coverage,best_count\n";
    for (const auto& s : report.summary) {
      out << s.method << ',' << detail::format_double(s.mean_rmse) << ',' << detail::format_double(s.mean_coverage)
          << ',' << s.best_count << '\n';
    }
    detail::finish_output(out, dir / "summary.csv");
  }
  for (const auto& sec : report.sections) {
    const auto name = sec.survey + "_" + sec.method + "_" + axis_name(sec.profile.axis) + ".csv";
    write_section_csv(dir / "sections" / name, sec.profile, sec.reference);
  }
}

}  // namespace bathy
