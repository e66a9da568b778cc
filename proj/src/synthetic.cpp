#include "bathy/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "bathy/error.hpp"
#include "bathy/parallel.hpp"
#include "text_io.hpp"

namespace bathy {

GaussianFieldSampler::GaussianFieldSampler(const KernelSpec& kernel, const GridSpec& grid, Index max_size)
    : grid_(grid), factor_(cholesky_with_jitter(build_covariance(kernel, grid, max_size), kRelativeJitter * kernel.scale)) {}

Eigen::VectorXd GaussianFieldSampler::draw(Rng& rng) const {
  const Eigen::VectorXd u = standard_normal(rng, factor_.lower.rows());
  return factor_.lower.triangularView<Eigen::Lower>() * u;
}

Field GaussianFieldSampler::sample(const Field& base, std::uint64_t seed) const {
  if (!(base.grid() == grid_)) throw ValidationError("sampler grid does not match base field");
  Rng rng(seed);
  return Field(grid_, base.values() + draw(rng));
}

Field sample_gaussian_field(const Field& base, const KernelSpec& kernel, std::uint64_t seed) {
  return GaussianFieldSampler(kernel, base.grid()).sample(base, seed);
}

void JumpSpec::validate(const GridSpec& grid) const {
  if (!(frac_w > 0.0 && frac_w <= 1.0) || !(frac_l > 0.0 && frac_l <= 1.0)) {
    throw ValidationError("jump fractions must lie in (0, 1]");
  }
  if (!std::isfinite(height)) throw ValidationError("jump height must be finite");
  if (!grid.contains(corner)) throw ValidationError("jump corner outside grid");
}

namespace {

// Number of grid steps k >= 0 with k * spacing < frac * extent, i.e. k < frac * (points - 1).
Index covered_steps(double frac, Index points) {
  const double extent = frac * static_cast<double>(points - 1);
  const auto count = static_cast<Index>(std::ceil(extent - 1e-9));
  return std::max<Index>(count, 1);
}

}  // namespace

std::vector<Index> jump_region(const GridSpec& grid, const JumpSpec& jump) {
  jump.validate(grid);
  const Index i_end = std::min(grid.rows(), jump.corner.i + covered_steps(jump.frac_w, grid.rows()));
  const Index j_end = std::min(grid.cols(), jump.corner.j + covered_steps(jump.frac_l, grid.cols()));
  std::vector<Index> region;
  for (Index i = jump.corner.i; i < i_end; ++i) {
    for (Index j = jump.corner.j; j < j_end; ++j) region.push_back(grid.flatten({i, j}));
  }
  return region;
}

Field add_jump(const Field& field, const JumpSpec& jump) {
  Eigen::VectorXd values = field.values();
  for (Index k : jump_region(field.grid(), jump)) values[k] += jump.height;
  return Field(field.grid(), std::move(values));
}

JumpSpec random_jump(const GridSpec& grid, Rng& rng, double height, double frac_w, double frac_l) {
  std::uniform_int_distribution<Index> row(0, grid.rows() - 1);
  std::uniform_int_distribution<Index> col(0, grid.cols() - 1);
  JumpSpec jump{height, frac_w, frac_l, {}};
  jump.corner.i = row(rng);
  jump.corner.j = col(rng);
  return jump;
}

GridCoord jump_center(const GridSpec& grid, const JumpSpec& jump) {
  const auto region = jump_region(grid, jump);
  const GridCoord last = grid.unflatten(region.back());
  return {(jump.corner.i + last.i) / 2, (jump.corner.j + last.j) / 2};
}

TrainingDataset generate_dataset(std::span<const Field> surveys, Index per_survey, double jump_fraction,
                                 const ObservationModel& model, const KernelSpec& kernel, std::uint64_t seed,
                                 const JumpShape& shape) {
  if (surveys.empty()) throw ValidationError("generate_dataset needs at least one survey");
  if (per_survey < 0) throw ValidationError("per_survey must be non-negative");
  if (!(jump_fraction >= 0.0 && jump_fraction <= 1.0)) throw ValidationError("jump_fraction must lie in [0, 1]");
  const GridSpec grid = surveys.front().grid();
  for (const auto& s : surveys) {
    if (!(s.grid() == grid)) throw ValidationError("all surveys must share one grid");
  }
  if (model.field_size() != grid.size()) throw ValidationError("observation model does not match survey grid");

  const GaussianFieldSampler sampler(kernel, grid);
  const Index jumped_per_survey = std::llround(jump_fraction * static_cast<double>(per_survey));
  const Index total = static_cast<Index>(surveys.size()) * per_survey;

  TrainingDataset data{grid, model.point_count(), Eigen::MatrixXd(model.measurement_count(), total),
                       Eigen::MatrixXd(grid.size(), total), std::vector<SampleInfo>(static_cast<std::size_t>(total))};

  parallel_for(static_cast<std::size_t>(total), [&](std::size_t idx) {
    const auto k = static_cast<Index>(idx);
    SampleInfo info;
    info.survey = k / per_survey;
    info.jumped = (k % per_survey) < jumped_per_survey;
    info.seed = derive_seed(seed, "sample", idx);
    Rng rng(info.seed);
    Field field(grid, surveys[static_cast<std::size_t>(info.survey)].values() + sampler.draw(rng));
    if (info.jumped) {
      const JumpSpec jump = random_jump(grid, rng, shape.height, shape.frac_w, shape.frac_l);
      info.corner = jump.corner;
      field = add_jump(field, jump);
    }
    const std::uint64_t noise_seed = rng();
    data.inputs.col(k) = observe(model, field, noise_seed);
    data.targets.col(k) = field.values();
    data.info[idx] = info;
  });
  return data;
}

std::vector<Field> make_base_surveys(const GridSpec& grid, Index count, std::uint64_t seed) {
  std::vector<Field> surveys;
  surveys.reserve(static_cast<std::size_t>(count));
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (Index s = 0; s < count; ++s) {
    Rng rng(derive_seed(seed, "survey", static_cast<std::uint64_t>(s)));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double shore_depth = 0.5 + u(rng);
    const double offshore_depth = 7.0 + 3.0 * u(rng);
    const double bar_position = 0.25 + 0.2 * u(rng);
    const double bar_width = 0.06 + 0.04 * u(rng);
    const double bar_height = 0.5 + u(rng);
    const double bar_phase = two_pi * u(rng);
    const double bar_waves = u(rng) < 0.5 ? 1.0 : 2.0;
    const double tilt_phase = two_pi * u(rng);
    const double tilt = 0.3 * u(rng);
    Eigen::VectorXd values(grid.size());
    for (Index i = 0; i < grid.rows(); ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(grid.rows() - 1);
      for (Index j = 0; j < grid.cols(); ++j) {
        const double y = static_cast<double>(j) / static_cast<double>(grid.cols() - 1);
        const double slope = -(shore_depth + (offshore_depth - shore_depth) * x);
        const double bar_shape = std::exp(-std::pow((x - bar_position) / bar_width, 2));
        const double modulation = 1.0 + 0.3 * std::sin(two_pi * bar_waves * y + bar_phase);
        const double swell = tilt * x * std::sin(two_pi * y + tilt_phase);
        values[grid.flatten({i, j})] = slope + bar_height * bar_shape * modulation + swell;
      }
    }
    surveys.emplace_back(grid, std::move(values));
  }
  return surveys;
}

Field average_field(std::span<const Field> fields) {
  if (fields.empty()) throw ValidationError("average_field needs at least one field");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(fields.front().size());
  for (const auto& f : fields) {
    if (!(f.grid() == fields.front().grid())) throw ValidationError("average_field: grids differ");
    sum += f.values();
  }
  return Field(fields.front().grid(), sum / static_cast<double>(fields.size()));
}

namespace {

constexpr char kPackedMagic[8] = {'B', 'A', 'T', 'H', 'Y', 'D', 'S', '1'};

std::string sample_name(Index k) {
  std::ostringstream s;
  s.width(6);
  s.fill('0');
  s << k;
  return s.str();
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const TrainingDataset& dataset, const ObservationModel& model,
                   DatasetFormat format) {
  std::filesystem::create_directories(dir);
  const Index m = dataset.inputs.rows(), n = dataset.targets.rows();
  auto manifest = detail::open_output(dir / "manifest.txt");
  manifest << "# " << dataset.size() << " pairs; grid " << dataset.grid.rows() << ' ' << dataset.grid.cols() << ' '
           << detail::format_double(dataset.grid.width()) << ' ' << detail::format_double(dataset.grid.length())
           << "; measurements " << dataset.point_count << ' ' << m - dataset.point_count << '\n';
  manifest << "# index survey jumped corner_i corner_j seed target input\n";

  if (format == DatasetFormat::packed) {
    auto bin = detail::open_output(dir / "dataset.bin", true);
    bin.write(kPackedMagic, sizeof kPackedMagic);
    for (std::uint64_t v : {static_cast<std::uint64_t>(dataset.size()), static_cast<std::uint64_t>(m),
                            static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(dataset.grid.rows()),
                            static_cast<std::uint64_t>(dataset.grid.cols()),
                            static_cast<std::uint64_t>(dataset.point_count)}) {
      detail::write_u64(bin, v);
    }
    detail::write_f64(bin, dataset.grid.width());
    detail::write_f64(bin, dataset.grid.length());
    for (Index k = 0; k < dataset.size(); ++k) {
      for (Index r = 0; r < m; ++r) detail::write_f64(bin, dataset.inputs(r, k));
      for (Index r = 0; r < n; ++r) detail::write_f64(bin, dataset.targets(r, k));
    }
    detail::finish_output(bin, dir / "dataset.bin");
  }

  for (Index k = 0; k < dataset.size(); ++k) {
    const auto& info = dataset.info[static_cast<std::size_t>(k)];
    std::string target_ref, input_ref;
    if (format == DatasetFormat::packed) {
      target_ref = input_ref = "packed:" + std::to_string(k);
    } else {
      target_ref = "fields/" + sample_name(k) + ".field";
      input_ref = "obs/" + sample_name(k) + ".obs";
      write_field(dir / target_ref, Field(dataset.grid, dataset.targets.col(k)));
      write_observations(dir / input_ref, {dataset.point_count, dataset.inputs.col(k), model.noise_variance()});
    }
    manifest << k << ' ' << info.survey << ' ' << (info.jumped ? 1 : 0) << ' ' << info.corner.i << ' '
             << info.corner.j << ' ' << info.seed << ' ' << target_ref << ' ' << input_ref << '\n';
  }
  detail::finish_output(manifest, dir / "manifest.txt");
}

TrainingDataset read_dataset(const std::filesystem::path& dir) {
  auto manifest = detail::open_input(dir / "manifest.txt");
  std::vector<SampleInfo> info;
  std::vector<std::pair<std::string, std::string>> refs;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    Index index = 0;
    int jumped = 0;
    SampleInfo s;
    std::string target_ref, input_ref;
    if (!(row >> index >> s.survey >> jumped >> s.corner.i >> s.corner.j >> s.seed >> target_ref >> input_ref)) {
      throw IoError((dir / "manifest.txt").string() + ": malformed line '" + line + "'");
    }
    if (index != static_cast<Index>(info.size())) throw IoError("manifest indices must be consecutive from 0");
    s.jumped = jumped != 0;
    info.push_back(s);
    refs.emplace_back(target_ref, input_ref);
  }
  if (info.empty()) throw IoError((dir / "manifest.txt").string() + ": no samples");

  const auto packed_path = dir / "dataset.bin";
  if (refs.front().first.rfind("packed:", 0) == 0) {
    auto bin = detail::open_input(packed_path, true);
    char magic[8];
    if (!bin.read(magic, sizeof magic) || !std::equal(magic, magic + 8, kPackedMagic)) {
      throw IoError(packed_path.string() + ": not a packed dataset");
    }
    const auto count = static_cast<Index>(detail::read_u64(bin));
    const auto m = static_cast<Index>(detail::read_u64(bin));
    const auto n = static_cast<Index>(detail::read_u64(bin));
    const auto rows = static_cast<Index>(detail::read_u64(bin));
    const auto cols = static_cast<Index>(detail::read_u64(bin));
    const auto point_count = static_cast<Index>(detail::read_u64(bin));
    const double width = detail::read_f64(bin);
    const double length = detail::read_f64(bin);
    if (count != static_cast<Index>(info.size())) throw IoError("packed dataset count does not match manifest");
    TrainingDataset data{GridSpec(rows, cols, width, length), point_count, Eigen::MatrixXd(m, count),
                         Eigen::MatrixXd(n, count), std::move(info)};
    if (data.grid.size() != n) throw IoError("packed dataset grid does not match target length");
    for (Index k = 0; k < count; ++k) {
      for (Index r = 0; r < m; ++r) data.inputs(r, k) = detail::read_f64(bin);
      for (Index r = 0; r < n; ++r) data.targets(r, k) = detail::read_f64(bin);
    }
    return data;
  }

  const Field first = read_field(dir / refs.front().first);
  const ObservationRecord first_obs = read_observations(dir / refs.front().second);
  const auto count = static_cast<Index>(info.size());
  TrainingDataset data{first.grid(), first_obs.point_count, Eigen::MatrixXd(first_obs.values.size(), count),
                       Eigen::MatrixXd(first.size(), count), std::move(info)};
  for (Index k = 0; k < count; ++k) {
    const auto& [target_ref, input_ref] = refs[static_cast<std::size_t>(k)];
    const Field target = read_field(dir / target_ref);
    const ObservationRecord obs = read_observations(dir / input_ref);
    if (!(target.grid() == data.grid) || obs.values.size() != data.inputs.rows()) {
      throw IoError("sample " + std::to_string(k) + " has inconsistent dimensions");
    }
    data.targets.col(k) = target.values();
    data.inputs.col(k) = obs.values;
  }
  return data;
}

}  // namespace bathy
