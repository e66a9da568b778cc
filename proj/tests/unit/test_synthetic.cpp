#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "bathy/covariance.hpp"
#include "bathy/error.hpp"
#include "bathy/parallel.hpp"
#include "bathy/synthetic.hpp"
#include "oracles.hpp"

using namespace bathy;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "bathy_unit" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("kernel matrix entries") {
  const GridSpec g(6, 7, 2.0, 3.0);
  const KernelSpec se;  // alpha 0.15, r 0.07
  const Eigen::MatrixXd c = build_covariance(se, g);
  CHECK(c.rows() == 42);
  CHECK((c.diagonal().array() == 0.15).all());
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    const Index a = oracle::uniform_int(rng, 0, 41), b = oracle::uniform_int(rng, 0, 41);
    CHECK(c(a, b) == c(b, a));
    const double d = normalized_distance(g.unflatten(a), g.unflatten(b), g);
    CHECK(c(a, b) == doctest::Approx(0.15 * std::exp(-d * d / (0.07 * 0.07))).epsilon(1e-14));
  }
  const Eigen::MatrixXd q0 = build_covariance({KernelFamily::exponential, 1.0, 0.75}, g);
  CHECK((q0.diagonal().array() == 1.0).all());
  const double d = normalized_distance({0, 0}, {5, 6}, g);
  CHECK(q0(0, 41) == doctest::Approx(std::exp(-d / 0.75)).epsilon(1e-14));
}

TEST_CASE("kernel validation and size cap") {
  CHECK_THROWS_AS(KernelSpec({KernelFamily::exponential, 0.0, 1.0}).validate(), ValidationError);
  CHECK_THROWS_AS(KernelSpec({KernelFamily::exponential, 1.0, -1.0}).validate(), ValidationError);
  CHECK_THROWS_AS(build_covariance(KernelSpec{}, GridSpec(10, 10, 1, 1), 99), SizeError);
  CHECK_NOTHROW(build_covariance(KernelSpec{}, GridSpec(10, 10, 1, 1), 100));
}

TEST_CASE("jittered factor of the squared-exponential kernel is positive definite") {
  const GridSpec g(10, 10, 1.0, 1.0);
  const Eigen::MatrixXd c = build_covariance(KernelSpec{}, g);
  const JitteredCholesky f = cholesky_with_jitter(c, kRelativeJitter * 0.15);
  const Eigen::MatrixXd jittered = c + f.jitter * Eigen::MatrixXd::Identity(100, 100);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jittered);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
  CHECK((f.lower * f.lower.transpose() - jittered).norm() < 1e-12 * jittered.norm());
}

TEST_CASE("cholesky with jitter gives up on indefinite matrices") {
  Eigen::Matrix2d a;
  a << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(cholesky_with_jitter(a, 1e-10), NumericError);
}

TEST_CASE("gaussian field samples are reproducible") {
  const GridSpec g(6, 6, 1.0, 1.0);
  const Field base = Field::constant(g, 3.0);
  CHECK(sample_gaussian_field(base, KernelSpec{}, 11).values() == sample_gaussian_field(base, KernelSpec{}, 11).values());
  CHECK(sample_gaussian_field(base, KernelSpec{}, 11).values() != sample_gaussian_field(base, KernelSpec{}, 12).values());
}

TEST_CASE("gaussian field moments match the kernel") {
  const GridSpec g(6, 6, 1.0, 1.0);
  const KernelSpec kernel{KernelFamily::squared_exponential, 0.15, 0.3};
  const GaussianFieldSampler sampler(kernel, g);
  const Field base = Field::constant(g, -2.0);
  const int count = 5000;
  Eigen::MatrixXd samples(36, count);
  for (int k = 0; k < count; ++k) samples.col(k) = sampler.sample(base, static_cast<std::uint64_t>(k)).values() - base.values();

  const Eigen::VectorXd mean = samples.rowwise().mean();
  const double bound = 3.0 * std::sqrt(0.15 / count);
  CHECK((mean.array().abs() < bound).count() >= static_cast<Index>(0.99 * 36));

  const Eigen::MatrixXd emp = oracle::empirical_covariance(samples);
  for (Index k = 0; k < 36; ++k) CHECK(emp(k, k) == doctest::Approx(0.15).epsilon(0.10));
  CHECK(oracle::rel_frobenius(emp, build_covariance(kernel, g)) < 0.2);
}

TEST_CASE("jump adds a constant over the clipped rectangle only") {
  const GridSpec g(26, 38, 1.0, 1.0);
  const Field zero = Field::constant(g, 0.0);
  // Steps as a multiple of grid spacing: ceil(0.44 * 25) = 11, ceil(0.44 * 37) = 17.
  JumpSpec jump;
  jump.corner = {0, 0};
  const Field f = add_jump(zero, jump);
  for (Index i = 0; i < 26; ++i)
    for (Index j = 0; j < 38; ++j) CHECK(f(i, j) == ((i < 11 && j < 17) ? 12.0 : 0.0));

  jump.height = 0.0;
  CHECK(add_jump(zero, jump).values() == zero.values());
}

TEST_CASE("jump region matches brute-force enumeration at every corner") {
  const GridSpec g(9, 13, 4.0, 6.0);
  JumpSpec jump;
  const Index si = static_cast<Index>(std::ceil(0.44 * 8 - 1e-9));
  const Index sj = static_cast<Index>(std::ceil(0.44 * 12 - 1e-9));
  for (Index ci = 0; ci < 9; ++ci) {
    for (Index cj = 0; cj < 13; ++cj) {
      jump.corner = {ci, cj};
      std::vector<Index> expected;
      for (Index i = 0; i < 9; ++i)
        for (Index j = 0; j < 13; ++j)
          if (i >= ci && i < ci + si && j >= cj && j < cj + sj) expected.push_back(g.flatten({i, j}));
      CHECK(jump_region(g, jump) == expected);
      CHECK_FALSE(expected.empty());
      const Field f = add_jump(Field::constant(g, 1.5), jump);
      for (Index k = 0; k < g.size(); ++k) {
        const bool inside = std::binary_search(expected.begin(), expected.end(), k);
        CHECK(f.values()[k] == (inside ? 13.5 : 1.5));
      }
    }
  }
  jump.corner = {8, 12};
  CHECK(jump_region(g, jump).size() == 1);
}

TEST_CASE("jump validation and random corners") {
  const GridSpec g(9, 13, 1.0, 1.0);
  JumpSpec bad;
  bad.frac_w = 0.0;
  CHECK_THROWS_AS(bad.validate(g), ValidationError);
  bad.frac_w = 0.5;
  bad.corner = {9, 0};
  CHECK_THROWS_AS(bad.validate(g), ValidationError);

  Rng rng(8);
  std::set<Index> corners;
  for (int t = 0; t < 3000; ++t) {
    const JumpSpec j = random_jump(g, rng);
    REQUIRE(g.contains(j.corner));
    corners.insert(g.flatten(j.corner));
  }
  CHECK(corners.size() == static_cast<std::size_t>(g.size()));
}

TEST_CASE("dataset generation counts and jump flags") {
  const GridSpec g(8, 10, 1.0, 1.0);
  const ObservationModel model = ObservationModel::from_layout(default_layout(g), g);
  const std::vector<Field> surveys = make_base_surveys(g, 3, 5);

  const TrainingDataset none = generate_dataset(std::span(surveys).first(1), 4, 0.0, model, KernelSpec{}, 1);
  CHECK(none.size() == 4);
  CHECK(std::none_of(none.info.begin(), none.info.end(), [](const SampleInfo& s) { return s.jumped; }));

  const TrainingDataset half = generate_dataset(surveys, 10, 0.5, model, KernelSpec{}, 2);
  CHECK(half.size() == 30);
  CHECK(half.inputs.rows() == 59);
  CHECK(half.targets.rows() == 80);
  CHECK(std::count_if(half.info.begin(), half.info.end(), [](const SampleInfo& s) { return s.jumped; }) == 15);
  for (Index s = 0; s < 3; ++s) {
    Index jumped = 0;
    for (const auto& info : half.info) jumped += (info.survey == s && info.jumped);
    CHECK(jumped == 5);
  }
  CHECK_THROWS_AS(generate_dataset(surveys, 10, 1.5, model, KernelSpec{}, 2), ValidationError);
  CHECK_THROWS_AS(generate_dataset(std::span<const Field>(), 10, 0.5, model, KernelSpec{}, 2), ValidationError);
}

TEST_CASE("full-scale dataset bookkeeping") {
  // 239 surveys x 400 samples at fraction 0.5: counted without materializing fields.
  const Index surveys = 239, per_survey = 400;
  const Index jumped_per_survey = static_cast<Index>(std::llround(0.5 * per_survey));
  CHECK(surveys * per_survey == 95600);
  CHECK(surveys * jumped_per_survey == 47800);
}

TEST_CASE("dataset generation is deterministic and independent of worker count") {
  const GridSpec g(8, 10, 1.0, 1.0);
  const ObservationModel model = ObservationModel::from_layout(default_layout(g), g);
  const std::vector<Field> surveys = make_base_surveys(g, 2, 9);
  set_max_threads(1);
  const TrainingDataset a = generate_dataset(surveys, 10, 0.5, model, KernelSpec{}, 77);
  set_max_threads(4);
  const TrainingDataset b = generate_dataset(surveys, 10, 0.5, model, KernelSpec{}, 77);
  set_max_threads(0);
  CHECK(a.inputs == b.inputs);
  CHECK(a.targets == b.targets);
  for (Index k = 0; k < a.size(); ++k) {
    CHECK(a.info[k].seed == b.info[k].seed);
    CHECK(a.info[k].corner == b.info[k].corner);
  }
}

TEST_CASE("dataset residuals follow the noise model") {
  const GridSpec g(8, 10, 1.0, 1.0);
  const ObservationModel model = ObservationModel::from_layout(default_layout(g), g);
  const std::vector<Field> surveys = make_base_surveys(g, 4, 3);
  const TrainingDataset ds = generate_dataset(surveys, 100, 0.5, model, KernelSpec{}, 4);
  const Eigen::MatrixXd resid = ds.inputs - model.forward() * ds.targets;
  const Eigen::MatrixXd z = resid.array().colwise() / model.noise_variance().array().sqrt();
  // Chi-squared with 59 * 400 degrees of freedom: mean 1, sd sqrt(2 / dof).
  const double dof = static_cast<double>(z.size());
  const double mean_sq = z.squaredNorm() / dof;
  CHECK(std::abs(mean_sq - 1.0) < 4.0 * std::sqrt(2.0 / dof));
}

TEST_CASE("base surveys are smooth, finite and reproducible") {
  const GridSpec g(26, 38, 250.0, 380.0);
  const auto a = make_base_surveys(g, 5, 1);
  const auto b = make_base_surveys(g, 5, 1);
  REQUIRE(a.size() == 5);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].values() == b[k].values());
    CHECK(a[k].values().allFinite());
    // Elevation drops offshore.
    CHECK(a[k](25, 19) < a[k](0, 19));
  }
  CHECK(a[0].values() != a[1].values());
  const Field avg = average_field(a);
  Eigen::VectorXd manual = Eigen::VectorXd::Zero(g.size());
  for (const auto& f : a) manual += f.values();
  CHECK(avg.values().isApprox(manual / 5.0, 1e-14));
}

TEST_CASE("dataset round-trips through both formats") {
  const GridSpec g(8, 10, 2.0, 3.0);
  const ObservationModel model = ObservationModel::from_layout(default_layout(g), g);
  const std::vector<Field> surveys = make_base_surveys(g, 2, 4);
  const TrainingDataset ds = generate_dataset(surveys, 3, 0.5, model, KernelSpec{}, 5);
  for (const auto format : {DatasetFormat::packed, DatasetFormat::text}) {
    const auto dir = scratch(format == DatasetFormat::packed ? "ds_packed" : "ds_text");
    write_dataset(dir, ds, model, format);
    const TrainingDataset back = read_dataset(dir);
    CHECK(back.grid == ds.grid);
    CHECK(back.point_count == ds.point_count);
    CHECK(back.inputs == ds.inputs);
    CHECK(back.targets == ds.targets);
    REQUIRE(back.info.size() == ds.info.size());
    for (std::size_t k = 0; k < ds.info.size(); ++k) {
      CHECK(back.info[k].jumped == ds.info[k].jumped);
      CHECK(back.info[k].seed == ds.info[k].seed);
    }
  }
  const auto d1 = scratch("ds_again1"), d2 = scratch("ds_again2");
  write_dataset(d1, generate_dataset(surveys, 3, 0.5, model, KernelSpec{}, 5), model, DatasetFormat::packed);
  write_dataset(d2, generate_dataset(surveys, 3, 0.5, model, KernelSpec{}, 5), model, DatasetFormat::packed);
  CHECK(slurp(d1 / "manifest.txt") == slurp(d2 / "manifest.txt"));
  CHECK(slurp(d1 / "dataset.bin") == slurp(d2 / "dataset.bin"));
}
