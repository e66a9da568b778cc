#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bathy/covariance.hpp"
#include "bathy/forward_model.hpp"
#include "bathy/grid.hpp"
#include "bathy/random.hpp"

namespace bathy {

// Draws zero-mean Gaussian perturbations with the kernel's covariance.
// The Cholesky factor is computed once at construction.
class GaussianFieldSampler {
 public:
  GaussianFieldSampler(const KernelSpec& kernel, const GridSpec& grid, Index max_size = kDefaultCovarianceCap);

  const GridSpec& grid() const { return grid_; }
  const Eigen::MatrixXd& factor() const { return factor_.lower; }
  double jitter() const { return factor_.jitter; }

  Eigen::VectorXd draw(Rng& rng) const;
  Field sample(const Field& base, std::uint64_t seed) const;

 private:
  GridSpec grid_;
  JitteredCholesky factor_;
};

// base + L u, u ~ N(0, I), L the jittered Cholesky factor of the kernel matrix.
Field sample_gaussian_field(const Field& base, const KernelSpec& kernel, std::uint64_t seed);

// Rectangular step anomaly. The rectangle starts at `corner` and spans
// frac_w * width cross-shore and frac_l * length along-shore (half-open),
// clipped to the domain.
struct JumpSpec {
  double height = 12.0;
  double frac_w = 0.44;
  double frac_l = 0.44;
  GridCoord corner;

  void validate(const GridSpec& grid) const;
};

// Flat indices covered by the jump, ascending.
std::vector<Index> jump_region(const GridSpec& grid, const JumpSpec& jump);
Field add_jump(const Field& field, const JumpSpec& jump);

// Corner drawn uniformly over grid points.
JumpSpec random_jump(const GridSpec& grid, Rng& rng, double height = 12.0, double frac_w = 0.44,
                     double frac_l = 0.44);

// Grid point nearest the centre of the clipped jump rectangle.
GridCoord jump_center(const GridSpec& grid, const JumpSpec& jump);

struct JumpShape {
  double height = 12.0;
  double frac_w = 0.44;
  double frac_l = 0.44;
};

struct SampleInfo {
  Index survey = 0;
  std::uint64_t seed = 0;
  bool jumped = false;
  GridCoord corner;
};

// Column k of inputs is the noisy measurement of column k of targets.
struct TrainingDataset {
  GridSpec grid;
  Index point_count = 0;
  Eigen::MatrixXd inputs;   // m x N
  Eigen::MatrixXd targets;  // n x N
  std::vector<SampleInfo> info;

  Index size() const { return inputs.cols(); }
};

// per_survey samples for each survey; the first round(jump_fraction * per_survey)
// of each survey's samples carry a random jump. Every sample draws from its own
// substream, so the output is identical for any worker count.
TrainingDataset generate_dataset(std::span<const Field> surveys, Index per_survey, double jump_fraction,
                                 const ObservationModel& model, const KernelSpec& kernel, std::uint64_t seed,
                                 const JumpShape& shape = {});

// Smooth synthetic survey profiles: a planar beach slope with an along-shore
// modulated sandbar. Stand-ins for real surveys.
std::vector<Field> make_base_surveys(const GridSpec& grid, Index count, std::uint64_t seed);

// Point-wise average of a set of surveys on the same grid.
Field average_field(std::span<const Field> fields);

enum class DatasetFormat { packed, text };

// Writes manifest.txt plus either dataset.bin (little-endian f64 with a count
// header) or per-sample field and observation files.
void write_dataset(const std::filesystem::path& dir, const TrainingDataset& dataset, const ObservationModel& model,
                   DatasetFormat format);
TrainingDataset read_dataset(const std::filesystem::path& dir);

}  // namespace bathy
