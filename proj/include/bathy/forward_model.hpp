#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "bathy/grid.hpp"

namespace bathy {

using PointStations = std::vector<GridCoord>;

// Inclusive rectangle of grid points [first, last].
struct CellBlock {
  GridCoord first;
  GridCoord last;

  Index count() const { return (last.i - first.i + 1) * (last.j - first.j + 1); }
  bool contains(GridCoord c) const {
    return c.i >= first.i && c.i <= last.i && c.j >= first.j && c.j <= last.j;
  }
};

using CellPartition = std::vector<CellBlock>;

struct ObservationLayout {
  PointStations stations;
  CellPartition blocks;
};

inline constexpr double kPointNoiseVariance = 0.01;
inline constexpr double kAverageNoiseVariance = 0.001;

// One selector row per station, in station order. Throws on duplicates or
// stations outside the grid.
Eigen::MatrixXd build_point_rows(const PointStations& stations, const GridSpec& grid);

// One averaging row per block with weight 1/|block| on the block's points.
// Blocks must be non-empty, inside the grid and pairwise disjoint.
Eigen::MatrixXd build_average_rows(const CellPartition& partition, const GridSpec& grid);

// 35 stations on a 5x7 index lattice with centred margins and 24 blocks
// tiling the largest origin-anchored sub-rectangle divisible into 4x6.
ObservationLayout default_layout(const GridSpec& grid);

// Linear forward map y = Hx + v with diagonal noise covariance R.
// Point rows come first, then average rows.
class ObservationModel {
 public:
  ObservationModel(Eigen::MatrixXd forward, Eigen::VectorXd noise_variance, Index point_count);

  static ObservationModel from_layout(const ObservationLayout& layout, const GridSpec& grid,
                                      double point_variance = kPointNoiseVariance,
                                      double average_variance = kAverageNoiseVariance);

  const Eigen::MatrixXd& forward() const { return forward_; }
  const Eigen::VectorXd& noise_variance() const { return noise_variance_; }
  Index point_count() const { return point_count_; }
  Index average_count() const { return measurement_count() - point_count_; }
  Index measurement_count() const { return forward_.rows(); }
  Index field_size() const { return forward_.cols(); }

  // Same H with R scaled by 10^theta2.
  ObservationModel with_noise_scale(double theta2) const;

  // (y - Hx)^T R^{-1} (y - Hx)
  double weighted_misfit(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const;

 private:
  Eigen::MatrixXd forward_;
  Eigen::VectorXd noise_variance_;
  Index point_count_;
};

// Hx, plus a draw from N(0, R) when a seed is given.
Eigen::VectorXd observe(const ObservationModel& model, const Field& field,
                        std::optional<std::uint64_t> noise_seed);

// Observation file: "m_p m_g" then "P|G value variance" per measurement.
struct ObservationRecord {
  Index point_count = 0;
  Eigen::VectorXd values;
  Eigen::VectorXd variances;
};

void write_observations(const std::filesystem::path& path, const ObservationRecord& record);
ObservationRecord read_observations(const std::filesystem::path& path);

// Layout file: "m_p m_g", then m_p lines "i j", then m_g lines "i0 j0 i1 j1".
void write_layout(const std::filesystem::path& path, const ObservationLayout& layout);
ObservationLayout read_layout(const std::filesystem::path& path);

}  // namespace bathy
