#include "bathy/forward_model.hpp"

#include <set>
#include <string>
#include <utility>

#include "bathy/error.hpp"
#include "bathy/random.hpp"
#include "text_io.hpp"

namespace bathy {

Eigen::MatrixXd build_point_rows(const PointStations& stations, const GridSpec& grid) {
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(static_cast<Index>(stations.size()), grid.size());
  std::set<Index> seen;
  for (std::size_t s = 0; s < stations.size(); ++s) {
    const GridCoord c = stations[s];
    if (!grid.contains(c)) {
      throw ValidationError("station " + std::to_string(s) + " outside grid");
    }
    const Index k = grid.flatten(c);
    if (!seen.insert(k).second) {
      throw ValidationError("duplicate station at (" + std::to_string(c.i) + ", " + std::to_string(c.j) + ")");
    }
    rows(static_cast<Index>(s), k) = 1.0;
  }
  return rows;
}

Eigen::MatrixXd build_average_rows(const CellPartition& partition, const GridSpec& grid) {
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(static_cast<Index>(partition.size()), grid.size());
  std::vector<bool> used(static_cast<std::size_t>(grid.size()), false);
  for (std::size_t b = 0; b < partition.size(); ++b) {
    const CellBlock& block = partition[b];
    if (block.last.i < block.first.i || block.last.j < block.first.j) {
      throw ValidationError("block " + std::to_string(b) + " is empty");
    }
    if (!grid.contains(block.first) || !grid.contains(block.last)) {
      throw ValidationError("block " + std::to_string(b) + " extends outside grid");
    }
    const double weight = 1.0 / static_cast<double>(block.count());
    for (Index i = block.first.i; i <= block.last.i; ++i) {
      for (Index j = block.first.j; j <= block.last.j; ++j) {
        const Index k = grid.flatten({i, j});
        if (used[static_cast<std::size_t>(k)]) {
          throw ValidationError("block " + std::to_string(b) + " overlaps an earlier block");
        }
        used[static_cast<std::size_t>(k)] = true;
        rows(static_cast<Index>(b), k) = weight;
      }
    }
  }
  return rows;
}

namespace {

// `count` indices with equal spacing and the slack split between both ends.
std::vector<Index> lattice_positions(Index extent, Index count) {
  const Index spacing = extent / count;
  const Index margin = (extent - (count - 1) * spacing - 1) / 2;
  std::vector<Index> pos;
  for (Index k = 0; k < count; ++k) pos.push_back(margin + k * spacing);
  return pos;
}

}  // namespace

ObservationLayout default_layout(const GridSpec& grid) {
  constexpr Index kStationRows = 5, kStationCols = 7;
  constexpr Index kBlockRows = 4, kBlockCols = 6;
  if (grid.rows() < 7 || grid.cols() < 10) {
    throw ValidationError("default layout needs a grid of at least 7x10");
  }
  ObservationLayout layout;
  for (Index i : lattice_positions(grid.rows(), kStationRows)) {
    for (Index j : lattice_positions(grid.cols(), kStationCols)) layout.stations.push_back({i, j});
  }
  const Index block_h = grid.rows() / kBlockRows;
  const Index block_w = grid.cols() / kBlockCols;
  for (Index bi = 0; bi < kBlockRows; ++bi) {
    for (Index bj = 0; bj < kBlockCols; ++bj) {
      layout.blocks.push_back({{bi * block_h, bj * block_w},
                               {(bi + 1) * block_h - 1, (bj + 1) * block_w - 1}});
    }
  }
  return layout;
}

ObservationModel::ObservationModel(Eigen::MatrixXd forward, Eigen::VectorXd noise_variance, Index point_count)
    : forward_(std::move(forward)), noise_variance_(std::move(noise_variance)), point_count_(point_count) {
  if (noise_variance_.size() != forward_.rows()) {
    throw ValidationError("noise variance length " + std::to_string(noise_variance_.size()) +
                          " does not match " + std::to_string(forward_.rows()) + " measurements");
  }
  if (point_count_ < 0 || point_count_ > forward_.rows()) throw ValidationError("point count out of range");
  if (!(noise_variance_.array() > 0.0).all() || !noise_variance_.allFinite()) {
    throw ValidationError("noise variances must be positive and finite");
  }
  if (!forward_.allFinite()) throw ValidationError("forward map contains non-finite entries");
}

ObservationModel ObservationModel::from_layout(const ObservationLayout& layout, const GridSpec& grid,
                                               double point_variance, double average_variance) {
  const Index mp = static_cast<Index>(layout.stations.size());
  const Index mg = static_cast<Index>(layout.blocks.size());
  Eigen::MatrixXd h(mp + mg, grid.size());
  h.topRows(mp) = build_point_rows(layout.stations, grid);
  h.bottomRows(mg) = build_average_rows(layout.blocks, grid);
  Eigen::VectorXd r(mp + mg);
  r.head(mp).setConstant(point_variance);
  r.tail(mg).setConstant(average_variance);
  return ObservationModel(std::move(h), std::move(r), mp);
}

ObservationModel ObservationModel::with_noise_scale(double theta2) const {
  if (!std::isfinite(theta2)) throw ValidationError("theta2 must be finite");
  return ObservationModel(forward_, noise_variance_ * std::pow(10.0, theta2), point_count_);
}

double ObservationModel::weighted_misfit(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const {
  if (y.size() != measurement_count() || x.size() != field_size()) {
    throw ValidationError("weighted_misfit: dimension mismatch");
  }
  const Eigen::VectorXd r = y - forward_ * x;
  return (r.array().square() / noise_variance_.array()).sum();
}

Eigen::VectorXd observe(const ObservationModel& model, const Field& field,
                        std::optional<std::uint64_t> noise_seed) {
  if (field.size() != model.field_size()) {
    throw ValidationError("observe: field has " + std::to_string(field.size()) + " values, model expects " +
                          std::to_string(model.field_size()));
  }
  Eigen::VectorXd y = model.forward() * field.values();
  if (noise_seed) {
    Rng rng(*noise_seed);
    y += (standard_normal(rng, y.size()).array() * model.noise_variance().array().sqrt()).matrix();
  }
  return y;
}

void write_observations(const std::filesystem::path& path, const ObservationRecord& record) {
  const Index m = record.values.size();
  if (record.variances.size() != m || record.point_count < 0 || record.point_count > m) {
    throw ValidationError("observation record is inconsistent");
  }
  auto out = detail::open_output(path);
  out << record.point_count << ' ' << m - record.point_count << '\n';
  for (Index k = 0; k < m; ++k) {
    out << (k < record.point_count ? 'P' : 'G') << ' ' << detail::format_double(record.values[k]) << ' '
        << detail::format_double(record.variances[k]) << '\n';
  }
  detail::finish_output(out, path);
}

ObservationRecord read_observations(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  Index mp = 0, mg = 0;
  if (!(in >> mp >> mg) || mp < 0 || mg < 0) throw IoError(path.string() + ": bad header, expected 'm_p m_g'");
  ObservationRecord record;
  record.point_count = mp;
  record.values.resize(mp + mg);
  record.variances.resize(mp + mg);
  for (Index k = 0; k < mp + mg; ++k) {
    char type = 0;
    if (!(in >> type >> record.values[k] >> record.variances[k])) {
      throw IoError(path.string() + ": truncated at measurement " + std::to_string(k));
    }
    const char expected = k < mp ? 'P' : 'G';
    if (type != expected) {
      throw IoError(path.string() + ": measurement " + std::to_string(k) + " should be type " + expected);
    }
  }
  return record;
}

void write_layout(const std::filesystem::path& path, const ObservationLayout& layout) {
  auto out = detail::open_output(path);
  out << layout.stations.size() << ' ' << layout.blocks.size() << '\n';
  for (const auto& s : layout.stations) out << s.i << ' ' << s.j << '\n';
  for (const auto& b : layout.blocks) {
    out << b.first.i << ' ' << b.first.j << ' ' << b.last.i << ' ' << b.last.j << '\n';
  }
  detail::finish_output(out, path);
}

ObservationLayout read_layout(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::size_t mp = 0, mg = 0;
  if (!(in >> mp >> mg)) throw IoError(path.string() + ": bad header, expected 'm_p m_g'");
  ObservationLayout layout;
  for (std::size_t k = 0; k < mp; ++k) {
    GridCoord c;
    if (!(in >> c.i >> c.j)) throw IoError(path.string() + ": truncated station list");
    layout.stations.push_back(c);
  }
  for (std::size_t k = 0; k < mg; ++k) {
    CellBlock b;
    if (!(in >> b.first.i >> b.first.j >> b.last.i >> b.last.j)) throw IoError(path.string() + ": truncated block list");
    layout.blocks.push_back(b);
  }
  return layout;
}

}  // namespace bathy
