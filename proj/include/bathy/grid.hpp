#pragma once

#include <filesystem>
#include <iosfwd>

#include <Eigen/Core>

namespace bathy {

using Index = Eigen::Index;

// Grid point by (row, col). Rows run cross-shore, columns along-shore.
struct GridCoord {
  Index i = 0;
  Index j = 0;

  friend bool operator==(const GridCoord&, const GridCoord&) = default;
};

// Uniform rectangular grid. Point (i, j) sits at cross-shore position
// i/(rows-1)*width and along-shore position j/(cols-1)*length, so the
// domain corners are grid points.
class GridSpec {
 public:
  GridSpec(Index rows, Index cols, double width, double length);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  double width() const { return width_; }
  double length() const { return length_; }
  Index size() const { return rows_ * cols_; }

  bool contains(GridCoord c) const { return c.i >= 0 && c.i < rows_ && c.j >= 0 && c.j < cols_; }

  // Row-major: i * cols + j.
  Index flatten(GridCoord c) const;
  GridCoord unflatten(Index k) const;

  double cross_shore(Index i) const { return static_cast<double>(i) / (rows_ - 1) * width_; }
  double along_shore(Index j) const { return static_cast<double>(j) / (cols_ - 1) * length_; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  Index rows_;
  Index cols_;
  double width_;
  double length_;
};

// Anisotropic distance with along-shore offsets scaled by the length and
// cross-shore offsets by the width; opposite corners are sqrt(2) apart.
double normalized_distance(GridCoord a, GridCoord b, const GridSpec& grid);

// Depth field in meters, row-major over its grid. Values are always finite.
class Field {
 public:
  Field(GridSpec grid, Eigen::VectorXd values);

  static Field constant(const GridSpec& grid, double value);

  const GridSpec& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  Index size() const { return values_.size(); }

  double operator()(Index i, Index j) const { return values_[grid_.flatten({i, j})]; }

 private:
  GridSpec grid_;
  Eigen::VectorXd values_;
};

// Field text format: "rows cols width length" then one line per row.
void write_field(std::ostream& out, const Field& field);
Field read_field(std::istream& in);
void write_field(const std::filesystem::path& path, const Field& field);
Field read_field(const std::filesystem::path& path);

}  // namespace bathy
