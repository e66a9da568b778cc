#include "bathy/grid.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "bathy/error.hpp"
#include "text_io.hpp"

namespace bathy {

GridSpec::GridSpec(Index rows, Index cols, double width, double length)
    : rows_(rows), cols_(cols), width_(width), length_(length) {
  if (rows < 2 || cols < 2) {
    throw ValidationError("grid needs at least 2 rows and 2 columns, got " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!(width > 0.0) || !(length > 0.0) || !std::isfinite(width) || !std::isfinite(length)) {
    throw ValidationError("grid width and length must be positive and finite");
  }
}

Index GridSpec::flatten(GridCoord c) const {
  if (!contains(c)) {
    throw IndexError("grid coordinate (" + std::to_string(c.i) + ", " + std::to_string(c.j) +
                     ") outside " + std::to_string(rows_) + "x" + std::to_string(cols_) + " grid");
  }
  return c.i * cols_ + c.j;
}

GridCoord GridSpec::unflatten(Index k) const {
  if (k < 0 || k >= size()) {
    throw IndexError("flat index " + std::to_string(k) + " outside grid of size " +
                     std::to_string(size()));
  }
  return {k / cols_, k % cols_};
}

double normalized_distance(GridCoord a, GridCoord b, const GridSpec& grid) {
  if (!grid.contains(a) || !grid.contains(b)) throw IndexError("normalized_distance: coordinate outside grid");
  const double along = static_cast<double>(a.j - b.j) / static_cast<double>(grid.cols() - 1);
  const double cross = static_cast<double>(a.i - b.i) / static_cast<double>(grid.rows() - 1);
  return std::sqrt(along * along + cross * cross);
}

Field::Field(GridSpec grid, Eigen::VectorXd values) : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw ValidationError("field has " + std::to_string(values_.size()) + " values, grid expects " +
                          std::to_string(grid_.size()));
  }
  if (!values_.allFinite()) throw ValidationError("field contains non-finite values");
}

Field Field::constant(const GridSpec& grid, double value) {
  return Field(grid, Eigen::VectorXd::Constant(grid.size(), value));
}

void write_field(std::ostream& out, const Field& field) {
  const auto& g = field.grid();
  out << g.rows() << ' ' << g.cols() << ' ' << detail::format_double(g.width()) << ' '
      << detail::format_double(g.length()) << '\n';
  for (Index i = 0; i < g.rows(); ++i) {
    for (Index j = 0; j < g.cols(); ++j) {
      if (j) out << ' ';
      out << detail::format_double(field(i, j));
    }
    out << '\n';
  }
}

Field read_field(std::istream& in) {
  Index rows = 0, cols = 0;
  double width = 0, length = 0;
  if (!(in >> rows >> cols >> width >> length)) throw IoError("field header must be 'rows cols width length'");
  GridSpec grid(rows, cols, width, length);
  Eigen::VectorXd values(grid.size());
  for (Index k = 0; k < grid.size(); ++k) {
    if (!(in >> values[k])) throw IoError("field file truncated at value " + std::to_string(k));
  }
  return Field(grid, std::move(values));
}

void write_field(const std::filesystem::path& path, const Field& field) {
  auto out = detail::open_output(path);
  write_field(out, field);
  detail::finish_output(out, path);
}

Field read_field(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  try {
    return read_field(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace bathy
