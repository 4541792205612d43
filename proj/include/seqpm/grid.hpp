#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace seqpm {

/// Partition 0 = t_0 < ... < t_N = 1 with t_i = (i/N)^grading. Grading > 1
/// refines towards the indifferent fixed point, where cone densities carry
/// their x^-alpha singularity.
class GradedGrid {
 public:
  GradedGrid(std::size_t cells, double grading);

  std::size_t cells() const noexcept { return widths_.size(); }
  double grading() const noexcept { return grading_; }
  std::span<const double> cuts() const noexcept { return cuts_; }
  std::span<const double> widths() const noexcept { return widths_; }
  std::span<const double> midpoints() const noexcept { return mids_; }

  double cut(std::size_t i) const { return cuts_[i]; }
  double width(std::size_t i) const { return widths_[i]; }
  double midpoint(std::size_t i) const { return mids_[i]; }
  /// Index of the cell containing x (right-closed cells, x = 0 in cell 0).
  std::size_t locate(double x) const;

  /// Canonical text used for cache keys and records.
  std::string spec() const;

  friend bool operator==(const GradedGrid& a, const GradedGrid& b) {
    return a.cells() == b.cells() && a.grading_ == b.grading_;
  }

 private:
  double grading_;
  std::vector<double> cuts_;
  std::vector<double> widths_;
  std::vector<double> mids_;
};

using GridPtr = std::shared_ptr<const GradedGrid>;

GridPtr make_grid(std::size_t cells, double grading);

/// Piecewise-constant function on a grid, stored as cell averages. Used for
/// densities (P^n 1, cone seeds) and for signed grid functions (H_n, psi_n).
class GridDensity {
 public:
  GridDensity(GridPtr grid, std::vector<double> values);

  static GridDensity constant(GridPtr grid, double value);
  /// Exact cell averages from an antiderivative F: (F(t_{i+1}) - F(t_i)) / w_i.
  static GridDensity from_antiderivative(GridPtr grid,
                                         const std::function<double(double)>& antiderivative);
  /// Cell averages by 8-point Gauss-Legendre on each cell.
  static GridDensity from_function(GridPtr grid, const std::function<double(double)>& f);
  /// Cell masses m_i = value_i * w_i back to averages.
  static GridDensity from_masses(GridPtr grid, std::span<const double> masses);

  const GradedGrid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& mutable_values() noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const noexcept { return values_.size(); }

  std::vector<double> masses() const;
  /// sum value_i * w_i
  double total_mass() const;
  /// Midpoint rule: sum g(mid_i) * value_i * w_i.
  double integrate(const std::function<double(double)>& g) const;
  double lp_norm(double p) const;
  double min_value() const;

  /// Clips values in [-tol, 0) to zero; returns the number of clipped cells.
  /// Values below -tol are left alone and reported by the caller's checks.
  std::size_t clip_negative(double tol = 1e-12);

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

/// sum_i a_i * b_i * w_i
double inner_product(const GridDensity& a, const GridDensity& b);

}  // namespace seqpm
