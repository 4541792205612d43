#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "seqpm/grid.hpp"
#include "seqpm/parallel.hpp"
#include "seqpm/pm_map.hpp"

namespace seqpm {

/// Pointwise transfer operator
///   (P_beta f)(x) = f(z) / T'(z) + f((x + 1) / 2) / 2,   z = inverse_left(beta, x).
double apply_transfer_pointwise(MapParameter beta, const std::function<double(double)>& f,
                                double x);

/// Ulam discretization of P_beta on a graded grid. Entry (i, j) is the fraction
/// of cell j's mass that T_beta carries into cell i,
///   m(cell_j ∩ T^-1 cell_i) / m(cell_j),
/// computed from exact preimage intervals of both monotone branches.
/// Stored row-compressed; columns are normalised to sum to one.
class UlamOperator {
 public:
  static UlamOperator build(MapParameter beta, GridPtr grid, Parallelism par = {});
  /// Assemble from dense row-major entries (the cache format).
  static UlamOperator from_dense(MapParameter beta, GridPtr grid, std::span<const double> dense);

  MapParameter beta() const noexcept { return beta_; }
  const GradedGrid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  std::size_t size() const noexcept { return grid_->cells(); }
  std::size_t nonzeros() const noexcept { return values_.size(); }

  /// out_i = sum_j P_ij in_j on cell masses. Each row is reduced in column
  /// order, so the result does not depend on the worker count.
  void apply_masses(std::span<const double> in, std::span<double> out,
                    Parallelism par = {}) const;
  GridDensity apply(const GridDensity& f, Parallelism par = {}) const;

  double entry(std::size_t i, std::size_t j) const;
  std::vector<double> column_sums() const;
  std::vector<double> to_dense() const;

  std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
  std::span<const std::size_t> column_indices() const noexcept { return columns_; }
  std::span<const double> entries() const noexcept { return values_; }

  friend bool operator==(const UlamOperator& a, const UlamOperator& b) {
    return a.beta_ == b.beta_ && *a.grid_ == *b.grid_ && a.row_offsets_ == b.row_offsets_ &&
           a.columns_ == b.columns_ && a.values_ == b.values_;
  }

 private:
  UlamOperator(MapParameter beta, GridPtr grid) : beta_(beta), grid_(std::move(grid)) {}

  MapParameter beta_;
  GridPtr grid_;
  std::vector<std::size_t> row_offsets_;
  std::vector<std::size_t> columns_;
  std::vector<double> values_;
};

/// P_n o ... o P_1 f, applying operators[0] first.
GridDensity apply_sequence(std::span<const UlamOperator* const> operators, const GridDensity& f,
                           Parallelism par = {});
GridDensity apply_sequence(std::span<const UlamOperator> operators, const GridDensity& f,
                           Parallelism par = {});

}  // namespace seqpm
