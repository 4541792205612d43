#include "seqpm/ulam.hpp"

#include <algorithm>
#include <cmath>

#include "seqpm/errors.hpp"

namespace seqpm {

double apply_transfer_pointwise(MapParameter beta, const std::function<double(double)>& f,
                                double x) {
  if (!(x > 0.0 && x <= 1.0)) throw DomainError("apply_transfer_pointwise: x outside (0, 1]");
  const double z = inverse_left(beta, x);
  return f(z) / map_derivative(beta, z) + 0.5 * f(inverse_right(x));
}

namespace {

struct RowEntries {
  std::vector<std::size_t> columns;
  std::vector<double> values;

  void add(std::size_t j, double v) {
    if (!columns.empty() && columns.back() == j) {
      values.back() += v;
    } else {
      columns.push_back(j);
      values.push_back(v);
    }
  }
};

// Spread the interval [a, b] over the grid cells it meets, as fractions of
// each cell's width.
void spread(const GradedGrid& grid, double a, double b, RowEntries& row) {
  if (!(b > a)) return;
  const auto cuts = grid.cuts();
  std::size_t j = grid.locate(a);
  for (; j < grid.cells() && cuts[j] < b; ++j) {
    const double overlap = std::min(b, cuts[j + 1]) - std::max(a, cuts[j]);
    if (overlap > 0.0) row.add(j, overlap / grid.width(j));
  }
}

}  // namespace

UlamOperator UlamOperator::build(MapParameter beta, GridPtr grid, Parallelism par) {
  const std::size_t n = grid->cells();
  const auto cuts = grid->cuts();

  std::vector<double> left_pre(n + 1);
  std::vector<double> right_pre(n + 1);
  parallel_blocks(n + 1, 256, par, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      left_pre[k] = inverse_left(beta, cuts[k]);
      right_pre[k] = inverse_right(cuts[k]);
    }
  });
  left_pre.back() = 0.5;
  right_pre.front() = 0.5;

  std::vector<RowEntries> rows(n);
  parallel_blocks(n, 64, par, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      spread(*grid, left_pre[i], left_pre[i + 1], rows[i]);
      spread(*grid, right_pre[i], right_pre[i + 1], rows[i]);
    }
  });

  UlamOperator op(beta, grid);
  op.row_offsets_.resize(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i)
    op.row_offsets_[i + 1] = op.row_offsets_[i] + rows[i].columns.size();
  op.columns_.reserve(op.row_offsets_.back());
  op.values_.reserve(op.row_offsets_.back());
  for (auto& r : rows) {
    op.columns_.insert(op.columns_.end(), r.columns.begin(), r.columns.end());
    op.values_.insert(op.values_.end(), r.values.begin(), r.values.end());
  }

  // The preimage intervals tile [0, 1], so column sums equal one up to the
  // rounding of the interval endpoints; remove that residue.
  const auto sums = op.column_sums();
  for (std::size_t e = 0; e < op.values_.size(); ++e) op.values_[e] /= sums[op.columns_[e]];
  return op;
}

UlamOperator UlamOperator::from_dense(MapParameter beta, GridPtr grid,
                                      std::span<const double> dense) {
  const std::size_t n = grid->cells();
  if (dense.size() != n * n) throw DomainError("UlamOperator::from_dense: size mismatch");
  UlamOperator op(beta, std::move(grid));
  op.row_offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = dense[i * n + j];
      if (v != 0.0) {
        op.columns_.push_back(j);
        op.values_.push_back(v);
      }
    }
    op.row_offsets_[i + 1] = op.values_.size();
  }
  return op;
}

void UlamOperator::apply_masses(std::span<const double> in, std::span<double> out,
                                Parallelism par) const {
  const std::size_t n = size();
  if (in.size() != n || out.size() != n) throw DomainError("UlamOperator: vector size mismatch");
  parallel_blocks(n, 512, par, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double acc = 0.0;
      for (std::size_t e = row_offsets_[i]; e < row_offsets_[i + 1]; ++e)
        acc += values_[e] * in[columns_[e]];
      out[i] = acc;
    }
  });
}

GridDensity UlamOperator::apply(const GridDensity& f, Parallelism par) const {
  if (!(f.grid() == *grid_)) throw DomainError("UlamOperator::apply: grid mismatch");
  const auto in = f.masses();
  std::vector<double> out(size());
  apply_masses(in, out, par);
  return GridDensity::from_masses(grid_, out);
}

double UlamOperator::entry(std::size_t i, std::size_t j) const {
  const auto first = columns_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i]);
  const auto last = columns_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i + 1]);
  const auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return 0.0;
  return values_[static_cast<std::size_t>(it - columns_.begin())];
}

std::vector<double> UlamOperator::column_sums() const {
  std::vector<double> sums(size(), 0.0);
  for (std::size_t e = 0; e < values_.size(); ++e) sums[columns_[e]] += values_[e];
  return sums;
}

std::vector<double> UlamOperator::to_dense() const {
  const std::size_t n = size();
  std::vector<double> dense(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t e = row_offsets_[i]; e < row_offsets_[i + 1]; ++e)
      dense[i * n + columns_[e]] = values_[e];
  return dense;
}

GridDensity apply_sequence(std::span<const UlamOperator* const> operators, const GridDensity& f,
                           Parallelism par) {
  for (const auto* op : operators)
    if (!(op->grid() == f.grid())) throw DomainError("apply_sequence: grid mismatch");
  std::vector<double> a = f.masses();
  std::vector<double> b(a.size());
  for (const auto* op : operators) {
    op->apply_masses(a, b, par);
    a.swap(b);
  }
  return GridDensity::from_masses(f.grid_ptr(), a);
}

GridDensity apply_sequence(std::span<const UlamOperator> operators, const GridDensity& f,
                           Parallelism par) {
  std::vector<const UlamOperator*> ptrs;
  ptrs.reserve(operators.size());
  for (const auto& op : operators) ptrs.push_back(&op);
  return apply_sequence(std::span<const UlamOperator* const>(ptrs), f, par);
}

}  // namespace seqpm
