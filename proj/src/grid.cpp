#include "seqpm/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "seqpm/errors.hpp"

namespace seqpm {

GradedGrid::GradedGrid(std::size_t cells, double grading) : grading_(grading) {
  if (cells < 2) throw DomainError("grid needs at least two cells");
  if (!(grading >= 1.0)) throw DomainError("grid grading exponent must be >= 1");
  cuts_.resize(cells + 1);
  const double n = static_cast<double>(cells);
  cuts_.front() = 0.0;
  for (std::size_t i = 1; i < cells; ++i)
    cuts_[i] = std::pow(static_cast<double>(i) / n, grading);
  cuts_.back() = 1.0;
  widths_.resize(cells);
  mids_.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    if (!(cuts_[i + 1] > cuts_[i]))
      throw DomainError("grid cut points are not strictly increasing (grading too strong)");
    widths_[i] = cuts_[i + 1] - cuts_[i];
    mids_[i] = 0.5 * (cuts_[i] + cuts_[i + 1]);
  }
}

std::size_t GradedGrid::locate(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("GradedGrid::locate: x outside [0, 1]");
  // first cut >= x, cell to its left
  const auto it = std::lower_bound(cuts_.begin() + 1, cuts_.end(), x);
  return static_cast<std::size_t>(it - cuts_.begin()) - 1;
}

std::string GradedGrid::spec() const {
  std::ostringstream os;
  os.precision(17);
  os << "graded(N=" << cells() << ",rho=" << grading_ << ")";
  return os.str();
}

GridPtr make_grid(std::size_t cells, double grading) {
  return std::make_shared<const GradedGrid>(cells, grading);
}

// ---------------------------------------------------------------------------

GridDensity::GridDensity(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw DomainError("GridDensity without a grid");
  if (values_.size() != grid_->cells())
    throw DomainError("GridDensity: value count does not match grid cells");
}

GridDensity GridDensity::constant(GridPtr grid, double value) {
  const std::size_t n = grid->cells();
  return GridDensity(std::move(grid), std::vector<double>(n, value));
}

GridDensity GridDensity::from_antiderivative(GridPtr grid,
                                             const std::function<double(double)>& F) {
  std::vector<double> v(grid->cells());
  double prev = F(grid->cut(0));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double next = F(grid->cut(i + 1));
    v[i] = (next - prev) / grid->width(i);
    prev = next;
  }
  return GridDensity(std::move(grid), std::move(v));
}

GridDensity GridDensity::from_function(GridPtr grid, const std::function<double(double)>& f) {
  static constexpr std::array<double, 4> kNodes{0.1834346424956498, 0.5255324099163290,
                                                0.7966664774136267, 0.9602898564975363};
  static constexpr std::array<double, 4> kWeights{0.3626837833783620, 0.3137066458778873,
                                                  0.2223810344533745, 0.1012285362903763};
  std::vector<double> v(grid->cells());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double c = grid->midpoint(i);
    const double h = 0.5 * grid->width(i);
    double acc = 0.0;
    for (std::size_t q = 0; q < kNodes.size(); ++q)
      acc += kWeights[q] * (f(c - h * kNodes[q]) + f(c + h * kNodes[q]));
    v[i] = 0.5 * acc;
  }
  return GridDensity(std::move(grid), std::move(v));
}

GridDensity GridDensity::from_masses(GridPtr grid, std::span<const double> masses) {
  if (masses.size() != grid->cells()) throw DomainError("from_masses: size mismatch");
  std::vector<double> v(masses.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = masses[i] / grid->width(i);
  return GridDensity(std::move(grid), std::move(v));
}

std::vector<double> GridDensity::masses() const {
  std::vector<double> m(values_.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = values_[i] * grid_->width(i);
  return m;
}

double GridDensity::total_mass() const {
  double s = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) s += values_[i] * grid_->width(i);
  return s;
}

double GridDensity::integrate(const std::function<double(double)>& g) const {
  double s = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i)
    s += g(grid_->midpoint(i)) * values_[i] * grid_->width(i);
  return s;
}

double GridDensity::lp_norm(double p) const {
  if (!(p >= 1.0)) throw DomainError("lp_norm: p must be >= 1");
  double s = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i)
    s += std::pow(std::abs(values_[i]), p) * grid_->width(i);
  return std::pow(s, 1.0 / p);
}

double GridDensity::min_value() const {
  return *std::min_element(values_.begin(), values_.end());
}

std::size_t GridDensity::clip_negative(double tol) {
  std::size_t clipped = 0;
  for (double& v : values_) {
    if (v < 0.0 && v >= -tol) {
      v = 0.0;
      ++clipped;
    }
  }
  return clipped;
}

double inner_product(const GridDensity& a, const GridDensity& b) {
  if (a.grid_ptr() != b.grid_ptr() && !(a.grid() == b.grid()))
    throw DomainError("inner_product: grid mismatch");
  double s = 0.0;
  const auto w = a.grid().widths();
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i] * w[i];
  return s;
}

}  // namespace seqpm
