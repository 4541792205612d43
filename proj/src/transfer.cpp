#include "seqpm/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "seqpm/errors.hpp"

namespace seqpm {

ConeReport check_cone(const GridDensity& f, double a, double alpha, double tolerance) {
  if (!(a > 0.0)) throw DomainError("check_cone: a must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("check_cone: alpha must lie in (0, 1)");
  const auto& grid = f.grid();
  const std::size_t n = f.size();
  const auto v = f.values();

  ConeReport r;
  double fmax = 0.0;
  double gmax = 0.0;
  std::vector<double> weighted(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = grid.midpoint(i);
    weighted[i] = std::pow(x, alpha + 1.0) * v[i];
    fmax = std::max(fmax, std::abs(v[i]));
    gmax = std::max(gmax, std::abs(weighted[i]));
  }
  if (fmax == 0.0) return r;  // the zero function is in every cone
  const double mass = f.total_mass();

  for (std::size_t i = 0; i < n; ++i) {
    const double neg = -v[i] / fmax;
    r.worst_negative = std::max(r.worst_negative, neg);
    if (i + 1 < n) {
      r.worst_increase = std::max(r.worst_increase, (v[i + 1] - v[i]) / fmax);
      r.worst_weighted_decrease =
          std::max(r.worst_weighted_decrease, (weighted[i] - weighted[i + 1]) / gmax);
    }
    if (mass > 0.0) {
      const double ratio = v[i] * std::pow(grid.midpoint(i), alpha) / mass;
      r.smallest_admissible_a = std::max(r.smallest_admissible_a, ratio);
    }
  }
  if (mass > 0.0) {
    r.worst_bound_excess = std::max(0.0, (r.smallest_admissible_a - a) / a);
  } else {
    r.worst_bound_excess = 1.0;
    r.smallest_admissible_a = INFINITY;
  }
  r.is_nonnegative = r.worst_negative <= tolerance;
  r.is_decreasing = r.worst_increase <= tolerance;
  r.weighted_increasing = r.worst_weighted_decrease <= tolerance;
  r.bound_ok = r.worst_bound_excess <= tolerance;
  return r;
}

GridDensity power_density(GridPtr grid, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("power_density: gamma outside [0, 1)");
  return GridDensity::from_antiderivative(std::move(grid),
                                          [gamma](double x) { return std::pow(x, 1.0 - gamma); });
}

std::vector<LowerBoundPoint> lower_bound_scan(const MapSchedule& schedule, std::size_t n_max,
                                              OperatorCache& operators, Parallelism par) {
  if (n_max < 1) throw DomainError("lower_bound_scan: n_max must be >= 1");
  const auto& grid = operators.grid();
  std::vector<double> mass(grid->cells());
  for (std::size_t i = 0; i < mass.size(); ++i) mass[i] = grid->width(i);
  std::vector<double> next(mass.size());

  std::vector<LowerBoundPoint> out;
  out.reserve(n_max + 1);
  out.push_back({0, 1.0});
  for (std::size_t n = 1; n <= n_max; ++n) {
    operators.get(schedule.parameter(n))->apply_masses(mass, next, par);
    mass.swap(next);
    double lo = INFINITY;
    for (std::size_t i = 0; i < mass.size(); ++i) lo = std::min(lo, mass[i] / grid->width(i));
    out.push_back({n, lo});
  }
  return out;
}

GridDensity invariant_density(const UlamOperator& op, std::size_t max_iterations,
                              double tolerance, Parallelism par) {
  const auto& grid = op.grid();
  std::vector<double> mass(grid.cells());
  for (std::size_t i = 0; i < mass.size(); ++i) mass[i] = grid.width(i);
  std::vector<double> next(mass.size());
  for (std::size_t it = 0; it < max_iterations; ++it) {
    op.apply_masses(mass, next, par);
    double diff = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
      diff += std::abs(next[i] - mass[i]);
      total += next[i];
    }
    for (double& m : next) m /= total;
    mass.swap(next);
    if (diff < tolerance) break;
  }
  return GridDensity::from_masses(op.grid_ptr(), mass);
}

LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("fit_loglog: size mismatch");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) continue;
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++k;
  }
  LogLogFit fit;
  fit.points = k;
  if (k < 2) return fit;
  const double kk = static_cast<double>(k);
  const double den = kk * sxx - sx * sx;
  if (den == 0.0) return fit;
  fit.slope = (kk * sxy - sx * sy) / den;
  fit.intercept = (sy - fit.slope * sx) / kk;
  return fit;
}

LogLogFit DecayCurve::fit(std::size_t n_lo, std::size_t n_hi) const {
  std::vector<double> xs;
  std::vector<double> ys;
  std::size_t last = 0;
  for (int j = 0;; ++j) {
    const auto n = static_cast<std::size_t>(std::llround(std::exp2(j / 4.0)));
    if (n > n_hi) break;
    if (n < n_lo || n == last || n >= points.size()) continue;
    last = n;
    xs.push_back(static_cast<double>(n));
    ys.push_back(points[n].norm);
  }
  return fit_loglog(xs, ys);
}

DecayCurve decay_curve(const MapSchedule& schedule, const Observable& phi, const GridDensity& h,
                       double p, std::size_t n_max, OperatorCache& operators, std::size_t offset,
                       Parallelism par, DecayCentering centering) {
  if (!(p >= 1.0)) throw DomainError("decay_curve: p must be >= 1");
  if (!(p * schedule.alpha_cap() < 1.0)) {
    std::ostringstream os;
    os << "decay_curve: p * alpha = " << p * schedule.alpha_cap()
       << " violates 1 ≤ p < 1/α";
    throw DomainError(os.str());
  }
  const auto& grid = *operators.grid();
  if (!(h.grid() == grid)) throw DomainError("decay_curve: density grid differs from operators");

  const std::size_t cells = grid.cells();
  std::vector<double> values(cells);
  double weighted = 0.0;
  double width = 0.0;
  double h_mass = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    values[i] = phi(grid.midpoint(i)) * h[i];
    weighted += values[i] * grid.width(i);
    width += grid.width(i);
    h_mass += h[i] * grid.width(i);
  }
  std::vector<double> mass(cells);
  if (centering == DecayCentering::lebesgue) {
    const double centre = weighted / width;
    for (std::size_t i = 0; i < cells; ++i) mass[i] = (values[i] - centre) * grid.width(i);
  } else {
    if (!(h_mass > 0.0)) throw DomainError("decay_curve: density centering needs ∫h > 0");
    const double centre = weighted / h_mass;
    for (std::size_t i = 0; i < cells; ++i) mass[i] = (values[i] - centre * h[i]) * grid.width(i);
  }
  std::vector<double> next(cells);

  auto norm = [&](std::span<const double> m) {
    double s = 0.0;
    for (std::size_t i = 0; i < cells; ++i) s += std::pow(std::abs(m[i]) / grid.width(i), p) * grid.width(i);
    return std::pow(s, 1.0 / p);
  };

  DecayCurve curve;
  curve.p = p;
  curve.offset = offset;
  curve.points.reserve(n_max + 1);
  curve.points.push_back({0, norm(mass)});
  for (std::size_t n = 1; n <= n_max; ++n) {
    operators.get(schedule.parameter(offset + n))->apply_masses(mass, next, par);
    mass.swap(next);
    curve.points.push_back({n, norm(mass)});
  }
  return curve;
}

}  // namespace seqpm
