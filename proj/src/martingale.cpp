#include "seqpm/martingale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "seqpm/errors.hpp"

namespace seqpm {

DecompositionState DecompositionState::initial(GridPtr grid) {
  const std::size_t n = grid->cells();
  DecompositionState s{0, GridDensity::constant(grid, 1.0),
                       GridDensity(grid, std::vector<double>(n, 0.0)),
                       GridDensity(grid, std::vector<double>(n, 0.0)),
                       {}};
  return s;
}

double DecompositionState::centering(const Observable& phi) const {
  // Measured from a reference value so a constant observable centres exactly.
  const auto& grid = density.grid();
  const double ref = phi(grid.midpoint(0));
  double s = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i)
    s += (phi(grid.midpoint(i)) - ref) * density[i] * grid.width(i);
  return ref + s;
}

namespace {

void advance_in_place(DecompositionState& s, const UlamOperator& op, const Observable& phi,
                      Parallelism par) {
  const auto& grid = s.density.grid();
  if (!(op.grid() == grid)) throw DomainError("advance_decomposition: grid mismatch");
  const std::size_t cells = grid.cells();

  std::vector<double> num_mass(cells);
  if (s.n == 0) {
    std::fill(num_mass.begin(), num_mass.end(), 0.0);
  } else {
    const double c = s.centering(phi);
    s.centerings.push_back(c);
    for (std::size_t i = 0; i < cells; ++i)
      num_mass[i] = (s.numerator[i] + (phi(grid.midpoint(i)) - c) * s.density[i]) * grid.width(i);
  }
  const auto den_mass = s.density.masses();

  std::vector<double> num_next(cells);
  std::vector<double> den_next(cells);
  op.apply_masses(num_mass, num_next, par);
  op.apply_masses(den_mass, den_next, par);

  auto& dv = s.density.mutable_values();
  auto& nv = s.numerator.mutable_values();
  auto& hv = s.coboundary.mutable_values();
  for (std::size_t i = 0; i < cells; ++i) {
    dv[i] = den_next[i] / grid.width(i);
    nv[i] = num_next[i] / grid.width(i);
    if (!(dv[i] >= kDensityFloor)) {
      std::ostringstream os;
      os << "P^" << s.n + 1 << " 1 = " << dv[i] << " below the floor " << kDensityFloor
         << " in cell " << i << " (grid breakdown)";
      throw GridBreakdown(os.str());
    }
    hv[i] = nv[i] / dv[i];
  }
  ++s.n;
}

}  // namespace

DecompositionState advance_decomposition(const DecompositionState& state,
                                         const UlamOperator& next_operator, const Observable& phi,
                                         Parallelism par) {
  DecompositionState s = state;
  advance_in_place(s, next_operator, phi, par);
  return s;
}

PsiFunction psi_at(const DecompositionState& at_k, const DecompositionState& at_k1,
                   const UlamOperator& op, const Observable& phi) {
  if (at_k1.n != at_k.n + 1 || at_k.n == 0)
    throw DomainError("psi_at: needs consecutive states with k >= 1");
  const auto& grid = at_k.density.grid();
  const std::size_t cells = grid.cells();
  const double c = at_k1.centerings.back();

  PsiFunction psi;
  psi.k = at_k.n;
  psi.centering = c;
  std::vector<double> g(cells);
  double g_square = 0.0;
  for (std::size_t j = 0; j < cells; ++j) {
    const double a = phi(grid.midpoint(j)) - c;
    const double h = at_k.coboundary[j];
    const double w = at_k.density[j] * grid.width(j);
    g[j] = a + h;
    psi.phi_square += a * a * w;
    psi.phi_h += a * h * w;
    psi.h_square += h * h * w;
    g_square += g[j] * g[j] * w;
  }
  for (std::size_t i = 0; i < cells; ++i) {
    const double h = at_k1.coboundary[i];
    psi.h_next_square += h * h * at_k1.density[i] * grid.width(i);
  }
  psi.second_moment = g_square - psi.h_next_square;

  // psi_k(cell j -> cell i) = g_j - H_{k+1, i}; push psi_k D_k forward.
  const auto offsets = op.row_offsets();
  const auto cols = op.column_indices();
  const auto vals = op.entries();
  double residual = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    const double h = at_k1.coboundary[i];
    double acc = 0.0;
    for (std::size_t e = offsets[i]; e < offsets[i + 1]; ++e) {
      const std::size_t j = cols[e];
      acc += vals[e] * at_k.density[j] * grid.width(j) * (g[j] - h);
    }
    residual += std::abs(acc);
  }
  psi.martingale_residual = residual;
  return psi;
}

// ---------------------------------------------------------------------------

DecompositionScan::DecompositionScan(const MapSchedule& schedule, const Observable& phi,
                                     OperatorCache& operators, Parallelism par)
    : schedule_(schedule),
      phi_(phi),
      operators_(&operators),
      par_(par),
      current_(DecompositionState::initial(operators.grid())),
      next_(current_) {
  advance_in_place(next_, *operators_->get(schedule_.parameter(1)), phi_, par_);
}

DecompositionRecord DecompositionScan::step() {
  current_ = std::move(next_);
  next_ = current_;
  const auto op = operators_->get(schedule_.parameter(current_.n + 1));
  advance_in_place(next_, *op, phi_, par_);

  DecompositionRecord rec;
  rec.n = current_.n;
  rec.psi = psi_at(current_, next_, *op, phi_);
  sigma2_ += rec.psi.second_moment;
  rec.sigma2 = sigma2_;
  rec.h_next_square = rec.psi.h_next_square;
  rec.Sigma2 = rec.sigma2 + rec.h_next_square;
  return rec;
}

MonotoneCubic DecompositionScan::current_interpolant() const {
  return MonotoneCubic(current_.coboundary.grid().midpoints(), current_.coboundary.values());
}

MonotoneCubic DecompositionScan::next_interpolant() const {
  return MonotoneCubic(next_.coboundary.grid().midpoints(), next_.coboundary.values());
}

std::vector<DecompositionRecord> decomposition_records(const MapSchedule& schedule,
                                                       const Observable& phi, std::size_t n_max,
                                                       OperatorCache& operators,
                                                       Parallelism par) {
  DecompositionScan scan(schedule, phi, operators, par);
  std::vector<DecompositionRecord> out;
  out.reserve(n_max);
  for (std::size_t n = 1; n <= n_max; ++n) out.push_back(scan.step());
  return out;
}

std::vector<MomentPoint> h_moment_scan(const MapSchedule& schedule, const Observable& phi,
                                       double r, std::size_t n_max, OperatorCache& operators,
                                       Parallelism par) {
  const double bound = 1.0 / (2.0 * schedule.alpha_cap());
  if (!(r >= 1.0 && r < bound)) {
    std::ostringstream os;
    os << "moment exponent r = " << r << " outside the admissible range 1 ≤ r < 1/(2α) = "
       << bound;
    throw DomainError(os.str());
  }
  DecompositionScan scan(schedule, phi, operators, par);
  std::vector<MomentPoint> out;
  out.reserve(n_max);
  double sup = 0.0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    scan.step();
    const auto& s = scan.current();
    const auto& grid = s.density.grid();
    double acc = 0.0;
    for (std::size_t i = 0; i < s.density.size(); ++i)
      acc += std::pow(std::abs(s.coboundary[i]), r) * s.density[i] * grid.width(i);
    const double norm = std::pow(acc, 1.0 / r);
    sup = std::max(sup, norm);
    out.push_back({n, norm, sup});
  }
  return out;
}

double final_doubling_increment(std::span<const MomentPoint> scan) {
  if (scan.size() < 2) return 0.0;
  const double top = scan.back().running_sup;
  const std::size_t half = scan.back().n / 2;
  double mid = 0.0;
  for (const auto& p : scan)
    if (p.n <= half) mid = p.running_sup;
  if (mid == 0.0) return top == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return (top - mid) / mid;
}

TailDiagnostics tail_series_diagnostics(std::span<const double> v) {
  const std::size_t n_max = v.size();
  TailDiagnostics out;
  if (n_max == 0) return out;
  std::vector<double> sigma2(n_max);
  double acc = 0.0;
  for (std::size_t k = 0; k < n_max; ++k) {
    if (!(v[k] >= 0.0)) throw DomainError("tail_series_diagnostics: negative psi moment");
    acc += v[k];
    sigma2[k] = acc;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.truncation_bound = sigma2.back() > 0.0 ? 1.0 / sigma2.back() : nan;

  std::vector<double> delta2(n_max);
  double tail = out.truncation_bound;
  for (std::size_t k = n_max; k-- > 0;) {
    if (sigma2[k] > 0.0) tail += v[k] / (sigma2[k] * sigma2[k]);
    delta2[k] = tail;
  }
  out.points.reserve(n_max);
  for (std::size_t k = 0; k < n_max; ++k) {
    TailPoint p;
    p.n = k + 1;
    p.sigma2 = sigma2[k];
    p.delta2 = sigma2[k] > 0.0 ? delta2[k] : nan;
    p.sigma_ratio = (k + 1 < n_max && sigma2[k] > 0.0) ? sigma2[k + 1] / sigma2[k] : nan;
    p.delta_sigma_product = sigma2[k] > 0.0 ? delta2[k] * sigma2[k] : nan;
    out.points.push_back(p);
  }
  return out;
}

}  // namespace seqpm
