#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "seqpm/grid.hpp"
#include "seqpm/observable.hpp"
#include "seqpm/operator_cache.hpp"
#include "seqpm/pm_map.hpp"

namespace seqpm {

/// Membership of a grid density in the cone
///   C_a = { f >= 0, f decreasing, x^(alpha+1) f increasing, f(x) <= a x^-alpha ∫f },
/// checked on cell averages at cell midpoints. Violations are relative to the
/// largest magnitude of the quantity being compared.
struct ConeReport {
  bool is_nonnegative{true};
  bool is_decreasing{true};
  bool weighted_increasing{true};
  bool bound_ok{true};
  double worst_negative{0.0};
  double worst_increase{0.0};
  double worst_weighted_decrease{0.0};
  double worst_bound_excess{0.0};
  /// Smallest a for which the bound condition holds: max f(x) x^alpha / ∫f.
  double smallest_admissible_a{0.0};

  bool passed() const noexcept {
    return is_nonnegative && is_decreasing && weighted_increasing && bound_ok;
  }
};

inline constexpr double kConeTolerance = 1e-9;

ConeReport check_cone(const GridDensity& f, double a, double alpha,
                      double tolerance = kConeTolerance);

/// Cell averages of the normalised cone extreme (1 - gamma) x^-gamma.
GridDensity power_density(GridPtr grid, double gamma);

struct LowerBoundPoint {
  std::size_t n;
  double minimum;
};

/// min over cells of the discretized P^n 1 for n = 0..n_max.
std::vector<LowerBoundPoint> lower_bound_scan(const MapSchedule& schedule, std::size_t n_max,
                                              OperatorCache& operators, Parallelism par = {});

/// Fixed vector of a single Ulam operator by power iteration from the
/// constant density, normalised to unit mass.
GridDensity invariant_density(const UlamOperator& op, std::size_t max_iterations = 20000,
                              double tolerance = 1e-14, Parallelism par = {});

struct DecayPoint {
  std::size_t n;
  double norm;
};

struct LogLogFit {
  double slope{0.0};
  double intercept{0.0};
  std::size_t points{0};
};

/// Least squares of log y on log x.
LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y);

struct DecayCurve {
  std::vector<DecayPoint> points;  // n = 0..n_max
  double p{1.0};
  std::size_t offset{0};

  /// Slope of log norm against log n on n = round(2^(j/4)) inside [n_lo, n_hi].
  LogLogFit fit(std::size_t n_lo, std::size_t n_hi) const;
};

/// How the pushed-forward function is centred.
///   lebesgue: phi h - ∫phi h          (subtract a constant)
///   density:  (phi - ∫phi h / ∫h) h   (subtract a multiple of h)
/// Both have zero Lebesgue mean. With phi(0) = ∫phi h / ∫h excluded, only the
/// second keeps the x^-alpha component near 0 that makes the upper rate sharp;
/// for phi(0) = 0 the first decays like n^-(1/alpha).
enum class DecayCentering { lebesgue, density };

/// L^p norms of P_{m+1}^{n+m} applied to the centred phi h on the grid,
/// n = 0..n_max, with m = offset. Requires 1 <= p < 1/alpha_cap.
DecayCurve decay_curve(const MapSchedule& schedule, const Observable& phi, const GridDensity& h,
                       double p, std::size_t n_max, OperatorCache& operators,
                       std::size_t offset = 0, Parallelism par = {},
                       DecayCentering centering = DecayCentering::lebesgue);

}  // namespace seqpm
