#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "seqpm/grid.hpp"
#include "seqpm/interpolation.hpp"
#include "seqpm/observable.hpp"
#include "seqpm/operator_cache.hpp"
#include "seqpm/pm_map.hpp"

namespace seqpm {

/// Division floor for H_n = N_n / D_n. P^n 1 is bounded below uniformly in n,
/// so reaching the floor means the discretization broke down.
inline constexpr double kDensityFloor = 1e-6;

/// Grid state of the martingale-coboundary decomposition at step n (steps are
/// 1-based; n = 0 is the untransported start):
///   D_n = P^n 1,
///   N_n = sum_{1 <= k <= n-1} P_{k+1}^n (phi_k P^k 1),
///   H_n = N_n / D_n,
/// with phi_k = phi - c_k and c_k = ∫ phi o T^k dm = ∫ phi D_k dm.
struct DecompositionState {
  std::size_t n{0};
  GridDensity density;    // D_n
  GridDensity numerator;  // N_n
  GridDensity coboundary; // H_n
  std::vector<double> centerings;  // c_1 .. c_{n-1}

  static DecompositionState initial(GridPtr grid);

  /// c_n = ∫ phi D_n on the grid (midpoint rule).
  double centering(const Observable& phi) const;
};

/// One step of the recurrence
///   N_{n+1} = P_{n+1}(N_n + phi_n D_n),  D_{n+1} = P_{n+1} D_n,  H_{n+1} = N_{n+1} / D_{n+1},
/// where the phi_n term is absent for n = 0. Throws GridBreakdown if D_{n+1}
/// falls below kDensityFloor.
DecompositionState advance_decomposition(const DecompositionState& state,
                                         const UlamOperator& next_operator, const Observable& phi,
                                         Parallelism par = {});

/// Moments of psi_k, where
///   psi_k o T^k = phi_k o T^k + H_k o T^k - H_{k+1} o T^{k+1},
/// computed from the states at k and k+1 by transfer-operator identities.
struct PsiFunction {
  std::size_t k{0};
  double centering{0.0};        // c_k
  double second_moment{0.0};    // v_k = ∫(phi_k + H_k)^2 D_k - ∫ H_{k+1}^2 D_{k+1}
  double phi_square{0.0};       // ∫ phi_k^2 D_k
  double phi_h{0.0};            // ∫ phi_k H_k D_k
  double h_square{0.0};         // ∫ H_k^2 D_k
  double h_next_square{0.0};    // ∫ H_{k+1}^2 D_{k+1}
  /// ||P_{k+1}(psi_k D_k)||_{L^1}, evaluated entry by entry from psi_k as a
  /// function of (cell at k, cell at k+1).
  double martingale_residual{0.0};
};

PsiFunction psi_at(const DecompositionState& at_k, const DecompositionState& at_k1,
                   const UlamOperator& step_operator, const Observable& phi);

/// Per-step record of the grid pipeline.
struct DecompositionRecord {
  std::size_t n{0};
  PsiFunction psi;
  double sigma2{0.0};       // sum_{k<=n} v_k
  double h_next_square{0.0};  // ∫ H_{n+1}^2 o T^{n+1} dm
  double Sigma2{0.0};       // sigma2 + h_next_square, the variance of the Birkhoff sum
};

/// Drives the grid pipeline one step at a time. After step() returns record n,
/// current() is the state at n and next() the state at n + 1.
class DecompositionScan {
 public:
  DecompositionScan(const MapSchedule& schedule, const Observable& phi, OperatorCache& operators,
                    Parallelism par = {});

  /// Advances to the next k and returns its record (k = 1, 2, ...).
  DecompositionRecord step();

  const DecompositionState& current() const noexcept { return current_; }
  const DecompositionState& next() const noexcept { return next_; }
  const MapSchedule& schedule() const noexcept { return schedule_; }
  const Observable& observable() const noexcept { return phi_; }
  double sigma2() const noexcept { return sigma2_; }

  /// Interpolants of H_k and H_{k+1} at cell midpoints.
  MonotoneCubic current_interpolant() const;
  MonotoneCubic next_interpolant() const;

 private:
  MapSchedule schedule_;
  Observable phi_;
  OperatorCache* operators_;
  Parallelism par_;
  DecompositionState current_;
  DecompositionState next_;
  double sigma2_{0.0};
};

/// Runs the scan for n = 1..n_max and returns every record.
std::vector<DecompositionRecord> decomposition_records(const MapSchedule& schedule,
                                                       const Observable& phi, std::size_t n_max,
                                                       OperatorCache& operators,
                                                       Parallelism par = {});

struct MomentPoint {
  std::size_t n;
  double norm;           // ||H_n o T^n||_{L^r} = (∫ |H_n|^r D_n)^(1/r)
  double running_sup;
};

/// Requires 1 <= r < 1/(2 alpha_cap).
std::vector<MomentPoint> h_moment_scan(const MapSchedule& schedule, const Observable& phi,
                                       double r, std::size_t n_max, OperatorCache& operators,
                                       Parallelism par = {});

/// Relative growth of the running supremum over the final doubling [n_max/2, n_max].
double final_doubling_increment(std::span<const MomentPoint> scan);

struct TailPoint {
  std::size_t n;
  double sigma2;
  double delta2;           // sum_{k>=n} v_k / sigma_k^4, truncated at n_max plus tail bound
  double sigma_ratio;      // sigma_{n+1}^2 / sigma_n^2 (NaN at n_max)
  double delta_sigma_product;  // delta_n^2 sigma_n^2
};

struct TailDiagnostics {
  std::vector<TailPoint> points;
  double truncation_bound{0.0};  // 1 / sigma_{n_max}^2
};

/// v[k-1] holds v_k for k = 1..n_max. Steps with sigma_n^2 = 0 report NaN ratios.
TailDiagnostics tail_series_diagnostics(std::span<const double> v);

}  // namespace seqpm
