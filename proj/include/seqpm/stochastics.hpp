#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqpm/martingale.hpp"
#include "seqpm/observable.hpp"
#include "seqpm/operator_cache.hpp"
#include "seqpm/parallel.hpp"
#include "seqpm/pm_map.hpp"
#include "seqpm/stats.hpp"

namespace seqpm {

/// Monte Carlo ensemble over Lebesgue-distributed starts. Trajectory i starts
/// at (i + u_i) / M with u_i drawn from the stream (seed, i): one jittered point
/// per stratum. Trajectories are grouped into `blocks` contiguous blocks whose
/// statistics are merged in block order, and the jackknife runs over blocks.
struct EnsembleSpec {
  std::size_t trajectories{100000};
  std::size_t n_max{4096};
  std::uint64_t seed{0};
  std::vector<std::size_t> checkpoints;  // empty: dyadic_checkpoints(n_max)
  std::size_t blocks{100};
};

/// 1, 2, 4, ... <= n_max, with n_max appended when it is not a power of two.
std::vector<std::size_t> dyadic_checkpoints(std::size_t n_max);

double stratified_start(std::uint64_t seed, std::size_t index, std::size_t count);

/// Variance growth Σ̂_n² = mean of S_n² at checkpoints and the exponent of
/// Σ̂_n² ~ n^gamma fitted over the top half of the checkpoints.
struct GrowthFit {
  std::vector<std::size_t> checkpoints;
  std::vector<double> sigma2;
  std::vector<double> standard_error;  // jackknife over trajectory blocks
  double gamma{0.0};
  double gamma_stderr{0.0};
  double ci_low{0.0};   // gamma -/+ 1.96 jackknife standard errors
  double ci_high{0.0};
  std::size_t fit_points{0};
  bool degenerate{false};  // every Σ̂² is zero
};

/// Ensemble mean of phi(T^n x) - c_n, which must vanish if the grid
/// centerings are unbiased.
struct CenteringCheck {
  std::size_t n;
  double mean;
  double standard_error;
};

/// Per-n curve Σ_n² (index n - 1) used to normalise the LIL statistic
/// S_n / sqrt(2 Σ_n² log log Σ_n²) over n in [n_min, n_max].
struct LilOptions {
  std::vector<double> Sigma2;
  std::size_t n_min{0};
};

struct EnsembleResult {
  GrowthFit growth;
  /// Raw Birkhoff sums S_n per checkpoint, in trajectory order.
  std::vector<std::vector<double>> snapshots;
  std::vector<CenteringCheck> centering;
  /// Per-trajectory sup of the LIL statistic, when requested.
  std::vector<double> lil_sup;
};

/// S_n = sum_{k<=n} (phi(T^k x) - c_k) with c_k = centerings[k - 1] taken
/// from the grid pipeline. Results depend on (spec, schedule, phi, centerings)
/// only, never on par.
EnsembleResult run_ensemble(const MapSchedule& schedule, const Observable& phi,
                            std::span<const double> centerings, const EnsembleSpec& spec,
                            Parallelism par = {}, const LilOptions* lil = nullptr);

/// Fit of log Σ̂² on log n over checkpoints with index >= size / 2.
GrowthFit growth_fit(std::vector<std::size_t> checkpoints,
                     const std::vector<std::vector<double>>& block_sums,
                     std::span<const std::size_t> block_counts);

// ---------------------------------------------------------------------------
// Limit-law diagnostics

struct CltReport {
  bool degenerate{false};
  std::size_t n{0};  // sample size
  double sigma_hat{0.0};
  KsResult ks;
};

inline constexpr std::size_t kCltMinimumSample = 1000;

/// KS distance of sums / sqrt(sigma2_hat) to N(0, 1). Zero variance gives a
/// degenerate report instead of a statistic.
CltReport clt_test(std::span<const double> sums, double sigma2_hat);

/// sqrt(2 s log log s), the classical LIL normaliser at variance s.
double lil_normalizer(double Sigma2);

/// First n (1-based) at which log log Σ_n² > 1, or 0 if never.
std::size_t lil_first_applicable(std::span<const double> Sigma2);

/// Asymptotic-only diagnostic: there is no acceptance threshold.
struct LilReport {
  bool degenerate{false};
  bool applicable{false};
  std::size_t n_min{0};
  std::size_t n_max{0};
  double delta{0.0};
  double fraction_in_band{0.0};  // share of sups inside [1 - delta, 1 + delta]
  double median_sup{0.0};
  std::string label{"asymptotic diagnostic only; no pass/fail"};
};

LilReport lil_band_diagnostic(std::span<const double> sups, double delta, std::size_t n_min,
                              std::size_t n_max);

// ---------------------------------------------------------------------------
// Gaussian surrogate

/// Independent G_i ~ N(0, v_i) and their partial sums at checkpoints.
struct SurrogateResult {
  std::vector<std::size_t> checkpoints;
  std::vector<double> variance_sum;  // sum_{i<=n} Var G_i
  std::vector<double> sigma2;        // reference sigma_n^2 = sum_{i<=n} v_i
  std::vector<double> ledger_gap;    // variance_sum - sigma2, zero by construction
  std::vector<std::vector<double>> partial_sums;  // per checkpoint, one per path
};

/// v[i - 1] = v_i. Draws are counter-based on (seed, path, i).
SurrogateResult asip_surrogate(std::span<const double> v, std::size_t paths, std::uint64_t seed,
                               std::span<const std::size_t> checkpoints, Parallelism par = {});

// ---------------------------------------------------------------------------
// Pathwise decomposition along trajectories

/// Lockstep run of the grid pipeline and an ensemble. H_k is evaluated along
/// orbits by monotone-cubic interpolation of its cell values, and
///   psi_k = a_k + h_k - h_{k+1},  a_k = phi(x_k) - c_k,  h_k = H_k(x_k).
struct PathwiseSpec {
  std::size_t trajectories{100};
  std::size_t n_max{200};
  std::uint64_t seed{0};
  std::vector<std::size_t> checkpoints;   // empty: dyadic
  std::vector<std::size_t> probe_steps;   // psi values kept for covariance checks
  std::size_t blocks{10};
};

/// Values of the variance-expansion terms at a checkpoint:
///   t1 = sum (a_i^2 - ∫ phi_i^2 D_i),  t2 = ∫ H_{n+1}^2 D_{n+1},  t3 = -h_{n+1}^2,
///   t4 = -2 sum psi_i h_{i+1},         t5 = 2 sum (a_i h_i - ∫ phi_i H_i D_i),
/// whose sum equals S'_n = sum (psi_i^2 - v_i) on every trajectory.
struct FiveTermPoint {
  std::size_t n{0};
  double sigma2{0.0};
  double max_pathwise_residual{0.0};  // |S_n - sum psi_k - h_{n+1}|
  double max_identity_residual{0.0};  // |S'_n - (t1 + ... + t5)|
  double median_abs_s_prime{0.0};
  double mean_terms[5]{};
  double mean_s_prime{0.0};
};

struct OrthogonalityPoint {
  std::size_t i;
  std::size_t j;
  double covariance;
  double standard_error;
};

struct PathwiseResult {
  std::vector<DecompositionRecord> records;  // k = 1..n_max
  std::vector<FiveTermPoint> points;
  std::vector<OrthogonalityPoint> orthogonality;
  double max_martingale_residual{0.0};
  /// Slope of log median |S'_n| on log sigma_n^2 over the top half of checkpoints.
  LineFit s_prime_growth;
};

PathwiseResult pathwise_decomposition(const MapSchedule& schedule, const Observable& phi,
                                      OperatorCache& operators, const PathwiseSpec& spec,
                                      Parallelism par = {});

// ---------------------------------------------------------------------------
// Applications

/// Grid pipeline (for the centerings and Σ_n²) plus a Monte Carlo ensemble.
struct ScheduleRun {
  std::string schedule;
  GrowthFit growth;
  std::vector<double> grid_Sigma2;  // at the growth checkpoints
};

ScheduleRun run_schedule(const MapSchedule& schedule, const Observable& phi,
                         const EnsembleSpec& spec, OperatorCache& operators,
                         Parallelism par = {});

/// Upper bound on every exponent in the perturbative applications.
inline constexpr double kPerturbativeCap = 0.125;

struct ApplicationResult {
  bool applicable{true};
  std::string note;
  std::vector<ScheduleRun> runs;
};

/// `schedules` independent windows beta_k in (beta0 - eps, beta0 + eps).
/// Requires 0 < beta0 - eps and beta0 + eps < 1/8.
ApplicationResult nearby_maps_experiment(double beta0, double epsilon, const Observable& phi,
                                         std::size_t schedules, const EnsembleSpec& spec,
                                         OperatorCache& operators, Parallelism par = {});

/// One full run per sampled symbol sequence omega (quenched centerings).
/// Requires every alphabet exponent < 1/8.
ApplicationResult quenched_experiment(const std::vector<double>& alphabet,
                                      const std::vector<double>& probabilities,
                                      const Observable& phi, std::size_t n_omega,
                                      const EnsembleSpec& spec, OperatorCache& operators,
                                      Parallelism par = {});

}  // namespace seqpm
