#include "seqpm/stochastics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "seqpm/errors.hpp"
#include "seqpm/random.hpp"

namespace seqpm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::size_t> resolve_checkpoints(std::vector<std::size_t> checkpoints,
                                             std::size_t n_max) {
  if (checkpoints.empty()) return dyadic_checkpoints(n_max);
  for (std::size_t j = 0; j < checkpoints.size(); ++j) {
    if (checkpoints[j] == 0) throw DomainError("checkpoints must be >= 1");
    if (checkpoints[j] > n_max) {
      std::ostringstream os;
      os << "checkpoint " << checkpoints[j] << " lies beyond n_max = " << n_max;
      throw DomainError(os.str());
    }
    if (j > 0 && checkpoints[j] <= checkpoints[j - 1])
      throw DomainError("checkpoints must increase strictly");
  }
  return checkpoints;
}

std::vector<double> schedule_betas(const MapSchedule& schedule, std::size_t n) {
  std::vector<double> betas(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) betas[k] = schedule.beta(k);
  return betas;
}

struct BlockRange {
  std::size_t begin;
  std::size_t end;
};

BlockRange block_range(std::size_t b, std::size_t blocks, std::size_t count) {
  return {b * count / blocks, (b + 1) * count / blocks};
}

}  // namespace

std::vector<std::size_t> dyadic_checkpoints(std::size_t n_max) {
  std::vector<std::size_t> out;
  for (std::size_t n = 1; n <= n_max; n *= 2) out.push_back(n);
  if (!out.empty() && out.back() != n_max) out.push_back(n_max);
  return out;
}

double stratified_start(std::uint64_t seed, std::size_t index, std::size_t count) {
  const double u = counter_uniform(derive_key(seed, index), 0);
  return (static_cast<double>(index) + u) / static_cast<double>(count);
}

GrowthFit growth_fit(std::vector<std::size_t> checkpoints,
                     const std::vector<std::vector<double>>& block_sums,
                     std::span<const std::size_t> block_counts) {
  const std::size_t J = checkpoints.size();
  const std::size_t B = block_sums.size();
  GrowthFit fit;
  fit.checkpoints = std::move(checkpoints);
  fit.sigma2.assign(J, 0.0);
  fit.standard_error.assign(J, 0.0);

  std::size_t total_count = 0;
  for (auto c : block_counts) total_count += c;
  std::vector<double> total(J, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < J; ++j) total[j] += block_sums[b][j];

  // Leave-one-block-out estimates.
  std::vector<std::vector<double>> loo(B, std::vector<double>(J));
  for (std::size_t b = 0; b < B; ++b) {
    const double rest = static_cast<double>(total_count - block_counts[b]);
    for (std::size_t j = 0; j < J; ++j) loo[b][j] = (total[j] - block_sums[b][j]) / rest;
  }
  bool all_zero = true;
  std::vector<double> column(B);
  for (std::size_t j = 0; j < J; ++j) {
    fit.sigma2[j] = total[j] / static_cast<double>(total_count);
    if (fit.sigma2[j] != 0.0) all_zero = false;
    for (std::size_t b = 0; b < B; ++b) column[b] = loo[b][j];
    fit.standard_error[j] = B >= 2 ? jackknife_stderr(column) : kNaN;
  }
  fit.degenerate = all_zero;
  if (all_zero) return fit;

  auto slope_of = [&](const std::vector<double>& s2) {
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t j = J / 2; j < J; ++j) {
      if (!(s2[j] > 0.0)) continue;
      lx.push_back(std::log(static_cast<double>(fit.checkpoints[j])));
      ly.push_back(std::log(s2[j]));
    }
    return least_squares(lx, ly);
  };
  const auto main = slope_of(fit.sigma2);
  fit.gamma = main.slope;
  fit.fit_points = main.points;
  if (B >= 2) {
    std::vector<double> gammas(B);
    for (std::size_t b = 0; b < B; ++b) gammas[b] = slope_of(loo[b]).slope;
    fit.gamma_stderr = jackknife_stderr(gammas);
  } else {
    fit.gamma_stderr = kNaN;
  }
  fit.ci_low = fit.gamma - 1.96 * fit.gamma_stderr;
  fit.ci_high = fit.gamma + 1.96 * fit.gamma_stderr;
  return fit;
}

EnsembleResult run_ensemble(const MapSchedule& schedule, const Observable& phi,
                            std::span<const double> centerings, const EnsembleSpec& spec,
                            Parallelism par, const LilOptions* lil) {
  const std::size_t M = spec.trajectories;
  const std::size_t n_max = spec.n_max;
  if (M == 0) throw DomainError("run_ensemble: need at least one trajectory");
  if (centerings.size() < n_max) throw DomainError("run_ensemble: missing grid centerings");
  const auto checkpoints = resolve_checkpoints(spec.checkpoints, n_max);
  const std::size_t J = checkpoints.size();
  const std::size_t B = std::clamp<std::size_t>(spec.blocks, 1, M);
  const auto betas = schedule_betas(schedule, n_max);

  const bool track_lil = lil != nullptr && lil->n_min >= 1 && lil->n_min <= n_max &&
                         lil->Sigma2.size() >= n_max;

  EnsembleResult out;
  out.snapshots.assign(J, std::vector<double>(M));
  if (track_lil) out.lil_sup.assign(M, -std::numeric_limits<double>::infinity());

  std::vector<std::vector<double>> s2(B, std::vector<double>(J, 0.0));
  std::vector<std::vector<double>> a1(B, std::vector<double>(J, 0.0));
  std::vector<std::size_t> counts(B);

  parallel_chunks(B, par, [&](std::size_t b) {
    const auto r = block_range(b, B, M);
    counts[b] = r.end - r.begin;
    for (std::size_t i = r.begin; i < r.end; ++i) {
      double x = stratified_start(spec.seed, i, M);
      double s = 0.0;
      double sup = -std::numeric_limits<double>::infinity();
      std::size_t j = 0;
      for (std::size_t k = 1; k <= n_max; ++k) {
        x = apply_map(MapParameter(betas[k]), x);
        const double a = phi(x) - centerings[k - 1];
        s += a;
        if (track_lil && k >= lil->n_min) sup = std::max(sup, s / lil_normalizer(lil->Sigma2[k - 1]));
        if (j < J && checkpoints[j] == k) {
          out.snapshots[j][i] = s;
          s2[b][j] += s * s;
          a1[b][j] += a;
          ++j;
        }
      }
      if (track_lil) out.lil_sup[i] = sup;
    }
  });

  out.growth = growth_fit(checkpoints, s2, counts);

  const auto mean_check = growth_fit(checkpoints, a1, counts);
  out.centering.reserve(J);
  for (std::size_t j = 0; j < J; ++j)
    out.centering.push_back({checkpoints[j], mean_check.sigma2[j], mean_check.standard_error[j]});
  return out;
}

// ---------------------------------------------------------------------------

CltReport clt_test(std::span<const double> sums, double sigma2_hat) {
  if (sums.size() < kCltMinimumSample) {
    std::ostringstream os;
    os << "clt_test: snapshot of " << sums.size() << " values is below the minimum "
       << kCltMinimumSample;
    throw DomainError(os.str());
  }
  CltReport rep;
  rep.n = sums.size();
  if (!(sigma2_hat > 0.0)) {
    rep.degenerate = true;
    rep.ks.statistic = kNaN;
    rep.ks.p_value = kNaN;
    return rep;
  }
  rep.sigma_hat = std::sqrt(sigma2_hat);
  std::vector<double> z(sums.begin(), sums.end());
  for (double& v : z) v /= rep.sigma_hat;
  rep.ks = ks_standard_normal(z);
  return rep;
}

double lil_normalizer(double Sigma2) {
  return std::sqrt(2.0 * Sigma2 * std::log(std::log(Sigma2)));
}

std::size_t lil_first_applicable(std::span<const double> Sigma2) {
  for (std::size_t k = 0; k < Sigma2.size(); ++k)
    if (Sigma2[k] > 1.0 && std::log(std::log(Sigma2[k])) > 1.0) return k + 1;
  return 0;
}

LilReport lil_band_diagnostic(std::span<const double> sups, double delta, std::size_t n_min,
                              std::size_t n_max) {
  LilReport rep;
  rep.delta = delta;
  rep.n_min = n_min;
  rep.n_max = n_max;
  rep.applicable = n_min >= 1 && n_min <= n_max;
  if (sups.empty() || !rep.applicable) {
    rep.degenerate = sups.empty();
    return rep;
  }
  std::size_t inside = 0;
  for (double s : sups) {
    if (!std::isfinite(s)) {
      rep.degenerate = true;
      return rep;
    }
    if (s >= 1.0 - delta && s <= 1.0 + delta) ++inside;
  }
  rep.fraction_in_band = static_cast<double>(inside) / static_cast<double>(sups.size());
  rep.median_sup = median(std::vector<double>(sups.begin(), sups.end()));
  return rep;
}

// ---------------------------------------------------------------------------

SurrogateResult asip_surrogate(std::span<const double> v, std::size_t paths, std::uint64_t seed,
                               std::span<const std::size_t> checkpoints, Parallelism par) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0) || !std::isfinite(v[i])) {
      std::ostringstream os;
      os << "asip_surrogate: variance v_" << i + 1 << " = " << v[i] << " is negative or not finite";
      throw DomainError(os.str());
    }
  }
  const auto cps = resolve_checkpoints({checkpoints.begin(), checkpoints.end()}, v.size());
  const std::size_t J = cps.size();

  SurrogateResult out;
  out.checkpoints = cps;
  std::vector<double> sd(v.size());
  double ledger = 0.0;
  double reference = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sd[i] = std::sqrt(v[i]);
    ledger += v[i];  // Var G_i is v_i by construction
    reference += v[i];
    if (j < J && cps[j] == i + 1) {
      out.variance_sum.push_back(ledger);
      out.sigma2.push_back(reference);
      out.ledger_gap.push_back(ledger - reference);
      ++j;
    }
  }

  out.partial_sums.assign(J, std::vector<double>(paths));
  constexpr std::size_t kBlock = 256;
  parallel_blocks(paths, kBlock, par, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const auto key = derive_key(seed, p);
      double s = 0.0;
      std::size_t jj = 0;
      for (std::size_t i = 0; i < v.size() && jj < J; ++i) {
        s += sd[i] * counter_normal(key, i);
        if (cps[jj] == i + 1) out.partial_sums[jj++][p] = s;
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------

PathwiseResult pathwise_decomposition(const MapSchedule& schedule, const Observable& phi,
                                      OperatorCache& operators, const PathwiseSpec& spec,
                                      Parallelism par) {
  const std::size_t M = spec.trajectories;
  const std::size_t n_max = spec.n_max;
  if (M == 0) throw DomainError("pathwise_decomposition: need at least one trajectory");
  const auto checkpoints = resolve_checkpoints(spec.checkpoints, n_max);
  auto probes = spec.probe_steps;
  std::sort(probes.begin(), probes.end());
  probes.erase(std::unique(probes.begin(), probes.end()), probes.end());
  probes.erase(std::remove_if(probes.begin(), probes.end(),
                              [&](std::size_t p) { return p == 0 || p > n_max; }),
               probes.end());
  const auto betas = schedule_betas(schedule, n_max + 1);
  const std::size_t B = std::clamp<std::size_t>(spec.blocks, 1, M);

  struct Path {
    double x, h;
    double s{0.0}, s_psi{0.0}, t1{0.0}, t4{0.0}, t5{0.0}, s_prime{0.0};
  };
  std::vector<Path> paths(M);
  for (std::size_t i = 0; i < M; ++i) {
    const double x0 = stratified_start(spec.seed, i, M);
    paths[i].x = apply_map(MapParameter(betas[1]), x0);
    paths[i].h = 0.0;  // H_1 = 0
  }
  std::vector<std::vector<double>> probe_psi(probes.size(), std::vector<double>(M));

  PathwiseResult out;
  out.records.reserve(n_max);
  DecompositionScan scan(schedule, phi, operators, par);
  std::size_t next_cp = 0;
  std::size_t next_probe = 0;
  std::vector<double> residual(M), identity(M), abs_sp(M);

  for (std::size_t k = 1; k <= n_max; ++k) {
    const auto rec = scan.step();
    out.records.push_back(rec);
    out.max_martingale_residual = std::max(out.max_martingale_residual, rec.psi.martingale_residual);
    const auto h_next = scan.next_interpolant();
    const MapParameter step(betas[k + 1]);
    const double c = rec.psi.centering;
    const double v = rec.psi.second_moment;
    const bool probe = next_probe < probes.size() && probes[next_probe] == k;

    parallel_chunks(B, par, [&](std::size_t b) {
      const auto r = block_range(b, B, M);
      for (std::size_t i = r.begin; i < r.end; ++i) {
        Path& p = paths[i];
        const double a = phi(p.x) - c;
        const double x1 = apply_map(step, p.x);
        const double h1 = h_next(x1);
        const double psi = a + p.h - h1;
        p.s += a;
        p.s_psi += psi;
        p.t1 += a * a - rec.psi.phi_square;
        p.t4 += -2.0 * psi * h1;
        p.t5 += 2.0 * (a * p.h - rec.psi.phi_h);
        p.s_prime += psi * psi - v;
        p.x = x1;
        p.h = h1;
        if (probe) probe_psi[next_probe][i] = psi;
      }
    });
    if (probe) ++next_probe;

    if (next_cp < checkpoints.size() && checkpoints[next_cp] == k) {
      FiveTermPoint pt;
      pt.n = k;
      pt.sigma2 = rec.sigma2;
      const double t2 = rec.h_next_square;
      for (std::size_t i = 0; i < M; ++i) {
        const Path& p = paths[i];
        const double t3 = -p.h * p.h;
        residual[i] = std::abs(p.s - p.s_psi - p.h);
        identity[i] = std::abs(p.s_prime - (p.t1 + t2 + t3 + p.t4 + p.t5));
        abs_sp[i] = std::abs(p.s_prime);
        pt.max_pathwise_residual = std::max(pt.max_pathwise_residual, residual[i]);
        pt.max_identity_residual = std::max(pt.max_identity_residual, identity[i]);
        pt.mean_terms[0] += p.t1;
        pt.mean_terms[1] += t2;
        pt.mean_terms[2] += t3;
        pt.mean_terms[3] += p.t4;
        pt.mean_terms[4] += p.t5;
        pt.mean_s_prime += p.s_prime;
      }
      for (double& t : pt.mean_terms) t /= static_cast<double>(M);
      pt.mean_s_prime /= static_cast<double>(M);
      pt.median_abs_s_prime = median(abs_sp);
      out.points.push_back(pt);
      ++next_cp;
    }
  }

  // Covariances of psi at consecutive probe steps.
  for (std::size_t q = 0; q + 1 < probes.size(); ++q) {
    const auto& u = probe_psi[q];
    const auto& w = probe_psi[q + 1];
    double mu = 0.0, mw = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      mu += u[i];
      mw += w[i];
    }
    mu /= static_cast<double>(M);
    mw /= static_cast<double>(M);
    double cov = 0.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < M; ++i) cov += (u[i] - mu) * (w[i] - mw);
    cov /= static_cast<double>(M);
    for (std::size_t i = 0; i < M; ++i) {
      const double d = (u[i] - mu) * (w[i] - mw) - cov;
      ss += d * d;
    }
    const double se = M > 1 ? std::sqrt(ss / static_cast<double>(M - 1) / static_cast<double>(M)) : kNaN;
    out.orthogonality.push_back({probes[q], probes[q + 1], cov, se});
  }

  std::vector<double> lx, ly;
  for (std::size_t j = out.points.size() / 2; j < out.points.size(); ++j) {
    const auto& p = out.points[j];
    if (p.sigma2 > 0.0 && p.median_abs_s_prime > 0.0) {
      lx.push_back(std::log(p.sigma2));
      ly.push_back(std::log(p.median_abs_s_prime));
    }
  }
  out.s_prime_growth = least_squares(lx, ly);
  return out;
}

// ---------------------------------------------------------------------------

ScheduleRun run_schedule(const MapSchedule& schedule, const Observable& phi,
                         const EnsembleSpec& spec, OperatorCache& operators, Parallelism par) {
  const auto records = decomposition_records(schedule, phi, spec.n_max, operators, par);
  std::vector<double> centerings(records.size());
  for (std::size_t k = 0; k < records.size(); ++k) centerings[k] = records[k].psi.centering;
  ScheduleRun run;
  run.schedule = schedule.describe();
  run.growth = run_ensemble(schedule, phi, centerings, spec, par).growth;
  for (auto n : run.growth.checkpoints) run.grid_Sigma2.push_back(records[n - 1].Sigma2);
  return run;
}

ApplicationResult nearby_maps_experiment(double beta0, double epsilon, const Observable& phi,
                                         std::size_t schedules, const EnsembleSpec& spec,
                                         OperatorCache& operators, Parallelism par) {
  if (!(epsilon >= 0.0)) throw DomainError("nearby maps: epsilon must be >= 0");
  if (!(beta0 - epsilon > 0.0 && beta0 + epsilon < kPerturbativeCap)) {
    std::ostringstream os;
    os << "nearby maps: window (" << beta0 - epsilon << ", " << beta0 + epsilon
       << ") violates 0 < β_0, β_k < 1/8";
    throw DomainError(os.str());
  }
  ApplicationResult out;
  if (phi.is_constant()) {
    out.applicable = false;
    out.note = "constant observable is a coboundary: variance is degenerate, theorem does not apply";
    return out;
  }
  for (std::size_t s = 0; s < schedules; ++s) {
    const auto schedule = MapSchedule::nearby(beta0, epsilon, derive_key(spec.seed, 2 * s),
                                              kPerturbativeCap);
    EnsembleSpec es = spec;
    es.seed = derive_key(spec.seed, 2 * s + 1);
    out.runs.push_back(run_schedule(schedule, phi, es, operators, par));
  }
  return out;
}

ApplicationResult quenched_experiment(const std::vector<double>& alphabet,
                                      const std::vector<double>& probabilities,
                                      const Observable& phi, std::size_t n_omega,
                                      const EnsembleSpec& spec, OperatorCache& operators,
                                      Parallelism par) {
  for (double b : alphabet) {
    if (!(b > 0.0 && b < kPerturbativeCap)) {
      std::ostringstream os;
      os << "random compositions: exponent " << b << " violates 0 < β_k < 1/8";
      throw DomainError(os.str());
    }
  }
  ApplicationResult out;
  // Validates the probability vector even when the run is skipped.
  (void)MapSchedule::iid_random(alphabet, probabilities, spec.seed, kPerturbativeCap);
  if (phi.is_constant()) {
    out.applicable = false;
    out.note = "constant observable is a coboundary: variance is degenerate, theorem does not apply";
    return out;
  }
  for (std::size_t w = 0; w < n_omega; ++w) {
    const auto schedule = MapSchedule::iid_random(alphabet, probabilities,
                                                   derive_key(spec.seed, 2 * w), kPerturbativeCap);
    EnsembleSpec es = spec;
    es.seed = derive_key(spec.seed, 2 * w + 1);
    out.runs.push_back(run_schedule(schedule, phi, es, operators, par));
  }
  return out;
}

}  // namespace seqpm
