#include <doctest.h>

#include <cmath>
#include <cstring>

#include "seqpm/errors.hpp"
#include "seqpm/martingale.hpp"
#include "seqpm/random.hpp"
#include "seqpm/stochastics.hpp"

using namespace seqpm;

namespace {

std::vector<double> grid_centerings(const MapSchedule& s, const Observable& phi, std::size_t n,
                                    OperatorCache& ops) {
  std::vector<double> c;
  for (const auto& r : decomposition_records(s, phi, n, ops)) c.push_back(r.psi.centering);
  return c;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

// Per-path sup over [n_min, n_max] of S_n / sqrt(2 n log log n) for a
// Gaussian random walk, the classical LIL calibration input.
std::vector<double> walk_sups(std::size_t paths, std::size_t n_min, std::size_t n_max) {
  std::vector<double> sups(paths);
  for (std::size_t p = 0; p < paths; ++p) {
    const auto key = derive_key(77, p);
    double s = 0.0, best = -1e300;
    for (std::size_t n = 1; n <= n_max; ++n) {
      s += counter_normal(key, n);
      if (n >= n_min) best = std::max(best, s / lil_normalizer(static_cast<double>(n)));
    }
    sups[p] = best;
  }
  return sups;
}

}  // namespace

TEST_CASE("checkpoints and stratified starts") {
  CHECK(dyadic_checkpoints(10) == std::vector<std::size_t>{1, 2, 4, 8, 10});
  CHECK(dyadic_checkpoints(8) == std::vector<std::size_t>{1, 2, 4, 8});
  for (std::size_t i = 0; i < 1000; ++i) {
    const double x = stratified_start(3, i, 1000);
    CHECK(x >= i / 1000.0);
    CHECK(x < (i + 1) / 1000.0);
  }
}

TEST_CASE("ensemble") {
  auto grid = make_grid(1024, 2.0);
  OperatorCache ops(grid);
  const auto s = MapSchedule::constant(0.1, 0.125);
  const auto phi = Observable::identity();
  const auto c = grid_centerings(s, phi, 512, ops);
  EnsembleSpec spec;
  spec.trajectories = 5000;
  spec.n_max = 512;
  spec.blocks = 25;
  spec.seed = 11;

  SUBCASE("worker count does not change a bit") {
    const auto a = run_ensemble(s, phi, c, spec, Parallelism{1});
    const auto b = run_ensemble(s, phi, c, spec, Parallelism{3});
    REQUIRE(a.growth.sigma2.size() == b.growth.sigma2.size());
    for (std::size_t j = 0; j < a.growth.sigma2.size(); ++j) {
      CHECK(same_bits(a.growth.sigma2[j], b.growth.sigma2[j]));
      CHECK(same_bits(a.growth.standard_error[j], b.growth.standard_error[j]));
    }
    CHECK(same_bits(a.growth.gamma, b.growth.gamma));
    CHECK(a.snapshots == b.snapshots);
  }
  SUBCASE("snapshots are the Birkhoff sums of single orbits") {
    spec.trajectories = 50;
    spec.blocks = 5;
    const auto r = run_ensemble(s, phi, c, spec);
    for (std::size_t i : {0u, 17u, 49u}) {
      double x = stratified_start(spec.seed, i, spec.trajectories);
      double sum = 0.0;
      for (std::size_t k = 1; k <= spec.n_max; ++k) {
        x = apply_map(s.parameter(k), x);
        sum += x - c[k - 1];
      }
      CHECK(r.snapshots.back()[i] == doctest::Approx(sum).epsilon(1e-12));
    }
  }
  SUBCASE("constant observable") {
    const auto k = Observable::constant(0.3);
    const auto ck = grid_centerings(s, k, 512, ops);
    const auto r = run_ensemble(s, k, ck, spec);
    CHECK(r.growth.degenerate);
    for (double v : r.growth.sigma2) CHECK(v == 0.0);
    const auto clt = clt_test(r.snapshots.back(), r.growth.sigma2.back());
    CHECK(clt.degenerate);
  }
  SUBCASE("growth exponent of a stationary run") {
    const auto r = run_ensemble(s, phi, c, spec);
    CHECK(r.growth.gamma > 0.85);
    CHECK(r.growth.gamma < 1.15);
    CHECK(r.growth.ci_low < r.growth.gamma);
    CHECK(r.growth.ci_high > r.growth.gamma);
    for (const auto& cc : r.centering) CHECK(std::abs(cc.mean) <= 4.0 * cc.standard_error);
  }
  SUBCASE("bad checkpoints") {
    spec.checkpoints = {4, 2};
    CHECK_THROWS_AS(run_ensemble(s, phi, c, spec), DomainError);
    spec.checkpoints = {1024};
    CHECK_THROWS_AS(run_ensemble(s, phi, c, spec), DomainError);
  }
}

TEST_CASE("growth fit from block sums") {
  // S_n^2 sums proportional to n^1.5 in every block: exact exponent, zero error.
  const std::vector<std::size_t> cp{1, 2, 4, 8, 16, 32};
  std::vector<std::vector<double>> sums(4, std::vector<double>(cp.size()));
  for (auto& b : sums)
    for (std::size_t j = 0; j < cp.size(); ++j) b[j] = 10.0 * std::pow(cp[j], 1.5);
  const std::vector<std::size_t> counts(4, 10);
  const auto g = growth_fit(cp, sums, counts);
  CHECK(g.gamma == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(g.fit_points == 3);
  CHECK(g.sigma2[2] == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(g.gamma_stderr == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("CLT report") {
  std::vector<double> z(5000);
  const auto key = derive_key(4, 4);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = 3.0 * counter_normal(key, i);
  const auto r = clt_test(z, 9.0);
  CHECK_FALSE(r.degenerate);
  CHECK(r.ks.statistic < 0.03);
  CHECK(r.sigma_hat == doctest::Approx(3.0));
  CHECK_THROWS_AS(clt_test(std::vector<double>(999, 1.0), 1.0), DomainError);
  CHECK(clt_test(std::vector<double>(1000, 0.0), 0.0).degenerate);
}

TEST_CASE("LIL diagnostic") {
  CHECK(lil_normalizer(100.0) == doctest::Approx(std::sqrt(200.0 * std::log(std::log(100.0)))));
  std::vector<double> lin(100);
  for (std::size_t n = 0; n < lin.size(); ++n) lin[n] = static_cast<double>(n + 1);
  CHECK(lil_first_applicable(lin) == 16);  // log log n > 1 from n = 16
  CHECK(lil_first_applicable(std::vector<double>(10, 0.0)) == 0);

  // Band share grows with the horizon for Brownian increments.
  const auto short_run = lil_band_diagnostic(walk_sups(400, 16, 200), 0.25, 16, 200);
  const auto long_run = lil_band_diagnostic(walk_sups(400, 16, 20000), 0.25, 16, 20000);
  CHECK(short_run.label == long_run.label);
  CHECK(short_run.label.find("no pass/fail") != std::string::npos);
  CHECK(long_run.fraction_in_band > short_run.fraction_in_band);

  const auto none = lil_band_diagnostic(std::vector<double>{}, 0.25, 0, 100);
  CHECK(none.degenerate);
}

TEST_CASE("Gaussian surrogate") {
  std::vector<double> v(256);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 + 0.01 * std::sin(0.3 * i);
  const auto cp = dyadic_checkpoints(256);
  const auto a = asip_surrogate(v, 4000, 9, cp, Parallelism{1});
  const auto b = asip_surrogate(v, 4000, 9, cp, Parallelism{2});
  double sigma2 = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sigma2 += v[i];
    if (j < cp.size() && cp[j] == i + 1) {
      CHECK(a.variance_sum[j] == sigma2);
      CHECK(a.ledger_gap[j] == 0.0);
      double ss = 0.0;
      for (double x : a.partial_sums[j]) ss += x * x;
      CHECK(ss / 4000.0 == doctest::Approx(sigma2).epsilon(0.1));
      ++j;
    }
  }
  CHECK(a.partial_sums == b.partial_sums);
  CHECK_THROWS_AS(asip_surrogate(std::vector<double>{0.1, -0.1}, 10, 1, std::vector<std::size_t>{2}),
                  DomainError);
}

TEST_CASE("pathwise decomposition") {
  auto grid = make_grid(1024, 2.0);
  OperatorCache ops(grid);
  const auto s = MapSchedule::constant(0.2, 0.2);
  PathwiseSpec spec;
  spec.trajectories = 100;
  spec.n_max = 200;
  spec.seed = 3;
  spec.probe_steps = {1, 2, 100, 101};

  const auto r = pathwise_decomposition(s, Observable::identity(), ops, spec);
  double path = 0.0, identity = 0.0;
  for (const auto& p : r.points) {
    path = std::max(path, p.max_pathwise_residual);
    identity = std::max(identity, p.max_identity_residual);
  }
  CHECK(path < 1e-7);
  CHECK(identity < 1e-8);
  CHECK(r.max_martingale_residual < 1e-8);
  CHECK(r.orthogonality.size() == 3);
  for (const auto& o : r.orthogonality) CHECK(std::abs(o.covariance) <= 3.0 * o.standard_error);

  const auto flat = pathwise_decomposition(s, Observable::constant(2.0), ops, spec);
  for (const auto& p : flat.points) {
    for (double t : p.mean_terms) CHECK(std::abs(t) < 1e-20);
    CHECK(std::abs(p.mean_s_prime) < 1e-20);
  }
}

TEST_CASE("applications") {
  auto grid = make_grid(512, 2.0);
  OperatorCache ops(grid);
  EnsembleSpec spec;
  spec.trajectories = 2000;
  spec.n_max = 256;
  spec.blocks = 20;
  spec.seed = 21;
  const auto phi = Observable::identity();

  SUBCASE("epsilon = 0 reduces to the constant schedule") {
    const auto near = nearby_maps_experiment(0.1, 0.0, phi, 1, spec, ops);
    REQUIRE(near.runs.size() == 1);
    EnsembleSpec same = spec;
    same.seed = derive_key(spec.seed, 1);
    const auto base = run_schedule(MapSchedule::constant(0.1, kPerturbativeCap), phi, same, ops);
    CHECK(near.runs[0].growth.sigma2 == base.growth.sigma2);
  }
  SUBCASE("single-symbol alphabet reduces to the constant schedule") {
    const auto q = quenched_experiment({0.1}, {1.0}, phi, 1, spec, ops);
    EnsembleSpec same = spec;
    same.seed = derive_key(spec.seed, 1);
    const auto base = run_schedule(MapSchedule::constant(0.1, kPerturbativeCap), phi, same, ops);
    CHECK(q.runs[0].growth.sigma2 == base.growth.sigma2);
  }
  SUBCASE("same seed, same results") {
    const auto a = quenched_experiment({0.05, 0.1}, {0.5, 0.5}, phi, 2, spec, ops);
    const auto b = quenched_experiment({0.05, 0.1}, {0.5, 0.5}, phi, 2, spec, ops);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(a.runs[i].schedule == b.runs[i].schedule);
      CHECK(a.runs[i].growth.sigma2 == b.runs[i].growth.sigma2);
    }
    CHECK(a.runs[0].schedule != a.runs[1].schedule);
  }
  SUBCASE("constant observable is not applicable") {
    const auto r = nearby_maps_experiment(0.1, 0.02, Observable::constant(1.0), 2, spec, ops);
    CHECK_FALSE(r.applicable);
    CHECK_FALSE(r.note.empty());
  }
  SUBCASE("hypotheses") {
    CHECK_THROWS_AS(nearby_maps_experiment(0.1, 0.05, phi, 1, spec, ops), DomainError);
    CHECK_THROWS_AS(quenched_experiment({0.05, 0.2}, {0.5, 0.5}, phi, 1, spec, ops), DomainError);
  }
}
