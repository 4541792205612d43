#include "seqpm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "seqpm/errors.hpp"
#include "seqpm/martingale.hpp"
#include "seqpm/random.hpp"
#include "seqpm/stochastics.hpp"
#include "seqpm/transfer.hpp"

namespace seqpm {

namespace {

using json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double alpha_of(const MapSchedule& s) { return s.alpha_cap(); }

class Context {
 public:
  Context(const ExperimentConfig& config, Parallelism par, const LogSink& log)
      : config_(config), par_(par), log_(log) {}

  const ExperimentConfig& config() const { return config_; }
  Parallelism par() const { return par_; }

  void log(const std::string& m) const {
    if (log_) log_(m);
  }

  /// Operator source for `schedule` on `grid`. The disk cache is used only for
  /// schedules with finitely many exponents; other schedules would write one
  /// file per step.
  OperatorCache make_cache(GridPtr grid, const MapSchedule& schedule, ExperimentRecord& rec) {
    auto options = OperatorCache::options_from_environment();
    if (!config_.cache.directory.empty()) options.directory = config_.cache.directory;
    if (!schedule.finite_support()) options.directory.reset();
    options.verify_probability = config_.cache.verify_probability;
    options.seed = config_.seed;
    options.warn = [&rec, this](const std::string& w) {
      rec.warnings.push_back(w);
      log("warning: " + w);
    };
    return OperatorCache(std::move(grid), std::move(options), par_);
  }

 private:
  const ExperimentConfig& config_;
  Parallelism par_;
  const LogSink& log_;
};

void add_check(ExperimentRecord& rec, std::string name, bool passed, double value,
               double threshold, std::string detail) {
  rec.checks.push_back({std::move(name), passed, value, threshold, std::move(detail)});
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void record_cache(ExperimentRecord& rec, const OperatorCache& cache) {
  const auto& s = cache.stats();
  rec.cache_stats = {{"builds", s.builds},
                     {"memory_hits", s.memory_hits},
                     {"disk_hits", s.disk_hits},
                     {"disk_rebuilds", s.disk_rebuilds},
                     {"verifications", s.verifications}};
}

json growth_json(const GrowthFit& g) {
  return {{"gamma", number(g.gamma)},
          {"gamma_stderr", number(g.gamma_stderr)},
          {"ci_low", number(g.ci_low)},
          {"ci_high", number(g.ci_high)},
          {"fit_points", g.fit_points},
          {"degenerate", g.degenerate}};
}

/// Range of (a - b) over the top half of the checkpoints.
double top_half_range(std::span<const double> a, std::span<const double> b) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t j = a.size() / 2; j < a.size(); ++j) {
    lo = std::min(lo, a[j] - b[j]);
    hi = std::max(hi, a[j] - b[j]);
  }
  return a.empty() ? 0.0 : hi - lo;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// ---------------------------------------------------------------------------

void run_density_scan(Context& ctx, ExperimentRecord& rec) {
  const auto& c = ctx.config();
  const auto schedule = make_schedule(c.schedule);
  auto grid = make_grid(c.grid.cells, c.grid.grading);
  auto cache = ctx.make_cache(grid, schedule, rec);
  const auto scan = lower_bound_scan(schedule, c.scan.n_max, cache, ctx.par());

  Curve curve{{"n", "minimum"}, {}};
  double floor = std::numeric_limits<double>::infinity();
  for (const auto& p : scan) {
    curve.rows.push_back({static_cast<double>(p.n), p.minimum});
    rec.stream.push_back({{"n", p.n}, {"minimum", p.minimum}});
    floor = std::min(floor, p.minimum);
  }
  rec.curves["lower_bound"] = std::move(curve);

  const std::size_t tail = std::min<std::size_t>(100, c.scan.n_max);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t n = c.scan.n_max + 1 - tail; n <= c.scan.n_max; ++n) {
    lo = std::min(lo, scan[n].minimum);
    hi = std::max(hi, scan[n].minimum);
  }
  const double variation = hi > 0.0 ? (hi - lo) / hi : kNaN;
  rec.results["floor"] = floor;
  rec.results["tail_floor_min"] = lo;
  rec.results["tail_floor_max"] = hi;
  rec.results["tail_floor_variation"] = number(variation);
  add_check(rec, "positive_floor", floor > 0.0, floor, 0.0,
            "min over n <= n_max and cells of P^n 1 must stay positive");
  add_check(rec, "floor_stability", variation < c.scan.floor_variation, variation,
            c.scan.floor_variation, "relative spread of the floor over the last 100 steps");

  if (schedule.kind() == MapSchedule::Kind::constant) {
    const auto op = cache.get(schedule.parameter(1));
    const auto h = invariant_density(*op, 20000, 1e-14, ctx.par());
    std::vector<double> xs, ys;
    Curve inv{{"x", "density"}, {}};
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double x = grid->midpoint(i);
      inv.rows.push_back({x, h[i]});
      if (x >= 1e-4 && x <= 1e-2) {
        xs.push_back(x);
        ys.push_back(h[i]);
      }
    }
    rec.curves["invariant_density"] = std::move(inv);
    const auto fit = fit_loglog(xs, ys);
    const double beta = schedule.beta(1);
    rec.results["invariant_slope"] = fit.slope;
    rec.results["invariant_slope_cells"] = fit.points;
    add_check(rec, "invariant_density_slope",
              std::abs(fit.slope + beta) < c.scan.invariant_slope_tolerance,
              std::abs(fit.slope + beta), c.scan.invariant_slope_tolerance,
              "log-log slope of the fixed vector on [1e-4, 1e-2] against -beta");
  }
  record_cache(rec, cache);
}

void run_cone(Context& ctx, ExperimentRecord& rec) {
  const auto& c = ctx.config();
  const auto base = make_schedule(c.schedule);
  const double alpha = alpha_of(base);
  auto grid = make_grid(c.grid.cells, c.grid.grading);

  std::size_t failures = 0;
  std::size_t checked = 0;
  double worst[4] = {0, 0, 0, 0};
  double largest_a = 0.0;
  std::vector<double> a_by_n(c.cone.n_max + 1, 0.0);

  for (std::size_t s = 0; s < c.cone.schedules; ++s) {
    const auto key = derive_key(c.seed, 0x636f6e65ULL + s);
    std::vector<double> betas(c.cone.n_max);
    for (std::size_t k = 0; k < betas.size(); ++k)
      betas[k] = alpha * (0.1 + 0.9 * counter_uniform(key, k));
    std::vector<UlamOperator> ops;
    ops.reserve(betas.size());
    for (double b : betas) ops.push_back(UlamOperator::build(MapParameter(b), grid, ctx.par()));

    for (std::size_t f = 0; f < c.cone.seeds; ++f) {
      const auto fkey = derive_key(c.seed, (s << 20) + f + 1);
      const double g1 = alpha * counter_uniform(fkey, 0);
      const double g2 = alpha * counter_uniform(fkey, 1);
      const double w = counter_uniform(fkey, 2);
      auto density = GridDensity::from_antiderivative(grid, [=](double x) {
        return w * std::pow(x, 1.0 - g1) + (1.0 - w) * std::pow(x, 1.0 - g2);
      });
      auto mass = density.masses();
      std::vector<double> next(mass.size());
      for (std::size_t n = 0; n <= c.cone.n_max; ++n) {
        if (n > 0) {
          ops[n - 1].apply_masses(mass, next, ctx.par());
          mass.swap(next);
        }
        const auto r = check_cone(GridDensity::from_masses(grid, mass), c.cone.a, alpha);
        ++checked;
        if (!r.passed()) ++failures;
        worst[0] = std::max(worst[0], r.worst_negative);
        worst[1] = std::max(worst[1], r.worst_increase);
        worst[2] = std::max(worst[2], r.worst_weighted_decrease);
        worst[3] = std::max(worst[3], r.worst_bound_excess);
        largest_a = std::max(largest_a, r.smallest_admissible_a);
        a_by_n[n] = std::max(a_by_n[n], r.smallest_admissible_a);
      }
    }
  }
  Curve curve{{"n", "smallest_admissible_a"}, {}};
  for (std::size_t n = 0; n < a_by_n.size(); ++n) {
    curve.rows.push_back({static_cast<double>(n), a_by_n[n]});
    rec.stream.push_back({{"n", n}, {"smallest_admissible_a", a_by_n[n]}});
  }
  rec.curves["cone"] = std::move(curve);
  rec.results["alpha"] = alpha;
  rec.results["a"] = c.cone.a;
  rec.results["reports"] = checked;
  rec.results["failures"] = failures;
  rec.results["worst_negative"] = worst[0];
  rec.results["worst_increase"] = worst[1];
  rec.results["worst_weighted_decrease"] = worst[2];
  rec.results["worst_bound_excess"] = worst[3];
  rec.results["smallest_admissible_a"] = largest_a;
  add_check(rec, "cone_preserved", failures == 0, static_cast<double>(failures), 0.0,
            std::to_string(checked) + " cone reports at a = " + fmt(c.cone.a));
}

void run_decay(Context& ctx, ExperimentRecord& rec) {
  const auto& c = ctx.config();
  const auto& d = c.decay;
  const auto schedule = make_schedule(c.schedule);
  const auto phi = make_observable(c.observable);
  const double alpha = alpha_of(schedule);
  auto grid = make_grid(c.grid.cells, c.grid.grading);
  auto cache = ctx.make_cache(grid, schedule, rec);

  auto density_of = [&](const std::string& name) {
    return name == "power" ? power_density(grid, alpha) : GridDensity::constant(grid, 1.0);
  };
  auto centering_of = [](const std::string& name) {
    return name == "density" ? DecayCentering::density : DecayCentering::lebesgue;
  };
  auto run = [&](const std::string& density, const std::string& centering) {
    return decay_curve(schedule, phi, density_of(density), d.p, d.n_max, cache, d.offset, ctx.par(),
                       centering_of(centering));
  };
  const double expected = -(1.0 / (d.p * alpha) - 1.0);

  // Main curve, the other density under the same centering, and the main
  // density under the other centering.
  const std::string other_density = d.density == "power" ? "constant" : "power";
  const std::string other_centering = d.centering == "density" ? "lebesgue" : "density";
  const auto curve = run(d.density, d.centering);
  const auto alt_density = run(other_density, d.centering);
  const auto alt_centering = run(d.density, other_centering);
  const auto fit = curve.fit(d.fit_lo, d.fit_hi);
  const auto alt_density_fit = alt_density.fit(d.fit_lo, d.fit_hi);
  const auto alt_centering_fit = alt_centering.fit(d.fit_lo, d.fit_hi);

  Curve out{{"n", "Lp_norm"}, {}};
  Curve all{{"n", "Lp_norm", "Lp_norm_" + other_density, "Lp_norm_" + other_centering}, {}};
  double largest = 0.0;
  double worst_ratio = 0.0;
  for (std::size_t n = 0; n < curve.points.size(); ++n) {
    const double a = curve.points[n].norm;
    const double b = alt_density.points[n].norm;
    const double e = alt_centering.points[n].norm;
    out.rows.push_back({static_cast<double>(n), a});
    all.rows.push_back({static_cast<double>(n), a, b, e});
    rec.stream.push_back({{"n", n},
                          {"Lp_norm", a},
                          {"Lp_norm_" + other_density, b},
                          {"Lp_norm_" + other_centering, e}});
    largest = std::max(largest, a);
    if (n >= d.fit_lo && a > 0.0 && b > 0.0) worst_ratio = std::max(worst_ratio, std::max(a / b, b / a));
  }
  rec.curves["decay"] = std::move(out);
  rec.curves["decay_comparison"] = std::move(all);
  rec.results["p"] = d.p;
  rec.results["alpha"] = alpha;
  rec.results["density"] = d.density;
  rec.results["centering"] = d.centering;
  rec.results["fit_window"] = {d.fit_lo, d.fit_hi};
  rec.results["expected_slope"] = expected;
  rec.results["fitted_slope"] = fit.slope;
  rec.results["fit_points"] = fit.points;
  rec.results["final_norm"] = curve.points.back().norm;
  rec.results["comparison"] = {
      {"density_" + other_density, {{"fitted_slope", alt_density_fit.slope},
                                    {"final_norm", alt_density.points.back().norm},
                                    {"max_norm_ratio_in_window", worst_ratio}}},
      {"centering_" + other_centering, {{"fitted_slope", alt_centering_fit.slope},
                                        {"final_norm", alt_centering.points.back().norm}}}};

  if (phi.is_constant()) {
    add_check(rec, "constant_observable_vanishes", largest < 1e-10, largest, 1e-10,
              "centered constant observable must push forward to zero");
  } else {
    add_check(rec, "decay_slope", std::abs(fit.slope - expected) <= d.slope_tolerance, fit.slope,
              expected, "fitted slope within " + fmt(d.slope_tolerance) + " of -(1/(p alpha) - 1)");
    // The rate is an upper bound: the other centering may only decay faster.
    const double lebesgue_slope = d.centering == "lebesgue" ? fit.slope : alt_centering_fit.slope;
    add_check(rec, "decay_upper_bound", lebesgue_slope <= expected + d.slope_tolerance,
              lebesgue_slope, expected + d.slope_tolerance,
              "slope with constant centering no slower than the bound");
  }
  record_cache(rec, cache);
}

void run_martingale(Context& ctx, ExperimentRecord& rec) {
  const auto& c = ctx.config();
  const auto& m = c.martingale;
  const auto schedule = make_schedule(c.schedule);
  const auto phi = make_observable(c.observable);
  auto grid = make_grid(c.grid.cells, c.grid.grading);
  auto cache = ctx.make_cache(grid, schedule, rec);

  DecompositionScan scan(schedule, phi, cache, ctx.par());
  std::vector<DecompositionRecord> records;
  std::vector<std::vector<MomentPoint>> moments(m.moment_r.size());
  std::vector<double> sups(m.moment_r.size(), 0.0);
  std::vector<double> v;
  double max_residual = 0.0;
  for (std::size_t n = 1; n <= m.n_max; ++n) {
    records.push_back(scan.step());
    const auto& s = scan.current();
    for (std::size_t q = 0; q < m.moment_r.size(); ++q) {
      const double r = m.moment_r[q];
      double acc = 0.0;
      for (std::size_t i = 0; i < s.density.size(); ++i)
        acc += std::pow(std::abs(s.coboundary[i]), r) * s.density[i] * grid->width(i);
      const double norm = std::pow(acc, 1.0 / r);
      sups[q] = std::max(sups[q], norm);
      moments[q].push_back({n, norm, sups[q]});
    }
    v.push_back(records.back().psi.second_moment);
    max_residual = std::max(max_residual, records.back().psi.martingale_residual);
  }
  const auto tail = tail_series_diagnostics(v);

  Curve ratios{{"n", "sigma_ratio", "delta_sigma_product"}, {}};
  Curve variance{{"n", "sigma2", "Sigma2", "h_next_square"}, {}};
  Curve moment_curve{{"n"}, {}};
  for (double r : m.moment_r) moment_curve.columns.push_back("norm_r" + fmt(r));
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    const auto& t = tail.points[k];
    json h_norms = json::object();
    std::vector<double> mrow{static_cast<double>(r.n)};
    for (std::size_t q = 0; q < m.moment_r.size(); ++q) {
      h_norms[fmt(m.moment_r[q])] = moments[q][k].norm;
      mrow.push_back(moments[q][k].norm);
    }
    rec.stream.push_back({{"n", r.n},
                          {"sigma2", r.sigma2},
                          {"Sigma2", r.Sigma2},
                          {"v", r.psi.second_moment},
                          {"centering", r.psi.centering},
                          {"martingale_residual", r.psi.martingale_residual},
                          {"h_norms", h_norms},
                          {"sigma_ratio", number(t.sigma_ratio)},
                          {"delta_sigma_product", number(t.delta_sigma_product)}});
    ratios.rows.push_back({static_cast<double>(r.n), t.sigma_ratio, t.delta_sigma_product});
    variance.rows.push_back({static_cast<double>(r.n), r.sigma2, r.Sigma2, r.h_next_square});
    moment_curve.rows.push_back(std::move(mrow));
  }
  rec.curves["ratios"] = std::move(ratios);
  rec.curves["variance_grid"] = std::move(variance);
  rec.curves["moments"] = std::move(moment_curve);

  rec.results["n_max"] = m.n_max;
  rec.results["sigma2"] = records.back().sigma2;
  rec.results["Sigma2"] = records.back().Sigma2;
  rec.results["max_martingale_residual"] = max_residual;
  rec.results["truncation_bound"] = number(tail.truncation_bound);
  add_check(rec, "martingale_residual", max_residual < m.martingale_tolerance, max_residual,
            m.martingale_tolerance, "max_k ||P_{k+1}(psi_k D_k)||_1");

  json moment_results = json::object();
  for (std::size_t q = 0; q < m.moment_r.size(); ++q) {
    const double inc = final_doubling_increment(moments[q]);
    moment_results[fmt(m.moment_r[q])] = {{"running_sup", sups[q]}, {"final_doubling_increment", inc}};
    add_check(rec, "moment_bounded_r" + fmt(m.moment_r[q]), inc < m.moment_increment, inc,
              m.moment_increment, "relative growth of sup_n ||H_n o T^n||_r over the final doubling");
  }
  rec.results["moments"] = moment_results;

  // Σ_n² - σ_n² = ∫ H_{n+1}² D_{n+1} stays O(1).
  {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t k = m.n_max / 2; k < records.size(); ++k) {
      lo = std::min(lo, records[k].h_next_square);
      hi = std::max(hi, records[k].h_next_square);
    }
    const double scale = records.back().sigma2;
    const double range = hi - lo;
    rec.results["variance_gap_range"] = range;
    add_check(rec, "variance_gap_bounded", range <= c.statistics.closeness_fraction * scale, range,
              c.statistics.closeness_fraction * scale,
              "range of Sigma_n^2 - sigma_n^2 over [n_max/2, n_max] against a fraction of sigma^2");
  }

  if (m.tail_check) {
    const std::size_t from = (m.n_max + 9) / 10;
    double worst_ratio = 0.0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& t : tail.points) {
      if (t.n < from) continue;
      if (std::isfinite(t.sigma_ratio)) worst_ratio = std::max(worst_ratio, std::abs(t.sigma_ratio - 1.0));
      if (std::isfinite(t.delta_sigma_product)) {
        lo = std::min(lo, t.delta_sigma_product);
        hi = std::max(hi, t.delta_sigma_product);
      }
    }
    const bool degenerate = !std::isfinite(lo);
    rec.results["tail"] = {{"from", from},
                           {"worst_ratio_deviation", worst_ratio},
                           {"delta_sigma_min", number(lo)},
                           {"delta_sigma_max", number(hi)}};
    if (!degenerate) {
      add_check(rec, "sigma_ratio", worst_ratio < m.ratio_tolerance, worst_ratio, m.ratio_tolerance,
                "|sigma_{n+1}^2 / sigma_n^2 - 1| over the final decade");
      const double band = m.delta_band;
      add_check(rec, "delta_sigma_product", lo >= 1.0 - band && hi <= 1.0 + band,
                std::max(1.0 - lo, hi - 1.0), band, "delta_n^2 sigma_n^2 over the final decade");
    }
  }

  // Pathwise decomposition and the five-term expansion along trajectories.
  PathwiseSpec ps;
  ps.trajectories = m.pathwise_trajectories;
  ps.n_max = m.pathwise_n_max;
  ps.seed = derive_key(c.seed, 0x70617468ULL);
  const std::size_t pn = m.pathwise_n_max;
  ps.probe_steps = {1, 2, std::max<std::size_t>(1, pn / 2), pn / 2 + 1, std::max<std::size_t>(1, pn - 1), pn};
  const auto path = pathwise_decomposition(schedule, phi, cache, ps, ctx.par());
  double worst_path = 0.0, worst_identity = 0.0;
  Curve five{{"n", "sigma2", "t1", "t2", "t3", "t4", "t5", "mean_s_prime", "median_abs_s_prime"}, {}};
  for (const auto& p : path.points) {
    worst_path = std::max(worst_path, p.max_pathwise_residual);
    worst_identity = std::max(worst_identity, p.max_identity_residual);
    five.rows.push_back({static_cast<double>(p.n), p.sigma2, p.mean_terms[0], p.mean_terms[1],
                         p.mean_terms[2], p.mean_terms[3], p.mean_terms[4], p.mean_s_prime,
                         p.median_abs_s_prime});
  }
  rec.curves["five_terms"] = std::move(five);
  rec.results["pathwise"] = {{"trajectories", ps.trajectories},
                             {"n_max", ps.n_max},
                             {"max_pathwise_residual", worst_path},
                             {"max_identity_residual", worst_identity},
                             {"s_prime_growth_exponent", path.s_prime_growth.slope},
                             {"s_prime_growth_points", path.s_prime_growth.points}};
  add_check(rec, "pathwise_identity", worst_path < m.pathwise_tolerance, worst_path,
            m.pathwise_tolerance, "|S_n - sum psi_k o T^k - H_{n+1} o T^{n+1}| on every trajectory");
  add_check(rec, "five_term_identity", worst_identity < m.identity_tolerance, worst_identity,
            m.identity_tolerance, "S'_n against the sum of the five terms on every trajectory");
  add_check(rec, "s_prime_growth", path.s_prime_growth.slope < 1.0, path.s_prime_growth.slope, 1.0,
            "exponent of median |S'_n| against sigma_n^2");
  json ortho = json::array();
  for (const auto& o : path.orthogonality) {
    ortho.push_back({{"i", o.i}, {"j", o.j}, {"covariance", o.covariance}, {"stderr", number(o.standard_error)}});
    const bool ok = std::abs(o.covariance) <= 3.0 * o.standard_error || o.covariance == 0.0;
    add_check(rec, "orthogonality_" + std::to_string(o.i) + "_" + std::to_string(o.j), ok,
              std::abs(o.covariance), 3.0 * o.standard_error,
              "Monte Carlo covariance of psi_i and psi_j within 3 standard errors");
  }
  rec.results["orthogonality"] = ortho;
  record_cache(rec, cache);
}

struct EnsembleOutcome {
  std::vector<DecompositionRecord> records;
  EnsembleResult ensemble;
};

EnsembleOutcome grid_and_ensemble(Context& ctx, ExperimentRecord& rec, const MapSchedule& schedule,
                                  const Observable& phi, bool with_lil) {
  const auto& c = ctx.config();
  auto grid = make_grid(c.grid.cells, c.grid.grading);
  auto cache = ctx.make_cache(grid, schedule, rec);
  EnsembleOutcome out;
  out.records = decomposition_records(schedule, phi, c.ensemble.n_max, cache, ctx.par());
  record_cache(rec, cache);
  std::vector<double> centerings, Sigma2;
  for (const auto& r : out.records) {
    centerings.push_back(r.psi.centering);
    Sigma2.push_back(r.Sigma2);
  }
  EnsembleSpec spec;
  spec.trajectories = c.ensemble.trajectories;
  spec.n_max = c.ensemble.n_max;
  spec.seed = c.seed;
  spec.checkpoints = c.ensemble.checkpoints;
  spec.blocks = c.ensemble.blocks;
  LilOptions lil{Sigma2, lil_first_applicable(Sigma2)};
  out.ensemble = run_ensemble(schedule, phi, centerings, spec, ctx.par(), with_lil ? &lil : nullptr);
  rec.results["growth"] = growth_json(out.ensemble.growth);
  return out;
}

void add_variance_curve(ExperimentRecord& rec, const GrowthFit& g) {
  Curve curve{{"n", "Sigma2", "stderr"}, {}};
  for (std::size_t j = 0; j < g.checkpoints.size(); ++j)
    curve.rows.push_back({static_cast<double>(g.checkpoints[j]), g.sigma2[j], g.standard_error[j]});
  rec.curves["variance"] = std::move(curve);
}

void add_snapshot_curve(ExperimentRecord& rec, const EnsembleResult& e) {
  Curve snap;
  for (auto n : e.growth.checkpoints) snap.columns.push_back("n" + std::to_string(n));
  if (!e.snapshots.empty()) {
    snap.rows.assign(e.snapshots.front().size(), std::vector<double>(e.snapshots.size()));
    for (std::size_t j = 0; j < e.snapshots.size(); ++j)
      for (std::size_t i = 0; i < e.snapshots[j].size(); ++i) snap.rows[i][j] = e.snapshots[j][i];
  }
  rec.curves["snapshots"] = std::move(snap);
}

void closeness_check(ExperimentRecord& rec, const GrowthFit& g,
                     const std::vector<DecompositionRecord>& records, double fraction) {
  std::vector<double> mc, grid;
  for (std::size_t j = 0; j < g.checkpoints.size(); ++j) {
    mc.push_back(g.sigma2[j]);
    grid.push_back(records[g.checkpoints[j] - 1].sigma2);
  }
  const double range = top_half_range(mc, grid);
  const double bound = fraction * g.sigma2.back();
  rec.results["closeness_range"] = range;
  add_check(rec, "variance_closeness", range <= bound, range, bound,
            "range of Sigma_hat_n^2 - sigma_n^2 over the top half of checkpoints");
}

void centering_check(ExperimentRecord& rec, const EnsembleResult& e, double z) {
  double worst = 0.0;
  for (const auto& cc : e.centering) {
    if (cc.mean == 0.0) continue;
    worst = std::max(worst, std::abs(cc.mean) / cc.standard_error);
  }
  rec.results["centering_worst_z"] = number(worst);
  add_check(rec, "unbiased_centering", worst <= z, worst, z,
            "ensemble mean of phi o T^n - c_n in standard errors");
}

void growth_check(ExperimentRecord& rec, const GrowthFit& g, double lo, double hi,
                  const std::string& name) {
  if (g.degenerate) return;
  add_check(rec, name, g.gamma >= lo && g.gamma <= hi, g.gamma, hi,
            "fitted variance growth exponent in [" + fmt(lo) + ", " + fmt(hi) + "]");
}

void run_variance(Context& ctx, ExperimentRecord& rec) {
  const auto& c = ctx.config();
  const auto schedule = make_schedule(c.schedule);
  const auto phi = make_observable(c.observable);
  const auto out = grid_and_ensemble(ctx, rec, schedule, phi, false);
  const auto& g = out.ensemble.growth;

  double worst_z = 0.0;
  bool identity_ok = true;
  Curve grid_curve{{"n", "Sigma2_grid", "sigma2", "h_next_square"}, {}};
  for (std::size_t j = 0; j < g.checkpoints.size(); ++j) {
    const auto& r = out.records[g.checkpoints[j] - 1];
    const double diff = g.sigma2[j] - r.Sigma2;
    const double se = g.standard_error[j];
    const bool ok = std::abs(diff) <= c.statistics.z_band * se;
    identity_ok = identity_ok && ok;
    const double z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : kNaN);
    if (std::isfinite(z)) worst_z = std::max(worst_z, std::abs(z));
    rec.stream.push_back({{"n", g.checkpoints[j]},
                          {"Sigma2_hat", g.sigma2[j]},
                          {"stderr", number(se)},
                          {"Sigma2_grid", r.Sigma2},
                          {"sigma2", r.sigma2},
                          {"h_next_square", r.h_next_square},
                          {"z", number(z)},
                          {"centering_mean", out.ensemble.centering[j].mean},
                          {"centering_stderr", number(out.ensemble.centering[j].standard_error)}});
    grid_curve.rows.push_back({static_cast<double>(g.checkpoints[j]), r.Sigma2, r.sigma2, r.h_next_square});
  }
  add_check(rec, "variance_identity", identity_ok, worst_z, c.statistics.z_band,
            "|Sigma_hat_n^2 - sigma_n^2 - int H_{n+1}^2| in Monte Carlo standard errors at every checkpoint");
  closeness_check(rec, g, out.records, c.statistics.closeness_fraction);
  centering_check(rec, out.ensemble, c.statistics.centering_z);
  growth_check(rec, g, c.statistics.gamma_low, c.statistics.gamma_high, "growth_exponent");

  std::vector<double> v;
  for (const auto& r : out.records) v.push_back(r.psi.second_moment);
  const auto tail = tail_series_diagnostics(v);
  Curve ratios{{"n", "sigma_ratio", "delta_sigma_product"}, {}};
  for (const auto& t : tail.points)
    ratios.rows.push_back({static_cast<double>(t.n), t.sigma_ratio, t.delta_sigma_product});
  rec.curves["ratios"] = std::move(ratios);
  rec.curves["variance_grid"] = std::move(grid_curve);
  add_variance_curve(rec, g);
  add_snapshot_curve(rec, out.ensemble);
  rec.results["Sigma2_hat"] = g.sigma2.back();
  rec.results["Sigma2_grid"] = out.records.back().Sigma2;
  rec.results["sigma2"] = out.records.back().sigma2;
  rec.results["worst_z"] = worst_z;
}

void run_clt(Context& ctx, ExperimentRecord& rec) {
  const auto& c = ctx.config();
  const auto schedule = make_schedule(c.schedule);
  const auto phi = make_observable(c.observable);
  const auto out = grid_and_ensemble(ctx, rec, schedule, phi, true);
  const auto& g = out.ensemble.growth;

  Curve ks_curve{{"n", "ks", "p_value"}, {}};
  CltReport last;
  for (std::size_t j = 0; j < g.checkpoints.size(); ++j) {
    const auto rep = clt_test(out.ensemble.snapshots[j], g.sigma2[j]);
    ks_curve.rows.push_back({static_cast<double>(g.checkpoints[j]), rep.ks.statistic, rep.ks.p_value});
    rec.stream.push_back({{"n", g.checkpoints[j]},
                          {"Sigma2_hat", g.sigma2[j]},
                          {"stderr", number(g.standard_error[j])},
                          {"ks", number(rep.ks.statistic)},
                          {"p_value", number(rep.ks.p_value)},
                          {"degenerate", rep.degenerate}});
    last = rep;
  }
  rec.curves["clt"] = std::move(ks_curve);
  add_variance_curve(rec, g);
  add_snapshot_curve(rec, out.ensemble);
  rec.results["clt"] = {{"n", g.checkpoints.back()},
                        {"degenerate", last.degenerate},
                        {"ks", number(last.ks.statistic)},
                        {"p_value", number(last.ks.p_value)}};
  if (last.degenerate) {
    rec.results["clt"]["note"] = "zero variance: no normal limit to test";
  } else {
    add_check(rec, "clt_ks", last.ks.statistic < c.statistics.ks_threshold, last.ks.statistic,
              c.statistics.ks_threshold, "KS(S_n / Sigma_hat_n, N(0,1)) at the final checkpoint");
  }

  const auto& Sigma2_n = out.records;
  std::vector<double> curve;
  for (const auto& r : Sigma2_n) curve.push_back(r.Sigma2);
  const std::size_t n_min = lil_first_applicable(curve);
  const auto lil = lil_band_diagnostic(out.ensemble.lil_sup, c.statistics.lil_delta, n_min,
                                       c.ensemble.n_max);
  rec.results["lil"] = {{"label", lil.label},
                        {"applicable", lil.applicable},
                        {"degenerate", lil.degenerate},
                        {"n_min", lil.n_min},
                        {"n_max", lil.n_max},
                        {"delta", lil.delta},
                        {"fraction_in_band", lil.fraction_in_band},
                        {"median_sup", lil.median_sup}};
}

void run_asip(Context& ctx, ExperimentRecord& rec) {
  const auto& c = ctx.config();
  const auto schedule = make_schedule(c.schedule);
  const auto phi = make_observable(c.observable);
  const auto out = grid_and_ensemble(ctx, rec, schedule, phi, false);
  const auto& g = out.ensemble.growth;

  std::vector<double> v;
  for (const auto& r : out.records) v.push_back(r.psi.second_moment);
  const auto sur = asip_surrogate(v, c.statistics.surrogate_paths, derive_key(c.seed, 0x61736970ULL),
                                  g.checkpoints, ctx.par());

  double worst_gap = 0.0;
  bool exact = true;
  Curve curve{{"n", "sigma2", "variance_sum", "Sigma2_hat", "ks"}, {}};
  KsResult final_ks;
  bool degenerate = false;
  for (std::size_t j = 0; j < g.checkpoints.size(); ++j) {
    const double reference = out.records[g.checkpoints[j] - 1].sigma2;
    const double gap = sur.variance_sum[j] - reference;
    exact = exact && gap == 0.0;
    worst_gap = std::max(worst_gap, std::abs(gap));
    KsResult ks{kNaN, kNaN, 0};
    degenerate = reference == 0.0 && g.sigma2[j] == 0.0;
    if (!degenerate) ks = ks_two_sample(sur.partial_sums[j], out.ensemble.snapshots[j]);
    final_ks = ks;
    curve.rows.push_back({static_cast<double>(g.checkpoints[j]), reference, sur.variance_sum[j],
                          g.sigma2[j], ks.statistic});
    rec.stream.push_back({{"n", g.checkpoints[j]},
                          {"sigma2", reference},
                          {"surrogate_variance_sum", sur.variance_sum[j]},
                          {"ledger_gap", gap},
                          {"Sigma2_hat", g.sigma2[j]},
                          {"stderr", number(g.standard_error[j])},
                          {"ks", number(ks.statistic)},
                          {"p_value", number(ks.p_value)}});
  }
  rec.curves["surrogate"] = std::move(curve);
  add_variance_curve(rec, g);
  add_check(rec, "surrogate_ledger", exact, worst_gap, 0.0,
            "sum of Var G_i equals sigma_n^2 exactly at every checkpoint");
  closeness_check(rec, g, out.records, c.statistics.closeness_fraction);
  rec.results["surrogate_paths"] = c.statistics.surrogate_paths;
  rec.results["final_ks"] = number(final_ks.statistic);
  rec.results["final_p_value"] = number(final_ks.p_value);
  if (!degenerate) {
    add_check(rec, "surrogate_ks", final_ks.statistic < c.statistics.ks_threshold, final_ks.statistic,
              c.statistics.ks_threshold, "two-sample KS of surrogate and Birkhoff sums at n_max");
    const double alpha = schedule.alpha_cap();
    const double threshold = 0.5 + (1.0 + 2.0 * alpha) / (4.0 * (1.0 - 2.0 * alpha));
    rec.results["gamma_threshold"] = threshold;
    add_check(rec, "growth_hypothesis", g.gamma > threshold, g.gamma, threshold,
              "fitted gamma above 1/2 + (1 + 2 alpha) / (4 (1 - 2 alpha))");
  } else {
    rec.results["note"] = "zero variance: surrogate is identically zero";
  }
}

void run_application(Context& ctx, ExperimentRecord& rec, bool quenched) {
  const auto& c = ctx.config();
  const auto phi = make_observable(c.observable);
  auto grid = make_grid(c.grid.cells, c.grid.grading);
  EnsembleSpec spec;
  spec.trajectories = c.ensemble.trajectories;
  spec.n_max = c.ensemble.n_max;
  spec.seed = c.seed;
  spec.checkpoints = c.ensemble.checkpoints;
  spec.blocks = c.ensemble.blocks;

  const auto schedule = make_schedule(c.schedule);
  auto cache = ctx.make_cache(grid, schedule, rec);
  const auto result =
      quenched ? quenched_experiment(c.schedule.alphabet, c.schedule.probabilities, phi,
                                     c.statistics.schedules, spec, cache, ctx.par())
               : nearby_maps_experiment(c.schedule.beta0, c.schedule.epsilon, phi,
                                        c.statistics.schedules, spec, cache, ctx.par());
  record_cache(rec, cache);
  rec.results["applicable"] = result.applicable;
  if (!result.applicable) {
    rec.results["note"] = result.note;
    return;
  }
  Curve curve{{"index", "gamma", "ci_low", "ci_high", "Sigma2_hat_final"}, {}};
  json runs = json::array();
  double mean_final = 0.0;
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const auto& r = result.runs[i];
    curve.rows.push_back({static_cast<double>(i), r.growth.gamma, r.growth.ci_low, r.growth.ci_high,
                          r.growth.sigma2.back()});
    json entry = {{"index", i}, {"schedule", r.schedule}};
    entry.update(growth_json(r.growth));
    entry["Sigma2_hat_final"] = r.growth.sigma2.back();
    entry["Sigma2_grid_final"] = r.grid_Sigma2.back();
    runs.push_back(entry);
    rec.stream.push_back(entry);
    mean_final += r.growth.sigma2.back();
    growth_check(rec, r.growth, c.statistics.gamma_low, c.statistics.gamma_high,
                 "growth_exponent_" + std::to_string(i));
  }
  if (!result.runs.empty()) mean_final /= static_cast<double>(result.runs.size());
  rec.results["runs"] = runs;
  rec.results["mean_Sigma2_hat_final"] = mean_final;
  rec.curves["gamma"] = std::move(curve);
}

}  // namespace

// ---------------------------------------------------------------------------

bool ExperimentRecord::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

ExperimentRecord run_experiment(const ExperimentConfig& config, Parallelism par, const LogSink& log) {
  if (auto errors = validate(config); !errors.empty()) throw ConfigError(std::move(errors));
  ExperimentRecord rec;
  rec.config = config;
  rec.config_hash = config_hash(config);
  rec.workers = par.workers;
  Context ctx(config, par, log);
  ctx.log("running " + to_string(config.kind) + " (config " + rec.config_hash + ")");
  const auto start = std::chrono::steady_clock::now();
  switch (config.kind) {
    case ExperimentKind::density_scan: run_density_scan(ctx, rec); break;
    case ExperimentKind::cone: run_cone(ctx, rec); break;
    case ExperimentKind::decay: run_decay(ctx, rec); break;
    case ExperimentKind::martingale: run_martingale(ctx, rec); break;
    case ExperimentKind::variance: run_variance(ctx, rec); break;
    case ExperimentKind::clt: run_clt(ctx, rec); break;
    case ExperimentKind::asip: run_asip(ctx, rec); break;
    case ExperimentKind::nearby: run_application(ctx, rec, false); break;
    case ExperimentKind::quenched: run_application(ctx, rec, true); break;
  }
  rec.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

json summary_json(const ExperimentRecord& rec) {
  json checks = json::array();
  for (const auto& c : rec.checks)
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"value", number(c.value)},
                      {"threshold", number(c.threshold)},
                      {"detail", c.detail}});
  return {{"schema_version", kSchemaVersion},
          {"tool_version", kToolVersion},
          {"kind", to_string(rec.config.kind)},
          {"config_hash", rec.config_hash},
          {"seed", rec.config.seed},
          {"config", serialize_config(rec.config)},
          {"passed", rec.passed()},
          {"checks", checks},
          {"results", rec.results},
          {"curves", curve_names(rec)}};
}

json run_metadata(const ExperimentRecord& rec) {
  return {{"config_hash", rec.config_hash},
          {"wall_clock_seconds", rec.wall_clock_seconds},
          {"workers", rec.workers},
          {"cache", rec.cache_stats},
          {"warnings", rec.warnings}};
}

void write_outputs(const ExperimentRecord& rec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    f << text;
  };
  write("summary.json", summary_json(rec).dump(2) + "\n");
  std::string lines;
  for (const auto& r : rec.stream) lines += r.dump() + "\n";
  write("records.jsonl", lines);
  write("run.json", run_metadata(rec).dump(2) + "\n");
}

std::vector<std::string> curve_names(const ExperimentRecord& rec) {
  std::vector<std::string> names;
  for (const auto& kv : rec.curves) names.push_back(kv.first);
  return names;
}

std::string emit_plotdata(const ExperimentRecord& rec, const std::string& curve) {
  const auto it = rec.curves.find(curve);
  if (it == rec.curves.end()) {
    std::string known;
    for (const auto& n : curve_names(rec)) known += (known.empty() ? "" : ", ") + n;
    throw DomainError("unknown curve '" + curve + "' (available: " + known + ")");
  }
  std::string out;
  const auto& cols = it->second.columns;
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  char buf[40];
  for (const auto& row : it->second.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      out += (i ? "," : "");
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace seqpm
