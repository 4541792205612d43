// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Usage: acceptance [criterion numbers...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "seqpm/harness.hpp"
#include "seqpm/random.hpp"
#include "seqpm/transfer.hpp"
#include "seqpm/ulam.hpp"

using namespace seqpm;

namespace {

struct Verdict {
  bool passed{false};
  std::string detail;
};

struct Timed {
  ExperimentRecord record;
  double seconds{0.0};
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Timed run(const ExperimentConfig& c, unsigned workers = 1) {
  const auto t0 = std::chrono::steady_clock::now();
  Timed t{run_experiment(c, Parallelism{workers}), 0.0};
  t.seconds = seconds_since(t0);
  return t;
}

const Check* find_check(const ExperimentRecord& r, const std::string& name) {
  for (const auto& c : r.checks)
    if (c.name == name) return &c;
  return nullptr;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

/// All named checks must exist and pass; the runtime must stay under limit.
Verdict require(const Timed& t, std::initializer_list<const char*> names, double limit_seconds) {
  Verdict v{true, ""};
  for (const char* n : names) {
    const auto* c = find_check(t.record, n);
    if (!c) {
      v.passed = false;
      v.detail += std::string(n) + "=missing ";
      continue;
    }
    v.passed = v.passed && c->passed;
    v.detail += std::string(n) + "=" + fmt(c->value) + " [threshold " + fmt(c->threshold) + "]" +
                (c->passed ? " " : "(fail) ");
  }
  v.detail += "runtime=" + fmt(t.seconds) + "s";
  if (t.seconds >= limit_seconds) {
    v.passed = false;
    v.detail += " (limit " + fmt(limit_seconds) + "s)";
  }
  return v;
}

// ---------------------------------------------------------------------------

// Gauss-Legendre, 8 points.
template <typename F>
double gauss8(F&& f, double a, double b) {
  static const double x[] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                             0.9602898564975363};
  static const double w[] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                             0.1012285362903763};
  const double m = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < 4; ++i) s += w[i] * (f(m - h * x[i]) + f(m + h * x[i]));
  return s * h;
}

Verdict duality() {
  const auto t0 = std::chrono::steady_clock::now();
  auto grid = make_grid(4096, 2.0);
  const std::size_t N = grid->cells();
  const std::uint64_t key = derive_key(2024, 1);
  double worst = 0.0;
  for (std::size_t trial = 0; trial < 100; ++trial) {
    auto u = [&](std::size_t k) { return counter_uniform(key, 16 * trial + k); };
    const double beta = 0.02 + 0.88 * u(0);
    // f: a discretised cone density, mixing two power profiles.
    const double g1 = beta * u(1), g2 = beta * u(2), mix = u(3);
    const auto f = GridDensity::from_antiderivative(grid, [=](double x) {
      return mix * std::pow(x, 1.0 - g1) + (1.0 - mix) * std::pow(x, 1.0 - g2);
    });
    // g: smooth test function, a short cosine series.
    double coef[4];
    for (int k = 0; k < 4; ++k) coef[k] = 2.0 * u(4 + k) - 1.0;
    auto g = [&](double y) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += coef[k] * std::cos(k * 3.14159265358979 * y);
      return s;
    };
    const MapParameter b(beta);
    const auto op = UlamOperator::build(b, grid);
    const auto pf = op.apply(f);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double lo = grid->cut(i), hi = grid->cut(i + 1);
      lhs += pf[i] * gauss8(g, lo, hi);
      auto gt = [&](double x) { return g(apply_map(b, x)); };
      // Split the cell containing the branch point.
      if (lo < 0.5 && hi > 0.5)
        rhs += f[i] * (gauss8(gt, lo, 0.5) + gauss8(gt, 0.5, hi));
      else
        rhs += f[i] * gauss8(gt, lo, hi);
    }
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  const double secs = seconds_since(t0);
  return {worst < 5e-6 && secs < 60.0,
          "max |∫g Pf - ∫(g∘T)f| = " + fmt(worst) + " (< 5e-6), runtime=" + fmt(secs) + "s"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };

  // Shared runs, computed on first use.
  std::map<std::string, Timed> runs;
  std::map<std::string, ExperimentConfig> configs;
  auto cfg = [&](const std::string& name) -> ExperimentConfig {
    if (name == "cone") return default_config(ExperimentKind::cone);
    if (name == "scan") return default_config(ExperimentKind::density_scan);
    if (name == "decay") return default_config(ExperimentKind::decay);
    if (name == "variance") return default_config(ExperimentKind::variance);
    if (name == "martingale") return default_config(ExperimentKind::martingale);
    if (name == "clt") return default_config(ExperimentKind::clt);
    if (name == "asip") return default_config(ExperimentKind::asip);
    if (name == "quenched") return default_config(ExperimentKind::quenched);
    auto c = default_config(ExperimentKind::martingale);
    c.schedule.beta = 0.2;
    c.martingale.tail_check = false;
    if (name == "martingale-200") {
      c.martingale.n_max = 200;
      c.martingale.pathwise_n_max = 200;
      c.martingale.pathwise_trajectories = 100;
    } else {  // "moments-500"
      c.martingale.n_max = 500;
      c.martingale.moment_r = {2.0};
    }
    return c;
  };
  auto get = [&](const std::string& name) -> const Timed& {
    auto it = runs.find(name);
    if (it == runs.end()) it = runs.emplace(name, run(cfg(name))).first;
    return it->second;
  };

  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, [&] { return duality(); }},
      {2, [&] { return require(get("cone"), {"cone_preserved"}, 300.0); }},
      {3, [&] { return require(get("scan"), {"positive_floor", "floor_stability"}, 1e9); }},
      {4, [&] {
         auto v = require(get("decay"), {"decay_slope"}, 600.0);
         const double slope = get("decay").record.results["fitted_slope"].get<double>();
         v.passed = v.passed && slope >= -4.6 && slope <= -3.4;
         v.detail += " slope=" + fmt(slope) + " in [-4.6, -3.4]";
         return v;
       }},
      {5, [&] { return require(get("martingale-200"), {"pathwise_identity", "martingale_residual"}, 1e9); }},
      {6, [&] { return require(get("variance"), {"variance_identity", "variance_closeness"}, 1800.0); }},
      {7, [&] { return require(get("moments-500"), {"moment_bounded_r2"}, 1e9); }},
      {8, [&] { return require(get("martingale"), {"sigma_ratio", "delta_sigma_product"}, 1e9); }},
      {9, [&] { return require(get("martingale"), {"five_term_identity", "s_prime_growth"}, 1e9); }},
      {10, [&] { return require(get("clt"), {"clt_ks"}, 1200.0); }},
      {11, [&] { return require(get("asip"), {"surrogate_ledger", "surrogate_ks"}, 1e9); }},
      {12, [&] {
         const auto& t = get("quenched");
         Verdict v{true, ""};
         std::size_t seen = 0;
         for (const auto& c : t.record.checks) {
           if (c.name.rfind("growth_exponent_", 0) != 0) continue;
           ++seen;
           v.passed = v.passed && c.passed && c.value >= 0.8 && c.value <= 1.2;
           v.detail += fmt(c.value) + " ";
         }
         v.passed = v.passed && seen == 8;
         v.detail = "gamma(omega) = " + v.detail + "(" + std::to_string(seen) + " samples)";
         return v;
       }},
      {13, [&] {
         Verdict v{true, ""};
         for (const char* name : {"cone", "decay", "variance", "martingale", "quenched"}) {
           const auto a = summary_json(get(name).record).dump(2);
           const auto b = summary_json(run(cfg(name), 2).record).dump(2);
           const bool same = a == b;
           v.passed = v.passed && same;
           v.detail += std::string(name) + (same ? "=identical " : "=DIFFERENT ");
         }
         v.detail += "(workers 1 vs 2)";
         return v;
       }},
  };

  std::size_t failed = 0;
  for (const auto& [n, body] : criteria) {
    if (!wanted(n)) continue;
    Verdict v;
    try {
      v = body();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    if (!v.passed) ++failed;
    std::printf("%s criterion %d: %s\n", v.passed ? "PASS" : "FAIL", n, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
