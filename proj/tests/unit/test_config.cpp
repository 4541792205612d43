#include <doctest.h>

#include <algorithm>

#include "seqpm/config.hpp"

using namespace seqpm;

namespace {

std::vector<std::string> errors_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.messages();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
  return std::any_of(v.begin(), v.end(),
                     [&](const std::string& m) { return m.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("minimal decay config gets documented defaults") {
  const auto c = parse_config("kind = \"decay\"\n");
  CHECK(c.kind == ExperimentKind::decay);
  CHECK(c.schedule.kind == "constant");
  CHECK(c.schedule.beta == 0.2);
  CHECK(c.observable.kind == "identity");
  CHECK(c.decay.p == 1.0);
  CHECK(c.decay.fit_lo == 50);
  CHECK(c.decay.fit_hi == 2000);
  CHECK(c.decay.density == "power");
  CHECK(c.decay.centering == "density");
  CHECK(c.grid.cells == 4096);
  CHECK(c.grid.grading == 8.0);
  CHECK(c.cache.verify_probability == 0.05);
  CHECK(validate(c).empty());

  const auto v = default_config(ExperimentKind::variance);
  CHECK(v.grid.cells == 2048);
  CHECK(v.grid.grading == 2.0);
  CHECK(v.ensemble.trajectories == 100000);
  CHECK(v.cone.a == 60.0);
}

TEST_CASE("round trip") {
  const std::string text = R"(# a comment
kind = "quenched"
seed = 18446744073709551615

[schedule]
alphabet = [0.05, 0.1]   # two maps
probabilities = [0.3, 0.7]

[observable]
kind = "piecewise"
xs = [0, 0.5, 1]
ys = [0, 1, 0.25]

[ensemble]
trajectories = 1234
n_max = 300
checkpoints = [10, 100, 300]

[statistics]
gamma_low = 0.1234567890123456789
)";
  const auto c = parse_config(text);
  CHECK(c.seed == 18446744073709551615ULL);
  CHECK(c.schedule.probabilities == std::vector<double>{0.3, 0.7});
  CHECK(c.ensemble.checkpoints == std::vector<std::size_t>{10, 100, 300});
  const auto again = parse_config(serialize_config(c));
  CHECK(again == c);
  CHECK(serialize_config(again) == serialize_config(c));
  CHECK(config_hash(again) == config_hash(c));

  for (const auto& name : experiment_kind_names()) {
    const auto d = default_config(*parse_kind(name));
    CHECK(parse_config(serialize_config(d)) == d);
  }
}

TEST_CASE("hash") {
  const auto a = default_config(ExperimentKind::clt);
  auto b = a;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a).find_first_not_of("0123456789abcdef") == std::string::npos);
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
  // Whitespace and comments do not matter.
  CHECK(config_hash(parse_config("kind=\"clt\"")) ==
        config_hash(parse_config("# x\n\n  kind   =   \"clt\"   # y\n")));
}

TEST_CASE("hypothesis violations cite the bound") {
  const auto e = errors_of("kind = \"martingale\"\n[schedule]\nbeta = 0.2\n[martingale]\nmoment_r = [3]\n");
  REQUIRE(e.size() == 1);
  CHECK(e[0].find("1 ≤ r < 1/(2α)") != std::string::npos);

  CHECK(any_contains(errors_of("kind = \"quenched\"\n[schedule]\nprobabilities = [0.5, 0.4]\n"),
                     "sum to 0.9"));
  CHECK(any_contains(errors_of("kind = \"decay\"\n[decay]\np = 5\n"), "1 ≤ p < 1/α"));
  CHECK(any_contains(errors_of("kind = \"clt\"\n[schedule]\nbeta = 0.2\n"), "α < 1/8"));
  CHECK(any_contains(errors_of("kind = \"nearby\"\n[schedule]\nbeta0 = 0.11\nepsilon = 0.03\n"),
                     "β_k < 1/8"));
  CHECK(any_contains(errors_of("kind = \"quenched\"\n[schedule]\nalphabet = [0.05, 0.2]\n"),
                     "β_k < 1/8"));
  CHECK(any_contains(errors_of("kind = \"variance\"\n[observable]\nkind = \"affine\"\nslope = 3\nlipschitz = 1\n"),
                     "Lipschitz"));
}

TEST_CASE("every error is reported") {
  const auto e = errors_of(
      "kind = \"decay\"\n"
      "bogus = 1\n"
      "[grid]\n"
      "cells = 1\n"
      "cells = 2\n"
      "[nowhere]\n"
      "x = 1\n"
      "[decay]\n"
      "p = \"one\"\n"
      "n_max = 3 4\n");
  CHECK(e.size() >= 5);
  CHECK(any_contains(e, "line 2"));
  CHECK(any_contains(e, "line 5"));
  CHECK(any_contains(e, "line 6"));
  CHECK(any_contains(e, "line 9"));
  CHECK(any_contains(e, "line 10"));
}

TEST_CASE("syntax errors carry line numbers") {
  CHECK(any_contains(errors_of("kind = \"decay\"\n[decay\n"), "line 2"));
  CHECK(any_contains(errors_of("kind = \"decay\"\n\nseed = = 3\n"), "line 3"));
  CHECK(any_contains(errors_of("kind = \"decay\"\nseed = \"unterminated\n"), "line 2"));
  CHECK(any_contains(errors_of("kind = \"nope\"\n"), "nope"));
  CHECK(any_contains(errors_of("seed = 3\n"), "kind"));
}

TEST_CASE("kind override") {
  const auto c = parse_config("kind = \"decay\"\n", ExperimentKind::cone);
  CHECK(c.kind == ExperimentKind::cone);
  CHECK(parse_config("", ExperimentKind::clt).ensemble.n_max == 10000);
}

TEST_CASE("builders") {
  ScheduleSpec s;
  s.kind = "list";
  s.betas = {0.05, 0.1};
  const auto sched = make_schedule(s);
  CHECK(sched.beta(2) == 0.1);
  CHECK(sched.alpha_cap() == 0.1);
  ObservableSpec o;
  o.kind = "affine";
  o.slope = -2;
  o.intercept = 1;
  CHECK(make_observable(o)(0.25) == 0.5);
}
