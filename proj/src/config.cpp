#include "seqpm/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "seqpm/errors.hpp"
#include "seqpm/operator_cache.hpp"

namespace seqpm {

namespace {

constexpr std::array<std::pair<ExperimentKind, const char*>, 9> kKindNames{{
    {ExperimentKind::density_scan, "density-scan"},
    {ExperimentKind::cone, "cone"},
    {ExperimentKind::decay, "decay"},
    {ExperimentKind::martingale, "martingale"},
    {ExperimentKind::variance, "variance"},
    {ExperimentKind::clt, "clt"},
    {ExperimentKind::asip, "asip"},
    {ExperimentKind::nearby, "nearby"},
    {ExperimentKind::quenched, "quenched"},
}};

// ---------------------------------------------------------------------------
// Lexical layer: values keep their source text so integers parse exactly.

struct Value {
  enum class Type { string, boolean, number, array } type;
  std::string text;                // unquoted string, "true"/"false", or number token
  std::vector<std::string> items;  // array elements (number tokens)
  int line{0};
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

bool is_number_token(const std::string& t) {
  if (t.empty()) return false;
  double v;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  return r.ec == std::errc() && r.ptr == t.data() + t.size();
}

std::optional<Value> parse_value(const std::string& raw, int line, std::string& error) {
  Value v{Value::Type::string, {}, {}, line};
  if (raw.empty()) {
    error = "missing value";
    return std::nullopt;
  }
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') {
      error = "unterminated string";
      return std::nullopt;
    }
    v.text = raw.substr(1, raw.size() - 2);
    if (v.text.find('"') != std::string::npos) {
      error = "embedded quote in string";
      return std::nullopt;
    }
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.type = Value::Type::boolean;
    v.text = raw;
    return v;
  }
  if (raw.front() == '[') {
    if (raw.back() != ']') {
      error = "unterminated array";
      return std::nullopt;
    }
    v.type = Value::Type::array;
    const std::string body = trim(std::string_view(raw).substr(1, raw.size() - 2));
    if (body.empty()) return v;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!is_number_token(item)) {
        error = "array element '" + item + "' is not a number";
        return std::nullopt;
      }
      v.items.push_back(item);
    }
    return v;
  }
  if (is_number_token(raw)) {
    v.type = Value::Type::number;
    v.text = raw;
    return v;
  }
  error = "cannot parse value '" + raw + "' (strings need double quotes)";
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Field bindings: one table drives parsing, defaults and serialization.

std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  std::string s(buf.data(), r.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";  // keep it visibly real
  return s;
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

template <typename T>
bool parse_integer(const std::string& t, T& out) {
  const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
  return r.ec == std::errc() && r.ptr == t.data() + t.size();
}

bool parse_real(const std::string& t, double& out) {
  const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
  return r.ec == std::errc() && r.ptr == t.data() + t.size() && std::isfinite(out);
}

using Errors = std::vector<std::string>;

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const Value&, Errors&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::string where(const Value& v, const std::string& section, const std::string& key) {
  std::ostringstream os;
  os << "line " << v.line << ": " << (section.empty() ? "" : section + ".") << key;
  return os.str();
}

template <typename Ref>
Field real_field(std::string section, std::string key, Ref ref) {
  Field f{section, key, {}, {}};
  f.set = [=](ExperimentConfig& c, const Value& v, Errors& e) {
    double x;
    if (v.type != Value::Type::number || !parse_real(v.text, x))
      e.push_back(where(v, section, key) + " expects a finite real number");
    else
      ref(c) = x;
  };
  f.get = [=](const ExperimentConfig& c) { return format_double(ref(c)); };
  return f;
}

template <typename Ref>
Field count_field(std::string section, std::string key, Ref ref) {
  Field f{section, key, {}, {}};
  f.set = [=](ExperimentConfig& c, const Value& v, Errors& e) {
    std::size_t x;
    if (v.type != Value::Type::number || !parse_integer(v.text, x))
      e.push_back(where(v, section, key) + " expects a nonnegative integer");
    else
      ref(c) = x;
  };
  f.get = [=](const ExperimentConfig& c) { return std::to_string(ref(c)); };
  return f;
}

template <typename Ref>
Field seed_field(std::string section, std::string key, Ref ref) {
  Field f{section, key, {}, {}};
  f.set = [=](ExperimentConfig& c, const Value& v, Errors& e) {
    std::uint64_t x;
    if (v.type != Value::Type::number || !parse_integer(v.text, x))
      e.push_back(where(v, section, key) + " expects an unsigned 64-bit integer");
    else
      ref(c) = x;
  };
  f.get = [=](const ExperimentConfig& c) { return std::to_string(ref(c)); };
  return f;
}

template <typename Ref>
Field string_field(std::string section, std::string key, Ref ref) {
  Field f{section, key, {}, {}};
  f.set = [=](ExperimentConfig& c, const Value& v, Errors& e) {
    if (v.type != Value::Type::string)
      e.push_back(where(v, section, key) + " expects a quoted string");
    else
      ref(c) = v.text;
  };
  f.get = [=](const ExperimentConfig& c) { return quote(ref(c)); };
  return f;
}

template <typename Ref>
Field bool_field(std::string section, std::string key, Ref ref) {
  Field f{section, key, {}, {}};
  f.set = [=](ExperimentConfig& c, const Value& v, Errors& e) {
    if (v.type != Value::Type::boolean)
      e.push_back(where(v, section, key) + " expects true or false");
    else
      ref(c) = v.text == "true";
  };
  f.get = [=](const ExperimentConfig& c) { return std::string(ref(c) ? "true" : "false"); };
  return f;
}

template <typename Ref>
Field reals_field(std::string section, std::string key, Ref ref) {
  Field f{section, key, {}, {}};
  f.set = [=](ExperimentConfig& c, const Value& v, Errors& e) {
    if (v.type != Value::Type::array) {
      e.push_back(where(v, section, key) + " expects an array of reals");
      return;
    }
    std::vector<double> out;
    for (const auto& t : v.items) {
      double x;
      if (!parse_real(t, x)) {
        e.push_back(where(v, section, key) + " element '" + t + "' is not a finite real");
        return;
      }
      out.push_back(x);
    }
    ref(c) = std::move(out);
  };
  f.get = [=](const ExperimentConfig& c) {
    std::string s = "[";
    const auto& xs = ref(c);
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + format_double(xs[i]);
    return s + "]";
  };
  return f;
}

template <typename Ref>
Field counts_field(std::string section, std::string key, Ref ref) {
  Field f{section, key, {}, {}};
  f.set = [=](ExperimentConfig& c, const Value& v, Errors& e) {
    if (v.type != Value::Type::array) {
      e.push_back(where(v, section, key) + " expects an array of integers");
      return;
    }
    std::vector<std::size_t> out;
    for (const auto& t : v.items) {
      std::size_t x;
      if (!parse_integer(t, x)) {
        e.push_back(where(v, section, key) + " element '" + t + "' is not a nonnegative integer");
        return;
      }
      out.push_back(x);
    }
    ref(c) = std::move(out);
  };
  f.get = [=](const ExperimentConfig& c) {
    std::string s = "[";
    const auto& xs = ref(c);
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + std::to_string(xs[i]);
    return s + "]";
  };
  return f;
}

#define SEQPM_REF(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> t;
    t.push_back(seed_field("", "seed", SEQPM_REF(seed)));
    t.push_back(string_field("", "output", SEQPM_REF(output)));

    t.push_back(string_field("schedule", "kind", SEQPM_REF(schedule.kind)));
    t.push_back(real_field("schedule", "alpha", SEQPM_REF(schedule.alpha)));
    t.push_back(real_field("schedule", "beta", SEQPM_REF(schedule.beta)));
    t.push_back(reals_field("schedule", "betas", SEQPM_REF(schedule.betas)));
    t.push_back(real_field("schedule", "beta0", SEQPM_REF(schedule.beta0)));
    t.push_back(real_field("schedule", "epsilon", SEQPM_REF(schedule.epsilon)));
    t.push_back(reals_field("schedule", "alphabet", SEQPM_REF(schedule.alphabet)));
    t.push_back(reals_field("schedule", "probabilities", SEQPM_REF(schedule.probabilities)));
    t.push_back(seed_field("schedule", "seed", SEQPM_REF(schedule.seed)));

    t.push_back(string_field("observable", "kind", SEQPM_REF(observable.kind)));
    t.push_back(real_field("observable", "value", SEQPM_REF(observable.value)));
    t.push_back(real_field("observable", "slope", SEQPM_REF(observable.slope)));
    t.push_back(real_field("observable", "intercept", SEQPM_REF(observable.intercept)));
    t.push_back(reals_field("observable", "xs", SEQPM_REF(observable.xs)));
    t.push_back(reals_field("observable", "ys", SEQPM_REF(observable.ys)));
    t.push_back(real_field("observable", "lipschitz", SEQPM_REF(observable.lipschitz)));

    t.push_back(count_field("grid", "cells", SEQPM_REF(grid.cells)));
    t.push_back(real_field("grid", "grading", SEQPM_REF(grid.grading)));

    t.push_back(count_field("ensemble", "trajectories", SEQPM_REF(ensemble.trajectories)));
    t.push_back(count_field("ensemble", "n_max", SEQPM_REF(ensemble.n_max)));
    t.push_back(counts_field("ensemble", "checkpoints", SEQPM_REF(ensemble.checkpoints)));
    t.push_back(count_field("ensemble", "blocks", SEQPM_REF(ensemble.blocks)));

    t.push_back(real_field("cone", "a", SEQPM_REF(cone.a)));
    t.push_back(count_field("cone", "seeds", SEQPM_REF(cone.seeds)));
    t.push_back(count_field("cone", "schedules", SEQPM_REF(cone.schedules)));
    t.push_back(count_field("cone", "n_max", SEQPM_REF(cone.n_max)));

    t.push_back(real_field("decay", "p", SEQPM_REF(decay.p)));
    t.push_back(count_field("decay", "n_max", SEQPM_REF(decay.n_max)));
    t.push_back(count_field("decay", "fit_lo", SEQPM_REF(decay.fit_lo)));
    t.push_back(count_field("decay", "fit_hi", SEQPM_REF(decay.fit_hi)));
    t.push_back(count_field("decay", "offset", SEQPM_REF(decay.offset)));
    t.push_back(string_field("decay", "density", SEQPM_REF(decay.density)));
    t.push_back(string_field("decay", "centering", SEQPM_REF(decay.centering)));
    t.push_back(real_field("decay", "slope_tolerance", SEQPM_REF(decay.slope_tolerance)));

    t.push_back(count_field("scan", "n_max", SEQPM_REF(scan.n_max)));
    t.push_back(real_field("scan", "floor_variation", SEQPM_REF(scan.floor_variation)));
    t.push_back(real_field("scan", "invariant_slope_tolerance",
                           SEQPM_REF(scan.invariant_slope_tolerance)));

    t.push_back(count_field("martingale", "n_max", SEQPM_REF(martingale.n_max)));
    t.push_back(reals_field("martingale", "moment_r", SEQPM_REF(martingale.moment_r)));
    t.push_back(real_field("martingale", "moment_increment", SEQPM_REF(martingale.moment_increment)));
    t.push_back(count_field("martingale", "pathwise_trajectories",
                            SEQPM_REF(martingale.pathwise_trajectories)));
    t.push_back(count_field("martingale", "pathwise_n_max", SEQPM_REF(martingale.pathwise_n_max)));
    t.push_back(real_field("martingale", "martingale_tolerance",
                           SEQPM_REF(martingale.martingale_tolerance)));
    t.push_back(real_field("martingale", "pathwise_tolerance",
                           SEQPM_REF(martingale.pathwise_tolerance)));
    t.push_back(real_field("martingale", "identity_tolerance",
                           SEQPM_REF(martingale.identity_tolerance)));
    t.push_back(bool_field("martingale", "tail_check", SEQPM_REF(martingale.tail_check)));
    t.push_back(real_field("martingale", "ratio_tolerance", SEQPM_REF(martingale.ratio_tolerance)));
    t.push_back(real_field("martingale", "delta_band", SEQPM_REF(martingale.delta_band)));

    t.push_back(real_field("statistics", "z_band", SEQPM_REF(statistics.z_band)));
    t.push_back(real_field("statistics", "centering_z", SEQPM_REF(statistics.centering_z)));
    t.push_back(real_field("statistics", "closeness_fraction",
                           SEQPM_REF(statistics.closeness_fraction)));
    t.push_back(real_field("statistics", "ks_threshold", SEQPM_REF(statistics.ks_threshold)));
    t.push_back(real_field("statistics", "lil_delta", SEQPM_REF(statistics.lil_delta)));
    t.push_back(count_field("statistics", "surrogate_paths", SEQPM_REF(statistics.surrogate_paths)));
    t.push_back(real_field("statistics", "gamma_low", SEQPM_REF(statistics.gamma_low)));
    t.push_back(real_field("statistics", "gamma_high", SEQPM_REF(statistics.gamma_high)));
    t.push_back(count_field("statistics", "schedules", SEQPM_REF(statistics.schedules)));

    t.push_back(string_field("cache", "directory", SEQPM_REF(cache.directory)));
    t.push_back(real_field("cache", "verify_probability", SEQPM_REF(cache.verify_probability)));
    return t;
  }();
  return table;
}

#undef SEQPM_REF

double effective_alpha(const ScheduleSpec& s) {
  if (s.alpha > 0.0) return s.alpha;
  if (s.kind == "constant") return s.beta;
  if (s.kind == "list") return s.betas.empty() ? 0.0 : *std::max_element(s.betas.begin(), s.betas.end());
  if (s.kind == "nearby") return s.beta0 + s.epsilon;
  if (s.kind == "iid")
    return s.alphabet.empty() ? 0.0 : *std::max_element(s.alphabet.begin(), s.alphabet.end());
  return 0.0;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<ExperimentKind> parse_kind(const std::string& name) {
  for (const auto& [k, n] : kKindNames)
    if (name == n) return k;
  return std::nullopt;
}

std::vector<std::string> experiment_kind_names() {
  std::vector<std::string> out;
  for (const auto& kv : kKindNames) out.emplace_back(kv.second);
  return out;
}

ConfigError::ConfigError(std::vector<std::string> messages)
    : std::runtime_error([&] {
        std::string s = "invalid configuration:";
        for (const auto& m : messages) s += "\n  " + m;
        return s;
      }()),
      messages_(std::move(messages)) {}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::decay:
      c.schedule.beta = 0.2;
      c.grid = {4096, 8.0};
      break;
    case ExperimentKind::cone:
      c.schedule.beta = 0.2;
      break;
    case ExperimentKind::density_scan:
      // Finer grading resolves the fixed vector's slope near 1e-4.
      c.schedule.beta = 0.2;
      c.grid = {1024, 4.0};
      break;
    case ExperimentKind::martingale:
      // The tail ratios need a final decade well past the transient.
      c.schedule.beta = 0.1;
      c.martingale.n_max = 4096;
      break;
    case ExperimentKind::clt:
      c.ensemble.trajectories = 10000;
      c.ensemble.n_max = 10000;
      break;
    case ExperimentKind::nearby:
      c.schedule.kind = "nearby";
      c.schedule.beta0 = 0.1;
      c.schedule.epsilon = 0.02;
      break;
    case ExperimentKind::quenched:
      c.schedule.kind = "iid";
      c.schedule.alphabet = {0.05, 0.1};
      c.schedule.probabilities = {0.5, 0.5};
      c.ensemble.trajectories = 20000;
      c.statistics.schedules = 8;
      c.statistics.gamma_low = 0.8;
      c.statistics.gamma_high = 1.2;
      break;
    default:
      break;
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text, std::optional<ExperimentKind> kind_override) {
  Errors errors;
  std::map<std::string, Value> entries;  // "section.key" or "key"
  std::string section;
  std::stringstream in(text);
  std::string raw;
  int line_no = 0;
  static const std::vector<std::string> sections = {
      "schedule", "observable", "grid", "ensemble", "cone", "decay",
      "scan", "martingale", "statistics", "cache"};
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back("line " + std::to_string(line_no) + ": malformed section header");
        continue;
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (std::find(sections.begin(), sections.end(), section) == sections.end())
        errors.push_back("line " + std::to_string(line_no) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    std::string err;
    auto value = parse_value(trim(std::string_view(line).substr(eq + 1)), line_no, err);
    if (!value) {
      errors.push_back("line " + std::to_string(line_no) + ": " + key + ": " + err);
      continue;
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (entries.count(full)) {
      errors.push_back("line " + std::to_string(line_no) + ": duplicate key " + full +
                       " (first set on line " + std::to_string(entries[full].line) + ")");
      continue;
    }
    entries.emplace(full, std::move(*value));
  }

  // The kind selects the defaults, so it is resolved first.
  ExperimentKind kind = ExperimentKind::variance;
  if (auto it = entries.find("kind"); it != entries.end()) {
    const auto k = parse_kind(it->second.text);
    if (it->second.type != Value::Type::string || !k)
    {
      std::string names;
      for (const auto& n : experiment_kind_names()) names += (names.empty() ? "" : ", ") + n;
      errors.push_back("line " + std::to_string(it->second.line) + ": unknown kind '" + it->second.text +
                       "' (expected one of " + names + ")");
    }
    else
      kind = *k;
    entries.erase(it);
  } else if (!kind_override) {
    errors.push_back("missing top-level key 'kind'");
  }
  if (kind_override) kind = *kind_override;

  ExperimentConfig config = default_config(kind);
  for (const auto& f : fields()) {
    const std::string full = f.section.empty() ? f.key : f.section + "." + f.key;
    auto it = entries.find(full);
    if (it == entries.end()) continue;
    f.set(config, it->second, errors);
    entries.erase(it);
  }
  for (const auto& [key, value] : entries)
    errors.push_back("line " + std::to_string(value.line) + ": unknown key " + key);

  if (errors.empty()) {
    auto more = validate(config);
    errors.insert(errors.end(), more.begin(), more.end());
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return config;
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  Errors e;
  const auto& s = c.schedule;
  const double alpha = effective_alpha(s);
  static const std::vector<std::string> schedule_kinds = {"constant", "list", "nearby", "iid"};
  if (std::find(schedule_kinds.begin(), schedule_kinds.end(), s.kind) == schedule_kinds.end()) {
    e.push_back("schedule.kind '" + s.kind + "' is not one of constant, list, nearby, iid");
  } else if (!(alpha > 0.0 && alpha < 1.0)) {
    e.push_back("schedule alpha cap must lie in (0, 1), the range 0 < beta_k < alpha < 1");
  } else {
    try {
      (void)make_schedule(s);
    } catch (const std::exception& ex) {
      e.push_back(std::string("schedule: ") + ex.what());
    }
  }

  try {
    const auto phi = make_observable(c.observable);
    if (c.observable.lipschitz > 0.0 && c.observable.lipschitz + 1e-12 < phi.lipschitz()) {
      std::ostringstream os;
      os << "observable.lipschitz = " << c.observable.lipschitz
         << " is below the observable's actual Lipschitz constant " << phi.lipschitz();
      e.push_back(os.str());
    }
  } catch (const std::exception& ex) {
    e.push_back(std::string("observable: ") + ex.what());
  }

  if (c.grid.cells < 2) e.push_back("grid.cells must be >= 2");
  if (!(c.grid.grading >= 1.0)) e.push_back("grid.grading must be >= 1");
  if (c.ensemble.trajectories < 1) e.push_back("ensemble.trajectories must be >= 1");
  if (c.ensemble.blocks < 1) e.push_back("ensemble.blocks must be >= 1");
  if (c.ensemble.n_max < 1) e.push_back("ensemble.n_max must be >= 1");
  for (std::size_t j = 0; j < c.ensemble.checkpoints.size(); ++j) {
    const auto n = c.ensemble.checkpoints[j];
    if (n == 0 || n > c.ensemble.n_max)
      e.push_back("ensemble.checkpoints entry " + std::to_string(n) + " outside [1, n_max]");
    if (j > 0 && n <= c.ensemble.checkpoints[j - 1])
      e.push_back("ensemble.checkpoints must increase strictly");
  }
  if (!(c.cache.verify_probability >= 0.0 && c.cache.verify_probability <= 1.0))
    e.push_back("cache.verify_probability must lie in [0, 1]");

  auto cite_small_alpha = [&](const char* what) {
    if (alpha > 0.0 && !(alpha < 0.125)) {
      std::ostringstream os;
      os << what << " requires α < 1/8 (got α = " << alpha << ")";
      e.push_back(os.str());
    }
  };

  switch (c.kind) {
    case ExperimentKind::decay: {
      const auto& d = c.decay;
      if (!(d.p >= 1.0 && d.p * alpha < 1.0)) {
        std::ostringstream os;
        os << "decay.p = " << d.p << " violates 1 ≤ p < 1/α (1/α = " << 1.0 / alpha << ")";
        e.push_back(os.str());
      }
      if (!(d.fit_lo >= 1 && d.fit_lo < d.fit_hi && d.fit_hi <= d.n_max))
        e.push_back("decay fit window needs 1 <= fit_lo < fit_hi <= n_max");
      if (d.density != "power" && d.density != "constant")
        e.push_back("decay.density must be \"power\" or \"constant\"");
      if (d.centering != "density" && d.centering != "lebesgue")
        e.push_back("decay.centering must be \"density\" or \"lebesgue\"");
      break;
    }
    case ExperimentKind::martingale: {
      const auto& m = c.martingale;
      for (double r : m.moment_r) {
        if (!(r >= 1.0 && r < 1.0 / (2.0 * alpha))) {
          std::ostringstream os;
          os << "martingale.moment_r = " << r << " violates 1 ≤ r < 1/(2α) (1/(2α) = "
             << 1.0 / (2.0 * alpha) << ")";
          e.push_back(os.str());
        }
      }
      if (m.n_max < 2) e.push_back("martingale.n_max must be >= 2");
      if (m.pathwise_trajectories < 1 || m.pathwise_n_max < 1)
        e.push_back("martingale pathwise run needs trajectories >= 1 and n_max >= 1");
      break;
    }
    case ExperimentKind::cone:
      if (!(c.cone.a > 0.0)) e.push_back("cone.a must be positive");
      if (c.cone.n_max < 1) e.push_back("cone.n_max must be >= 1");
      break;
    case ExperimentKind::density_scan:
      if (c.scan.n_max < 1) e.push_back("scan.n_max must be >= 1");
      break;
    case ExperimentKind::clt:
      cite_small_alpha("the self-norming CLT via the ASIP");
      if (c.ensemble.trajectories < 1000)
        e.push_back("clt needs ensemble.trajectories >= 1000 for the KS test");
      break;
    case ExperimentKind::asip:
      cite_small_alpha("the ASIP");
      if (c.statistics.surrogate_paths < 1) e.push_back("statistics.surrogate_paths must be >= 1");
      break;
    case ExperimentKind::nearby:
      if (s.kind != "nearby") e.push_back("nearby experiments need schedule.kind = \"nearby\"");
      if (!(s.beta0 - s.epsilon > 0.0 && s.beta0 + s.epsilon < 0.125)) {
        std::ostringstream os;
        os << "nearby window (" << s.beta0 - s.epsilon << ", " << s.beta0 + s.epsilon
           << ") violates 0 < β_0, β_k < 1/8";
        e.push_back(os.str());
      }
      break;
    case ExperimentKind::quenched:
      if (s.kind != "iid") e.push_back("quenched experiments need schedule.kind = \"iid\"");
      for (double b : s.alphabet)
        if (!(b > 0.0 && b < 0.125)) {
          std::ostringstream os;
          os << "alphabet exponent " << b << " violates 0 < β_k < 1/8";
          e.push_back(os.str());
        }
      break;
    default:
      break;
  }
  return e;
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "kind = " << quote(to_string(c.kind)) << "\n";
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      section = f.section;
      os << "\n[" << section << "]\n";
    }
    os << f.key << " = " << f.get(c) << "\n";
  }
  return os.str();
}

std::string config_hash(const ExperimentConfig& config) {
  const auto h = fnv1a64(serialize_config(config));
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

MapSchedule make_schedule(const ScheduleSpec& s) {
  const double cap = effective_alpha(s);
  if (s.kind == "constant") return MapSchedule::constant(s.beta, cap);
  if (s.kind == "list") return MapSchedule::explicit_list(s.betas, cap);
  if (s.kind == "nearby") return MapSchedule::nearby(s.beta0, s.epsilon, s.seed, cap);
  if (s.kind == "iid") return MapSchedule::iid_random(s.alphabet, s.probabilities, s.seed, cap);
  throw DomainError("unknown schedule kind '" + s.kind + "'");
}

Observable make_observable(const ObservableSpec& o) {
  if (o.kind == "identity") return Observable::identity();
  if (o.kind == "constant") return Observable::constant(o.value);
  if (o.kind == "affine") return Observable::affine(o.slope, o.intercept);
  if (o.kind == "piecewise") return Observable::piecewise_linear(o.xs, o.ys);
  throw DomainError("unknown observable kind '" + o.kind + "'");
}

}  // namespace seqpm
