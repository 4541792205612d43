#include "seqpm/pm_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "seqpm/errors.hpp"
#include "seqpm/random.hpp"

namespace seqpm {

namespace {

constexpr double kBranchTopSlack = 1e-12;
constexpr double kUnderflowCut = 1e-300;
constexpr int kMaxNewton = 200;

void require_unit(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) {
    std::ostringstream os;
    os << what << ": argument " << x << " outside [0, 1]";
    throw DomainError(os.str());
  }
}

// 2^beta x^(1+beta), with the x = 0 case explicit.
double left_increment(double beta, double x) {
  if (x == 0.0) return 0.0;
  return std::exp(beta * std::numbers::ln2 + (1.0 + beta) * std::log(x));
}

}  // namespace

MapParameter::MapParameter(double beta) : beta_(beta) {
  if (!(beta > 0.0 && beta < 1.0)) {
    std::ostringstream os;
    os << "map exponent beta = " << beta << " must satisfy 0 < beta < 1";
    throw DomainError(os.str());
  }
}

BranchPoint BranchPoint::locate(double x) {
  require_unit(x, "BranchPoint");
  return {x, x <= 0.5 ? Branch::left : Branch::right};
}

double apply_map(MapParameter beta, double x) {
  require_unit(x, "apply_map");
  if (x > 0.5) return 2.0 * x - 1.0;
  double y = x + left_increment(beta.beta(), x);
  if (y > 1.0) {
    if (y - 1.0 >= kBranchTopSlack) throw DomainError("apply_map: left branch overshoot");
    y = 1.0;
  }
  return y;
}

double map_derivative(MapParameter beta, double x) {
  require_unit(x, "map_derivative");
  if (x > 0.5) return 2.0;
  if (x == 0.0) return 1.0;
  const double b = beta.beta();
  return 1.0 + (1.0 + b) * std::exp(b * std::numbers::ln2 + b * std::log(x));
}

double inverse_left(MapParameter beta, double y) {
  require_unit(y, "inverse_left");
  if (y < kUnderflowCut) return y;
  if (y == 1.0) return 0.5;
  const double b = beta.beta();
  double lo = 0.0;
  double hi = 0.5;
  // T(x) >= x, so the root lies below y; Newton on a convex increasing
  // function started above the root decreases monotonically towards it.
  double x = std::min(y, 0.5);
  for (int it = 0; it < kMaxNewton; ++it) {
    const double f = x + left_increment(b, x) - y;
    if (f == 0.0) return x;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    const double df = 1.0 + (1.0 + b) * std::exp(b * std::numbers::ln2 + b * std::log(x));
    double next = x - f / df;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - x);
    x = next;
    if (step <= 2.0 * std::numeric_limits<double>::epsilon() * x ||
        hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * hi) {
      return x;
    }
  }
  throw ConvergenceError("inverse_left: iteration cap reached");
}

double inverse_right(double y) {
  require_unit(y, "inverse_right");
  return 0.5 * (y + 1.0);
}

// ---------------------------------------------------------------------------
// MapSchedule

namespace {

void check_cap(double alpha_cap) {
  if (!(alpha_cap > 0.0 && alpha_cap < 1.0))
    throw DomainError("schedule alpha_cap must lie in (0, 1)");
}

void check_beta(double beta, double alpha_cap) {
  if (!(beta > 0.0 && beta <= alpha_cap)) {
    std::ostringstream os;
    os << "schedule exponent " << beta << " outside (0, alpha_cap = " << alpha_cap << "]";
    throw DomainError(os.str());
  }
}

}  // namespace

MapSchedule MapSchedule::constant(double beta, double alpha_cap) {
  check_cap(alpha_cap);
  check_beta(beta, alpha_cap);
  MapSchedule s;
  s.kind_ = Kind::constant;
  s.alpha_cap_ = alpha_cap;
  s.beta0_ = beta;
  s.values_ = {beta};
  return s;
}

MapSchedule MapSchedule::explicit_list(std::vector<double> betas, double alpha_cap) {
  check_cap(alpha_cap);
  if (betas.empty()) throw DomainError("explicit schedule needs at least one exponent");
  for (double b : betas) check_beta(b, alpha_cap);
  MapSchedule s;
  s.kind_ = Kind::explicit_list;
  s.alpha_cap_ = alpha_cap;
  s.values_ = std::move(betas);
  return s;
}

MapSchedule MapSchedule::nearby(double beta0, double epsilon, std::uint64_t seed,
                                double alpha_cap) {
  check_cap(alpha_cap);
  if (!(epsilon >= 0.0)) throw DomainError("nearby schedule: epsilon must be >= 0");
  if (!(beta0 - epsilon > 0.0 && beta0 + epsilon <= alpha_cap)) {
    std::ostringstream os;
    os << "nearby schedule: window (" << beta0 - epsilon << ", " << beta0 + epsilon
       << ") escapes (0, alpha_cap = " << alpha_cap << "]";
    throw DomainError(os.str());
  }
  MapSchedule s;
  s.kind_ = Kind::nearby;
  s.alpha_cap_ = alpha_cap;
  s.beta0_ = beta0;
  s.epsilon_ = epsilon;
  s.seed_ = seed;
  s.key_ = derive_key(seed, 0x6e656172ULL);
  return s;
}

MapSchedule MapSchedule::iid_random(std::vector<double> alphabet,
                                    std::vector<double> probabilities,
                                    std::uint64_t seed, double alpha_cap) {
  check_cap(alpha_cap);
  if (alphabet.empty() || alphabet.size() != probabilities.size())
    throw DomainError("iid schedule: alphabet and probability vector sizes differ");
  for (double b : alphabet) check_beta(b, alpha_cap);
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0)) throw DomainError("iid schedule: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "iid schedule: probabilities sum to " << total << ", not 1";
    throw DomainError(os.str());
  }
  MapSchedule s;
  s.kind_ = Kind::iid_random;
  s.alpha_cap_ = alpha_cap;
  s.seed_ = seed;
  s.key_ = derive_key(seed, 0x69696452ULL);
  s.values_ = std::move(alphabet);
  s.probabilities_ = std::move(probabilities);
  s.cumulative_.resize(s.probabilities_.size());
  std::partial_sum(s.probabilities_.begin(), s.probabilities_.end(), s.cumulative_.begin());
  s.cumulative_.back() = 1.0;
  return s;
}

std::optional<std::size_t> MapSchedule::length() const noexcept {
  if (kind_ == Kind::explicit_list) return values_.size();
  return std::nullopt;
}

std::size_t MapSchedule::symbol(std::size_t k) const {
  if (kind_ != Kind::iid_random) return 0;
  const double u = counter_uniform(key_, k);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                               values_.size() - 1);
}

double MapSchedule::beta(std::size_t k) const {
  if (k == 0) throw DomainError("schedule steps are 1-based");
  switch (kind_) {
    case Kind::constant:
      return values_.front();
    case Kind::explicit_list:
      if (k > values_.size()) {
        std::ostringstream os;
        os << "explicit schedule of length " << values_.size() << " has no step " << k;
        throw ScheduleExhausted(os.str());
      }
      return values_[k - 1];
    case Kind::nearby: {
      if (epsilon_ == 0.0) return beta0_;
      // u + 2^-54 lies strictly inside (0, 1): the window is open
      const double u = counter_uniform(key_, k) + 0x1.0p-54;
      return beta0_ - epsilon_ + 2.0 * epsilon_ * u;
    }
    case Kind::iid_random:
      return values_[symbol(k)];
  }
  return values_.front();
}

std::optional<std::vector<double>> MapSchedule::finite_support() const {
  switch (kind_) {
    case Kind::constant:
    case Kind::iid_random: {
      return values_;
    }
    case Kind::explicit_list: {
      auto v = values_;
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      return v;
    }
    case Kind::nearby:
      if (epsilon_ == 0.0) return std::vector<double>{beta0_};
      return std::nullopt;
  }
  return std::nullopt;
}

std::string MapSchedule::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::constant:
      os << "constant(beta=" << values_.front() << ")";
      break;
    case Kind::explicit_list:
      os << "explicit-list(length=" << values_.size() << ")";
      break;
    case Kind::nearby:
      os << "nearby(beta0=" << beta0_ << ", epsilon=" << epsilon_ << ", seed=" << seed_ << ")";
      break;
    case Kind::iid_random:
      os << "iid-random(d=" << values_.size() - 1 << ", seed=" << seed_ << ")";
      break;
  }
  os << " alpha_cap=" << alpha_cap_;
  return os.str();
}

std::vector<double> iterate_schedule(const MapSchedule& schedule, double x0, std::size_t n) {
  require_unit(x0, "iterate_schedule");
  std::vector<double> orbit;
  orbit.reserve(n + 1);
  visit_orbit(schedule, x0, n, [&](std::size_t, double x) { orbit.push_back(x); });
  return orbit;
}

}  // namespace seqpm
