#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace seqpm {

/// Exponent of a single Pomeau-Manneville map
///   T(x) = x + 2^beta x^(1+beta)  on [0, 1/2],   2x - 1  on (1/2, 1].
class MapParameter {
 public:
  explicit MapParameter(double beta);
  double beta() const noexcept { return beta_; }
  friend bool operator==(MapParameter, MapParameter) = default;

 private:
  double beta_;
};

enum class Branch { left, right };

struct BranchPoint {
  double x;
  Branch branch;

  static BranchPoint locate(double x);
};

double apply_map(MapParameter beta, double x);
double map_derivative(MapParameter beta, double x);

/// Root in [0, 1/2] of x + 2^beta x^(1+beta) = y. Newton from above, kept
/// inside a bisection bracket.
double inverse_left(MapParameter beta, double y);
double inverse_right(double y);

/// Sequence of exponents beta_1, beta_2, ... driving the composition
/// T^n = T_n o ... o T_1. Steps are 1-based. Every emitted exponent lies in
/// (0, alpha_cap]. Random kinds are counter-based: beta(k) is a pure function
/// of (seed, k), so the sequence is immutable and unbounded.
class MapSchedule {
 public:
  enum class Kind { constant, explicit_list, nearby, iid_random };

  static MapSchedule constant(double beta, double alpha_cap);
  static MapSchedule explicit_list(std::vector<double> betas, double alpha_cap);
  /// beta_k uniform in (beta0 - epsilon, beta0 + epsilon).
  static MapSchedule nearby(double beta0, double epsilon, std::uint64_t seed,
                            double alpha_cap);
  /// beta_k = alphabet[s_k] with s_k i.i.d. according to probabilities.
  static MapSchedule iid_random(std::vector<double> alphabet,
                                std::vector<double> probabilities,
                                std::uint64_t seed, double alpha_cap);

  Kind kind() const noexcept { return kind_; }
  double alpha_cap() const noexcept { return alpha_cap_; }
  /// Number of steps, or nullopt for unbounded schedules.
  std::optional<std::size_t> length() const noexcept;

  /// Exponent of step k >= 1. Throws ScheduleExhausted past an explicit list.
  double beta(std::size_t k) const;
  MapParameter parameter(std::size_t k) const { return MapParameter(beta(k)); }
  /// Alphabet index of step k for iid-random schedules, 0 otherwise.
  std::size_t symbol(std::size_t k) const;

  /// Distinct exponents the schedule can emit, when that set is finite.
  std::optional<std::vector<double>> finite_support() const;

  double beta0() const noexcept { return beta0_; }
  double epsilon() const noexcept { return epsilon_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& probabilities() const noexcept { return probabilities_; }

  std::string describe() const;

 private:
  MapSchedule() = default;

  Kind kind_{Kind::constant};
  double alpha_cap_{0.0};
  double beta0_{0.0};
  double epsilon_{0.0};
  std::uint64_t seed_{0};
  std::uint64_t key_{0};
  std::vector<double> values_;         // constant: {beta}; list; iid alphabet
  std::vector<double> probabilities_;  // iid only
  std::vector<double> cumulative_;     // iid only
};

/// Orbit x0, T^1 x0, ..., T^n x0.
std::vector<double> iterate_schedule(const MapSchedule& schedule, double x0,
                                     std::size_t n);

/// Streaming form: calls visit(k, x_k) for k = 0..n without storing the orbit.
template <typename Visitor>
void visit_orbit(const MapSchedule& schedule, double x0, std::size_t n,
                 Visitor&& visit) {
  double x = x0;
  visit(std::size_t{0}, x);
  for (std::size_t k = 1; k <= n; ++k) {
    x = apply_map(schedule.parameter(k), x);
    visit(k, x);
  }
}

}  // namespace seqpm
