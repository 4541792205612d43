#pragma once

#include <string>
#include <vector>

namespace seqpm {

/// Lipschitz observable on [0, 1]. Built-ins only, so that configurations can
/// name them and records can describe them.
class Observable {
 public:
  enum class Kind { constant, identity, affine, piecewise_linear };

  static Observable constant(double value);
  static Observable identity();
  /// x -> slope * x + intercept
  static Observable affine(double slope, double intercept);
  /// Linear interpolation through (xs[i], ys[i]); xs strictly increasing,
  /// xs.front() == 0, xs.back() == 1.
  static Observable piecewise_linear(std::vector<double> xs, std::vector<double> ys);

  double operator()(double x) const;

  Kind kind() const noexcept { return kind_; }
  /// Lipschitz constant |phi(x) - phi(y)| <= L |x - y|.
  double lipschitz() const noexcept { return lipschitz_; }
  /// ||phi||_inf + Lip(phi), the W^{1,inf} norm bounding the decay constants.
  double w1inf_norm() const;
  /// True for observables that are constant on [0, 1].
  bool is_constant() const noexcept { return lipschitz_ == 0.0; }

  const std::vector<double>& xs() const noexcept { return xs_; }
  const std::vector<double>& ys() const noexcept { return ys_; }
  double slope() const noexcept { return slope_; }
  double intercept() const noexcept { return intercept_; }

  std::string describe() const;

 private:
  Observable() = default;

  Kind kind_{Kind::constant};
  double slope_{0.0};
  double intercept_{0.0};
  double lipschitz_{0.0};
  std::vector<double> xs_;
  std::vector<double> ys_;
};

}  // namespace seqpm
