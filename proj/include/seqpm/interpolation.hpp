#pragma once

#include <span>
#include <vector>

namespace seqpm {

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
/// Constant extrapolation outside [x_0, x_last].
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::span<const double> x, std::span<const double> y);

  double operator()(double t) const;
  bool empty() const noexcept { return x_.empty(); }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> slope_;
};

}  // namespace seqpm
