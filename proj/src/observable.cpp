#include "seqpm/observable.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "seqpm/errors.hpp"

namespace seqpm {

Observable Observable::constant(double value) {
  Observable o;
  o.kind_ = Kind::constant;
  o.intercept_ = value;
  return o;
}

Observable Observable::identity() {
  Observable o;
  o.kind_ = Kind::identity;
  o.slope_ = 1.0;
  o.lipschitz_ = 1.0;
  return o;
}

Observable Observable::affine(double slope, double intercept) {
  if (!std::isfinite(slope) || !std::isfinite(intercept))
    throw DomainError("affine observable: non-finite coefficients");
  Observable o;
  o.kind_ = slope == 0.0 ? Kind::constant : Kind::affine;
  o.slope_ = slope;
  o.intercept_ = intercept;
  o.lipschitz_ = std::abs(slope);
  return o;
}

Observable Observable::piecewise_linear(std::vector<double> xs, std::vector<double> ys) {
  if (xs.size() < 2 || xs.size() != ys.size())
    throw DomainError("piecewise-linear observable needs >= 2 matching breakpoints");
  if (xs.front() != 0.0 || xs.back() != 1.0)
    throw DomainError("piecewise-linear observable: breakpoints must span [0, 1]");
  double lip = 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1]))
      throw DomainError("piecewise-linear observable: breakpoints must increase strictly");
    lip = std::max(lip, std::abs(ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]));
  }
  Observable o;
  o.kind_ = Kind::piecewise_linear;
  o.xs_ = std::move(xs);
  o.ys_ = std::move(ys);
  o.lipschitz_ = lip;
  return o;
}

double Observable::operator()(double x) const {
  switch (kind_) {
    case Kind::constant:
      return intercept_;
    case Kind::identity:
      return x;
    case Kind::affine:
      return slope_ * x + intercept_;
    case Kind::piecewise_linear: {
      if (x <= xs_.front()) return ys_.front();
      if (x >= xs_.back()) return ys_.back();
      const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
      const std::size_t i = static_cast<std::size_t>(it - xs_.begin());
      const double t = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
      return ys_[i - 1] + t * (ys_[i] - ys_[i - 1]);
    }
  }
  return 0.0;
}

double Observable::w1inf_norm() const {
  double sup = 0.0;
  switch (kind_) {
    case Kind::constant:
      sup = std::abs(intercept_);
      break;
    case Kind::identity:
      sup = 1.0;
      break;
    case Kind::affine:
      sup = std::max(std::abs(intercept_), std::abs(slope_ + intercept_));
      break;
    case Kind::piecewise_linear:
      for (double y : ys_) sup = std::max(sup, std::abs(y));
      break;
  }
  return sup + lipschitz_;
}

std::string Observable::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::constant:
      os << "constant(" << intercept_ << ")";
      break;
    case Kind::identity:
      os << "identity";
      break;
    case Kind::affine:
      os << "affine(" << slope_ << "*x+" << intercept_ << ")";
      break;
    case Kind::piecewise_linear:
      os << "piecewise-linear(" << xs_.size() << " breakpoints)";
      break;
  }
  return os.str();
}

}  // namespace seqpm
