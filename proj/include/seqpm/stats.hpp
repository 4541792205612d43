#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace seqpm {

struct KsResult {
  double statistic{0.0};
  double p_value{1.0};
  std::size_t n{0};  // effective sample size
};

/// Asymptotic Kolmogorov tail P(K > lambda) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_tail(double lambda);

double standard_normal_cdf(double x);

/// Two-sided one-sample KS distance to N(0, 1). The p-value uses Stephens'
/// finite-n correction lambda = (sqrt(n) + 0.12 + 0.11 / sqrt(n)) D.
KsResult ks_standard_normal(std::span<const double> sample);

/// Two-sample KS distance with effective size n m / (n + m).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

double median(std::vector<double> values);

/// Leave-one-block-out jackknife standard error. estimates[b] is the statistic
/// recomputed without block b.
double jackknife_stderr(std::span<const double> estimates);

struct LineFit {
  double slope{0.0};
  double intercept{0.0};
  std::size_t points{0};
};

/// Ordinary least squares of y on x.
LineFit least_squares(std::span<const double> x, std::span<const double> y);

/// Standard normal draw from two counter-based uniforms (Box-Muller, cosine
/// branch). Pure function of (key, counter).
double counter_normal(std::uint64_t key, std::uint64_t counter);

}  // namespace seqpm
