#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace netadopt {

namespace detail {

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Continued fraction for the regularized incomplete beta, modified Lentz.
inline double incbeta_cf(double x, double a, double b) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double result = d;
  for (int m = 1; m <= 400; ++m) {
    const double m2 = 2.0 * m;
    // even term
    double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    result *= d * c;
    // odd term
    num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double mult = d * c;
    result *= mult;
    if (std::fabs(mult - 1.0) < eps) break;
  }
  return result;
}

}  // namespace detail

// Regularized incomplete beta function I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("beta shapes must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front =
      std::exp(a * std::log(x) + b * std::log1p(-x) - detail::log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * detail::incbeta_cf(x, a, b) / a;
  const double front2 =
      std::exp(b * std::log1p(-x) + a * std::log(x) - detail::log_beta(a, b));
  return 1.0 - front2 * detail::incbeta_cf(1.0 - x, b, a) / b;
}

// Distribution of the user valuation weight theta on [0, 1].
class ValuationDistribution {
 public:
  enum class Kind { Uniform, Beta };

  static ValuationDistribution uniform() { return ValuationDistribution(Kind::Uniform, 1.0, 1.0); }

  static ValuationDistribution beta(double alpha, double beta_shape) {
    if (!(alpha > 0.0) || !(beta_shape > 0.0))
      throw std::invalid_argument("Beta shapes must be > 0");
    return ValuationDistribution(Kind::Beta, alpha, beta_shape);
  }

  Kind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  double beta_shape() const { return beta_; }
  bool is_uniform() const { return kind_ == Kind::Uniform; }

  // CDF, clamped to [0,1] outside the support.
  double cdf(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    if (kind_ == Kind::Uniform) return t;
    return regularized_incomplete_beta(alpha_, beta_, t);
  }

  double pdf(double t) const {
    if (t < 0.0 || t > 1.0) return 0.0;
    if (kind_ == Kind::Uniform) return 1.0;
    const double lb = detail::log_beta(alpha_, beta_);
    if (t == 0.0) return alpha_ < 1.0 ? HUGE_VAL : (alpha_ == 1.0 ? std::exp(-lb) : 0.0);
    if (t == 1.0) return beta_ < 1.0 ? HUGE_VAL : (beta_ == 1.0 ? std::exp(-lb) : 0.0);
    return std::exp((alpha_ - 1.0) * std::log(t) + (beta_ - 1.0) * std::log1p(-t) - lb);
  }

  std::string label() const {
    if (kind_ == Kind::Uniform) return "uniform";
    return "beta(" + std::to_string(alpha_) + "," + std::to_string(beta_) + ")";
  }

 private:
  ValuationDistribution(Kind k, double a, double b) : kind_(k), alpha_(a), beta_(b) {}

  Kind kind_;
  double alpha_;
  double beta_;
};

}  // namespace netadopt
