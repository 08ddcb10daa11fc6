#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "netadopt/valuation.hpp"

namespace netadopt {

constexpr double kTieTol = 1e-9;  // threshold comparisons and region boundaries

inline double clamp01(double y) { return y < 0.0 ? 0.0 : (y > 1.0 ? 1.0 : y); }

// Exogenous market parameters.
//
// q1, q2   intrinsic qualities (monetary units), q2 > q1 > 0
// gamma1/2 linear throughput-degradation slopes, > 0
// eta      coverage factor in [0, 1]
// p        base access price; delta: bundle price increment (either may be
//          negative, i.e. subsidies)
// rho      hazard rate in (0, 1]
struct ModelParams {
  double q1 = 0.0;
  double q2 = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double eta = 0.0;
  double p = 0.0;
  double delta = 0.0;
  double rho = 1.0;

  void validate() const {
    if (!(q1 > 0.0)) throw std::invalid_argument("q1 must be > 0");
    if (!(q2 > q1)) throw std::invalid_argument("q2 must be > q1 (strict)");
    if (!(gamma1 > 0.0) || !(gamma2 > 0.0))
      throw std::invalid_argument("gamma1 and gamma2 must be > 0");
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in [0,1]");
    if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in (0,1]");
    if (!std::isfinite(p) || !std::isfinite(delta))
      throw std::invalid_argument("prices must be finite");
  }

  // quality of the bundle: (1-eta) q1 + eta q2
  double bundle_quality() const { return (1.0 - eta) * q1 + eta * q2; }
};

// A point on the adoption simplex: x1 adopts the base only, x12 the bundle.
struct AdoptionState {
  double x1 = 0.0;
  double x12 = 0.0;

  bool valid(double slack = 0.0) const {
    return x1 >= -slack && x12 >= -slack && x1 + x12 <= 1.0 + slack;
  }

  void clamp_to_simplex() {
    if (x1 < 0.0) x1 = 0.0;
    if (x12 < 0.0) x12 = 0.0;
    const double s = x1 + x12;
    if (s > 1.0) {
      x1 /= s;
      x12 /= s;
    }
  }
};

// Congestion externality T(x): utility loss as a function of traffic volume.
// Linear: T(x) = -gamma x. LogMarkov: T(x) = -R (1 + (1-nu x) ln(1-nu x)/(nu x)),
// the M/M/1-style expected-throughput shortfall relative to the uncongested
// rate; T(0) = 0 by the continuous limit, strictly decreasing, requires nu x < 1.
class ThroughputModel {
 public:
  enum class Kind { Linear, LogMarkov };

  static ThroughputModel linear(double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("linear slope must be > 0");
    return ThroughputModel(Kind::Linear, gamma, 0.0);
  }

  static ThroughputModel log_markov(double r0, double nu) {
    if (!(r0 > 0.0)) throw std::invalid_argument("log-Markov scale must be > 0");
    if (!(nu > 0.0 && nu < 1.0)) throw std::invalid_argument("load factor nu must lie in (0,1)");
    return ThroughputModel(Kind::LogMarkov, r0, nu);
  }

  Kind kind() const { return kind_; }
  bool is_linear() const { return kind_ == Kind::Linear; }
  double gamma() const { return a_; }  // Linear slope
  double r0() const { return a_; }     // LogMarkov scale
  double nu() const { return b_; }

  double operator()(double x) const {
    if (kind_ == Kind::Linear) return -a_ * x;
    if (x <= 0.0) return 0.0;
    const double u = b_ * x;
    if (u >= 1.0) throw std::domain_error("log-Markov throughput needs nu*x < 1");
    return -a_ * (1.0 + (1.0 - u) * std::log1p(-u) / u);
  }

  // d/dx T(x); steepest (most negative) at the right end of [0,1].
  double slope(double x) const {
    if (kind_ == Kind::Linear) return -a_;
    if (x <= 0.0) return -a_ * b_ / 2.0;
    const double u = b_ * x;
    if (u >= 1.0) throw std::domain_error("log-Markov throughput needs nu*x < 1");
    const double g = (-std::log1p(-u) - 1.0) / u - (1.0 - u) * std::log1p(-u) / (u * u);
    return -a_ * b_ * g;
  }

 private:
  ThroughputModel(Kind k, double a, double b) : kind_(k), a_(a), b_(b) {}

  Kind kind_;
  double a_;
  double b_;
};

// Valuation thresholds between adoption choices. Values can lie outside [0,1];
// projection onto [0,1] happens at the willingness step.
struct Thresholds {
  double theta_1_0 = 0.0;    // base vs nothing
  double theta_12_1 = 0.0;   // bundle vs base (+inf when eta = 0 and delta > 0)
  double theta_12_0 = 0.0;   // bundle vs nothing
  bool eta_degenerate = false;  // eta = 0: theta_12_1 has no finite formula
};

// Adoption regions of Table-style willingness classification.
enum class Region : int { A = 0, B, C, D, E, F, G };

inline char region_letter(Region r) { return static_cast<char>('a' + static_cast<int>(r)); }

inline std::string region_name(Region r) { return std::string(1, region_letter(r)); }

struct Willingness {
  double h1 = 0.0;
  double h12 = 0.0;
};

// Utilities of the base plan and the bundle for a user of type theta; the
// utility of non-adoption is 0.
inline std::pair<double, double> utilities(const AdoptionState& state, const ModelParams& mp,
                                           const ThroughputModel& t1, const ThroughputModel& t2,
                                           double theta) {
  const double load1 = state.x1 + (1.0 - mp.eta) * state.x12;
  const double tv1 = t1(load1);
  const double tv2 = t2(mp.eta * state.x12);
  const double u1 = theta * mp.q1 + tv1 - mp.p;
  const double u12 = (1.0 - mp.eta) * (theta * mp.q1 + tv1) +
                     mp.eta * (theta * mp.q2 + tv2) - (mp.p + mp.delta);
  return {u1, u12};
}

inline Thresholds thresholds(const AdoptionState& state, const ModelParams& mp,
                             const ThroughputModel& t1, const ThroughputModel& t2) {
  Thresholds th;
  const double load1 = state.x1 + (1.0 - mp.eta) * state.x12;
  const double tv1 = t1(load1);
  const double tv2 = t2(mp.eta * state.x12);
  const double sq = mp.bundle_quality();
  th.theta_1_0 = (mp.p - tv1) / mp.q1;
  if (mp.eta > 0.0) {
    th.theta_12_1 = (tv2 - tv1 - mp.delta / mp.eta) / (mp.q1 - mp.q2);
  } else {
    // bundle collapses onto the base: u12 = u1 - delta
    th.eta_degenerate = true;
    th.theta_12_1 = mp.delta >= 0.0 ? std::numeric_limits<double>::infinity()
                                    : -std::numeric_limits<double>::infinity();
  }
  th.theta_12_0 = (-(1.0 - mp.eta) * tv1 - mp.eta * tv2 + mp.p + mp.delta) / sq;
  return th;
}

// Fractions of the population willing to adopt the base plan / the bundle at
// the current adoption state. Projection onto [0,1] is applied before the CDF.
inline Willingness willingness(const AdoptionState& state, const ModelParams& mp,
                               const ThroughputModel& t1, const ThroughputModel& t2,
                               const ValuationDistribution& dist) {
  const Thresholds th = thresholds(state, mp, t1, t2);
  Willingness w;
  if (th.eta_degenerate) {
    // delta > 0: bundle strictly dominated; delta = 0: indifferent users are
    // counted on the base plan; delta < 0: the bundle is the cheaper identical
    // product and takes the whole segment.
    const double adopters = 1.0 - dist.cdf(clamp01(th.theta_1_0));
    if (mp.delta >= 0.0) {
      w.h1 = adopters;
      w.h12 = 0.0;
    } else {
      w.h1 = 0.0;
      w.h12 = adopters;
    }
    return w;
  }
  if (th.theta_1_0 < th.theta_12_0) {
    const double a = dist.cdf(clamp01(th.theta_1_0));
    const double b = dist.cdf(clamp01(th.theta_12_1));
    w.h1 = b - a;
    w.h12 = 1.0 - b;
  } else {
    w.h1 = 0.0;
    w.h12 = 1.0 - dist.cdf(clamp01(th.theta_12_0));
  }
  return w;
}

// Region classification per the threshold-ordering table. Boundary cases
// within kTieTol resolve to the alphabetically earliest matching label.
inline Region classify_region(const AdoptionState& state, const ModelParams& mp,
                              const ThroughputModel& t1, const ThroughputModel& t2) {
  const Thresholds th = thresholds(state, mp, t1, t2);
  const double t10 = th.theta_1_0;
  const double t121 = th.theta_12_1;
  const double t120 = th.theta_12_0;
  constexpr double tol = kTieTol;
  // a: both bundle thresholds below 0
  if (t121 < tol && t120 < tol) return Region::A;
  if (t10 < t120 + tol) {  // ordering t10 <= t120 <= t121
    if (t10 < tol && t121 <= 1.0 + tol) return Region::B;
    if (t10 >= -tol && t10 <= 1.0 + tol && t121 <= 1.0 + tol) return Region::C;
    if (t10 >= -tol && t10 <= 1.0 + tol && t121 > 1.0 - tol) return Region::D;
    if (t10 < tol && t121 > 1.0 - tol) return Region::F;
    if (t10 > 1.0 - tol) return Region::G;
  } else {  // ordering t121 <= t120 <= t10 (t120 < 0 was already caught by row a)
    if (t120 >= -tol && t120 <= 1.0 + tol) return Region::E;
    if (t120 > 1.0 - tol) return Region::G;
  }
  throw std::logic_error("region classification fell through (internal inconsistency)");
}

}  // namespace netadopt
