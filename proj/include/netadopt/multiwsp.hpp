#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "netadopt/dynamics.hpp"
#include "netadopt/model.hpp"

namespace netadopt {

// Two providers: provider 1 sells the base (1) and the bundle (1+2),
// provider 2 sells a second base technology (3).
struct MultiParams {
  ModelParams base;
  double q3 = 0.0;
  double gamma3 = 0.0;
  double p3 = 0.0;

  void validate() const {
    base.validate();
    if (!(base.eta > 0.0)) throw std::invalid_argument("multi-provider model needs eta > 0");
    if (!(gamma3 > 0.0)) throw std::invalid_argument("gamma3 must be > 0");
    const double sq = base.bundle_quality();
    if (!(q3 > base.q1))
      throw std::invalid_argument(
          "q3 <= q1: relabel the providers (the (3,1) threshold becomes (1,3)) so that "
          "q1 < q3 holds");
    if (!(q3 < sq))
      throw std::invalid_argument(
          "q3 >= (1-eta) q1 + eta q2: relabel the bundle comparison (the (1+2,3) threshold "
          "becomes (3,1+2)) so that q3 < (1-eta) q1 + eta q2 holds");
  }
};

struct MultiState {
  double x1 = 0.0;
  double x12 = 0.0;
  double x3 = 0.0;

  bool valid(double slack = 0.0) const {
    return x1 >= -slack && x12 >= -slack && x3 >= -slack &&
           x1 + x12 + x3 <= 1.0 + slack;
  }

  void clamp_to_simplex() {
    x1 = std::max(x1, 0.0);
    x12 = std::max(x12, 0.0);
    x3 = std::max(x3, 0.0);
    const double s = x1 + x12 + x3;
    if (s > 1.0) {
      x1 /= s;
      x12 /= s;
      x3 /= s;
    }
  }
};

// Index order of the six pairwise thresholds.
enum MultiThresholdIndex {
  kTh_1_0 = 0,   // base 1 vs nothing
  kTh_12_1 = 1,  // bundle vs base 1
  kTh_12_0 = 2,  // bundle vs nothing
  kTh_3_0 = 3,   // base 3 vs nothing
  kTh_3_1 = 4,   // base 3 vs base 1
  kTh_12_3 = 5,  // bundle vs base 3
};

inline const char* multi_threshold_name(int i) {
  static const char* names[6] = {"(1,0)", "(1+2,1)", "(1+2,0)", "(3,0)", "(3,1)", "(1+2,3)"};
  return names[i];
}

inline std::array<double, 6> multi_thresholds(const MultiState& s, const MultiParams& mp) {
  const ModelParams& b = mp.base;
  const double t1 = -b.gamma1 * (s.x1 + (1.0 - b.eta) * s.x12);
  const double t2 = -b.gamma2 * (b.eta * s.x12);
  const double t3 = -mp.gamma3 * s.x3;
  const double sq = b.bundle_quality();
  std::array<double, 6> th{};
  th[kTh_1_0] = (b.p - t1) / b.q1;
  th[kTh_12_1] = (t2 - t1 - b.delta / b.eta) / (b.q1 - b.q2);
  th[kTh_12_0] = (-(1.0 - b.eta) * t1 - b.eta * t2 + b.p + b.delta) / sq;
  th[kTh_3_0] = (mp.p3 - t3) / mp.q3;
  th[kTh_3_1] = (t1 - t3 - b.p + mp.p3) / (mp.q3 - b.q1);
  th[kTh_12_3] = (t3 - (1.0 - b.eta) * t1 - b.eta * t2 + b.p + b.delta - mp.p3) / (sq - mp.q3);
  return th;
}

// Utilities of the four adoption choices (none, base 1, bundle, base 3).
inline std::array<double, 4> multi_utilities(double theta, const MultiState& s,
                                             const MultiParams& mp) {
  const ModelParams& b = mp.base;
  const double t1 = -b.gamma1 * (s.x1 + (1.0 - b.eta) * s.x12);
  const double t2 = -b.gamma2 * (b.eta * s.x12);
  const double t3 = -mp.gamma3 * s.x3;
  return {0.0, theta * b.q1 + t1 - b.p,
          (1.0 - b.eta) * (theta * b.q1 + t1) + b.eta * (theta * b.q2 + t2) -
              (b.p + b.delta),
          theta * mp.q3 + t3 - mp.p3};
}

struct MultiWillingness {
  double h1 = 0.0;
  double h12 = 0.0;
  double h3 = 0.0;
};

// Willingness by exact piecewise argmax: the four utilities are affine in
// theta, so the best choice is constant between consecutive projected
// thresholds; each subinterval is attributed by its midpoint.
inline MultiWillingness multi_willingness(const MultiState& s, const MultiParams& mp,
                                          const ValuationDistribution& dist) {
  const std::array<double, 6> th = multi_thresholds(s, mp);
  std::array<double, 8> bps{};
  int n = 0;
  bps[n++] = 0.0;
  bps[n++] = 1.0;
  for (double t : th)
    if (t > 0.0 && t < 1.0) bps[n++] = t;
  std::sort(bps.begin(), bps.begin() + n);
  MultiWillingness w;
  double cdf_lo = 0.0;  // dist.cdf(0)
  for (int i = 0; i + 1 < n; ++i) {
    const double a = bps[i], b = bps[i + 1];
    if (b - a <= 0.0) continue;
    const double cdf_hi = dist.cdf(b);
    const std::array<double, 4> u = multi_utilities((a + b) / 2.0, s, mp);
    int arg = 0;
    for (int k = 1; k < 4; ++k)
      if (u[k] > u[arg]) arg = k;
    const double mass = cdf_hi - cdf_lo;
    if (arg == 1) w.h1 += mass;
    else if (arg == 2) w.h12 += mass;
    else if (arg == 3) w.h3 += mass;
    cdf_lo = cdf_hi;
  }
  return w;
}

// The sign of a pairwise ordering: + when it matches the reference direction.
struct OrderingSigns {
  bool a = false;  // + iff th(1,0)  < th(1+2,0)
  bool b = false;  // + iff th(1,0)  < th(3,0)
  bool c = false;  // + iff th(3,0)  < th(1+2,0)
  bool d = false;  // + iff th(3,1)  < th(1+2,1)
};

struct OrderingFamily {
  int family_index = 0;                   // 1..8
  OrderingSigns signs;
  std::array<int, 6> resolved_sequence{};  // threshold indices, ascending value
};

// Classifies the threshold ordering into one of the 8 enumerated families and
// resolves the within-family interchangeable pairs by direct comparison.
inline OrderingFamily classify_ordering(const MultiState& s, const MultiParams& mp) {
  const std::array<double, 6> th = multi_thresholds(s, mp);
  const auto tied = [&](int i, int j) { return std::fabs(th[i] - th[j]) <= kTieTol; };
  if (tied(kTh_1_0, kTh_12_0) || tied(kTh_1_0, kTh_3_0) || tied(kTh_3_0, kTh_12_0) ||
      tied(kTh_3_1, kTh_12_1))
    throw std::domain_error("threshold tie: ordering family is not well defined here");

  OrderingFamily f;
  f.signs.a = th[kTh_1_0] < th[kTh_12_0];
  f.signs.b = th[kTh_1_0] < th[kTh_3_0];
  f.signs.c = th[kTh_3_0] < th[kTh_12_0];
  f.signs.d = th[kTh_3_1] < th[kTh_12_1];
  const OrderingSigns& g = f.signs;

  // dependency rules: opposite (a, b) force c; (a, b, c) mixed forces d
  if (g.a != g.b && g.c != g.a)
    throw std::logic_error("ordering (c) contradicts (a) and (b)");
  if (!(g.a == g.b && g.b == g.c) && g.d != g.c)
    throw std::logic_error("ordering (d) contradicts (a)-(c)");

  if (g.a && g.b && g.c)
    f.family_index = g.d ? 1 : 2;
  else if (g.a && g.b && !g.c)
    f.family_index = 3;  // d forced negative
  else if (!g.a && !g.b && !g.c)
    f.family_index = g.d ? 5 : 4;
  else if (!g.a && !g.b && g.c)
    f.family_index = 6;  // d forced positive
  else if (!g.a && g.b && !g.c)
    f.family_index = 7;  // d forced negative
  else                    // g.a && !g.b && g.c
    f.family_index = 8;  // d forced positive

  std::array<int, 6> order{0, 1, 2, 3, 4, 5};
  std::sort(order.begin(), order.end(), [&](int i, int j) { return th[i] < th[j]; });
  f.resolved_sequence = order;
  return f;
}

struct MultiEquilibrium {
  MultiState state;
  double residual = 0.0;
  bool converged = false;
  OrderingFamily family;
  // multi-start evidence; uniqueness is not guaranteed for this extension,
  // disagreement is surfaced rather than treated as an error
  bool starts_agree = true;
  double max_start_disagreement = 0.0;
  std::vector<MultiState> start_endpoints;
};

namespace detail {

inline const std::array<MultiState, 8>& multi_starts() {
  static const std::array<MultiState, 8> starts = {{{0.0, 0.0, 0.0},
                                                    {1.0, 0.0, 0.0},
                                                    {0.0, 1.0, 0.0},
                                                    {0.0, 0.0, 1.0},
                                                    {0.25, 0.25, 0.25},
                                                    {0.5, 0.5, 0.0},
                                                    {0.5, 0.0, 0.5},
                                                    {0.0, 0.5, 0.5}}};
  return starts;
}

}  // namespace detail

inline double multi_residual(const MultiState& x, const MultiParams& mp,
                             const ValuationDistribution& dist) {
  const MultiWillingness h = multi_willingness(x, mp, dist);
  return std::max({std::fabs(h.h1 - x.x1), std::fabs(h.h12 - x.x12), std::fabs(h.h3 - x.x3)});
}

// Integrates xdot_i = rho (H_i - x_i) for the three adoption fractions until
// the residual drops below kResidualTol, from 8 simplex starts.
inline MultiEquilibrium multi_equilibrium(const MultiParams& mp,
                                          const ValuationDistribution& dist,
                                          double horizon = 4000.0, double step = 0.0) {
  mp.validate();
  if (step <= 0.0) step = 0.05 / mp.base.rho;

  const auto f = [&](const MultiState& x) -> std::array<double, 3> {
    const MultiWillingness h = multi_willingness(x, mp, dist);
    return {mp.base.rho * (h.h1 - x.x1), mp.base.rho * (h.h12 - x.x12),
            mp.base.rho * (h.h3 - x.x3)};
  };
  const auto advance = [](const MultiState& x, const std::array<double, 3>& k, double h) {
    return MultiState{x.x1 + h * k[0], x.x12 + h * k[1], x.x3 + h * k[2]};
  };
  const auto solve_from = [&](MultiState x) -> std::pair<MultiState, bool> {
    const long nsteps = static_cast<long>(std::ceil(horizon / step));
    for (long i = 0; i < nsteps; ++i) {
      const auto k1 = f(x);
      const auto k2 = f(advance(x, k1, step / 2.0));
      const auto k3 = f(advance(x, k2, step / 2.0));
      const auto k4 = f(advance(x, k3, step));
      MultiState xn{x.x1 + step / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                    x.x12 + step / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
                    x.x3 + step / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])};
      if (!std::isfinite(xn.x1) || !std::isfinite(xn.x12) || !std::isfinite(xn.x3))
        throw NumericalError("multi-provider integration produced non-finite state");
      if (!xn.valid(1e-3)) throw NumericalError("multi-provider integration left the simplex");
      xn.clamp_to_simplex();
      x = xn;
      if (multi_residual(x, mp, dist) < kResidualTol) return {x, true};
    }
    return {x, false};
  };

  MultiEquilibrium eq;
  for (const MultiState& s : detail::multi_starts()) {
    const auto [end, ok] = solve_from(s);
    if (!ok) throw NumericalError("multi-provider dynamics did not converge within the horizon");
    eq.start_endpoints.push_back(end);
  }
  eq.state = eq.start_endpoints.front();
  for (const MultiState& e : eq.start_endpoints)
    eq.max_start_disagreement =
        std::max({eq.max_start_disagreement, std::fabs(e.x1 - eq.state.x1),
                  std::fabs(e.x12 - eq.state.x12), std::fabs(e.x3 - eq.state.x3)});
  eq.starts_agree = eq.max_start_disagreement < kMultiStartTol;
  eq.residual = multi_residual(eq.state, mp, dist);
  eq.converged = eq.residual < kResidualTol;
  try {
    eq.family = classify_ordering(eq.state, mp);
  } catch (const std::domain_error&) {
    eq.family.family_index = 0;  // tie at the equilibrium: family left unresolved
  }
  return eq;
}

}  // namespace netadopt
