#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "netadopt/model.hpp"
#include "netadopt/rng.hpp"

namespace netadopt {

constexpr double kResidualTol = 1e-9;

// Raised when an integration or solve produces non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<AdoptionState> states;
  bool converged = false;
  double final_residual = 0.0;

  const AdoptionState& back() const { return states.back(); }
};

inline double residual_norm(const AdoptionState& x, const ModelParams& mp,
                            const ThroughputModel& t1, const ThroughputModel& t2,
                            const ValuationDistribution& dist) {
  const Willingness h = willingness(x, mp, t1, t2, dist);
  return std::max(std::fabs(h.h1 - x.x1), std::fabs(h.h12 - x.x12));
}

// Classical 4th-order integration of xdot = rho (H(x) - x) with a fixed step.
// Early exit once ||H(x) - x||_inf < kResidualTol. States are projected back
// onto the simplex when round-off pushes them out by <= 1e-12; larger
// excursions indicate instability and raise NumericalError.
inline Trajectory integrate(const AdoptionState& x0, const ModelParams& mp,
                            const ThroughputModel& t1, const ThroughputModel& t2,
                            const ValuationDistribution& dist, double horizon,
                            double step) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be > 0");
  if (!(horizon >= step)) throw std::invalid_argument("horizon must be >= step");
  if (!x0.valid(1e-12)) throw std::invalid_argument("x0 outside the adoption simplex");

  const auto f = [&](const AdoptionState& x) -> std::array<double, 2> {
    const Willingness h = willingness(x, mp, t1, t2, dist);
    return {mp.rho * (h.h1 - x.x1), mp.rho * (h.h12 - x.x12)};
  };
  const auto advance = [](const AdoptionState& x, const std::array<double, 2>& k,
                          double h) -> AdoptionState {
    return {x.x1 + h * k[0], x.x12 + h * k[1]};
  };

  Trajectory traj;
  AdoptionState x = x0;
  x.clamp_to_simplex();
  double t = 0.0;
  traj.times.push_back(t);
  traj.states.push_back(x);

  const long nsteps = static_cast<long>(std::ceil(horizon / step));
  for (long i = 0; i < nsteps; ++i) {
    const auto k1 = f(x);
    const auto k2 = f(advance(x, k1, step / 2.0));
    const auto k3 = f(advance(x, k2, step / 2.0));
    const auto k4 = f(advance(x, k3, step));
    AdoptionState xn{x.x1 + step / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                     x.x12 + step / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])};
    if (!std::isfinite(xn.x1) || !std::isfinite(xn.x12))
      throw NumericalError("integration produced non-finite state");
    if (!xn.valid(1e-12)) {
      // a kink crossing can overshoot slightly more than round-off at large
      // steps; clamp but refuse gross excursions
      if (!xn.valid(1e-3)) throw NumericalError("integration left the simplex");
    }
    xn.clamp_to_simplex();
    x = xn;
    t += step;
    traj.times.push_back(t);
    traj.states.push_back(x);
    const double r = residual_norm(x, mp, t1, t2, dist);
    if (!std::isfinite(r)) throw NumericalError("non-finite residual");
    if (r < kResidualTol) {
      traj.converged = true;
      traj.final_residual = r;
      return traj;
    }
  }
  traj.final_residual = residual_norm(x, mp, t1, t2, dist);
  traj.converged = traj.final_residual < kResidualTol;
  return traj;
}

// integrate() with the default step 0.05/rho and horizon 2000.
inline Trajectory integrate(const AdoptionState& x0, const ModelParams& mp,
                            const ThroughputModel& t1, const ThroughputModel& t2,
                            const ValuationDistribution& dist) {
  return integrate(x0, mp, t1, t2, dist, 2000.0, 0.05 / mp.rho);
}

struct StabilityReport {
  std::array<std::array<double, 2>, 2> jacobian{};  // of f = rho (H(x) - x)
  std::array<std::complex<double>, 2> eigenvalues{};
  bool asymptotically_stable = false;
  Region region = Region::A;
  bool on_boundary = false;  // state within kTieTol of a region boundary
};

inline std::array<std::complex<double>, 2> eigenvalues_2x2(
    const std::array<std::array<double, 2>, 2>& m) {
  const double tr = m[0][0] + m[1][1];
  const double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr - 4.0 * det, 0.0));
  std::array<std::complex<double>, 2> ev{(tr + disc) / 2.0, (tr - disc) / 2.0};
  if (ev[0].real() > ev[1].real()) std::swap(ev[0], ev[1]);
  return ev;
}

namespace detail {

// d(H)/dx for the linear/uniform case, by region. With linear throughput the
// willingness map is affine within each region, so these are exact.
inline std::array<std::array<double, 2>, 2> willingness_jacobian_linear_uniform(
    Region r, const ModelParams& mp) {
  const double q1 = mp.q1, q2 = mp.q2, g1 = mp.gamma1, g2 = mp.gamma2, eta = mp.eta;
  const double sq = mp.bundle_quality();
  // threshold gradients
  const double a10_x1 = g1 / q1;
  const double a10_x12 = (1.0 - eta) * g1 / q1;
  const double a121_x1 = g1 / (q1 - q2);
  const double a121_x12 = (-eta * g2 + (1.0 - eta) * g1) / (q1 - q2);
  const double a120_x1 = (1.0 - eta) * g1 / sq;
  const double a120_x12 = ((1.0 - eta) * (1.0 - eta) * g1 + eta * eta * g2) / sq;
  switch (r) {
    case Region::B:
      return {{{a121_x1, a121_x12}, {-a121_x1, -a121_x12}}};
    case Region::C:
      return {{{a121_x1 - a10_x1, a121_x12 - a10_x12}, {-a121_x1, -a121_x12}}};
    case Region::D:
      return {{{-a10_x1, -a10_x12}, {0.0, 0.0}}};
    case Region::E:
      return {{{0.0, 0.0}, {-a120_x1, -a120_x12}}};
    case Region::A:
    case Region::F:
    case Region::G:
      return {{{0.0, 0.0}, {0.0, 0.0}}};
  }
  return {{{0.0, 0.0}, {0.0, 0.0}}};
}

inline bool near_boundary(const Thresholds& th) {
  const auto near = [](double v, double b) { return std::fabs(v - b) < kTieTol; };
  if (near(th.theta_1_0, 0.0) || near(th.theta_1_0, 1.0)) return true;
  if (!th.eta_degenerate && (near(th.theta_12_1, 0.0) || near(th.theta_12_1, 1.0))) return true;
  if (near(th.theta_12_0, 0.0) || near(th.theta_12_0, 1.0)) return true;
  if (std::fabs(th.theta_1_0 - th.theta_12_0) < kTieTol) return true;
  return false;
}

}  // namespace detail

// Jacobian of the dynamics at a state, with eigenvalues and a stability flag.
// Linear throughput + uniform theta uses the exact per-region affine form;
// otherwise central finite differences (h = 1e-6). On a region boundary the
// one-sided Jacobian of the classified region is returned, flagged.
inline StabilityReport jacobian(const AdoptionState& state, const ModelParams& mp,
                                const ThroughputModel& t1, const ThroughputModel& t2,
                                const ValuationDistribution& dist = ValuationDistribution::uniform()) {
  StabilityReport rep;
  rep.region = classify_region(state, mp, t1, t2);
  rep.on_boundary = detail::near_boundary(thresholds(state, mp, t1, t2));

  std::array<std::array<double, 2>, 2> dh{};
  if (t1.is_linear() && t2.is_linear() && dist.is_uniform() && mp.eta > 0.0) {
    dh = detail::willingness_jacobian_linear_uniform(rep.region, mp);
  } else {
    const double h = 1e-6;
    for (int j = 0; j < 2; ++j) {
      AdoptionState xp = state, xm = state;
      (j == 0 ? xp.x1 : xp.x12) += h;
      (j == 0 ? xm.x1 : xm.x12) -= h;
      const Willingness wp = willingness(xp, mp, t1, t2, dist);
      const Willingness wm = willingness(xm, mp, t1, t2, dist);
      dh[0][j] = (wp.h1 - wm.h1) / (2.0 * h);
      dh[1][j] = (wp.h12 - wm.h12) / (2.0 * h);
    }
  }
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      rep.jacobian[i][j] = mp.rho * (dh[i][j] - (i == j ? 1.0 : 0.0));
  rep.eigenvalues = eigenvalues_2x2(rep.jacobian);
  rep.asymptotically_stable =
      rep.eigenvalues[0].real() < 0.0 && rep.eigenvalues[1].real() < 0.0;
  return rep;
}

struct DivergenceReport {
  double max_divergence = -std::numeric_limits<double>::infinity();
  Region max_region = Region::A;
  long samples_evaluated = 0;
  bool all_negative = false;
};

// Samples interior states across the simplex and reports the maximum of
// div f = d(f1)/dx1 + d(f12)/dx12. Strictly negative divergence everywhere
// rules out periodic orbits (Bendixson).
inline DivergenceReport divergence_check(const ModelParams& mp, const ThroughputModel& t1,
                                         const ThroughputModel& t2, long samples,
                                         const ValuationDistribution& dist =
                                             ValuationDistribution::uniform(),
                                         std::uint64_t seed = 0x5eedu) {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  Rng rng(seed);
  DivergenceReport rep;
  for (long i = 0; i < samples; ++i) {
    AdoptionState x;
    do {
      x.x1 = rng.next_double();
      x.x12 = rng.next_double();
    } while (x.x1 + x.x12 > 1.0);
    const StabilityReport sr = jacobian(x, mp, t1, t2, dist);
    const double div = sr.jacobian[0][0] + sr.jacobian[1][1];
    if (div > rep.max_divergence) {
      rep.max_divergence = div;
      rep.max_region = sr.region;
    }
    ++rep.samples_evaluated;
  }
  rep.all_negative = rep.max_divergence < 0.0;
  return rep;
}

}  // namespace netadopt
