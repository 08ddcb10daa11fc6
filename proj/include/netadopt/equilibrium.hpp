#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "netadopt/dynamics.hpp"
#include "netadopt/model.hpp"

namespace netadopt {

constexpr double kMarginTol = 1e-9;       // normalized constraint-margin tolerance
constexpr double kMultiStartTol = 1e-6;   // pairwise endpoint agreement

// One inequality of a closed-form region row: satisfied iff slack >= 0.
// normalized = slack / (sum of |term| magnitudes), so the tolerance acts at a
// scale-free resolution regardless of the monetary units involved.
struct ConstraintMargin {
  std::string name;
  double slack = 0.0;
  double normalized = 0.0;

  bool satisfied() const { return normalized >= -kMarginTol; }
};

struct RegionCandidate {
  Region region = Region::A;
  AdoptionState point;
  std::vector<ConstraintMargin> margins;

  bool satisfied() const {
    return std::all_of(margins.begin(), margins.end(),
                       [](const ConstraintMargin& m) { return m.satisfied(); });
  }
  double worst_normalized() const {
    double w = std::numeric_limits<double>::infinity();
    for (const auto& m : margins) w = std::min(w, m.normalized);
    return w;
  }
};

// Raised when zero or multiple closed-form rows with distinct points are
// satisfied: a transcription or modelling bug, carrying the margin table.
class ModelInconsistencyError : public std::runtime_error {
 public:
  ModelInconsistencyError(std::string what, std::vector<RegionCandidate> table)
      : std::runtime_error(std::move(what)), candidates(std::move(table)) {}

  std::vector<RegionCandidate> candidates;
};

enum class SolveMethod { ClosedForm, FixedPoint };

struct Equilibrium {
  AdoptionState state;
  Region region = Region::A;
  SolveMethod method = SolveMethod::ClosedForm;
  double residual = 0.0;
  std::vector<RegionCandidate> constraint_report;  // closed form only
  StabilityReport stability;
  // multi-start certification
  bool unique_across_starts = true;
  double max_start_disagreement = 0.0;
  std::vector<AdoptionState> start_endpoints;
};

namespace detail {

inline ConstraintMargin margin_less(std::string name, double lhs, double rhs, double scale_extra = 0.0) {
  // constraint: lhs < rhs
  ConstraintMargin m;
  m.name = std::move(name);
  m.slack = rhs - lhs;
  const double scale = std::max(1.0, std::fabs(lhs) + std::fabs(rhs) + scale_extra);
  m.normalized = m.slack / scale;
  return m;
}

// All Table-row candidates with their constraint margins. eta = 0 keeps only
// the rows that survive the degenerate-bundle convention (d, f, g).
inline std::vector<RegionCandidate> closed_form_candidates(const ModelParams& mp) {
  const double q1 = mp.q1, q2 = mp.q2, g1 = mp.gamma1, g2 = mp.gamma2;
  const double eta = mp.eta, p = mp.p, dlt = mp.delta;
  const double S = mp.bundle_quality();
  const double C = (1.0 - eta) * (1.0 - eta) * g1 + eta * eta * g2;
  std::vector<RegionCandidate> out;

  if (eta > 0.0) {
    {  // a: (0, 1)
      RegionCandidate c;
      c.region = Region::A;
      c.point = {0.0, 1.0};
      c.margins.push_back(margin_less("p+delta < -(1-eta)^2 g1 - eta^2 g2", p + dlt, -C));
      c.margins.push_back(
          margin_less("delta < eta((1-eta) g1 - eta g2)", dlt, eta * ((1.0 - eta) * g1 - eta * g2)));
      out.push_back(std::move(c));
    }
    {  // b: full adoption split between the plans
      RegionCandidate c;
      c.region = Region::B;
      const double den = eta * (q1 - q2) - eta * eta * (g1 + g2);
      c.point = {(eta * ((1.0 - eta) * g1 - eta * g2) - dlt) / den,
                 (dlt - eta * g1 + eta * (q1 - q2)) / den};
      c.margins.push_back(margin_less("(eta(g1+g2)-q1+q2) p + g1 delta < -eta g1 g2 + (1-eta) g1 (q1-q2)",
                                      (eta * (g1 + g2) - q1 + q2) * p + g1 * dlt,
                                      -eta * g1 * g2 + (1.0 - eta) * g1 * (q1 - q2)));
      c.margins.push_back(margin_less("eta((1-eta) g1 - eta g2) < delta",
                                      eta * ((1.0 - eta) * g1 - eta * g2), dlt));
      c.margins.push_back(margin_less("delta < eta(g1 + q2 - q1)", dlt, eta * (g1 + q2 - q1)));
      out.push_back(std::move(c));
    }
    {  // c: interior equilibrium
      RegionCandidate c;
      c.region = Region::C;
      const double D = -g1 * q2 - eta * g1 * g2 + q1 * ((1.0 - eta) * g1 - eta * g2 + q1 - q2);
      const double x1 = (-eta * g2 * q1 + (1.0 - eta) * g1 * q2 +
                         p * (eta * g2 - (1.0 - eta) * g1 + q2 - q1) +
                         dlt * (-(1.0 - eta) * g1 - q1) / eta) /
                        D;
      const double x12 =
          (-g1 * q2 + q1 * (q1 - q2) + p * g1 + dlt * (g1 + q1) / eta) / D;
      c.point = {x1, x12};
      c.margins.push_back(margin_less(
          "p(eta g2 - (1-eta) g1 + q2 - q1) + delta(-(1-eta) g1 - q1)/eta < eta g2 q1 - (1-eta) g1 q2",
          p * (eta * g2 - (1.0 - eta) * g1 + q2 - q1) + dlt * (-(1.0 - eta) * g1 - q1) / eta,
          eta * g2 * q1 - (1.0 - eta) * g1 * q2));
      c.margins.push_back(margin_less("p g1 + delta(g1+q1)/eta < g1 q2 - q1(q1-q2)",
                                      p * g1 + dlt * (g1 + q1) / eta,
                                      g1 * q2 - q1 * (q1 - q2)));
      c.margins.push_back(margin_less(
          "p(eta g2 + eta g1 + q2 - q1) + delta g1 > -eta g1 g2 + (1-eta) g1 (q1-q2)",
          -eta * g1 * g2 + (1.0 - eta) * g1 * (q1 - q2),
          p * (eta * g2 + eta * g1 + q2 - q1) + dlt * g1));
      out.push_back(std::move(c));
    }
  }
  {  // d: base only
    RegionCandidate c;
    c.region = Region::D;
    c.point = {(q1 - p) / (q1 + g1), 0.0};
    c.margins.push_back(margin_less("-g1 < p", -g1, p));
    c.margins.push_back(margin_less("p < q1", p, q1));
    // at eta = 0 this reads delta >= 0, matching the degenerate-bundle rule
    c.margins.push_back(margin_less(
        "delta + eta g1 p/(q1+g1) > eta(q2 - q1 + g1 q1/(q1+g1))",
        eta * (q2 - q1 + g1 * q1 / (q1 + g1)), dlt + eta * g1 * p / (q1 + g1)));
    out.push_back(std::move(c));
  }
  if (eta > 0.0) {  // e: bundle only, partial adoption
    RegionCandidate c;
    c.region = Region::E;
    c.point = {0.0, (S - p - dlt) / (S + C)};
    c.margins.push_back(margin_less("-(1-eta)^2 g1 - eta^2 g2 < p+delta", -C, p + dlt));
    c.margins.push_back(margin_less("p+delta < (1-eta) q1 + eta q2", p + dlt, S));
    c.margins.push_back(margin_less(
        "eta(q2-q1-(1-eta) g1 + eta g2) p - (q1+(1-eta) g1) delta > eta^2 q1 g2 - eta(1-eta) g1 q2",
        eta * eta * q1 * g2 - eta * (1.0 - eta) * g1 * q2,
        eta * (q2 - q1 - (1.0 - eta) * g1 + eta * g2) * p - (q1 + (1.0 - eta) * g1) * dlt));
    out.push_back(std::move(c));
  }
  {  // f: full adoption on the base
    RegionCandidate c;
    c.region = Region::F;
    c.point = {1.0, 0.0};
    c.margins.push_back(margin_less("p < -g1", p, -g1));
    c.margins.push_back(margin_less("delta > eta(q2 + g1 - q1)", eta * (q2 + g1 - q1), dlt));
    out.push_back(std::move(c));
  }
  {  // g: no adoption
    RegionCandidate c;
    c.region = Region::G;
    c.point = {0.0, 0.0};
    c.margins.push_back(margin_less("p > q1", q1, p));
    c.margins.push_back(margin_less("p+delta > (1-eta) q1 + eta q2", S, p + dlt));
    out.push_back(std::move(c));
  }
  return out;
}

// Lean row cascade used by grid optimizers: first region (alphabetical order,
// closed inequalities) containing (p, delta); nullopt only if no row matches,
// which Thm-1-style coverage rules out away from float pathologies.
struct ClosedFormPoint {
  Region region;
  double x1;
  double x12;
};

inline std::optional<ClosedFormPoint> closed_form_point(double q1, double q2, double g1,
                                                        double g2, double eta, double p,
                                                        double dlt) {
  const double S = (1.0 - eta) * q1 + eta * q2;
  const double C = (1.0 - eta) * (1.0 - eta) * g1 + eta * eta * g2;
  if (eta > 0.0) {
    if (p + dlt <= -C && dlt <= eta * ((1.0 - eta) * g1 - eta * g2))
      return ClosedFormPoint{Region::A, 0.0, 1.0};
    if ((eta * (g1 + g2) - q1 + q2) * p + g1 * dlt <=
            -eta * g1 * g2 + (1.0 - eta) * g1 * (q1 - q2) &&
        eta * ((1.0 - eta) * g1 - eta * g2) <= dlt && dlt <= eta * (g1 + q2 - q1)) {
      const double den = eta * (q1 - q2) - eta * eta * (g1 + g2);
      return ClosedFormPoint{Region::B, (eta * ((1.0 - eta) * g1 - eta * g2) - dlt) / den,
                             (dlt - eta * g1 + eta * (q1 - q2)) / den};
    }
    if (p * (eta * g2 - (1.0 - eta) * g1 + q2 - q1) + dlt * (-(1.0 - eta) * g1 - q1) / eta <=
            eta * g2 * q1 - (1.0 - eta) * g1 * q2 &&
        p * g1 + dlt * (g1 + q1) / eta <= g1 * q2 - q1 * (q1 - q2) &&
        p * (eta * g2 + eta * g1 + q2 - q1) + dlt * g1 >=
            -eta * g1 * g2 + (1.0 - eta) * g1 * (q1 - q2)) {
      const double D = -g1 * q2 - eta * g1 * g2 + q1 * ((1.0 - eta) * g1 - eta * g2 + q1 - q2);
      return ClosedFormPoint{
          Region::C,
          (-eta * g2 * q1 + (1.0 - eta) * g1 * q2 + p * (eta * g2 - (1.0 - eta) * g1 + q2 - q1) +
           dlt * (-(1.0 - eta) * g1 - q1) / eta) /
              D,
          (-g1 * q2 + q1 * (q1 - q2) + p * g1 + dlt * (g1 + q1) / eta) / D};
    }
  } else if (dlt < 0.0) {
    return std::nullopt;  // degenerate bundle priced below the base
  }
  if (-g1 <= p && p <= q1 &&
      dlt + eta * g1 * p / (q1 + g1) >= eta * (q2 - q1 + g1 * q1 / (q1 + g1)))
    return ClosedFormPoint{Region::D, (q1 - p) / (q1 + g1), 0.0};
  if (eta > 0.0 && -C <= p + dlt && p + dlt <= S &&
      eta * (q2 - q1 - (1.0 - eta) * g1 + eta * g2) * p - (q1 + (1.0 - eta) * g1) * dlt >=
          eta * eta * q1 * g2 - eta * (1.0 - eta) * g1 * q2)
    return ClosedFormPoint{Region::E, 0.0, (S - p - dlt) / (S + C)};
  if (p <= -g1 && dlt >= eta * (q2 + g1 - q1)) return ClosedFormPoint{Region::F, 1.0, 0.0};
  if (p >= q1 && p + dlt >= S) return ClosedFormPoint{Region::G, 0.0, 0.0};
  return std::nullopt;
}

inline std::string margin_table_string(const std::vector<RegionCandidate>& table) {
  std::ostringstream os;
  for (const auto& c : table) {
    os << "  region " << region_letter(c.region) << " point=(" << c.point.x1 << ","
       << c.point.x12 << ")";
    for (const auto& m : c.margins)
      os << "\n    [" << (m.satisfied() ? "ok " : "violated") << "] " << m.name
         << "  slack=" << m.slack << " normalized=" << m.normalized;
    os << "\n";
  }
  return os.str();
}

inline const std::array<AdoptionState, 9>& simplex_starts() {
  static const std::array<AdoptionState, 9> starts = {{{0.0, 0.0},
                                                       {1.0, 0.0},
                                                       {0.0, 1.0},
                                                       {0.5, 0.0},
                                                       {0.0, 0.5},
                                                       {0.5, 0.5},
                                                       {1.0 / 3.0, 1.0 / 3.0},
                                                       {0.25, 0.25},
                                                       {0.1, 0.8}}};
  return starts;
}

}  // namespace detail

// Closed-form equilibrium for linear throughput and uniform theta: evaluates
// every Table row with its constraint predicates and returns the unique
// satisfied one. Rows satisfied jointly at a measure-zero boundary are
// accepted when their points coincide (alphabetically first label wins);
// genuinely distinct satisfied rows, or none, raise ModelInconsistencyError.
inline Equilibrium closed_form_equilibrium(const ModelParams& mp) {
  mp.validate();
  if (mp.eta == 0.0 && mp.delta < 0.0)
    throw std::domain_error(
        "eta = 0 with delta < 0: the degenerate bundle undercuts the base; "
        "no closed-form row applies");
  Equilibrium eq;
  eq.method = SolveMethod::ClosedForm;
  eq.constraint_report = detail::closed_form_candidates(mp);

  const RegionCandidate* chosen = nullptr;
  for (const auto& c : eq.constraint_report) {
    if (!c.satisfied()) continue;
    if (chosen == nullptr) {
      chosen = &c;
      continue;
    }
    const double dist = std::max(std::fabs(c.point.x1 - chosen->point.x1),
                                 std::fabs(c.point.x12 - chosen->point.x12));
    if (dist > 1e-8)
      throw ModelInconsistencyError(
          "multiple closed-form regions satisfied with distinct equilibria:\n" +
              detail::margin_table_string(eq.constraint_report),
          eq.constraint_report);
    // boundary tie with the same point: keep the alphabetically earlier label
  }
  if (chosen == nullptr)
    throw ModelInconsistencyError("no closed-form region satisfied:\n" +
                                      detail::margin_table_string(eq.constraint_report),
                                  eq.constraint_report);

  eq.state = chosen->point;
  eq.state.clamp_to_simplex();
  eq.region = chosen->region;
  const ThroughputModel t1 = ThroughputModel::linear(mp.gamma1);
  const ThroughputModel t2 = ThroughputModel::linear(mp.gamma2);
  const ValuationDistribution uni = ValuationDistribution::uniform();
  eq.residual = residual_norm(eq.state, mp, t1, t2, uni);
  eq.stability = jacobian(eq.state, mp, t1, t2, uni);
  return eq;
}

// General equilibrium solver: damped iteration x <- (1-lambda) x + lambda H(x)
// with lambda = 0.5 from (0.25, 0.25); falls back to the ODE on
// non-convergence. Uniqueness is certified by agreement across 9 simplex-grid
// starts; disagreement is reported in the result, never silently resolved.
inline Equilibrium solve_fixed_point(const ModelParams& mp, const ThroughputModel& t1,
                                     const ThroughputModel& t2,
                                     const ValuationDistribution& dist) {
  mp.validate();
  constexpr double lambda = 0.5;
  constexpr long max_iter = 100000;

  const auto solve_from = [&](AdoptionState x) -> AdoptionState {
    for (long it = 0; it < max_iter; ++it) {
      const Willingness h = willingness(x, mp, t1, t2, dist);
      if (std::max(std::fabs(h.h1 - x.x1), std::fabs(h.h12 - x.x12)) < kResidualTol) return x;
      x.x1 = (1.0 - lambda) * x.x1 + lambda * h.h1;
      x.x12 = (1.0 - lambda) * x.x12 + lambda * h.h12;
      if (!std::isfinite(x.x1) || !std::isfinite(x.x12))
        throw NumericalError("fixed-point iteration diverged");
    }
    Trajectory traj = integrate(x, mp, t1, t2, dist);
    if (!traj.converged) throw NumericalError("fixed point and ODE fallback both failed");
    return traj.back();
  };

  Equilibrium eq;
  eq.method = SolveMethod::FixedPoint;
  eq.state = solve_from({0.25, 0.25});
  for (const AdoptionState& s : detail::simplex_starts())
    eq.start_endpoints.push_back(solve_from(s));
  for (const AdoptionState& e : eq.start_endpoints) {
    eq.max_start_disagreement =
        std::max({eq.max_start_disagreement, std::fabs(e.x1 - eq.state.x1),
                  std::fabs(e.x12 - eq.state.x12)});
  }
  eq.unique_across_starts = eq.max_start_disagreement < kMultiStartTol;
  eq.region = classify_region(eq.state, mp, t1, t2);
  eq.residual = residual_norm(eq.state, mp, t1, t2, dist);
  eq.stability = jacobian(eq.state, mp, t1, t2, dist);
  return eq;
}

// Analytic bound R0 nu^2 / (8 (1 - nu)) on the error of approximating the
// log-Markov degradation by a linear one.
inline double lin_error_bound(double r0, double nu) {
  if (!(nu > 0.0 && nu < 1.0)) throw std::domain_error("nu must lie in (0,1)");
  return r0 * nu * nu / (8.0 * (1.0 - nu));
}

// Numeric companion to lin_error_bound: the largest deviation over x in (0,1)
// of the log-Markov curve from the linear degradation -gamma x whose slope is
// matched at x = 0.5 (a linear degradation must vanish at zero load).
inline double lin_error_scan(double r0, double nu, long grid = 200000) {
  if (!(nu > 0.0 && nu < 1.0)) throw std::domain_error("nu must lie in (0,1)");
  const ThroughputModel t = ThroughputModel::log_markov(r0, nu);
  const double slope = t.slope(0.5);
  double worst = 0.0;
  for (long i = 1; i <= grid; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(grid + 1);
    worst = std::max(worst, std::fabs(t(x) - slope * x));
  }
  return worst;
}

}  // namespace netadopt
