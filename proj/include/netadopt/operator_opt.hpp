#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "netadopt/equilibrium.hpp"
#include "netadopt/model.hpp"

namespace netadopt {

// Qualities and congestion slopes without the operator's decision variables.
struct MarketShape {
  double q1 = 0.0;
  double q2 = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;

  void validate() const {
    if (!(q1 > 0.0) || !(q2 > q1)) throw std::invalid_argument("need q2 > q1 > 0");
    if (!(gamma1 > 0.0) || !(gamma2 > 0.0)) throw std::invalid_argument("need gamma > 0");
  }

  ModelParams with(double eta, double p, double delta, double rho = 1.0) const {
    return ModelParams{q1, q2, gamma1, gamma2, eta, p, delta, rho};
  }
};

struct CostParams {
  double c_wf = 0.0;  // marginal offloading savings per unit of (eta x12)
  double c_ap = 0.0;  // marginal deployment cost per unit coverage

  void validate() const {
    if (c_wf < 0.0 || c_ap < 0.0) throw std::invalid_argument("costs must be >= 0");
  }
};

struct CityProfile {
  std::string name;
  double marginal_3g_cost = 0.0;    // cents per MB at peak
  double population_density = 0.0;  // people per square mile
  double ap_coverage_area = 0.0;    // square miles per access point
  double ap_monthly_cost = 0.0;     // dollars per AP-month
  double peak_usage_mb = 0.0;       // per-user monthly peak-hour traffic
  double peak_wifi_ratio = 0.0;     // peak-hour WiFi access probability / overall

  void validate() const {
    if (!(marginal_3g_cost > 0.0 && population_density > 0.0 && ap_coverage_area > 0.0 &&
          ap_monthly_cost > 0.0 && peak_usage_mb > 0.0))
      throw std::invalid_argument("city profile fields must be > 0");
    if (!(peak_wifi_ratio > 0.0 && peak_wifi_ratio <= 1.0))
      throw std::invalid_argument("peak_wifi_ratio must lie in (0,1]");
  }
};

// Cost estimation from a city profile. The marginal 3G cost arrives in cents
// per MB while prices are carried in dollars, hence the /100.
inline CostParams estimate_costs(const CityProfile& profile) {
  profile.validate();
  CostParams c;
  c.c_wf = profile.marginal_3g_cost * profile.peak_wifi_ratio * profile.peak_usage_mb / 100.0;
  c.c_ap = profile.ap_monthly_cost / (profile.ap_coverage_area * profile.population_density);
  return c;
}

enum class Objective { Revenue, Profit };

struct OperatorDecision {
  double p_star = 0.0;
  double delta_star = 0.0;
  double eta_star = 0.0;
  AdoptionState adoption;        // certified equilibrium at (p*, delta*, eta*)
  Region region = Region::G;
  double objective_value = 0.0;
  Objective objective = Objective::Revenue;
  double residual = 0.0;
  // closed-form revenue maximization extras
  double table_v_x1 = 0.0;       // predicted adoption per the fixed-eta table
  double table_v_x12 = 0.0;
  double delta_max = 0.0;        // region e: upper end of the optimal price segment
};

inline double revenue(const ModelParams& mp, const Equilibrium& eq) {
  return mp.p * (eq.state.x1 + eq.state.x12) + mp.delta * eq.state.x12;
}

inline double profit(const ModelParams& mp, const Equilibrium& eq, const CostParams& costs) {
  return revenue(mp, eq) + costs.c_wf * mp.eta * eq.state.x12 - costs.c_ap * mp.eta;
}

// Some users adopt the base technology at the revenue-maximizing prices iff
// eta gamma2 / gamma1 > (1 - eta) q2 / q1.
inline bool condition_revmax_base_adopted(double q1, double q2, double gamma1, double gamma2,
                                          double eta) {
  return eta * gamma2 * q1 > (1.0 - eta) * gamma1 * q2;
}

// Per-region revenue-maximizing prices and revenues for fixed eta, including
// the branch footnotes. Rows with inequality-only optima carry the boundary
// representative; the revenue value is the row's exact optimum either way.
struct RevenueRow {
  Region region;
  double p_star;
  double delta_star;
  double revenue;
};

inline std::vector<RevenueRow> revenue_table_rows(const MarketShape& ms, double eta) {
  const double q1 = ms.q1, q2 = ms.q2, g1 = ms.gamma1, g2 = ms.gamma2;
  const double C = (1.0 - eta) * (1.0 - eta) * g1 + eta * eta * g2;
  const double S = (1.0 - eta) * q1 + eta * q2;
  std::vector<RevenueRow> rows;
  rows.push_back({Region::A, -(1.0 - eta) * g1, -C + (1.0 - eta) * g1, -C});
  if (2.0 * (1.0 - eta) * g1 - 2.0 * eta * g2 > q2 - q1) {
    const double pb = (1.0 - eta) * g1 * (-g1 + q1 - q2) / (eta * (g1 + g2) + q2 - q1);
    const double db = (1.0 - eta) * g1 - eta * g2;
    const double rb = (-eta * g1 * g2 + ((1.0 - eta) * (1.0 - eta) * g1 + eta * eta * g2) * (q1 - q2) -
                       eta * std::pow((1.0 - eta) * g1 - eta * g2, 2)) /
                      (eta * (g1 + g2) + q2 - q1);
    rows.push_back({Region::B, pb, db, rb});
  } else {
    const double pb = (-eta * g1 * g2 + (1.0 - eta / 2.0) * (q1 - q2)) /
                      (eta * (g1 + g2) - q1 + q2);
    const double db = eta * (q2 - q1) / 2.0;
    const double rb = (eta / 4.0 * (q1 - q2) * (q1 - q2) + (1.0 - eta) * g1 * (q1 - q2) -
                       eta * g1 * g2) /
                      (eta * (g1 + g2) + q2 - q1);
    rows.push_back({Region::B, pb, db, rb});
  }
  {
    const double rc = (q1 * q1 * eta * g2 + q2 * q2 * eta * g1 + q1 * q1 * (q2 - q1) +
                       eta * q1 * (q1 - q2) * (q1 - q2)) /
                      (4.0 * (g1 * q2 + eta * g1 * g2 +
                              q1 * (q2 - q1 + eta * g2 - (1.0 - eta) * g1)));
    rows.push_back({Region::C, q1 / 2.0, eta * (q2 - q1) / 2.0, rc});
  }
  rows.push_back({Region::D, q1 / 2.0,
                  eta * (q2 - q1 + g1 * q1 / (2.0 * (q1 + g1))), q1 * q1 / (4.0 * (q1 + g1))});
  {
    const double re = S * S / (4.0 * (S + C));
    rows.push_back({Region::E, q1 / 2.0, eta * (q2 - q1) / 2.0, re});
  }
  rows.push_back({Region::F, -g1, eta * (q2 + g1 - q1), -g1});
  rows.push_back({Region::G, q1 * 1.5, eta * (q2 - q1), 0.0});
  return rows;
}

// Revenue-maximizing prices for a fixed coverage factor. Happens to take the
// same representative (p*, delta*) = (q1/2, eta (q2 - q1)/2) in both branches:
// that point is the region-c row optimum when the base-adoption condition
// holds and lies on region e's optimal segment p + delta = S/2 otherwise.
inline OperatorDecision revenue_max_prices(const MarketShape& ms, double eta) {
  ms.validate();
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in [0,1]");
  const double q1 = ms.q1, q2 = ms.q2, g1 = ms.gamma1, g2 = ms.gamma2;
  OperatorDecision d;
  d.objective = Objective::Revenue;
  d.eta_star = eta;
  d.p_star = q1 / 2.0;
  d.delta_star = eta * (q2 - q1) / 2.0;

  const bool base_adopted = condition_revmax_base_adopted(q1, q2, g1, g2, eta);
  Region predicted;
  if (eta == 0.0) {
    predicted = Region::D;  // bundle degenerate; adopters are counted on the base
    d.objective_value = q1 * q1 / (4.0 * (q1 + g1));
    d.table_v_x1 = 0.0;
    d.table_v_x12 = q1 / (2.0 * (q1 + g1));
    d.delta_max = 0.0;
  } else if (base_adopted) {
    predicted = Region::C;
    const double D = -g1 * q2 - eta * g1 * g2 + q1 * ((1.0 - eta) * g1 - eta * g2 + q1 - q2);
    d.table_v_x1 = ((1.0 - eta) * g1 * q2 - eta * q1 * g2) / (2.0 * D);
    d.table_v_x12 = (-g1 * q2 + q1 * (q1 - q2)) / (2.0 * D);
    d.objective_value = (q1 * q1 * eta * g2 + q2 * q2 * eta * g1 + q1 * q1 * (q2 - q1) +
                         eta * q1 * (q1 - q2) * (q1 - q2)) /
                        (4.0 * (g1 * q2 + eta * g1 * g2 +
                                q1 * (q2 - q1 + eta * g2 - (1.0 - eta) * g1)));
    d.delta_max = d.delta_star;
  } else {
    predicted = Region::E;
    const double S = (1.0 - eta) * q1 + eta * q2;
    const double C = (1.0 - eta) * (1.0 - eta) * g1 + eta * eta * g2;
    d.table_v_x1 = 0.0;
    d.table_v_x12 = S / (2.0 * (S + C));
    d.objective_value = S * S / (4.0 * (S + C));
    // the whole segment p + delta = S/2 with delta <= delta_max is optimal
    d.delta_max = (eta * d.p_star * (q2 - q1 - (1.0 - eta) * g1 + eta * g2) -
                   (eta * eta * q1 * g2 - eta * (1.0 - eta) * g1 * q2)) /
                  (q1 + (1.0 - eta) * g1);
  }

  const Equilibrium eq = closed_form_equilibrium(ms.with(eta, d.p_star, d.delta_star));
  d.adoption = eq.state;
  d.region = eq.region;
  d.residual = eq.residual;
  const double split_err = std::max(std::fabs(eq.state.x1 - d.table_v_x1),
                                    std::fabs(eq.state.x12 - d.table_v_x12));
  if (eta == 0.0) {
    // the table attributes the eta = 0 segment to the bundle label; only the
    // totals and revenue are comparable
    const double tot_err = std::fabs((eq.state.x1 + eq.state.x12) - (d.table_v_x1 + d.table_v_x12));
    if (eq.region != predicted || tot_err > 1e-8)
      throw ModelInconsistencyError("revenue optimum certification failed at eta = 0", {});
  } else if (eq.region != predicted && split_err > 1e-8) {
    throw ModelInconsistencyError(
        "revenue optimum landed in region " + region_name(eq.region) + ", predicted " +
            region_name(predicted),
        {});
  }
  return d;
}

// Revenue maximization over prices and coverage. The optimum has eta* = 1 and
// partial adoption; a grid scan over eta in {0, 0.01, .., 1} cross-checks it.
inline OperatorDecision revenue_max_full(const MarketShape& ms) {
  OperatorDecision best = revenue_max_prices(ms, 1.0);
  for (int i = 0; i <= 100; ++i) {
    const double eta = static_cast<double>(i) / 100.0;
    const OperatorDecision d = revenue_max_prices(ms, eta);
    if (d.objective_value > best.objective_value + 1e-6)
      throw ModelInconsistencyError(
          "eta grid scan beat the closed-form revenue optimum at eta = " + std::to_string(eta),
          {});
  }
  return best;
}

enum class Tri { True, False, Inapplicable };

struct ConditionReport {
  Tri state = Tri::Inapplicable;
  double value = 0.0;            // the evaluated expression (sign carries the verdict)
  Region region = Region::G;     // region of the equilibrium at the given params
  double threshold_price = 0.0;  // only for the base-price condition
};

// Total adoption decreases with eta (at fixed prices) iff the equilibrium
// stays in region e and the expression below is negative.
inline ConditionReport condition_total_adoption_decreases(const ModelParams& mp) {
  const Equilibrium eq = closed_form_equilibrium(mp);
  ConditionReport r;
  r.region = eq.region;
  if (eq.region != Region::E) return r;
  const double q1 = mp.q1, q2 = mp.q2, g1 = mp.gamma1, g2 = mp.gamma2;
  const double eta = mp.eta, pd = mp.p + mp.delta;
  r.value = (1.0 - eta) * (1.0 - eta) * g1 * q1 + (1.0 - eta * eta) * g1 * q2 +
            pd * (q2 - q1 - 2.0 * (1.0 - eta) * g1) +
            eta * g2 * ((eta - 2.0) * q1 - eta * q2 + 2.0 * pd);
  r.state = r.value < 0.0 ? Tri::True : Tri::False;
  return r;
}

// Base adoption increases with its own price p iff the equilibrium stays in
// region c and q2 - q1 < (1 - eta) gamma1 - eta gamma2. Also reports the
// price at which region c hands over to region d (x12 hits zero).
inline ConditionReport condition_x1_increases_with_p(const ModelParams& mp) {
  const Equilibrium eq = closed_form_equilibrium(mp);
  ConditionReport r;
  r.region = eq.region;
  if (eq.region != Region::C) return r;
  const double q1 = mp.q1, q2 = mp.q2, g1 = mp.gamma1, g2 = mp.gamma2, eta = mp.eta;
  r.value = ((1.0 - eta) * g1 - eta * g2) - (q2 - q1);
  r.state = r.value > 0.0 ? Tri::True : Tri::False;
  r.threshold_price =
      q2 + q1 * (q2 - q1) / g1 - mp.delta * (g1 + q1) / (eta * g1);
  return r;
}

// Grid specification for the profit / revenue optimizer.
struct GridSpec {
  double p_min = 0.0, p_max = 0.0;
  double delta_min = 0.0, delta_max = 0.0;
  double eta_min = 0.0, eta_max = 1.0;
  int p_steps = 51;
  int delta_steps = 51;
  int eta_steps = 51;
  int refine_rounds = 3;

  static GridSpec defaults(const MarketShape& ms) {
    GridSpec g;
    g.p_min = -ms.gamma1 / 2.0;
    g.p_max = ms.q1;
    g.delta_min = -(ms.q2 - ms.q1) / 2.0;
    g.delta_max = ms.q2 - ms.q1;
    return g;
  }
};

namespace detail {

struct GridBest {
  double value = -std::numeric_limits<double>::infinity();
  double p = 0.0, d = 0.0, e = 0.0;
  AdoptionState x;
  Region region = Region::G;
  bool found = false;

  // maximize value; ties to the lexicographically smallest (p, delta, eta)
  void consider(double v, double pp, double dd, double ee, const AdoptionState& xx, Region rr) {
    if (!found || v > value ||
        (v == value && std::tie(pp, dd, ee) < std::tie(p, d, e))) {
      value = v;
      p = pp;
      d = dd;
      e = ee;
      x = xx;
      region = rr;
      found = true;
    }
  }
};

inline void scan_grid(const MarketShape& ms, const CostParams& costs, const GridSpec& g,
                      GridBest& best) {
  const auto axis = [](double lo, double hi, int n, int i) {
    return n <= 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  const int ne = g.eta_steps, np = g.p_steps, nd = g.delta_steps;
  const unsigned hw = std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
  const int nthreads = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(ne)));
  std::vector<GridBest> partial(nthreads);
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t]() {
      GridBest& local = partial[t];
      for (int ie = t; ie < ne; ie += nthreads) {
        const double eta = axis(g.eta_min, g.eta_max, ne, ie);
        for (int ip = 0; ip < np; ++ip) {
          const double p = axis(g.p_min, g.p_max, np, ip);
          for (int id = 0; id < nd; ++id) {
            const double dlt = axis(g.delta_min, g.delta_max, nd, id);
            const auto pt = closed_form_point(ms.q1, ms.q2, ms.gamma1, ms.gamma2, eta, p, dlt);
            if (!pt) continue;
            const double v = p * (pt->x1 + pt->x12) + dlt * pt->x12 +
                             costs.c_wf * eta * pt->x12 - costs.c_ap * eta;
            local.consider(v, p, dlt, eta, {pt->x1, pt->x12}, pt->region);
          }
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const GridBest& lb : partial)
    if (lb.found) best.consider(lb.value, lb.p, lb.d, lb.e, lb.x, lb.region);
}

}  // namespace detail

// Exhaustive grid search over (p, delta, eta) against the closed-form
// equilibrium map, then coordinate refinement: 3 rounds shrinking the grid
// 10x around the incumbent. Deterministic given the grid spec.
inline OperatorDecision optimize_profit(const MarketShape& ms, const CostParams& costs,
                                        GridSpec grid) {
  ms.validate();
  costs.validate();
  detail::GridBest best;
  detail::scan_grid(ms, costs, grid, best);
  if (!best.found) throw NumericalError("profit grid search found no feasible point");

  GridSpec g = grid;
  for (int round = 0; round < grid.refine_rounds; ++round) {
    const auto shrink = [&](double lo0, double hi0, double center, double& lo, double& hi) {
      const double span = (hi0 - lo0) / std::pow(10.0, round + 1);
      lo = std::max(lo0, center - span / 2.0);
      hi = std::min(hi0, center + span / 2.0);
    };
    GridSpec r = grid;
    shrink(grid.p_min, grid.p_max, best.p, r.p_min, r.p_max);
    shrink(grid.delta_min, grid.delta_max, best.d, r.delta_min, r.delta_max);
    if (grid.eta_steps > 1) shrink(grid.eta_min, grid.eta_max, best.e, r.eta_min, r.eta_max);
    detail::scan_grid(ms, costs, r, best);
    g = r;
  }

  OperatorDecision d;
  d.objective = Objective::Profit;
  d.p_star = best.p;
  d.delta_star = best.d;
  d.eta_star = best.e;
  d.adoption = best.x;
  d.region = best.region;
  d.objective_value = best.value;
  const Equilibrium eq = closed_form_equilibrium(ms.with(best.e, best.p, best.d));
  d.residual = eq.residual;
  return d;
}

inline OperatorDecision optimize_profit(const MarketShape& ms, const CostParams& costs) {
  return optimize_profit(ms, costs, GridSpec::defaults(ms));
}

}  // namespace netadopt
