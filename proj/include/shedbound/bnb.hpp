#pragma once

#include <cmath>
#include <queue>
#include <stdexcept>

#include "shedbound/ops.hpp"

namespace shedbound {

struct BnbError : std::runtime_error {
  explicit BnbError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

struct BnbNode {
  std::vector<signed char> fix;  // -1 free, 0/1 fixed
  double bound;                  // parent relaxation objective (min form)
  long id;
};

struct BnbNodeOrder {
  bool operator()(const BnbNode& a, const BnbNode& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;  // best-first
    return a.id > b.id;                                // deterministic tie-break
  }
};

inline std::vector<std::pair<int, double>> fix_overrides(const OpsVariables& v,
                                                         const std::vector<signed char>& fix) {
  std::vector<std::pair<int, double>> ov;
  for (std::size_t l = 0; l < fix.size(); ++l) {
    if (fix[l] == 0) {
      ov.emplace_back(v.z_ub_row[l], 0.0);  // z <= 0
    } else if (fix[l] == 1) {
      ov.emplace_back(v.z_lb_row[l], 1.0);  // -z + 1 <= 0
    }
  }
  return ov;
}

}  // namespace detail

/// Best-first branch and bound over the z columns; node relaxations via the
/// embedded conic solver, branching on the most fractional status with ties
/// broken by larger effective risk. Serial and deterministic.
inline SwitchingDecision solve_soc_ops_global(const NetworkCase& c, const ScenarioInput& sc,
                                              OPSConfig cfg = {}) {
  if (cfg.relax_binaries)
    throw std::invalid_argument("solve_soc_ops_global requires relax_binaries = false");
  const OpsBuild build = build_soc_ops(c, sc, cfg);
  const int nl = static_cast<int>(c.lines().size());
  ConicSolver solver(build.program);
  const Eigen::VectorXd noparam;
  const BnbConfig& bc = cfg.bnb;

  double incumbent = std::numeric_limits<double>::infinity();  // min form
  std::vector<signed char> incumbent_fix;
  bool all_certified = true;

  auto solve_node = [&](const std::vector<signed char>& fix) {
    SolverSolution s =
        solver.solve(noparam, noparam, bc.node_tol, detail::fix_overrides(build.vars, fix));
    if (s.status != SolveStatus::optimal && s.status != SolveStatus::infeasible) {
      s = solver.solve(noparam, noparam, 1e-6, detail::fix_overrides(build.vars, fix));
      if (s.status != SolveStatus::optimal && s.status != SolveStatus::infeasible)
        all_certified = false;
    }
    return s;
  };

  // Rounding heuristic: fix to the rounded relaxation statuses and re-solve.
  auto try_round = [&](const Eigen::VectorXd& zrel) {
    std::vector<signed char> fix(nl);
    for (int l = 0; l < nl; ++l) fix[l] = zrel[l] >= 0.5 ? 1 : 0;
    const SolverSolution s = solve_node(fix);
    if (s.status == SolveStatus::optimal && s.objective < incumbent - 1e-12) {
      incumbent = s.objective;
      incumbent_fix = fix;
    }
  };

  std::priority_queue<detail::BnbNode, std::vector<detail::BnbNode>, detail::BnbNodeOrder> open;
  open.push({std::vector<signed char>(nl, -1), -std::numeric_limits<double>::infinity(), 0});
  long next_id = 1;
  int processed = 0;

  auto gap_closed = [&](double best_bound) {
    return incumbent - best_bound <= std::max(bc.abs_gap, bc.rel_gap * std::abs(best_bound));
  };

  double final_bound = -std::numeric_limits<double>::infinity();
  while (!open.empty()) {
    const detail::BnbNode node = open.top();  // smallest outstanding bound
    if (std::isfinite(incumbent) && gap_closed(node.bound)) {
      final_bound = node.bound;
      break;
    }
    open.pop();
    if (processed >= bc.max_nodes) {
      all_certified = false;
      final_bound = node.bound;
      break;
    }
    ++processed;

    const SolverSolution rel = solve_node(node.fix);
    if (rel.status == SolveStatus::infeasible) {
      if (processed == 1) throw BnbError("root relaxation infeasible");
      continue;
    }
    if (rel.status != SolveStatus::optimal) {
      // Unusable relaxation: branch blindly on the first free line.
      int l0 = -1;
      for (int l = 0; l < nl; ++l)
        if (node.fix[l] < 0) {
          l0 = l;
          break;
        }
      if (l0 < 0) continue;  // fully fixed and unsolvable; already flagged
      for (signed char b : {static_cast<signed char>(0), static_cast<signed char>(1)}) {
        detail::BnbNode child{node.fix, node.bound, next_id++};
        child.fix[l0] = b;
        open.push(std::move(child));
      }
      continue;
    }
    const double bound = rel.dual_objective;  // valid lower bound at node_tol
    if (bound >= incumbent - 1e-12) continue;  // dominated

    const Eigen::VectorXd zrel = rel.x.segment(build.vars.z0, nl);
    int branch_l = -1;
    double best_frac = -1.0;
    for (int l = 0; l < nl; ++l) {
      if (node.fix[l] >= 0) continue;
      const double frac = std::abs(zrel[l] - std::round(zrel[l]));
      if (frac <= bc.int_tol) continue;
      if (branch_l < 0 || frac > best_frac + 1e-12 ||
          (frac > best_frac - 1e-12 && build.risk_eff[l] > build.risk_eff[branch_l])) {
        branch_l = l;
        best_frac = std::max(best_frac, frac);
      }
    }
    if (branch_l < 0) {
      // Integral: candidate incumbent.
      if (rel.objective < incumbent - 1e-12) {
        incumbent = rel.objective;
        incumbent_fix.resize(nl);
        for (int l = 0; l < nl; ++l)
          incumbent_fix[l] = node.fix[l] >= 0 ? node.fix[l] : (zrel[l] >= 0.5 ? 1 : 0);
      }
      continue;
    }
    if (processed == 1 || processed % 64 == 0) try_round(zrel);
    for (signed char b : {static_cast<signed char>(0), static_cast<signed char>(1)}) {
      detail::BnbNode child{node.fix, bound, next_id++};
      child.fix[branch_l] = b;
      open.push(std::move(child));
    }
  }
  if (incumbent_fix.empty()) throw BnbError("no integral solution found");
  if (open.empty()) final_bound = incumbent;

  // Clean re-solve at the incumbent statuses for exact bookkeeping.
  const SolverSolution fin = solve_node(incumbent_fix);
  if (fin.status != SolveStatus::optimal) throw BnbError("incumbent re-solve failed");
  SwitchingDecision dec = decision_from_solution(build, sc, fin);
  for (int l = 0; l < nl; ++l) dec.z[l] = incumbent_fix[l];
  dec.risk = dec.z.dot(build.risk_eff);
  dec.objective =
      (1.0 - build.alpha) * dec.served_load / build.p_tot - build.alpha * dec.risk / build.r_tot;
  dec.nodes = processed;
  dec.gap = incumbent - final_bound;
  dec.certified = all_certified && std::isfinite(final_bound) && gap_closed(final_bound);
  dec.status = SolveStatus::optimal;
  return dec;
}

/// Continuous relaxation convenience wrapper.
inline SwitchingDecision solve_soc_ops_relaxed(const NetworkCase& c, const ScenarioInput& sc,
                                               OPSConfig cfg = {}) {
  cfg.relax_binaries = true;
  const OpsBuild build = build_soc_ops(c, sc, cfg);
  ConicSolver solver(build.program);
  const Eigen::VectorXd noparam;
  const SolverSolution sol = solver.solve(noparam, noparam, cfg.bnb.node_tol);
  SwitchingDecision dec = decision_from_solution(build, sc, sol);
  dec.certified = sol.status == SolveStatus::optimal;
  dec.gap = 0.0;
  return dec;
}

}  // namespace shedbound
