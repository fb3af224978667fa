#pragma once

#include <optional>

#include "shedbound/bnb.hpp"
#include "shedbound/ops.hpp"
#include "shedbound/rng.hpp"

namespace testsupport {

/// Exhaustive topology enumeration: solve the continuous SOC-OPS at every
/// binary z pattern and keep the best Eq.-1 value. The independent oracle
/// for branch-and-bound checks (only the fixed-z conic solves are shared).
struct EnumerationResult {
  double objective;  // max form
  Eigen::VectorXd z;
};

inline std::optional<EnumerationResult> enumerate_topologies(
    const shedbound::NetworkCase& c, const shedbound::ScenarioInput& sc,
    const shedbound::OPSConfig& cfg = {}, int max_off = -1) {
  using namespace shedbound;
  OPSConfig rcfg = cfg;
  rcfg.relax_binaries = true;  // z clamps below make the node binary anyway
  const OpsBuild build = build_soc_ops(c, sc, rcfg);
  ConicSolver solver(build.program);
  const int nl = static_cast<int>(c.lines().size());
  const Eigen::VectorXd noparam;

  std::optional<EnumerationResult> best;
  for (unsigned mask = 0; mask < (1u << nl); ++mask) {
    if (max_off >= 0 && nl - __builtin_popcount(mask) > max_off) continue;
    std::vector<std::pair<int, double>> ov;
    for (int l = 0; l < nl; ++l) {
      if (mask & (1u << l))
        ov.emplace_back(build.vars.z_lb_row[l], 1.0);  // z >= 1
      else
        ov.emplace_back(build.vars.z_ub_row[l], 0.0);  // z <= 0
    }
    SolverSolution sol = solver.solve(noparam, noparam, 1e-8, ov);
    if (sol.status != SolveStatus::optimal && sol.status != SolveStatus::infeasible)
      sol = solver.solve(noparam, noparam, 1e-6, ov);  // fixed-z faces have no interior
    if (sol.status != SolveStatus::optimal) continue;
    const SwitchingDecision dec = decision_from_solution(build, sc, sol);
    double obj = 0.0;
    Eigen::VectorXd z(nl);
    for (int l = 0; l < nl; ++l) z[l] = (mask & (1u << l)) ? 1.0 : 0.0;
    obj = (1.0 - build.alpha) * dec.served_load / build.p_tot -
          build.alpha * z.dot(build.risk_eff) / build.r_tot;
    if (!best || obj > best->objective) best = EnumerationResult{obj, z};
  }
  return best;
}

/// Random small connected grid for property tests (<= max_lines lines).
inline shedbound::CaseData random_grid(shedbound::Rng& rng, int max_buses = 5,
                                       int max_lines = 6) {
  using namespace shedbound;
  CaseData d;
  d.name = "random";
  const int nb = rng.uniform_int(2, max_buses);
  for (int b = 0; b < nb; ++b) d.buses.push_back({b + 1, 0.94, 1.06});

  // spanning tree plus extras
  int nl = 0;
  auto add_line = [&](int from, int to) {
    Line l;
    l.id = nl++;
    l.from_bus = from;
    l.to_bus = to;
    const double r = rng.uniform(0.01, 0.08);
    const double x = rng.uniform(0.05, 0.3);
    const double m2 = r * r + x * x;
    l.g = r / m2;
    l.b = -x / m2;
    l.g_fr = l.g_to = 0.0;
    l.b_fr = l.b_to = rng.uniform() < 0.3 ? rng.uniform(0.0, 0.02) : 0.0;
    if (rng.uniform() < 0.25) {
      const double ratio = rng.uniform(0.95, 1.05);
      l.tap_mag = ratio;
      l.tap_re = ratio;
      l.tap_im = 0.0;
    } else {
      l.tap_mag = l.tap_re = 1.0;
      l.tap_im = 0.0;
    }
    l.thermal = rng.uniform(0.4, 1.5);
    l.theta_max = 0.5235987755982988;
    l.theta_min = -l.theta_max;
    l.risk = rng.uniform(0.5, 3.0);
    d.lines.push_back(l);
  };
  for (int b = 2; b <= nb; ++b) add_line(rng.uniform_int(1, b - 1), b);
  while (nl < max_lines && rng.uniform() < 0.5) {
    const int a = rng.uniform_int(1, nb);
    int b = rng.uniform_int(1, nb);
    if (a == b) continue;
    add_line(std::min(a, b), std::max(a, b));
  }

  const int ngen = rng.uniform_int(1, std::max(1, nb / 2));
  for (int g = 0; g < ngen; ++g) {
    Generator gen;
    gen.bus = rng.uniform_int(1, nb);
    gen.p_max = rng.uniform(0.5, 2.5);
    gen.q_max = rng.uniform(0.2, 1.0);
    gen.q_min = -gen.q_max;
    d.gens.push_back(gen);
  }
  int nloads = 0;
  for (int b = 1; b <= nb; ++b) {
    if (rng.uniform() < 0.7) {
      Load ld;
      ld.bus = b;
      ld.p_base = rng.uniform(0.05, 0.5);
      ld.q_base = ld.p_base * rng.uniform(-0.3, 0.4);
      d.loads.push_back(ld);
      ++nloads;
    }
  }
  if (nloads == 0) {
    d.loads.push_back({1, 0.2, 0.04});
  }
  if (rng.uniform() < 0.3) d.shunts.push_back({rng.uniform_int(1, nb), 0.0, rng.uniform(0.0, 0.2)});
  return d;
}

}  // namespace testsupport
