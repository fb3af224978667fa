#pragma once

#include <cmath>
#include <limits>
#include <optional>

#include "shedbound/conic_solver.hpp"
#include "shedbound/network.hpp"
#include "shedbound/program.hpp"
#include "shedbound/scenario.hpp"

namespace shedbound {

/// Per-line flow coefficients shared by the lifted (SOC) and polar (AC)
/// power-flow equations:
///   P_fr =  g_ff W_fr + c1 W_R + c2 W_I
///   Q_fr = -b_ff W_fr - c2 W_R + c1 W_I
///   P_to =  g_tt W_to + c3 W_R - c4 W_I
///   Q_to = -b_tt W_to - c4 W_R - c3 W_I
/// with W_R, W_I the real/imaginary parts of V_i V_j angle(theta_i-theta_j).
struct LineCoefs {
  double g_ff, b_ff, g_tt, b_tt, c1, c2, c3, c4;

  static LineCoefs of(const Line& l) {
    const double tm2 = l.tap_mag * l.tap_mag;
    LineCoefs c;
    c.g_ff = (l.g + l.g_fr) / tm2;
    c.b_ff = (l.b + l.b_fr) / tm2;
    c.g_tt = l.g + l.g_to;
    c.b_tt = l.b + l.b_to;
    c.c1 = (-l.g * l.tap_re + l.b * l.tap_im) / tm2;
    c.c2 = (-l.b * l.tap_re - l.g * l.tap_im) / tm2;
    c.c3 = (-l.g * l.tap_re - l.b * l.tap_im) / tm2;
    c.c4 = (-l.b * l.tap_re + l.g * l.tap_im) / tm2;
    return c;
  }
};

struct BnbConfig {
  int max_nodes = 50000;
  double abs_gap = 1e-6;
  double rel_gap = 1e-4;
  double int_tol = 1e-6;
  double node_tol = 1e-8;
};

struct OPSConfig {
  // NaN means "use the scenario's alpha" (the usual case for training data).
  double alpha = std::numeric_limits<double>::quiet_NaN();
  bool relax_binaries = false;
  BnbConfig bnb;
};

/// Column/row map of the assembled SOC-OPS program.
struct OpsVariables {
  int z0 = 0, xd0 = 0, xs0 = 0, pg0 = 0, qg0 = 0, wii0 = 0, ws0 = 0, wfr0 = 0;
  struct LineVars {
    int a_fr, one_fr, p_fr, q_fr;
    int a_to, one_to, p_to, q_to;
    int t, w_to, w_r, w_i;
  };
  std::vector<LineVars> line;
  std::vector<int> z_ub_row, z_lb_row;  // inequality rows carrying the z box

  int z(int l) const { return z0 + l; }
  int xd(int d) const { return xd0 + d; }
  int xs(int s) const { return xs0 + s; }
  int pg(int g) const { return pg0 + g; }
  int qg(int g) const { return qg0 + g; }
  int wii(int b) const { return wii0 + b; }
  int ws(int s) const { return ws0 + s; }
  int wfr(int l) const { return wfr0 + l; }
};

struct OpsBuild {
  ConicProgram program;
  OpsVariables vars;
  double alpha = 0.5;
  double p_tot = 0.0, r_tot = 0.0;
  Eigen::VectorXd risk_eff;  // per line, base risk times scenario multiplier
};

/// Problem 1 at a fixed numeric scenario: objective (1-alpha) served/p_tot
/// - alpha risk/r_tot negated into min form, constraints (2)-(13) plus the
/// lifted flow definitions and the McCormick shunt block. z columns carry
/// binary markers unless cfg.relax_binaries.
inline OpsBuild build_soc_ops(const NetworkCase& c, const ScenarioInput& sc,
                              const OPSConfig& cfg = {}) {
  const int nb = static_cast<int>(c.buses().size());
  const int nl = static_cast<int>(c.lines().size());
  const int nd = static_cast<int>(c.loads().size());
  const int ns = static_cast<int>(c.shunts().size());
  const int ng = static_cast<int>(c.gens().size());
  if (sc.p_d.size() != nd || sc.q_d.size() != nd || sc.r.size() != nl)
    throw DimensionError("scenario dimensions do not match case");
  const double alpha = std::isnan(cfg.alpha) ? sc.alpha : cfg.alpha;
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha outside [0,1]");

  ProgramBuilder pb(0, 0);
  OpsVariables v;
  v.line.resize(nl);

  v.z0 = pb.num_vars();
  for (int l = 0; l < nl; ++l) pb.add_var("z[" + std::to_string(l) + "]");
  v.xd0 = pb.num_vars();
  for (int d = 0; d < nd; ++d) pb.add_var("xd[" + std::to_string(d) + "]");
  v.xs0 = pb.num_vars();
  for (int s = 0; s < ns; ++s) pb.add_var("xs[" + std::to_string(s) + "]");
  v.pg0 = pb.num_vars();
  for (int g = 0; g < ng; ++g) pb.add_var("pg[" + std::to_string(g) + "]");
  v.qg0 = pb.num_vars();
  for (int g = 0; g < ng; ++g) pb.add_var("qg[" + std::to_string(g) + "]");
  v.wii0 = pb.num_vars();
  for (int b = 0; b < nb; ++b) pb.add_var("wii[" + std::to_string(b) + "]");
  v.ws0 = pb.num_vars();
  for (int s = 0; s < ns; ++s) pb.add_var("ws[" + std::to_string(s) + "]");
  v.wfr0 = pb.num_vars();
  for (int l = 0; l < nl; ++l) pb.add_var("wfr[" + std::to_string(l) + "]");
  for (int l = 0; l < nl; ++l) {
    const std::string i = std::to_string(l);
    auto& lv = v.line[l];
    lv.a_fr = pb.add_cone_block(ConeBlockType::rotated_soc,
                                {"thfr_a[" + i + "]", "thfr_c[" + i + "]",
                                 "pfr[" + i + "]", "qfr[" + i + "]"});
    lv.one_fr = lv.a_fr + 1;
    lv.p_fr = lv.a_fr + 2;
    lv.q_fr = lv.a_fr + 3;
    lv.a_to = pb.add_cone_block(ConeBlockType::rotated_soc,
                                {"thto_a[" + i + "]", "thto_c[" + i + "]",
                                 "pto[" + i + "]", "qto[" + i + "]"});
    lv.one_to = lv.a_to + 1;
    lv.p_to = lv.a_to + 2;
    lv.q_to = lv.a_to + 3;
    lv.t = pb.add_cone_block(ConeBlockType::rotated_soc,
                             {"wlink[" + i + "]", "wto[" + i + "]",
                              "wr[" + i + "]", "wi[" + i + "]"});
    lv.w_to = lv.t + 1;
    lv.w_r = lv.t + 2;
    lv.w_i = lv.t + 3;
  }
  if (!cfg.relax_binaries)
    for (int l = 0; l < nl; ++l) pb.mark_binary(v.z(l));

  // Objective, Eq. (1) negated.
  for (int d = 0; d < nd; ++d)
    pb.h_coef(v.xd(d), -(1.0 - alpha) * sc.p_d[d] / c.p_tot());
  Eigen::VectorXd risk_eff(nl);
  for (int l = 0; l < nl; ++l) {
    risk_eff[l] = c.lines()[l].risk * sc.r[l];
    pb.h_coef(v.z(l), alpha * risk_eff[l] / c.r_tot());
  }

  // Thermal cone links (7): a = T^2/2 z, companion coordinate fixed to one.
  for (int l = 0; l < nl; ++l) {
    const double t2h = 0.5 * c.lines()[l].thermal * c.lines()[l].thermal;
    for (const auto& [a, one] : {std::pair{v.line[l].a_fr, v.line[l].one_fr},
                                 std::pair{v.line[l].a_to, v.line[l].one_to}}) {
      int row = pb.add_eq_row();
      pb.A_coef(row, a, 1.0);
      pb.A_coef(row, v.z(l), -t2h);
      row = pb.add_eq_row();
      pb.A_coef(row, one, 1.0);
      pb.b_const(row, -1.0);
    }
  }
  // Rotated-cone link (13): 2 t w_to >= wr^2 + wi^2 with t = w_fr / 2.
  for (int l = 0; l < nl; ++l) {
    const int row = pb.add_eq_row();
    pb.A_coef(row, v.line[l].t, 1.0);
    pb.A_coef(row, v.wfr(l), -0.5);
  }
  // Lifted power-flow definitions (19).
  for (int l = 0; l < nl; ++l) {
    const LineCoefs lc = LineCoefs::of(c.lines()[l]);
    const auto& lv = v.line[l];
    int row = pb.add_eq_row();
    pb.A_coef(row, lv.p_fr, 1.0);
    pb.A_coef(row, v.wfr(l), -lc.g_ff);
    pb.A_coef(row, lv.w_r, -lc.c1);
    pb.A_coef(row, lv.w_i, -lc.c2);
    row = pb.add_eq_row();
    pb.A_coef(row, lv.q_fr, 1.0);
    pb.A_coef(row, v.wfr(l), lc.b_ff);
    pb.A_coef(row, lv.w_r, lc.c2);
    pb.A_coef(row, lv.w_i, -lc.c1);
    row = pb.add_eq_row();
    pb.A_coef(row, lv.p_to, 1.0);
    pb.A_coef(row, lv.w_to, -lc.g_tt);
    pb.A_coef(row, lv.w_r, -lc.c3);
    pb.A_coef(row, lv.w_i, lc.c4);
    row = pb.add_eq_row();
    pb.A_coef(row, lv.q_to, 1.0);
    pb.A_coef(row, lv.w_to, lc.b_tt);
    pb.A_coef(row, lv.w_r, lc.c4);
    pb.A_coef(row, lv.w_i, lc.c3);
  }
  // Nodal balance (5)-(6).
  for (int b = 0; b < nb; ++b) {
    const int prow = pb.add_eq_row();
    const int qrow = pb.add_eq_row();
    for (int g : c.gens_at(b)) {
      pb.A_coef(prow, v.pg(g), 1.0);
      pb.A_coef(qrow, v.qg(g), 1.0);
    }
    for (const auto& [l, from_side] : c.line_ends_at(b)) {
      pb.A_coef(prow, from_side ? v.line[l].p_fr : v.line[l].p_to, -1.0);
      pb.A_coef(qrow, from_side ? v.line[l].q_fr : v.line[l].q_to, -1.0);
    }
    for (int d : c.loads_at(b)) {
      pb.A_coef(prow, v.xd(d), -sc.p_d[d]);
      pb.A_coef(qrow, v.xd(d), -sc.q_d[d]);
    }
    for (int s : c.shunts_at(b)) {
      pb.A_coef(prow, v.ws(s), -c.shunts()[s].gs);
      pb.A_coef(qrow, v.ws(s), c.shunts()[s].bs);
    }
  }

  // Variable boxes (2)-(4), (8).
  for (int l = 0; l < nl; ++l) {
    int row = pb.add_ineq_row();
    pb.C_coef(row, v.z(l), 1.0);
    pb.d_const(row, -1.0);
    v.z_ub_row.push_back(row);
    row = pb.add_ineq_row();
    pb.C_coef(row, v.z(l), -1.0);
    v.z_lb_row.push_back(row);
  }
  for (int d = 0; d < nd; ++d) {
    int row = pb.add_ineq_row();
    pb.C_coef(row, v.xd(d), 1.0);
    pb.d_const(row, -1.0);
    row = pb.add_ineq_row();
    pb.C_coef(row, v.xd(d), -1.0);
  }
  for (int s = 0; s < ns; ++s) {
    int row = pb.add_ineq_row();
    pb.C_coef(row, v.xs(s), 1.0);
    pb.d_const(row, -1.0);
    row = pb.add_ineq_row();
    pb.C_coef(row, v.xs(s), -1.0);
  }
  for (int g = 0; g < ng; ++g) {
    int row = pb.add_ineq_row();
    pb.C_coef(row, v.pg(g), 1.0);
    pb.d_const(row, -c.gens()[g].p_max);
    row = pb.add_ineq_row();
    pb.C_coef(row, v.pg(g), -1.0);
    row = pb.add_ineq_row();
    pb.C_coef(row, v.qg(g), 1.0);
    pb.d_const(row, -c.gens()[g].q_max);
    row = pb.add_ineq_row();
    pb.C_coef(row, v.qg(g), -1.0);
    pb.d_const(row, c.gens()[g].q_min);
  }
  for (int b = 0; b < nb; ++b) {
    const Bus& bus = c.buses()[b];
    int row = pb.add_ineq_row();
    pb.C_coef(row, v.wii(b), 1.0);
    pb.d_const(row, -bus.v_max * bus.v_max);
    row = pb.add_ineq_row();
    pb.C_coef(row, v.wii(b), -1.0);
    pb.d_const(row, bus.v_min * bus.v_min);
  }
  // z-gated voltage boxes (9) and W-boxes (11), linking (10), angle (12).
  for (int l = 0; l < nl; ++l) {
    const Line& ln = c.lines()[l];
    const Bus& bi = c.buses()[c.bus_index(ln.from_bus)];
    const Bus& bj = c.buses()[c.bus_index(ln.to_bus)];
    const auto& lv = v.line[l];
    auto gated = [&](int var, double lo_coef, double hi_coef) {
      // lo_coef * z <= var <= hi_coef * z
      int row = pb.add_ineq_row();
      pb.C_coef(row, var, 1.0);
      pb.C_coef(row, v.z(l), -hi_coef);
      row = pb.add_ineq_row();
      pb.C_coef(row, var, -1.0);
      pb.C_coef(row, v.z(l), lo_coef);
    };
    gated(v.wfr(l), bi.v_min * bi.v_min, bi.v_max * bi.v_max);
    gated(lv.w_to, bj.v_min * bj.v_min, bj.v_max * bj.v_max);
    const WBox& wb = c.w_bounds(l);
    gated(lv.w_r, wb.wr_min, wb.wr_max);
    gated(lv.w_i, wb.wi_min, wb.wi_max);
    // (10): w_ii >= w_fr >= w_ii - vmax_i^2 (1-z); same for the to side.
    auto linked = [&](int var, int wii_col, double vmax2) {
      int row = pb.add_ineq_row();
      pb.C_coef(row, var, 1.0);
      pb.C_coef(row, wii_col, -1.0);
      row = pb.add_ineq_row();
      pb.C_coef(row, wii_col, 1.0);
      pb.C_coef(row, var, -1.0);
      pb.C_coef(row, v.z(l), vmax2);
      pb.d_const(row, -vmax2);
    };
    linked(v.wfr(l), v.wii(c.bus_index(ln.from_bus)), bi.v_max * bi.v_max);
    linked(lv.w_to, v.wii(c.bus_index(ln.to_bus)), bj.v_max * bj.v_max);
    // (12): tan(theta_min) w_r <= w_i <= tan(theta_max) w_r
    int row = pb.add_ineq_row();
    pb.C_coef(row, lv.w_i, 1.0);
    pb.C_coef(row, lv.w_r, -std::tan(ln.theta_max));
    row = pb.add_ineq_row();
    pb.C_coef(row, lv.w_i, -1.0);
    pb.C_coef(row, lv.w_r, std::tan(ln.theta_min));
  }
  // McCormick shunt block: ws in the hull of xs * w_ii.
  for (int s = 0; s < ns; ++s) {
    const int b = c.bus_index(c.shunts()[s].bus);
    const double vmax2 = c.buses()[b].v_max * c.buses()[b].v_max;
    int row = pb.add_ineq_row();
    pb.C_coef(row, v.ws(s), -1.0);
    row = pb.add_ineq_row();
    pb.C_coef(row, v.xs(s), vmax2);
    pb.C_coef(row, v.wii(b), 1.0);
    pb.C_coef(row, v.ws(s), -1.0);
    pb.d_const(row, -vmax2);
    row = pb.add_ineq_row();
    pb.C_coef(row, v.ws(s), 1.0);
    pb.C_coef(row, v.wii(b), -1.0);
    row = pb.add_ineq_row();
    pb.C_coef(row, v.ws(s), 1.0);
    pb.C_coef(row, v.xs(s), -vmax2);
  }

  OpsBuild out;
  out.program = pb.finish();
  out.vars = std::move(v);
  out.alpha = alpha;
  out.p_tot = c.p_tot();
  out.r_tot = c.r_tot();
  out.risk_eff = std::move(risk_eff);
  return out;
}

/// Continuous status plus bookkeeping for one OPS solution.
struct SwitchingDecision {
  Eigen::VectorXd z;
  double objective = 0.0;    // Eq. (1), max form
  double served_load = 0.0;  // sum x_d * p_d
  double risk = 0.0;         // sum z_l * risk_eff_l
  SolveStatus status = SolveStatus::numerical_failure;
  bool certified = false;
  double gap = std::numeric_limits<double>::infinity();
  int nodes = 0;
};

inline SwitchingDecision decision_from_solution(const OpsBuild& b, const ScenarioInput& sc,
                                                const SolverSolution& sol) {
  SwitchingDecision dec;
  const int nl = static_cast<int>(b.vars.line.size());
  const int nd = static_cast<int>(sc.p_d.size());
  dec.status = sol.status;
  if (sol.x.size() == 0) return dec;
  dec.z = sol.x.segment(b.vars.z0, nl);
  dec.served_load = 0.0;
  for (int d = 0; d < nd; ++d) dec.served_load += sol.x[b.vars.xd(d)] * sc.p_d[d];
  dec.risk = dec.z.dot(b.risk_eff);
  dec.objective = (1.0 - b.alpha) * dec.served_load / b.p_tot - b.alpha * dec.risk / b.r_tot;
  return dec;
}

}  // namespace shedbound
