#pragma once

#include <cmath>

#include "shedbound/conic_solver.hpp"
#include "shedbound/ops.hpp"
#include "shedbound/scenario.hpp"

namespace shedbound {

/// Modeling simplifications used when the program feeds the verifier
/// (each one relaxes, so every lower-bound guarantee survives).
struct RedispatchOptions {
  bool drop_angle_limits = false;  // drop the W_R/W_I angle rows
  bool ungated_thermal = false;    // thermal cone without the status factor
  bool simplified_shunt = false;   // 0 <= W_S <= W_ii instead of McCormick

  static RedispatchOptions verifier_defaults() { return {true, true, true}; }
};

struct RedispatchVariables {
  int xd0 = 0, xs0 = -1, pg0 = 0, qg0 = 0, wii0 = 0, ws0 = 0, wfr0 = 0;
  int wp0 = 0, wq0 = 0;  // served active/reactive power per load
  std::vector<OpsVariables::LineVars> line;

  int xd(int d) const { return xd0 + d; }
  int xs(int s) const { return xs0 + s; }
  int pg(int g) const { return pg0 + g; }
  int qg(int g) const { return qg0 + g; }
  int wii(int b) const { return wii0 + b; }
  int ws(int s) const { return ws0 + s; }
  int wfr(int l) const { return wfr0 + l; }
  int wp(int d) const { return wp0 + d; }
  int wq(int d) const { return wq0 + d; }
};

struct RedispatchBuild {
  ConicProgram program;
  RedispatchVariables vars;
  GammaLayout layout;
  RedispatchOptions options;
};

/// Parametric canonical form of the convexified redispatch: identical
/// physics to SOC-OPS with statuses as parameters L, objective Eq. (15).
/// Loads enter through served-power variables coupled to the shed fraction
/// by a McCormick hull over the gamma box (exact at the box corners), which
/// keeps A, C constant and b, d affine in (gamma, L).
inline RedispatchBuild build_soc_redispatch(const NetworkCase& c,
                                            const RedispatchOptions& opt = {}) {
  const int nb = static_cast<int>(c.buses().size());
  const int nl = static_cast<int>(c.lines().size());
  const int nd = static_cast<int>(c.loads().size());
  const int ns = static_cast<int>(c.shunts().size());
  const int ng = static_cast<int>(c.gens().size());
  const GammaLayout lay = GammaLayout::of(c);
  const GammaBox box = gamma_box(c);

  ProgramBuilder pb(lay.dim(), nl);
  RedispatchVariables v;
  v.line.resize(nl);

  v.xd0 = pb.num_vars();
  for (int d = 0; d < nd; ++d) pb.add_var("xd[" + std::to_string(d) + "]");
  v.wp0 = pb.num_vars();
  for (int d = 0; d < nd; ++d) pb.add_var("wp[" + std::to_string(d) + "]");
  v.wq0 = pb.num_vars();
  for (int d = 0; d < nd; ++d) pb.add_var("wq[" + std::to_string(d) + "]");
  if (!opt.simplified_shunt) {
    v.xs0 = pb.num_vars();
    for (int s = 0; s < ns; ++s) pb.add_var("xs[" + std::to_string(s) + "]");
  }
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

  // Objective Eq. (15): sum_d (gamma_P - wp) = offset - sum_d wp.
  for (int d = 0; d < nd; ++d) {
    pb.h_coef(v.wp(d), -1.0);
    pb.offset_gamma(lay.p_index(d), 1.0);
  }

  // Thermal cone links and companion coordinates.
  for (int l = 0; l < nl; ++l) {
    const double t2h = 0.5 * c.lines()[l].thermal * c.lines()[l].thermal;
    for (const auto& [a, one] : {std::pair{v.line[l].a_fr, v.line[l].one_fr},
                                 std::pair{v.line[l].a_to, v.line[l].one_to}}) {
      int row = pb.add_eq_row();
      pb.A_coef(row, a, 1.0);
      if (opt.ungated_thermal)
        pb.b_const(row, -t2h);
      else
        pb.b_L(row, l, -t2h);
      row = pb.add_eq_row();
      pb.A_coef(row, one, 1.0);
      pb.b_const(row, -1.0);
    }
  }
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
  // Nodal balance with served powers.
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
      pb.A_coef(prow, v.wp(d), -1.0);
      pb.A_coef(qrow, v.wq(d), -1.0);
    }
    for (int s : c.shunts_at(b)) {
      pb.A_coef(prow, v.ws(s), -c.shunts()[s].gs);
      pb.A_coef(qrow, v.ws(s), c.shunts()[s].bs);
    }
  }

  // Load coupling: wp in the McCormick hull of xd * gamma_P over
  // [0,1] x [plo, phi]; same for wq. Exact at the gamma-box corners.
  for (int d = 0; d < nd; ++d) {
    int row = pb.add_ineq_row();
    pb.C_coef(row, v.xd(d), 1.0);
    pb.d_const(row, -1.0);
    row = pb.add_ineq_row();
    pb.C_coef(row, v.xd(d), -1.0);
    auto hull = [&](int w, int gidx, double lo, double hi) {
      int r = pb.add_ineq_row();  // w >= lo * x
      pb.C_coef(r, v.xd(d), lo);
      pb.C_coef(r, w, -1.0);
      r = pb.add_ineq_row();  // w >= hi * x + gamma - hi
      pb.C_coef(r, v.xd(d), hi);
      pb.C_coef(r, w, -1.0);
      pb.d_gamma(r, gidx, 1.0);
      pb.d_const(r, -hi);
      r = pb.add_ineq_row();  // w <= hi * x
      pb.C_coef(r, w, 1.0);
      pb.C_coef(r, v.xd(d), -hi);
      r = pb.add_ineq_row();  // w <= lo * x + gamma - lo
      pb.C_coef(r, w, 1.0);
      pb.C_coef(r, v.xd(d), -lo);
      pb.d_gamma(r, gidx, -1.0);
      pb.d_const(r, lo);
    };
    hull(v.wp(d), lay.p_index(d), box.lo[lay.p_index(d)], box.hi[lay.p_index(d)]);
    hull(v.wq(d), lay.q_index(d), box.lo[lay.q_index(d)], box.hi[lay.q_index(d)]);
  }

  // Generator and voltage boxes.
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
  // Status-gated boxes and linking; statuses are the L parameters here.
  for (int l = 0; l < nl; ++l) {
    const Line& ln = c.lines()[l];
    const Bus& bi = c.buses()[c.bus_index(ln.from_bus)];
    const Bus& bj = c.buses()[c.bus_index(ln.to_bus)];
    const auto& lv = v.line[l];
    auto gated = [&](int var, double lo_coef, double hi_coef) {
      int row = pb.add_ineq_row();  // var <= hi_coef * L
      pb.C_coef(row, var, 1.0);
      pb.d_L(row, l, -hi_coef);
      row = pb.add_ineq_row();  // var >= lo_coef * L
      pb.C_coef(row, var, -1.0);
      pb.d_L(row, l, lo_coef);
    };
    gated(v.wfr(l), bi.v_min * bi.v_min, bi.v_max * bi.v_max);
    gated(lv.w_to, bj.v_min * bj.v_min, bj.v_max * bj.v_max);
    const WBox& wb = c.w_bounds(l);
    gated(lv.w_r, wb.wr_min, wb.wr_max);
    gated(lv.w_i, wb.wi_min, wb.wi_max);
    auto linked = [&](int var, int wii_col, double vmax2) {
      int row = pb.add_ineq_row();
      pb.C_coef(row, var, 1.0);
      pb.C_coef(row, wii_col, -1.0);
      row = pb.add_ineq_row();  // wii - vmax2 (1 - L) <= var
      pb.C_coef(row, wii_col, 1.0);
      pb.C_coef(row, var, -1.0);
      pb.d_L(row, l, vmax2);
      pb.d_const(row, -vmax2);
    };
    linked(v.wfr(l), v.wii(c.bus_index(ln.from_bus)), bi.v_max * bi.v_max);
    linked(lv.w_to, v.wii(c.bus_index(ln.to_bus)), bj.v_max * bj.v_max);
    if (!opt.drop_angle_limits) {
      int row = pb.add_ineq_row();
      pb.C_coef(row, lv.w_i, 1.0);
      pb.C_coef(row, lv.w_r, -std::tan(ln.theta_max));
      row = pb.add_ineq_row();
      pb.C_coef(row, lv.w_i, -1.0);
      pb.C_coef(row, lv.w_r, std::tan(ln.theta_min));
    }
  }
  // Shunt block.
  for (int s = 0; s < ns; ++s) {
    const int b = c.bus_index(c.shunts()[s].bus);
    const double vmax2 = c.buses()[b].v_max * c.buses()[b].v_max;
    if (opt.simplified_shunt) {
      int row = pb.add_ineq_row();
      pb.C_coef(row, v.ws(s), -1.0);
      row = pb.add_ineq_row();
      pb.C_coef(row, v.ws(s), 1.0);
      pb.C_coef(row, v.wii(b), -1.0);
    } else {
      int row = pb.add_ineq_row();
      pb.C_coef(row, v.xs(s), 1.0);
      pb.d_const(row, -1.0);
      row = pb.add_ineq_row();
      pb.C_coef(row, v.xs(s), -1.0);
      row = pb.add_ineq_row();
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
  }

  RedispatchBuild out;
  out.program = pb.finish();
  out.vars = std::move(v);
  out.layout = lay;
  out.options = opt;
  return out;
}

enum class ModelTag { I, II, III };

inline const char* to_string(ModelTag t) {
  switch (t) {
    case ModelTag::I: return "I";
    case ModelTag::II: return "II";
    case ModelTag::III: return "III";
  }
  return "?";
}

struct RedispatchResult {
  double shed = 0.0;      // sum (1 - x_d) gamma_P
  Eigen::VectorXd x_d;    // per-load served fraction
  Eigen::VectorXd pg, qg;
  SolveStatus status = SolveStatus::numerical_failure;
  ModelTag model_tag = ModelTag::I;
  Eigen::VectorXd statuses;  // the L (or z) the model was solved at
};

/// Solve the convexified redispatch at numeric (scenario, statuses).
/// Fractional statuses give Model I semantics, binary ones Model II.
inline RedispatchResult solve_soc_redispatch(const NetworkCase& c, const RedispatchBuild& build,
                                             const ScenarioInput& sc,
                                             const Eigen::VectorXd& statuses, double tol = 1e-8,
                                             ModelTag tag = ModelTag::I) {
  if (statuses.size() != static_cast<Eigen::Index>(c.lines().size()))
    throw DimensionError("status vector length mismatch");
  if (statuses.size() && (statuses.minCoeff() < -1e-12 || statuses.maxCoeff() > 1.0 + 1e-12))
    throw std::invalid_argument("statuses must lie in [0,1]");
  ConicSolver solver(build.program);
  const Eigen::VectorXd gvec = sc.to_vector();
  SolverSolution sol = solver.solve(gvec, statuses, tol);
  if (sol.status != SolveStatus::optimal && sol.status != SolveStatus::infeasible)
    sol = solver.solve(gvec, statuses, std::max(tol, 1e-6));

  RedispatchResult res;
  res.status = sol.status;
  res.model_tag = tag;
  res.statuses = statuses;
  if (sol.status != SolveStatus::optimal) return res;
  const int nd = static_cast<int>(c.loads().size());
  res.shed = sol.objective;
  res.x_d.resize(nd);
  for (int d = 0; d < nd; ++d) {
    const double gp = gvec[build.layout.p_index(d)];
    res.x_d[d] = gp > 1e-12 ? sol.x[build.vars.wp(d)] / gp : sol.x[build.vars.xd(d)];
  }
  const int ng = static_cast<int>(c.gens().size());
  res.pg.resize(ng);
  res.qg.resize(ng);
  for (int g = 0; g < ng; ++g) {
    res.pg[g] = sol.x[build.vars.pg(g)];
    res.qg[g] = sol.x[build.vars.qg(g)];
  }
  return res;
}

inline RedispatchResult solve_soc_redispatch(const NetworkCase& c, const ScenarioInput& sc,
                                             const Eigen::VectorXd& statuses, double tol = 1e-8,
                                             ModelTag tag = ModelTag::I,
                                             const RedispatchOptions& opt = {}) {
  return solve_soc_redispatch(c, build_soc_redispatch(c, opt), sc, statuses, tol, tag);
}

struct MismatchedResultsError : std::invalid_argument {
  explicit MismatchedResultsError(const std::string& what) : std::invalid_argument(what) {}
};

/// shed_III - shed_II; the relaxation lower-bounds the nonconvex minimum,
/// so the contract is a result >= -1e-6.
inline double shed_gap(const RedispatchResult& model_ii, const RedispatchResult& model_iii) {
  if (model_ii.statuses.size() != model_iii.statuses.size() ||
      (model_ii.statuses - model_iii.statuses).cwiseAbs().maxCoeff() > 1e-9)
    throw MismatchedResultsError("results were solved at different statuses");
  if (model_ii.status != SolveStatus::optimal || model_iii.status != SolveStatus::optimal)
    throw MismatchedResultsError("both results must be solved");
  return model_iii.shed - model_ii.shed;
}

}  // namespace shedbound
