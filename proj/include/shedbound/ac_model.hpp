#pragma once

#include <array>
#include <functional>
#include <map>
#include <numeric>

#include "shedbound/optim.hpp"
#include "shedbound/redispatch.hpp"

namespace shedbound {

struct AcRedispatchConfig {
  int reference_bus = -1;  // bus id; -1 picks the lowest-id generator bus
  double feas_tol = 1e-6;
  double stat_tol = 1e-6;
  optim::AlmSettings alm;

  AcRedispatchConfig() {
    alm.feas_tol = feas_tol;
    alm.stat_tol = stat_tol;
    alm.inner.max_iters = 3000;
    alm.max_outer = 40;
  }
};

namespace detail {

/// Nonconvex AC feasibility-restoration model at fixed binary statuses.
/// De-energized lines carry no flow variables; buses in components without
/// generation are excluded with their loads shed up front. Inequalities
/// (thermal, big-M angle) are handled by bounded slacks.
class AcModel {
 public:
  AcModel(const NetworkCase& c, const ScenarioInput& sc, const Eigen::VectorXd& z,
          const AcRedispatchConfig& cfg)
      : c_(c), sc_(sc) {
    const int nb = static_cast<int>(c.buses().size());
    const int nl = static_cast<int>(c.lines().size());
    on_.assign(nl, false);
    for (int l = 0; l < nl; ++l) {
      const double zl = z[l];
      if (std::abs(zl - std::round(zl)) > 1e-9)
        throw std::invalid_argument("AC redispatch needs binary statuses");
      on_[l] = std::round(zl) == 1.0;
    }

    // Connected components over energized lines.
    comp_.assign(nb, -1);
    std::vector<int> parent(nb);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
      while (parent[a] != a) a = parent[a] = parent[parent[a]];
      return a;
    };
    for (int l = 0; l < nl; ++l) {
      if (!on_[l]) continue;
      const int a = find(c.bus_index(c.lines()[l].from_bus));
      const int b = find(c.bus_index(c.lines()[l].to_bus));
      if (a != b) parent[a] = b;
    }
    std::vector<char> comp_has_gen(nb, 0);
    for (const Generator& g : c.gens()) comp_has_gen[find(c.bus_index(g.bus))] = 1;
    alive_.assign(nb, false);
    for (int b = 0; b < nb; ++b) {
      comp_[b] = find(b);
      alive_[b] = comp_has_gen[comp_[b]] == 1;
    }

    // Reference bus per alive component: the configured bus when present,
    // otherwise the lowest-id generator bus of the component.
    std::map<int, int> ref_for_comp;
    for (const Generator& g : c.gens()) {
      const int b = c.bus_index(g.bus);
      auto it = ref_for_comp.find(comp_[b]);
      if (it == ref_for_comp.end() || c.buses()[b].id < c.buses()[it->second].id)
        ref_for_comp[comp_[b]] = b;
    }
    if (cfg.reference_bus >= 0) {
      const int rb = c.bus_index(cfg.reference_bus);
      if (alive_[rb]) ref_for_comp[comp_[rb]] = rb;
    }

    // --- variable layout ---
    auto add = [&](double init, double lo, double hi) {
      init_.push_back(init);
      lo_.push_back(lo);
      hi_.push_back(hi);
      return static_cast<int>(init_.size()) - 1;
    };
    const double inf = std::numeric_limits<double>::infinity();
    vV_.assign(nb, -1);
    vTh_.assign(nb, -1);
    for (int b = 0; b < nb; ++b) {
      if (!alive_[b]) continue;
      vV_[b] = add(1.0, c.buses()[b].v_min, c.buses()[b].v_max);
      const bool is_ref = ref_for_comp.at(comp_[b]) == b;
      vTh_[b] = add(0.0, is_ref ? 0.0 : -inf, is_ref ? 0.0 : inf);
    }
    const int nd = static_cast<int>(c.loads().size());
    vXd_.assign(nd, -1);
    for (int d = 0; d < nd; ++d)
      if (alive_[c.bus_index(c.loads()[d].bus)]) vXd_[d] = add(1.0, 0.0, 1.0);
    const int ns = static_cast<int>(c.shunts().size());
    vXs_.assign(ns, -1);
    for (int s = 0; s < ns; ++s)
      if (alive_[c.bus_index(c.shunts()[s].bus)]) vXs_[s] = add(1.0, 0.0, 1.0);
    const int ng = static_cast<int>(c.gens().size());
    vPg_.assign(ng, -1);
    vQg_.assign(ng, -1);
    // proportional start: component load share scaled by each unit's p_max
    std::map<int, double> comp_load, comp_pmax;
    for (int d = 0; d < nd; ++d) {
      const int b = c.bus_index(c.loads()[d].bus);
      if (alive_[b]) comp_load[comp_[b]] += sc.p_d[d];
    }
    for (const Generator& g : c.gens()) comp_pmax[comp_[c.bus_index(g.bus)]] += g.p_max;
    for (int g = 0; g < ng; ++g) {
      const Generator& gen = c.gens()[g];
      const int b = c.bus_index(gen.bus);
      const double share = comp_pmax[comp_[b]] > 0.0
                               ? comp_load[comp_[b]] * gen.p_max / comp_pmax[comp_[b]]
                               : 0.0;
      vPg_[g] = add(std::clamp(share, 0.0, gen.p_max), 0.0, gen.p_max);
      vQg_[g] = add(std::clamp(0.0, gen.q_min, gen.q_max), gen.q_min, gen.q_max);
    }
    vFlow_.assign(nl, {-1, -1, -1, -1});
    for (int l = 0; l < nl; ++l) {
      if (!on_[l]) continue;
      const LineCoefs lc = LineCoefs::of(c.lines()[l]);
      // flat-start flows
      vFlow_[l][0] = add(lc.g_ff + lc.c1, -inf, inf);   // P_fr at V=1, th=0
      vFlow_[l][1] = add(-lc.b_ff - lc.c2, -inf, inf);  // Q_fr
      vFlow_[l][2] = add(lc.g_tt + lc.c3, -inf, inf);   // P_to
      vFlow_[l][3] = add(-lc.b_tt - lc.c4, -inf, inf);  // Q_to
    }
    vThSlack_.assign(nl, {-1, -1});
    for (int l = 0; l < nl; ++l) {
      if (!on_[l]) continue;
      const double t2 = c.lines()[l].thermal * c.lines()[l].thermal;
      for (int dir = 0; dir < 2; ++dir) {
        const double p = init_[vFlow_[l][2 * dir]], q = init_[vFlow_[l][2 * dir + 1]];
        vThSlack_[l][dir] = add(std::clamp(t2 - p * p - q * q, 1e-3, t2), 0.0, t2);
      }
    }
    vAngSlack_.assign(nl, {-1, -1});
    for (int l = 0; l < nl; ++l) {
      const int bi = c.bus_index(c.lines()[l].from_bus);
      const int bj = c.bus_index(c.lines()[l].to_bus);
      if (!alive_[bi] || !alive_[bj]) continue;
      const double lim = angle_limit(l);
      vAngSlack_[l][0] = add(lim, 0.0, 2.0 * lim + 1.0);
      vAngSlack_[l][1] = add(lim, 0.0, 2.0 * lim + 1.0);
    }
    n_ = static_cast<int>(init_.size());

    // --- row layout ---
    m_ = 0;
    for (int l = 0; l < nl; ++l)
      if (on_[l]) m_ += 4;
    rowBalance0_ = m_;
    for (int b = 0; b < nb; ++b)
      if (alive_[b]) m_ += 2;
    rowThermal0_ = m_;
    for (int l = 0; l < nl; ++l)
      if (on_[l]) m_ += 2;
    rowAngle0_ = m_;
    for (int l = 0; l < nl; ++l)
      if (vAngSlack_[l][0] >= 0) m_ += 2;

    dead_shed_ = 0.0;
    for (int d = 0; d < nd; ++d)
      if (vXd_[d] < 0) dead_shed_ += sc.p_d[d];
  }

  int num_vars() const { return n_; }
  int num_rows() const { return m_; }
  double dead_shed() const { return dead_shed_; }

  Eigen::VectorXd initial_point() const {
    return Eigen::Map<const Eigen::VectorXd>(init_.data(), n_);
  }
  Eigen::VectorXd lower_bounds() const {
    return Eigen::Map<const Eigen::VectorXd>(lo_.data(), n_);
  }
  Eigen::VectorXd upper_bounds() const {
    return Eigen::Map<const Eigen::VectorXd>(hi_.data(), n_);
  }

  void project(Eigen::VectorXd& v) const {
    for (int i = 0; i < n_; ++i) v[i] = std::clamp(v[i], lo_[i], hi_[i]);
  }

  double objective(const Eigen::VectorXd& v, Eigen::VectorXd* grad) const {
    if (grad) grad->setZero(n_);
    double shed = dead_shed_;
    for (std::size_t d = 0; d < vXd_.size(); ++d) {
      if (vXd_[d] < 0) continue;
      shed += (1.0 - v[vXd_[d]]) * sc_.p_d[static_cast<Eigen::Index>(d)];
      if (grad) (*grad)[vXd_[d]] -= sc_.p_d[static_cast<Eigen::Index>(d)];
    }
    return shed;
  }

  void residuals(const Eigen::VectorXd& v, Eigen::VectorXd& r) const {
    r.setZero(m_);
    scan(v, &r, nullptr, nullptr);
  }

  void jac_t(const Eigen::VectorXd& v, const Eigen::VectorXd& w, Eigen::VectorXd& out) const {
    scan(v, nullptr, &w, &out);
  }

  /// Served fraction per load (dead loads 0).
  Eigen::VectorXd x_d(const Eigen::VectorXd& v) const {
    Eigen::VectorXd x(vXd_.size());
    for (std::size_t d = 0; d < vXd_.size(); ++d) x[d] = vXd_[d] >= 0 ? v[vXd_[d]] : 0.0;
    return x;
  }
  Eigen::VectorXd pg(const Eigen::VectorXd& v) const {
    Eigen::VectorXd x(vPg_.size());
    for (std::size_t g = 0; g < vPg_.size(); ++g) x[g] = v[vPg_[g]];
    return x;
  }
  Eigen::VectorXd qg(const Eigen::VectorXd& v) const {
    Eigen::VectorXd x(vQg_.size());
    for (std::size_t g = 0; g < vQg_.size(); ++g) x[g] = v[vQg_[g]];
    return x;
  }
  double voltage(const Eigen::VectorXd& v, int bus_idx) const {
    return vV_[bus_idx] >= 0 ? v[vV_[bus_idx]] : std::numeric_limits<double>::quiet_NaN();
  }
  double angle_slack_margin(const Eigen::VectorXd& v, int line) const {
    // slack of (18) in the solved point, minimal over the two sides
    const int bi = c_.bus_index(c_.lines()[line].from_bus);
    const int bj = c_.bus_index(c_.lines()[line].to_bus);
    if (vAngSlack_[line][0] < 0) return std::numeric_limits<double>::infinity();
    const double diff = v[vTh_[bi]] - v[vTh_[bj]];
    const double lim = angle_limit(line);
    return std::min(lim - diff, lim + diff);
  }
  bool line_on(int l) const { return on_[l]; }
  bool bus_alive(int b) const { return alive_[b]; }

 private:
  double angle_limit(int l) const {
    return c_.lines()[l].theta_max + (on_[l] ? 0.0 : c_.theta_delta_max());
  }

  /// One pass over all rows: fills residuals and/or accumulates J' w.
  void scan(const Eigen::VectorXd& v, Eigen::VectorXd* r, const Eigen::VectorXd* w,
            Eigen::VectorXd* jtw) const {
    if (jtw) jtw->setZero(n_);
    const int nb = static_cast<int>(c_.buses().size());
    const int nl = static_cast<int>(c_.lines().size());
    int row = 0;
    auto put = [&](int rr, double val) {
      if (r) (*r)[rr] = val;
    };
    auto acc = [&](int rr, int col, double deriv) {
      if (jtw) (*jtw)[col] += (*w)[rr] * deriv;
    };

    for (int l = 0; l < nl; ++l) {
      if (!on_[l]) continue;
      const Line& ln = c_.lines()[l];
      const LineCoefs lc = LineCoefs::of(ln);
      const int bi = c_.bus_index(ln.from_bus);
      const int bj = c_.bus_index(ln.to_bus);
      const double Vi = v[vV_[bi]], Vj = v[vV_[bj]];
      const double th = v[vTh_[bi]] - v[vTh_[bj]];
      const double cd = std::cos(th), sd = std::sin(th);
      const double K = Vi * Vj;
      const double pfr = lc.g_ff * Vi * Vi + (lc.c1 * cd + lc.c2 * sd) * K;
      const double qfr = -lc.b_ff * Vi * Vi + (-lc.c2 * cd + lc.c1 * sd) * K;
      const double pto = lc.g_tt * Vj * Vj + (lc.c3 * cd - lc.c4 * sd) * K;
      const double qto = -lc.b_tt * Vj * Vj + (-lc.c4 * cd - lc.c3 * sd) * K;

      struct Term {
        double val, dVi, dVj, dth;
        int var;
      };
      const Term terms[4] = {
          {pfr, 2.0 * lc.g_ff * Vi + (lc.c1 * cd + lc.c2 * sd) * Vj,
           (lc.c1 * cd + lc.c2 * sd) * Vi, K * (-lc.c1 * sd + lc.c2 * cd), vFlow_[l][0]},
          {qfr, -2.0 * lc.b_ff * Vi + (-lc.c2 * cd + lc.c1 * sd) * Vj,
           (-lc.c2 * cd + lc.c1 * sd) * Vi, K * (lc.c2 * sd + lc.c1 * cd), vFlow_[l][1]},
          {pto, (lc.c3 * cd - lc.c4 * sd) * Vj,
           2.0 * lc.g_tt * Vj + (lc.c3 * cd - lc.c4 * sd) * Vi,
           K * (-lc.c3 * sd - lc.c4 * cd), vFlow_[l][2]},
          {qto, (-lc.c4 * cd - lc.c3 * sd) * Vj,
           -2.0 * lc.b_tt * Vj + (-lc.c4 * cd - lc.c3 * sd) * Vi,
           K * (lc.c4 * sd - lc.c3 * cd), vFlow_[l][3]},
      };
      for (const Term& t : terms) {
        put(row, v[t.var] - t.val);
        acc(row, t.var, 1.0);
        acc(row, vV_[bi], -t.dVi);
        acc(row, vV_[bj], -t.dVj);
        acc(row, vTh_[bi], -t.dth);
        acc(row, vTh_[bj], t.dth);
        ++row;
      }
    }

    for (int b = 0; b < nb; ++b) {
      if (!alive_[b]) continue;
      const int prow = row++, qrow = row++;
      double pbal = 0.0, qbal = 0.0;
      for (int g : c_.gens_at(b)) {
        pbal += v[vPg_[g]];
        qbal += v[vQg_[g]];
        acc(prow, vPg_[g], 1.0);
        acc(qrow, vQg_[g], 1.0);
      }
      for (const auto& [l, from_side] : c_.line_ends_at(b)) {
        if (!on_[l]) continue;
        const int pvar = from_side ? vFlow_[l][0] : vFlow_[l][2];
        const int qvar = from_side ? vFlow_[l][1] : vFlow_[l][3];
        pbal -= v[pvar];
        qbal -= v[qvar];
        acc(prow, pvar, -1.0);
        acc(qrow, qvar, -1.0);
      }
      for (int d : c_.loads_at(b)) {
        pbal -= v[vXd_[d]] * sc_.p_d[d];
        qbal -= v[vXd_[d]] * sc_.q_d[d];
        acc(prow, vXd_[d], -sc_.p_d[d]);
        acc(qrow, vXd_[d], -sc_.q_d[d]);
      }
      const double Vb = v[vV_[b]];
      for (int s : c_.shunts_at(b)) {
        const Shunt& sh = c_.shunts()[s];
        const double xs = v[vXs_[s]];
        pbal -= sh.gs * Vb * Vb * xs;
        qbal += sh.bs * Vb * Vb * xs;
        acc(prow, vXs_[s], -sh.gs * Vb * Vb);
        acc(prow, vV_[b], -2.0 * sh.gs * Vb * xs);
        acc(qrow, vXs_[s], sh.bs * Vb * Vb);
        acc(qrow, vV_[b], 2.0 * sh.bs * Vb * xs);
      }
      put(prow, pbal);
      put(qrow, qbal);
    }

    for (int l = 0; l < nl; ++l) {
      if (!on_[l]) continue;
      const double t2 = c_.lines()[l].thermal * c_.lines()[l].thermal;
      for (int dir = 0; dir < 2; ++dir) {
        const double p = v[vFlow_[l][2 * dir]], q = v[vFlow_[l][2 * dir + 1]];
        put(row, p * p + q * q + v[vThSlack_[l][dir]] - t2);
        acc(row, vFlow_[l][2 * dir], 2.0 * p);
        acc(row, vFlow_[l][2 * dir + 1], 2.0 * q);
        acc(row, vThSlack_[l][dir], 1.0);
        ++row;
      }
    }

    for (int l = 0; l < nl; ++l) {
      if (vAngSlack_[l][0] < 0) continue;
      const int bi = c_.bus_index(c_.lines()[l].from_bus);
      const int bj = c_.bus_index(c_.lines()[l].to_bus);
      const double diff = v[vTh_[bi]] - v[vTh_[bj]];
      const double lim = angle_limit(l);
      put(row, diff + v[vAngSlack_[l][0]] - lim);
      acc(row, vTh_[bi], 1.0);
      acc(row, vTh_[bj], -1.0);
      acc(row, vAngSlack_[l][0], 1.0);
      ++row;
      put(row, diff - v[vAngSlack_[l][1]] + lim);
      acc(row, vTh_[bi], 1.0);
      acc(row, vTh_[bj], -1.0);
      acc(row, vAngSlack_[l][1], -1.0);
      ++row;
    }
  }

  const NetworkCase& c_;
  const ScenarioInput& sc_;
  std::vector<bool> on_;
  std::vector<bool> alive_;
  std::vector<int> comp_;
  std::vector<int> vV_, vTh_, vXd_, vXs_, vPg_, vQg_;
  std::vector<std::array<int, 4>> vFlow_;
  std::vector<std::array<int, 2>> vThSlack_, vAngSlack_;
  std::vector<double> init_, lo_, hi_;
  int n_ = 0, m_ = 0;
  int rowBalance0_ = 0, rowThermal0_ = 0, rowAngle0_ = 0;
  double dead_shed_ = 0.0;
};

}  // namespace detail

/// Model III: local solve of the nonconvex feasibility restoration from the
/// flat start. Contract: constraint residuals <= 1e-6 and scaled first-order
/// stationarity <= 1e-6; nonconvergence reports numerical_failure.
inline RedispatchResult solve_ac_redispatch(const NetworkCase& c, const ScenarioInput& sc,
                                            const Eigen::VectorXd& z,
                                            const AcRedispatchConfig& cfg = {}) {
  if (z.size() != static_cast<Eigen::Index>(c.lines().size()))
    throw DimensionError("status vector length mismatch");
  detail::AcModel model(c, sc, z, cfg);

  optim::AlmProblem prob;
  prob.n = model.num_vars();
  prob.m = model.num_rows();
  prob.objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
    return model.objective(v, g);
  };
  prob.constraints = [&](const Eigen::VectorXd& v, Eigen::VectorXd& r) {
    model.residuals(v, r);
  };
  Eigen::VectorXd scratch;
  prob.jac_t = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& w, Eigen::VectorXd& out) {
    model.jac_t(v, w, scratch);
    out += scratch;
  };
  prob.project = [&](Eigen::VectorXd& v) { model.project(v); };
  prob.lo = model.lower_bounds();
  prob.hi = model.upper_bounds();

  optim::AlmSettings st = cfg.alm;
  st.feas_tol = cfg.feas_tol;
  st.stat_tol = cfg.stat_tol;

  Eigen::VectorXd v = model.initial_point();
  const optim::AlmResult res = optim::alm_minimize(v, prob, st);

  RedispatchResult out;
  out.model_tag = ModelTag::III;
  out.statuses = z;
  out.x_d = model.x_d(v);
  out.pg = model.pg(v);
  out.qg = model.qg(v);
  out.shed = model.objective(v, nullptr);
  out.status = res.converged ? SolveStatus::optimal : SolveStatus::numerical_failure;
  return out;
}

}  // namespace shedbound
