#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>

namespace shedbound::optim {

struct SpgSettings {
  int max_iters = 4000;
  double tol = 1e-8;  // inf-norm of the projected gradient step
  double step_min = 1e-12;
  double step_max = 1e10;
  int memory = 10;
  double armijo = 1e-4;
};

struct SpgResult {
  double f = 0.0;
  double pg_norm = std::numeric_limits<double>::infinity();
  int iters = 0;
  bool converged = false;
};

/// Spectral projected gradient (Birgin–Martínez–Raydan): Barzilai–Borwein
/// steps with a nonmonotone Armijo line search over a projectable set.
inline SpgResult spg_minimize(Eigen::VectorXd& v,
                              const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& objective,
                              const std::function<void(Eigen::VectorXd&)>& project,
                              const SpgSettings& st = {}) {
  project(v);
  Eigen::VectorXd g(v.size()), gnew(v.size());
  double f = objective(v, &g);
  std::deque<double> recent{f};
  double step = 1.0;
  SpgResult out;

  for (int it = 0; it < st.max_iters; ++it) {
    Eigen::VectorXd trial = v - step * g;
    project(trial);
    Eigen::VectorXd d = trial - v;
    // stationarity measured with the unit-step projected gradient
    Eigen::VectorXd unit = v - g;
    project(unit);
    out.pg_norm = (unit - v).cwiseAbs().maxCoeff();
    out.iters = it;
    if (out.pg_norm <= st.tol) {
      out.converged = true;
      break;
    }
    const double gd = g.dot(d);
    if (gd > -1e-18 || d.cwiseAbs().maxCoeff() < 1e-16) {
      // no usable descent along the projected arc; try the raw unit step
      d = unit - v;
      if (d.cwiseAbs().maxCoeff() < 1e-16) {
        out.converged = out.pg_norm <= st.tol;
        break;
      }
    }
    const double fref = *std::max_element(recent.begin(), recent.end());
    double alpha = 1.0;
    double fnew = 0.0;
    Eigen::VectorXd vnew;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      vnew = v + alpha * d;
      fnew = objective(vnew, &gnew);
      if (fnew <= fref + st.armijo * alpha * g.dot(d) || fnew < f - 1e-16) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd s = vnew - v;
    const Eigen::VectorXd y = gnew - g;
    const double sy = s.dot(y);
    step = sy > 1e-16 ? std::clamp(s.squaredNorm() / sy, st.step_min, st.step_max)
                      : st.step_max;
    v = std::move(vnew);
    f = fnew;
    g = gnew;
    recent.push_back(f);
    if (static_cast<int>(recent.size()) > st.memory) recent.pop_front();
  }
  out.f = f;
  return out;
}

struct TnSettings {
  int max_iters = 200;
  double tol = 1e-8;
  int cg_max = 120;
  double armijo = 1e-4;
};

/// Truncated-Newton with bounds: CG on the free variables using
/// finite-difference Hessian-vector products, projected Armijo line search,
/// spectral-gradient fallback steps.
inline SpgResult tn_minimize(Eigen::VectorXd& v,
                             const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& objective,
                             const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                             const TnSettings& st = {}) {
  const int n = static_cast<int>(v.size());
  auto project = [&](Eigen::VectorXd& x) {
    for (int i = 0; i < n; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
  };
  project(v);
  Eigen::VectorXd g(n), gtmp(n);
  double f = objective(v, &g);
  SpgResult out;
  double bb = 1.0;

  for (int it = 0; it < st.max_iters; ++it) {
    Eigen::VectorXd probe = v - g;
    project(probe);
    out.pg_norm = (probe - v).cwiseAbs().maxCoeff();
    out.iters = it;
    if (out.pg_norm <= st.tol) {
      out.converged = true;
      break;
    }

    // Active bounds: pinned coordinates leave the CG subspace.
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(n);
    for (int i = 0; i < n; ++i) {
      const double eps = 1e-10 * (1.0 + std::abs(v[i]));
      if ((v[i] <= lo[i] + eps && g[i] > 0.0) || (v[i] >= hi[i] - eps && g[i] < 0.0))
        mask[i] = 0.0;
    }
    const Eigen::VectorXd gm = g.cwiseProduct(mask);
    const double gnorm = gm.norm();

    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    if (gnorm > 0.0) {
      // CG on H d = -g restricted to free coordinates.
      auto hvec = [&](const Eigen::VectorXd& u, Eigen::VectorXd& hu) {
        const double un = u.cwiseAbs().maxCoeff();
        const double h = 1e-7 * (1.0 + v.cwiseAbs().maxCoeff()) / std::max(1e-12, un);
        const Eigen::VectorXd vp = v + h * u;
        objective(vp, &gtmp);
        hu = ((gtmp - g) / h).cwiseProduct(mask);
      };
      Eigen::VectorXd r = -gm;
      Eigen::VectorXd p = r;
      Eigen::VectorXd hp(n);
      double rr = r.squaredNorm();
      const double cg_tol = std::max(1e-10, std::min(0.1, std::sqrt(gnorm)) * gnorm);
      for (int cg = 0; cg < st.cg_max && std::sqrt(rr) > cg_tol; ++cg) {
        hvec(p, hp);
        const double php = p.dot(hp);
        if (php <= 1e-14 * p.squaredNorm()) {
          if (cg == 0) d = r;  // negative curvature at once: steepest descent
          break;
        }
        const double step = rr / php;
        d += step * p;
        r -= step * hp;
        const double rr_new = r.squaredNorm();
        p = r + (rr_new / rr) * p;
        rr = rr_new;
      }
      if (d.cwiseAbs().maxCoeff() == 0.0) d = -gm;
    }

    double m = g.dot(d);
    if (m > -1e-18) {
      d = probe - v;  // projected-gradient fallback direction
      m = g.dot(d);
      if (m > -1e-18) {
        out.converged = out.pg_norm <= st.tol;
        break;
      }
    }
    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd vnew;
    double fnew = 0.0;
    for (int ls = 0; ls < 40; ++ls) {
      vnew = v + alpha * d;
      project(vnew);
      fnew = objective(vnew, &gtmp);
      if (fnew <= f + st.armijo * g.dot(vnew - v) || fnew < f - 1e-16) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // spectral fallback step
      vnew = v - bb * g;
      project(vnew);
      fnew = objective(vnew, &gtmp);
      if (fnew >= f) break;
    }
    const Eigen::VectorXd s = vnew - v;
    const Eigen::VectorXd y = gtmp - g;
    const double sy = s.dot(y);
    if (sy > 1e-16) bb = std::clamp(s.squaredNorm() / sy, 1e-12, 1e10);
    v = std::move(vnew);
    f = fnew;
    g = gtmp;
  }
  out.f = f;
  return out;
}

struct AlmProblem {
  int n = 0;  // variables
  int m = 0;  // equality constraints
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)> objective;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> constraints;
  // out += J(v)' * w
  std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&, Eigen::VectorXd&)> jac_t;
  std::function<void(Eigen::VectorXd&)> project;
  // When the feasible set is a plain box, set these to enable the
  // truncated-Newton inner solver; otherwise SPG runs on `project`.
  Eigen::VectorXd lo, hi;
};

struct AlmSettings {
  double feas_tol = 1e-6;
  double stat_tol = 1e-6;
  double rho0 = 10.0;
  double rho_max = 1e12;
  int max_outer = 40;
  SpgSettings inner;
  TnSettings newton;
};

struct AlmResult {
  bool converged = false;
  double objective = 0.0;
  double feas_inf = std::numeric_limits<double>::infinity();
  double stationarity = std::numeric_limits<double>::infinity();
  double grad_scale = 1.0;
  int outer_iters = 0;
  long inner_iters = 0;
  Eigen::VectorXd multipliers;
};

/// Bound-constrained augmented Lagrangian (LANCELOT-style) over equality
/// constraints, inner solves by SPG.
inline AlmResult alm_minimize(Eigen::VectorXd& v, const AlmProblem& prob,
                              const AlmSettings& st = {}) {
  AlmResult out;
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(prob.m);
  double rho = st.rho0;
  double eta = 0.1;  // feasibility target for the current rho

  Eigen::VectorXd c(prob.m);
  auto phi = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    double f = prob.objective(x, grad);
    prob.constraints(x, c);
    const Eigen::VectorXd w = nu + rho * c;
    if (grad) prob.jac_t(x, w, *grad);
    return f + nu.dot(c) + 0.5 * rho * c.squaredNorm();
  };

  const bool boxed = prob.lo.size() == prob.n && prob.hi.size() == prob.n;
  for (int outer = 0; outer < st.max_outer; ++outer) {
    out.outer_iters = outer + 1;
    const double inner_tol = std::max(0.3 * st.stat_tol, std::min(1e-2, 1.0 / (rho * rho)));
    SpgResult ir;
    if (boxed) {
      TnSettings inner = st.newton;
      inner.tol = inner_tol;
      ir = tn_minimize(v, phi, prob.lo, prob.hi, inner);
    } else {
      SpgSettings inner = st.inner;
      inner.tol = inner_tol;
      ir = spg_minimize(v, phi, prob.project, inner);
    }
    out.inner_iters += ir.iters;

    prob.constraints(v, c);
    out.feas_inf = c.size() ? c.cwiseAbs().maxCoeff() : 0.0;
    if (out.feas_inf <= std::max(eta, st.feas_tol)) {
      nu += rho * c;
      eta = std::max(0.2 * eta, 0.1 * st.feas_tol);
      if (out.feas_inf <= st.feas_tol) {
        // Lagrangian stationarity at the updated multipliers.
        Eigen::VectorXd gf(prob.n);
        out.objective = prob.objective(v, &gf);
        Eigen::VectorXd gl = gf;
        prob.jac_t(v, nu, gl);  // gl = grad F + J' nu
        Eigen::VectorXd probe = v - gl;
        prob.project(probe);
        out.stationarity = (probe - v).cwiseAbs().maxCoeff();
        out.grad_scale = 1.0 + gf.cwiseAbs().maxCoeff();
        if (out.stationarity <= st.stat_tol * out.grad_scale) {
          out.converged = true;
          out.multipliers = nu;
          return out;
        }
      }
    } else {
      rho = std::min(st.rho_max, 10.0 * rho);
      eta = 0.1;
    }
    if (rho >= st.rho_max) break;
  }
  Eigen::VectorXd gf(prob.n);
  out.objective = prob.objective(v, &gf);
  prob.constraints(v, c);
  out.feas_inf = c.size() ? c.cwiseAbs().maxCoeff() : 0.0;
  out.multipliers = nu;
  return out;
}

}  // namespace shedbound::optim
