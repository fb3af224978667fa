#pragma once

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "shedbound/program.hpp"

namespace shedbound {

enum class SolveStatus { optimal, infeasible, unbounded, iteration_limit, numerical_failure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::iteration_limit: return "iteration_limit";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

struct SolverSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;  // equality-row duals
  Eigen::VectorXd mu;      // inequality-row duals, >= 0
  Eigen::VectorXd s;       // dual-cone member, one entry per primal variable
  double objective = std::numeric_limits<double>::quiet_NaN();
  double dual_objective = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
};

namespace ipm {

struct Settings {
  double feastol = 1e-8;
  double abstol = 1e-8;
  double reltol = 1e-8;
  int max_iters = 100;
  double reg = 1e-9;
  int refine_steps = 2;
};

struct Result {
  SolveStatus status = SolveStatus::numerical_failure;
  Eigen::VectorXd x, y, z, s;
  double tau = 1.0;
  double pobj = 0.0, dobj = 0.0;
  int iters = 0;
  double pres = 0.0, dres = 0.0, gap = 0.0;
};

/// Primal-dual interior point method on the standard embedding
///   min c'x  s.t.  A x = b,  G x + s = h,  s in R+^l x SOC(q1) x ... x SOC(qN)
/// using the homogeneous self-dual model with Nesterov-Todd scaling and a
/// Mehrotra predictor-corrector. Infeasibility and unboundedness are
/// detected from the embedding certificates.
class Solver {
 public:
  Solver(SparseMat A, SparseMat G, Eigen::VectorXd c, int l, std::vector<int> soc_dims)
      : A_(std::move(A)),
        G_(std::move(G)),
        c_(std::move(c)),
        l_(l),
        soc_dims_(std::move(soc_dims)) {
    n_ = static_cast<int>(c_.size());
    p_ = static_cast<int>(A_.rows());
    m_ = static_cast<int>(G_.rows());
    nu_ = l_ + static_cast<int>(soc_dims_.size());
    soc_starts_.clear();
    int at = l_;
    for (int q : soc_dims_) {
      soc_starts_.push_back(at);
      at += q;
    }
    if (at != m_) throw DimensionError("cone dims do not match G rows");
    build_static_triplets();
  }

  Result solve(const Eigen::VectorXd& b, const Eigen::VectorXd& h, const Settings& st) {
    b_ = b;
    h_ = h;
    st_ = st;
    Result res;
    res.x.setZero(n_);
    res.y.setZero(p_);
    res.z.setZero(m_);
    res.s.setZero(m_);

    // Identity scaling for the initialization solves.
    lp_w_ = Eigen::VectorXd::Ones(l_);
    soc_eta_.assign(soc_dims_.size(), 1.0);
    soc_wbar_.clear();
    for (int q : soc_dims_) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(q);
      e[0] = 1.0;
      soc_wbar_.push_back(e);
    }
    if (!factorize()) {
      res.status = SolveStatus::numerical_failure;
      return res;
    }

    Eigen::VectorXd x(n_), y(p_), z(m_), s(m_);
    {
      Eigen::VectorXd sol = kkt_solve(assemble_rhs(Eigen::VectorXd::Zero(n_), b_, h_));
      x = sol.head(n_);
      s = -sol.tail(m_);
      bring_interior(s);
      Eigen::VectorXd sol2 = kkt_solve(assemble_rhs(-c_, Eigen::VectorXd::Zero(p_), Eigen::VectorXd::Zero(m_)));
      y = sol2.segment(n_, p_);
      z = sol2.tail(m_);
      bring_interior(z);
    }
    double tau = 1.0, kappa = 1.0;

    const double norm_b = std::max(1.0, b_.size() ? b_.cwiseAbs().maxCoeff() : 0.0);
    const double norm_h = std::max(1.0, h_.size() ? h_.cwiseAbs().maxCoeff() : 0.0);
    const double norm_c = std::max(1.0, c_.size() ? c_.cwiseAbs().maxCoeff() : 0.0);

    lambda_.setZero(m_);
    Eigen::VectorXd r1(n_), r2(p_), r3(m_);
    for (int iter = 0; iter <= st_.max_iters; ++iter) {
      r1 = A_.transpose() * y + G_.transpose() * z + c_ * tau;
      r2 = A_ * x - b_ * tau;
      r3 = G_ * x + s - h_ * tau;
      const double cx = c_.dot(x), by = b_.dot(y), hz = h_.dot(z);
      const double r4 = cx + by + hz + kappa;
      const double stz = s.dot(z);
      const double mu = (stz + tau * kappa) / (nu_ + 1);

      res.iters = iter;
      res.pres = std::max(inf_norm(r2) / norm_b, inf_norm(r3) / norm_h) / tau;
      res.dres = inf_norm(r1) / (norm_c * tau);
      res.gap = stz / (tau * tau);
      res.pobj = cx / tau;
      res.dobj = -(by + hz) / tau;

      if (!std::isfinite(res.pres) || !std::isfinite(res.dres) || !std::isfinite(mu)) {
        res.status = SolveStatus::numerical_failure;
        finalize(res, x, y, z, s, tau);
        return res;
      }

      const bool gap_ok =
          res.gap <= st_.abstol || res.gap / std::max(1.0, std::abs(res.pobj)) <= st_.reltol;
      if (res.pres <= st_.feastol && res.dres <= st_.feastol && gap_ok) {
        res.status = SolveStatus::optimal;
        finalize(res, x, y, z, s, tau);
        return res;
      }
      // Certificates from the embedding; only claimed once the homogenizing
      // ray dominates (tau driven toward zero against kappa).
      if (tau < 0.1 * kappa) {
        if (by + hz < -1e-12) {
          const double cert = inf_norm(A_.transpose() * y + G_.transpose() * z) / norm_c;
          if (cert <= st_.feastol * (-(by + hz))) {
            res.status = SolveStatus::infeasible;
            res.y = y;
            res.z = z;
            return res;
          }
        }
        if (cx < -1e-12) {
          const double certA = p_ ? inf_norm(A_ * x) : 0.0;
          const double certG = inf_norm(G_ * x + s);
          if (std::max(certA / norm_b, certG / norm_h) <= st_.feastol * (-cx)) {
            res.status = SolveStatus::unbounded;
            res.x = x;
            return res;
          }
        }
      }
      if (iter == st_.max_iters) {
        res.status = SolveStatus::iteration_limit;
        finalize(res, x, y, z, s, tau);
        return res;
      }
      if (tau < 1e-12 || mu < 1e-16) {
        res.status = SolveStatus::numerical_failure;
        finalize(res, x, y, z, s, tau);
        return res;
      }

      if (!update_scaling(s, z) || !factorize()) {
        res.status = SolveStatus::numerical_failure;
        finalize(res, x, y, z, s, tau);
        return res;
      }

      // Cached solve for the (c, b, h) column.
      Eigen::VectorXd sol1 = kkt_solve(assemble_rhs(-c_, b_, h_));
      const Eigen::VectorXd dx1 = sol1.head(n_);
      const Eigen::VectorXd dy1 = sol1.segment(n_, p_);
      const Eigen::VectorXd dz1 = sol1.tail(m_);
      const double denom = c_.dot(dx1) + b_.dot(dy1) + h_.dot(dz1) - kappa / tau;
      if (!std::isfinite(denom) || std::abs(denom) < 1e-300) {
        res.status = SolveStatus::numerical_failure;
        finalize(res, x, y, z, s, tau);
        return res;
      }

      auto direction = [&](double eta, const Eigen::VectorXd& ds_rhs, double dkap_rhs,
                           Eigen::VectorXd& dx, Eigen::VectorXd& dy, Eigen::VectorXd& dz,
                           Eigen::VectorXd& ds, Eigen::VectorXd& dst, Eigen::VectorXd& dzt,
                           double& dtau, double& dkap) {
        const Eigen::VectorXd lam_div = conic_div(ds_rhs);
        Eigen::VectorXd w_lam_div(m_);
        apply_W(lam_div, w_lam_div);
        Eigen::VectorXd sol0 =
            kkt_solve(assemble_rhs(-eta * r1, -eta * r2, -eta * r3 - w_lam_div));
        const Eigen::VectorXd dx0 = sol0.head(n_);
        const Eigen::VectorXd dy0 = sol0.segment(n_, p_);
        const Eigen::VectorXd dz0 = sol0.tail(m_);
        const double numer =
            -eta * r4 - dkap_rhs / tau - (c_.dot(dx0) + b_.dot(dy0) + h_.dot(dz0));
        dtau = numer / denom;
        dx = dx0 + dtau * dx1;
        dy = dy0 + dtau * dy1;
        dz = dz0 + dtau * dz1;
        dzt.resize(m_);
        apply_W(dz, dzt);
        dst = lam_div - dzt;
        ds.resize(m_);
        apply_W(dst, ds);
        dkap = (dkap_rhs - kappa * dtau) / tau;
      };

      // Predictor (affine) direction.
      Eigen::VectorXd dx, dy, dz, ds, dst, dzt;
      double dtau, dkap;
      Eigen::VectorXd ds_rhs = -conic_prod(lambda_, lambda_);
      direction(1.0, ds_rhs, -tau * kappa, dx, dy, dz, ds, dst, dzt, dtau, dkap);
      double alpha_a = std::min(1.0, step_limit(dst, dzt, tau, dtau, kappa, dkap));
      const double rho =
          ((s + alpha_a * ds).dot(z + alpha_a * dz) + (tau + alpha_a * dtau) * (kappa + alpha_a * dkap)) /
          (stz + tau * kappa);
      const double sigma = std::pow(std::clamp(rho, 0.0, 1.0), 3.0);

      // Combined direction with Mehrotra correction.
      Eigen::VectorXd corr = conic_prod(dst, dzt);
      ds_rhs = sigma * mu * cone_identity() - conic_prod(lambda_, lambda_) - corr;
      const double dkap_rhs = sigma * mu - tau * kappa - dtau * dkap;
      direction(1.0 - sigma, ds_rhs, dkap_rhs, dx, dy, dz, ds, dst, dzt, dtau, dkap);

      double alpha = 0.99 * step_limit(dst, dzt, tau, dtau, kappa, dkap);
      alpha = std::min(alpha, 1.0);
      if (!(alpha > 1e-14)) {
        res.status = SolveStatus::numerical_failure;
        finalize(res, x, y, z, s, tau);
        return res;
      }

      // Commit the largest backtracked step that keeps (s, z, tau, kappa)
      // strictly inside the cone; roundoff near convergence can otherwise
      // push a block across the boundary.
      bool committed = false;
      for (int bt = 0; bt < 12; ++bt) {
        const Eigen::VectorXd s_c = s + alpha * ds;
        const Eigen::VectorXd z_c = z + alpha * dz;
        if (tau + alpha * dtau > 0.0 && kappa + alpha * dkap > 0.0 &&
            strictly_interior(s_c) && strictly_interior(z_c)) {
          x += alpha * dx;
          y += alpha * dy;
          z = z_c;
          s = s_c;
          tau += alpha * dtau;
          kappa += alpha * dkap;
          committed = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!committed) {
        res.status = SolveStatus::numerical_failure;
        finalize(res, x, y, z, s, tau);
        return res;
      }
    }
    res.status = SolveStatus::iteration_limit;
    finalize(res, x, y, z, s, tau);
    return res;
  }

 private:
  static double inf_norm(const Eigen::VectorXd& v) {
    return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
  }

  void finalize(Result& r, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                const Eigen::VectorXd& z, const Eigen::VectorXd& s, double tau) const {
    r.x = x / tau;
    r.y = y / tau;
    r.z = z / tau;
    r.s = s / tau;
    r.tau = tau;
  }

  void build_static_triplets() {
    static_trips_.clear();
    const int N = n_ + p_ + m_;
    for (int col = 0; col < A_.outerSize(); ++col)
      for (SparseMat::InnerIterator it(A_, col); it; ++it) {
        static_trips_.emplace_back(n_ + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        static_trips_.emplace_back(static_cast<int>(it.col()), n_ + static_cast<int>(it.row()), it.value());
      }
    for (int col = 0; col < G_.outerSize(); ++col)
      for (SparseMat::InnerIterator it(G_, col); it; ++it) {
        static_trips_.emplace_back(n_ + p_ + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        static_trips_.emplace_back(static_cast<int>(it.col()), n_ + p_ + static_cast<int>(it.row()), it.value());
      }
    sign_.setZero(N);
    sign_.head(n_).setConstant(1.0);
    sign_.tail(p_ + m_).setConstant(-1.0);
    analyzed_ = false;
  }

  bool factorize() {
    for (double scale = 1.0; scale <= 1e8; scale *= 1e3) {
      if (factorize_with(st_.reg * scale)) {
        reg_used_ = st_.reg * scale;
        return true;
      }
    }
    return false;
  }

  bool factorize_with(double reg) {
    const int N = n_ + p_ + m_;
    std::vector<Triplet> trips = static_trips_;
    for (int i = 0; i < n_ + p_; ++i) trips.emplace_back(i, i, sign_[i] * reg);
    // -W^2 (with regularization) on the cone rows.
    for (int i = 0; i < l_; ++i) {
      const int r = n_ + p_ + i;
      trips.emplace_back(r, r, -(lp_w_[i] * lp_w_[i]) - reg);
    }
    for (std::size_t kblk = 0; kblk < soc_dims_.size(); ++kblk) {
      const int q = soc_dims_[kblk];
      const int r0 = n_ + p_ + soc_starts_[kblk];
      const double e2 = soc_eta_[kblk] * soc_eta_[kblk];
      const Eigen::VectorXd& w = soc_wbar_[kblk];
      // W^2 = eta^2 (2 wbar wbar' - J); emit the full dense block so the
      // sparsity pattern is identical on every factorization.
      for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) {
          double v = 2.0 * w[i] * w[j];
          if (i == 0 && j == 0) v -= 1.0;
          if (i == j && i > 0) v += 1.0;
          double entry = -e2 * v;
          if (i == j) entry -= reg;
          trips.emplace_back(r0 + i, r0 + j, entry);
        }
    }
    K_.resize(N, N);
    K_.setFromTriplets(trips.begin(), trips.end());
    K_.makeCompressed();
    if (!analyzed_) {
      ldlt_.analyzePattern(K_);
      analyzed_ = true;
    }
    ldlt_.factorize(K_);
    return ldlt_.info() == Eigen::Success;
  }

  Eigen::VectorXd assemble_rhs(const Eigen::VectorXd& rx, const Eigen::VectorXd& ry,
                               const Eigen::VectorXd& rz) const {
    Eigen::VectorXd rhs(n_ + p_ + m_);
    rhs.head(n_) = rx;
    rhs.segment(n_, p_) = ry;
    rhs.tail(m_) = rz;
    return rhs;
  }

  Eigen::VectorXd kkt_solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = ldlt_.solve(rhs);
    for (int k = 0; k < st_.refine_steps; ++k) {
      Eigen::VectorXd resid = rhs - (K_ * x - reg_used_ * sign_.cwiseProduct(x));
      x += ldlt_.solve(resid);
    }
    return x;
  }

  // --- cone algebra on the slack space (l LP coords then SOC blocks) ---

  Eigen::VectorXd cone_identity() const {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
    e.head(l_).setOnes();
    for (std::size_t k = 0; k < soc_dims_.size(); ++k) e[soc_starts_[k]] = 1.0;
    return e;
  }

  void bring_interior(Eigen::VectorXd& v) const {
    double t = -std::numeric_limits<double>::infinity();
    if (l_) t = std::max(t, -v.head(l_).minCoeff());
    for (std::size_t k = 0; k < soc_dims_.size(); ++k) {
      const int q = soc_dims_[k], at = soc_starts_[k];
      t = std::max(t, v.segment(at + 1, q - 1).norm() - v[at]);
    }
    if (t >= 0.0) {
      v.head(l_).array() += 1.0 + t;
      for (std::size_t k = 0; k < soc_dims_.size(); ++k) v[soc_starts_[k]] += 1.0 + t;
    }
  }

  bool strictly_interior(const Eigen::VectorXd& v) const {
    for (int i = 0; i < l_; ++i)
      if (!(v[i] > 0.0)) return false;
    for (std::size_t k = 0; k < soc_dims_.size(); ++k) {
      const int q = soc_dims_[k], at = soc_starts_[k];
      if (!(v[at] > 0.0)) return false;
      if (!(v[at] * v[at] - v.segment(at + 1, q - 1).squaredNorm() > 0.0)) return false;
    }
    return true;
  }

  bool update_scaling(const Eigen::VectorXd& s, const Eigen::VectorXd& z) {
    for (int i = 0; i < l_; ++i) {
      if (s[i] <= 0.0 || z[i] <= 0.0) return false;
      lp_w_[i] = std::sqrt(s[i] / z[i]);
      lambda_[i] = std::sqrt(s[i] * z[i]);
    }
    for (std::size_t k = 0; k < soc_dims_.size(); ++k) {
      const int q = soc_dims_[k], at = soc_starts_[k];
      const auto sb = s.segment(at, q);
      const auto zb = z.segment(at, q);
      const double sres = sb[0] * sb[0] - sb.tail(q - 1).squaredNorm();
      const double zres = zb[0] * zb[0] - zb.tail(q - 1).squaredNorm();
      if (sres <= 0.0 || zres <= 0.0) return false;
      const double snorm = std::sqrt(sres), znorm = std::sqrt(zres);
      const Eigen::VectorXd sbar = sb / snorm, zbar = zb / znorm;
      const double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
      Eigen::VectorXd wbar(q);
      wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
      wbar.tail(q - 1) = (sbar.tail(q - 1) - zbar.tail(q - 1)) / (2.0 * gamma);
      soc_wbar_[k] = wbar;
      soc_eta_[k] = std::sqrt(snorm / znorm);
      // lambda block = W z
      auto lam = lambda_.segment(at, q);
      scale_apply(wbar, soc_eta_[k], zb, lam);
    }
    return true;
  }

  /// out = eta * T(wbar) v with T the hyperbolic Householder
  /// [w0, w1'; w1, I + w1 w1'/(1+w0)].
  template <typename VIn, typename VOut>
  void scale_apply(const Eigen::VectorXd& wbar, double eta, const VIn& v, VOut&& out) const {
    const int q = static_cast<int>(wbar.size());
    const double w0 = wbar[0];
    const auto w1 = wbar.tail(q - 1);
    const double dot = w1.dot(v.tail(q - 1));
    out[0] = eta * (w0 * v[0] + dot);
    out.tail(q - 1) = eta * (v.tail(q - 1) + (dot / (1.0 + w0) + v[0]) * w1);
  }

  void apply_W(const Eigen::VectorXd& v, Eigen::VectorXd& out) const {
    out.head(l_) = lp_w_.cwiseProduct(v.head(l_));
    for (std::size_t k = 0; k < soc_dims_.size(); ++k) {
      const int q = soc_dims_[k], at = soc_starts_[k];
      auto seg = out.segment(at, q);
      scale_apply(soc_wbar_[k], soc_eta_[k], v.segment(at, q), seg);
    }
  }

  Eigen::VectorXd conic_prod(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    Eigen::VectorXd out(m_);
    out.head(l_) = u.head(l_).cwiseProduct(v.head(l_));
    for (std::size_t k = 0; k < soc_dims_.size(); ++k) {
      const int q = soc_dims_[k], at = soc_starts_[k];
      const auto ub = u.segment(at, q), vb = v.segment(at, q);
      out[at] = ub.dot(vb);
      out.segment(at + 1, q - 1) = ub[0] * vb.tail(q - 1) + vb[0] * ub.tail(q - 1);
    }
    return out;
  }

  /// Solve lambda o g = d block-wise.
  Eigen::VectorXd conic_div(const Eigen::VectorXd& d) const {
    Eigen::VectorXd g(m_);
    g.head(l_) = d.head(l_).cwiseQuotient(lambda_.head(l_));
    for (std::size_t k = 0; k < soc_dims_.size(); ++k) {
      const int q = soc_dims_[k], at = soc_starts_[k];
      const auto lb = lambda_.segment(at, q);
      const auto db = d.segment(at, q);
      const double det = lb[0] * lb[0] - lb.tail(q - 1).squaredNorm();
      const double g0 = (lb[0] * db[0] - lb.tail(q - 1).dot(db.tail(q - 1))) / det;
      g[at] = g0;
      g.segment(at + 1, q - 1) = (db.tail(q - 1) - g0 * lb.tail(q - 1)) / lb[0];
    }
    return g;
  }

  /// Largest step keeping lambda + alpha*d inside the cone for both scaled
  /// directions, and tau/kappa nonnegative.
  double step_limit(const Eigen::VectorXd& dst, const Eigen::VectorXd& dzt, double tau,
                    double dtau, double kappa, double dkap) const {
    double alpha = std::numeric_limits<double>::infinity();
    auto lp_limit = [&](const Eigen::VectorXd& d) {
      for (int i = 0; i < l_; ++i)
        if (d[i] < 0.0) alpha = std::min(alpha, -lambda_[i] / d[i]);
    };
    auto soc_limit = [&](const Eigen::VectorXd& d) {
      for (std::size_t k = 0; k < soc_dims_.size(); ++k) {
        const int q = soc_dims_[k], at = soc_starts_[k];
        const auto lb = lambda_.segment(at, q);
        const auto db = d.segment(at, q);
        // f(a) = (lb0 + a db0)^2 - ||lb_t + a db_t||^2 = A a^2 + B a + Cq,
        // Cq > 0 at an interior point; the limit is f's smallest positive root.
        const double A = db[0] * db[0] - db.tail(q - 1).squaredNorm();
        const double B = 2.0 * (lb[0] * db[0] - lb.tail(q - 1).dot(db.tail(q - 1)));
        const double Cq = lb[0] * lb[0] - lb.tail(q - 1).squaredNorm();
        double bound = std::numeric_limits<double>::infinity();
        if (std::abs(A) < 1e-300) {
          if (B < 0.0) bound = -Cq / B;
        } else {
          const double disc = B * B - 4.0 * A * Cq;
          if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            if (A > 0.0) {
              const double lo = (-B - sq) / (2.0 * A);
              if (lo > 0.0) bound = lo;  // both roots positive: first crossing
            } else {
              bound = (-B - sq) / (2.0 * A);  // opens down: the larger root, > 0
            }
          }
        }
        // head component must stay nonnegative (covers the db_t = 0 case)
        if (db[0] < 0.0) bound = std::min(bound, -lb[0] / db[0]);
        alpha = std::min(alpha, bound);
      }
    };
    lp_limit(dst);
    lp_limit(dzt);
    soc_limit(dst);
    soc_limit(dzt);
    if (dtau < 0.0) alpha = std::min(alpha, -tau / dtau);
    if (dkap < 0.0) alpha = std::min(alpha, -kappa / dkap);
    return alpha;
  }

  SparseMat A_, G_;
  Eigen::VectorXd c_, b_, h_;
  int n_ = 0, p_ = 0, m_ = 0, l_ = 0, nu_ = 0;
  std::vector<int> soc_dims_, soc_starts_;
  Settings st_;

  std::vector<Triplet> static_trips_;
  Eigen::VectorXd sign_;
  SparseMat K_;
  Eigen::SimplicialLDLT<SparseMat> ldlt_;
  bool analyzed_ = false;
  double reg_used_ = 1e-9;

  Eigen::VectorXd lp_w_;
  std::vector<double> soc_eta_;
  std::vector<Eigen::VectorXd> soc_wbar_;
  Eigen::VectorXd lambda_;
};

}  // namespace ipm

// ---------------------------------------------------------------------------
// ConicProgram front end: conversion to the standard embedding and dual
// recovery in the (lambda, mu, s) convention of the canonical form.
// ---------------------------------------------------------------------------

/// Reusable solver for one program structure; repeated solves share the
/// symbolic factorization. Parameter vectors and per-row d0 overrides vary.
class ConicSolver {
 public:
  explicit ConicSolver(const ConicProgram& p) : prog_(p) {
    p.check();
    const int n = p.num_vars();
    const int mC = p.num_ineq();

    std::vector<Triplet> gtrips;
    for (int col = 0; col < p.C.outerSize(); ++col)
      for (SparseMat::InnerIterator it(p.C, col); it; ++it)
        gtrips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());

    int row = mC;
    int col0 = 0;
    for (const ConeBlock& blk : p.cone.blocks) {
      if (blk.type == ConeBlockType::nonneg) {
        entries_.push_back({blk.type, col0, blk.dim, row});
        for (int k = 0; k < blk.dim; ++k) gtrips.emplace_back(row + k, col0 + k, -1.0);
        row += blk.dim;
      }
      col0 += blk.dim;
    }
    lp_rows_ = row;
    col0 = 0;
    for (const ConeBlock& blk : p.cone.blocks) {
      if (blk.type == ConeBlockType::soc) {
        entries_.push_back({blk.type, col0, blk.dim, row});
        for (int k = 0; k < blk.dim; ++k) gtrips.emplace_back(row + k, col0 + k, -1.0);
        soc_dims_.push_back(blk.dim);
        row += blk.dim;
      } else if (blk.type == ConeBlockType::rotated_soc) {
        entries_.push_back({blk.type, col0, blk.dim, row});
        const double r = cones::kSqrtHalf;
        gtrips.emplace_back(row, col0, -r);
        gtrips.emplace_back(row, col0 + 1, -r);
        gtrips.emplace_back(row + 1, col0, -r);
        gtrips.emplace_back(row + 1, col0 + 1, r);
        for (int k = 2; k < blk.dim; ++k) gtrips.emplace_back(row + k, col0 + k, -1.0);
        soc_dims_.push_back(blk.dim);
        row += blk.dim;
      }
      col0 += blk.dim;
    }
    padded_ = (row == 0);
    if (padded_) {
      // IPM needs a nonempty cone; a vacuous 0'x <= 1 row changes nothing.
      lp_rows_ = 1;
      row = 1;
    }
    m_ = row;
    SparseMat G(m_, n);
    G.setFromTriplets(gtrips.begin(), gtrips.end());
    G.makeCompressed();
    solver_.emplace(p.A, std::move(G), p.h, lp_rows_, soc_dims_);
  }

  SolverSolution solve(const Eigen::VectorXd& gamma, const Eigen::VectorXd& L, double tol,
                       const std::vector<std::pair<int, double>>& d0_override = {},
                       int max_iters = 100) {
    if (gamma.size() != prog_.gamma_dim || L.size() != prog_.L_dim)
      throw DimensionError("parameter vector dimensions do not match program");
    Eigen::VectorXd b = -prog_.b.eval(gamma, L);
    Eigen::VectorXd dval = prog_.d.eval(gamma, L);
    // Overrides replace the whole row value; callers only override rows
    // without parameter dependence (the z-bound rows in branch and bound).
    for (const auto& [r, v] : d0_override) dval[r] = v;
    Eigen::VectorXd h = Eigen::VectorXd::Zero(m_);
    h.head(prog_.num_ineq()) = -dval;
    if (padded_) h[0] = 1.0;

    ipm::Settings st;
    st.feastol = st.abstol = st.reltol = tol;
    st.max_iters = max_iters;
    ipm::Result r = solver_->solve(b, h, st);

    SolverSolution out;
    out.status = r.status;
    out.iterations = r.iters;
    out.primal_residual = r.pres;
    out.dual_residual = r.dres;
    out.gap = r.gap;
    if (r.status == SolveStatus::infeasible || r.status == SolveStatus::unbounded) return out;

    const double off = prog_.offset.eval(gamma, L);
    out.x = r.x;
    out.objective = prog_.h.dot(r.x) + off;
    out.dual_objective = r.dobj + off;
    out.lambda = r.y;
    out.mu = r.z.head(prog_.num_ineq());
    out.s = Eigen::VectorXd::Zero(prog_.num_vars());
    for (const ConeEntry& e : entries_) {
      if (e.type == ConeBlockType::rotated_soc) {
        Eigen::VectorXd zb = r.z.segment(e.grow, e.dim);
        cones::rsoc_to_soc(zb);  // the rotation is its own adjoint
        out.s.segment(e.col, e.dim) = zb;
      } else {
        out.s.segment(e.col, e.dim) = r.z.segment(e.grow, e.dim);
      }
    }
    return out;
  }

  const ConicProgram& program() const { return prog_; }

 private:
  struct ConeEntry {
    ConeBlockType type;
    int col, dim, grow;
  };

  ConicProgram prog_;
  std::vector<ConeEntry> entries_;
  std::vector<int> soc_dims_;
  int lp_rows_ = 0, m_ = 0;
  bool padded_ = false;
  std::optional<ipm::Solver> solver_;
};

/// One-shot solve of a parametric program at numeric (gamma, L).
inline SolverSolution solve_conic(const ConicProgram& p, const Eigen::VectorXd& gamma,
                                  const Eigen::VectorXd& L, double tol = 1e-8) {
  return ConicSolver(p).solve(gamma, L, tol);
}

inline SolverSolution solve_conic(const ConicProgram& p, double tol = 1e-8) {
  return solve_conic(p, Eigen::VectorXd::Zero(p.gamma_dim), Eigen::VectorXd::Zero(p.L_dim), tol);
}

struct DualPoint {
  Eigen::VectorXd lambda, mu, s;
};

struct DualInfeasibleError : std::runtime_error {
  explicit DualInfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

/// primal_optimum - dual_objective(dual_point); weak duality gives >= -tol
/// for any dual-feasible point.
inline double weak_duality_check(const ConicProgram& p, const DualPoint& pt,
                                 const Eigen::VectorXd& gamma, const Eigen::VectorXd& L,
                                 double tol = 1e-8) {
  DualProgram dp = dualize(p);
  const double err = dp.feasibility_error(pt.lambda, pt.mu, pt.s);
  if (err > tol)
    throw DualInfeasibleError("dual point infeasible: residual " + std::to_string(err));
  const double dobj = dp.objective(pt.lambda, pt.mu, gamma, L);
  SolverSolution primal = solve_conic(p, gamma, L, std::min(tol, 1e-8));
  if (primal.status != SolveStatus::optimal)
    throw std::runtime_error("weak_duality_check: primal solve failed");
  return primal.objective - dobj;
}

}  // namespace shedbound
