#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "shedbound/program.hpp"
#include "shedbound/rng.hpp"

namespace testsupport {

/// Brute-force LP minimum by vertex enumeration: activate every equality and
/// each (n - p)-subset of inequalities, solve the square system, keep the
/// best feasible point. Independent of the interior-point path.
inline std::optional<double> lp_vertex_min(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                           const Eigen::MatrixXd& C, const Eigen::VectorXd& d,
                                           const Eigen::VectorXd& h, double tol = 1e-7) {
  const int n = static_cast<int>(h.size());
  const int p = static_cast<int>(A.rows());
  const int m = static_cast<int>(C.rows());
  const int need = n - p;
  if (need < 0) return std::nullopt;

  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  std::vector<int> pick(need);

  std::function<void(int, int)> rec = [&](int start, int k) {
    if (k == need) {
      Eigen::MatrixXd M(n, n);
      Eigen::VectorXd rhs(n);
      M.topRows(p) = A;
      rhs.head(p) = -b;
      for (int i = 0; i < need; ++i) {
        M.row(p + i) = C.row(pick[i]);
        rhs[p + i] = -d[pick[i]];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
      if (!lu.isInvertible()) return;
      const Eigen::VectorXd x = lu.solve(rhs);
      if (p > 0 && ((A * x + b).cwiseAbs().maxCoeff() > tol)) return;
      if (m > 0 && ((C * x + d).maxCoeff() > tol)) return;
      best = std::min(best, h.dot(x));
      found = true;
      return;
    }
    for (int i = start; i <= m - (need - k); ++i) {
      pick[k] = i;
      rec(i + 1, k + 1);
    }
  };
  rec(0, 0);
  if (!found) return std::nullopt;
  return best;
}

inline std::optional<double> lp_vertex_min(const shedbound::ConicProgram& p,
                                           const Eigen::VectorXd& gamma,
                                           const Eigen::VectorXd& L) {
  // Only valid when the cone is free/nonneg; nonneg blocks become -x <= 0 rows.
  Eigen::MatrixXd A = Eigen::MatrixXd(p.A);
  Eigen::MatrixXd C0 = Eigen::MatrixXd(p.C);
  Eigen::VectorXd b = p.b.eval(gamma, L);
  Eigen::VectorXd d0 = p.d.eval(gamma, L);
  std::vector<int> nonneg_cols;
  int at = 0;
  for (const shedbound::ConeBlock& blk : p.cone.blocks) {
    if (blk.type == shedbound::ConeBlockType::nonneg)
      for (int k = 0; k < blk.dim; ++k) nonneg_cols.push_back(at + k);
    else if (blk.type != shedbound::ConeBlockType::free_vars)
      throw std::invalid_argument("lp_vertex_min: program is not an LP");
    at += blk.dim;
  }
  Eigen::MatrixXd C(C0.rows() + static_cast<int>(nonneg_cols.size()), p.num_vars());
  Eigen::VectorXd d(C.rows());
  C.topRows(C0.rows()) = C0;
  d.head(C0.rows()) = d0;
  for (std::size_t i = 0; i < nonneg_cols.size(); ++i) {
    C.row(C0.rows() + static_cast<int>(i)).setZero();
    C(C0.rows() + static_cast<int>(i), nonneg_cols[i]) = -1.0;
    d[C0.rows() + static_cast<int>(i)] = 0.0;
  }
  auto v = lp_vertex_min(A, b, C, d, p.h);
  if (!v) return std::nullopt;
  return *v + p.offset.eval(gamma, L);
}

/// Random strictly feasible, bounded SOCP in canonical form (Slater holds by
/// construction, so strong duality is exact).
inline shedbound::ConicProgram random_socp(shedbound::Rng& rng, int max_vars = 20,
                                           bool lp_only = false, bool nonneg_only = false) {
  using namespace shedbound;
  ProgramBuilder pb(0, 0);
  std::vector<double> x0;

  int n_target = rng.uniform_int(4, max_vars);
  int made = 0, blocks = 0;
  while (made < n_target) {
    const int remaining = n_target - made;
    int kind = nonneg_only ? 1 : (lp_only ? rng.uniform_int(0, 1) : rng.uniform_int(0, 3));
    if (kind >= 2 && remaining < 4) kind = rng.uniform_int(0, 1);
    if (kind == 0) {
      pb.add_var("x" + std::to_string(made));
      x0.push_back(rng.uniform(-1.0, 1.0));
      made += 1;
    } else if (kind == 1) {
      const int dim = std::min(remaining, rng.uniform_int(1, 3));
      std::vector<std::string> names;
      for (int k = 0; k < dim; ++k) names.push_back("n" + std::to_string(made + k));
      pb.add_cone_block(ConeBlockType::nonneg, names);
      for (int k = 0; k < dim; ++k) x0.push_back(rng.uniform(0.5, 1.5));
      made += dim;
    } else if (kind == 2) {
      const int dim = std::min(remaining, rng.uniform_int(2, 4));
      if (dim < 2) continue;
      std::vector<std::string> names;
      for (int k = 0; k < dim; ++k) names.push_back("q" + std::to_string(made + k));
      pb.add_cone_block(ConeBlockType::soc, names);
      std::vector<double> tail;
      double nrm = 0.0;
      for (int k = 1; k < dim; ++k) {
        tail.push_back(rng.uniform(-1.0, 1.0));
        nrm += tail.back() * tail.back();
      }
      x0.push_back(std::sqrt(nrm) + rng.uniform(0.3, 1.0));
      for (double t : tail) x0.push_back(t);
      made += dim;
    } else {
      const int dim = std::min(remaining, rng.uniform_int(3, 4));
      if (dim < 3) continue;
      std::vector<std::string> names;
      for (int k = 0; k < dim; ++k) names.push_back("r" + std::to_string(made + k));
      pb.add_cone_block(ConeBlockType::rotated_soc, names);
      double nrm2 = 0.0;
      std::vector<double> w;
      for (int k = 2; k < dim; ++k) {
        w.push_back(rng.uniform(-1.0, 1.0));
        nrm2 += w.back() * w.back();
      }
      const double u = rng.uniform(0.6, 1.6);
      const double v = (0.5 * nrm2 + rng.uniform(0.2, 0.8)) / u;
      x0.push_back(u);
      x0.push_back(v);
      for (double t : w) x0.push_back(t);
      made += dim;
    }
    ++blocks;
  }
  const int n = made;

  // Equalities through x0.
  const int p = rng.uniform_int(0, std::max(0, n / 3));
  for (int r = 0; r < p; ++r) {
    const int row = pb.add_eq_row();
    double ax = 0.0;
    for (int j = 0; j < n; ++j) {
      if (rng.uniform() < 0.4) {
        const double a = rng.uniform(-1.0, 1.0);
        pb.A_coef(row, j, a);
        ax += a * x0[j];
      }
    }
    pb.b_const(row, -ax);
  }
  // A few strict inequalities plus a bounding box.
  const int mi = rng.uniform_int(1, 4);
  for (int r = 0; r < mi; ++r) {
    const int row = pb.add_ineq_row();
    double cx = 0.0;
    for (int j = 0; j < n; ++j) {
      if (rng.uniform() < 0.4) {
        const double a = rng.uniform(-1.0, 1.0);
        pb.C_coef(row, j, a);
        cx += a * x0[j];
      }
    }
    pb.d_const(row, -cx - rng.uniform(0.1, 1.0));
  }
  for (int j = 0; j < n; ++j) {
    int row = pb.add_ineq_row();
    pb.C_coef(row, j, 1.0);
    pb.d_const(row, -(x0[j] + 5.0));
    row = pb.add_ineq_row();
    pb.C_coef(row, j, -1.0);
    pb.d_const(row, x0[j] - 5.0);
  }
  for (int j = 0; j < n; ++j) pb.h_coef(j, rng.uniform(-1.0, 1.0));
  return pb.finish();
}

}  // namespace testsupport
