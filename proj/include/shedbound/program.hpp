#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shedbound/cones.hpp"

namespace shedbound {

using SparseMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct DimensionError : std::invalid_argument {
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Affine map of the scenario parameters: v(gamma, L) = v0 + Vg*gamma + VL*L.
struct ParamAffine {
  Eigen::VectorXd v0;
  SparseMat Vg;  // rows() == v0.size(), cols() == gamma dim
  SparseMat VL;  // rows() == v0.size(), cols() == L dim

  Eigen::VectorXd eval(const Eigen::VectorXd& gamma, const Eigen::VectorXd& L) const {
    Eigen::VectorXd v = v0;
    if (Vg.nonZeros()) v += Vg * gamma;
    if (VL.nonZeros()) v += VL * L;
    return v;
  }
};

/// Scalar affine objective offset added to h'x; needed because the
/// load-shed objective carries a parameter-only term.
struct ObjectiveOffset {
  double c0 = 0.0;
  Eigen::VectorXd cg;  // gamma coefficients (may be empty)
  Eigen::VectorXd cL;

  double eval(const Eigen::VectorXd& gamma, const Eigen::VectorXd& L) const {
    double v = c0;
    if (cg.size()) v += cg.dot(gamma);
    if (cL.size()) v += cL.dot(L);
    return v;
  }
};

/// Canonical parametric conic program
///   min  h'x + off(gamma, L)
///   s.t. A x + b(gamma, L)  = 0
///        C x + d(gamma, L) <= 0
///        x in K
/// with A, C constant and b, d affine in (gamma, L). Immutable once built.
struct ConicProgram {
  Eigen::VectorXd h;
  SparseMat A;
  ParamAffine b;
  SparseMat C;
  ParamAffine d;
  ConeSpec cone;
  ObjectiveOffset offset;
  std::vector<std::string> var_names;
  std::vector<int> binary_cols;
  int gamma_dim = 0;
  int L_dim = 0;

  int num_vars() const { return static_cast<int>(h.size()); }
  int num_eq() const { return static_cast<int>(A.rows()); }
  int num_ineq() const { return static_cast<int>(C.rows()); }

  void check() const {
    if (A.cols() != h.size() || C.cols() != h.size())
      throw DimensionError("matrix column counts must equal |h|");
    if (b.v0.size() != A.rows() || d.v0.size() != C.rows())
      throw DimensionError("rhs sizes must match row counts");
    if (b.Vg.cols() != gamma_dim || d.Vg.cols() != gamma_dim)
      throw DimensionError("gamma map width mismatch");
    if (b.VL.cols() != L_dim || d.VL.cols() != L_dim)
      throw DimensionError("L map width mismatch");
    cone.check(num_vars());
  }
};

/// Triplet-based builder; cone blocks are appended in declaration order and
/// consecutive free declarations merge into one block.
class ProgramBuilder {
 public:
  ProgramBuilder(int gamma_dim, int L_dim) : gamma_dim_(gamma_dim), L_dim_(L_dim) {}

  int add_var(std::string name) {
    if (blocks_.empty() || blocks_.back().type != ConeBlockType::free_vars)
      blocks_.push_back({ConeBlockType::free_vars, 0});
    ++blocks_.back().dim;
    names_.push_back(std::move(name));
    return num_vars_++;
  }

  int add_cone_block(ConeBlockType type, const std::vector<std::string>& names) {
    blocks_.push_back({type, static_cast<int>(names.size())});
    const int start = num_vars_;
    for (const std::string& n : names) names_.push_back(n);
    num_vars_ += static_cast<int>(names.size());
    return start;
  }

  int add_eq_row() { return num_eq_++; }
  int add_ineq_row() { return num_ineq_++; }

  void A_coef(int row, int col, double v) {
    if (v != 0.0) A_.emplace_back(row, col, v);
  }
  void C_coef(int row, int col, double v) {
    if (v != 0.0) C_.emplace_back(row, col, v);
  }
  void b_const(int row, double v) {
    if (v != 0.0) b0_.emplace_back(row, 0, v);
  }
  void b_gamma(int row, int k, double v) {
    if (v != 0.0) Bg_.emplace_back(row, k, v);
  }
  void b_L(int row, int k, double v) {
    if (v != 0.0) BL_.emplace_back(row, k, v);
  }
  void d_const(int row, double v) {
    if (v != 0.0) d0_.emplace_back(row, 0, v);
  }
  void d_gamma(int row, int k, double v) {
    if (v != 0.0) Dg_.emplace_back(row, k, v);
  }
  void d_L(int row, int k, double v) {
    if (v != 0.0) DL_.emplace_back(row, k, v);
  }
  void h_coef(int col, double v) { h_.emplace_back(col, 0, v); }
  void mark_binary(int col) { binary_.push_back(col); }
  void offset_const(double v) { off_c0_ += v; }
  void offset_gamma(int k, double v) { off_g_.emplace_back(k, 0, v); }
  void offset_L(int k, double v) { off_L_.emplace_back(k, 0, v); }

  int num_vars() const { return num_vars_; }
  int num_eq() const { return num_eq_; }
  int num_ineq() const { return num_ineq_; }

  ConicProgram finish() {
    ConicProgram p;
    p.gamma_dim = gamma_dim_;
    p.L_dim = L_dim_;
    p.var_names = std::move(names_);
    p.binary_cols = std::move(binary_);
    p.cone.blocks = std::move(blocks_);

    p.h = dense_from(h_, num_vars_);
    p.A = sparse_from(A_, num_eq_, num_vars_);
    p.C = sparse_from(C_, num_ineq_, num_vars_);
    p.b.v0 = dense_from(b0_, num_eq_);
    p.b.Vg = sparse_from(Bg_, num_eq_, gamma_dim_);
    p.b.VL = sparse_from(BL_, num_eq_, L_dim_);
    p.d.v0 = dense_from(d0_, num_ineq_);
    p.d.Vg = sparse_from(Dg_, num_ineq_, gamma_dim_);
    p.d.VL = sparse_from(DL_, num_ineq_, L_dim_);
    p.offset.c0 = off_c0_;
    p.offset.cg = dense_from(off_g_, gamma_dim_);
    p.offset.cL = dense_from(off_L_, L_dim_);
    p.check();
    return p;
  }

 private:
  static SparseMat sparse_from(const std::vector<Triplet>& t, int rows, int cols) {
    SparseMat m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
  }
  static Eigen::VectorXd dense_from(const std::vector<Triplet>& t, int n) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    for (const Triplet& e : t) v[e.row()] += e.value();
    return v;
  }

  int gamma_dim_, L_dim_;
  int num_vars_ = 0, num_eq_ = 0, num_ineq_ = 0;
  std::vector<ConeBlock> blocks_;
  std::vector<std::string> names_;
  std::vector<int> binary_;
  std::vector<Triplet> A_, C_, b0_, Bg_, BL_, d0_, Dg_, DL_, h_, off_g_, off_L_;
  double off_c0_ = 0.0;
};

/// Mechanical Lagrangian dual of a ConicProgram:
///   max  b(gamma,L)'lambda + d(gamma,L)'mu + off(gamma,L)
///   s.t. h + A'lambda + C'mu - s = 0
///        mu >= 0,  s in K*
/// where K* matches K block-for-block (free -> zero cone, others self-dual).
/// The parametric maps are carried through unchanged.
struct DualProgram {
  Eigen::VectorXd h;
  SparseMat A;
  SparseMat C;
  ParamAffine b;
  ParamAffine d;
  ConeSpec primal_cone;  // s lives in the block-wise dual of this spec
  ObjectiveOffset offset;
  int gamma_dim = 0;
  int L_dim = 0;

  int num_lambda() const { return static_cast<int>(A.rows()); }
  int num_mu() const { return static_cast<int>(C.rows()); }
  int num_s() const { return static_cast<int>(h.size()); }
  int stationarity_rows() const { return static_cast<int>(h.size()); }

  double objective(const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu,
                   const Eigen::VectorXd& gamma, const Eigen::VectorXd& L) const {
    return b.eval(gamma, L).dot(lambda) + d.eval(gamma, L).dot(mu) + offset.eval(gamma, L);
  }

  Eigen::VectorXd stationarity_residual(const Eigen::VectorXd& lambda,
                                        const Eigen::VectorXd& mu,
                                        const Eigen::VectorXd& s) const {
    return h + A.transpose() * lambda + C.transpose() * mu - s;
  }

  /// Max of stationarity residual, mu negativity, and dual-cone violation.
  double feasibility_error(const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu,
                           const Eigen::VectorXd& s) const {
    double err = stationarity_residual(lambda, mu, s).cwiseAbs().maxCoeff();
    if (mu.size()) err = std::max(err, -std::min(0.0, mu.minCoeff()));
    err = std::max(err, cones::max_violation(primal_cone, s, /*dual=*/true));
    return err;
  }

  /// Recast the dual at fixed parameters as a minimization ConicProgram over
  /// (lambda, mu, s). Free-block s components are the zero cone and are
  /// dropped; their stationarity rows carry no s term.
  ConicProgram as_primal(const Eigen::VectorXd& gamma, const Eigen::VectorXd& L) const {
    const Eigen::VectorXd bval = b.eval(gamma, L);
    const Eigen::VectorXd dval = d.eval(gamma, L);
    const int p = num_lambda();
    const int m = num_mu();
    const int n = num_s();

    ProgramBuilder pb(0, 0);
    std::vector<int> lam(p), mu_idx(m);
    for (int i = 0; i < p; ++i) lam[i] = pb.add_var("lambda[" + std::to_string(i) + "]");
    if (m > 0) {
      std::vector<std::string> names;
      for (int i = 0; i < m; ++i) names.push_back("mu[" + std::to_string(i) + "]");
      const int start = pb.add_cone_block(ConeBlockType::nonneg, names);
      for (int i = 0; i < m; ++i) mu_idx[i] = start + i;
    }
    std::vector<int> s_idx(n, -1);
    int at = 0;
    for (const ConeBlock& blk : primal_cone.blocks) {
      if (blk.type != ConeBlockType::free_vars && blk.dim > 0) {
        std::vector<std::string> names;
        for (int k = 0; k < blk.dim; ++k)
          names.push_back("s[" + std::to_string(at + k) + "]");
        const int start = pb.add_cone_block(blk.type, names);
        for (int k = 0; k < blk.dim; ++k) s_idx[at + k] = start + k;
      }
      at += blk.dim;
    }

    // Stationarity rows h_j + (A'lambda)_j + (C'mu)_j - s_j = 0.
    std::vector<int> rows(n);
    for (int j = 0; j < n; ++j) {
      rows[j] = pb.add_eq_row();
      pb.b_const(rows[j], h[j]);
      if (s_idx[j] >= 0) pb.A_coef(rows[j], s_idx[j], -1.0);
    }
    // Column-wise iteration over A' and C'.
    for (int col = 0; col < A.outerSize(); ++col)
      for (SparseMat::InnerIterator it(A, col); it; ++it)
        pb.A_coef(rows[col], lam[it.row()], it.value());
    for (int col = 0; col < C.outerSize(); ++col)
      for (SparseMat::InnerIterator it(C, col); it; ++it)
        pb.A_coef(rows[col], mu_idx[it.row()], it.value());

    // Objective: min -(b'lambda + d'mu) (constant offset recorded separately).
    for (int i = 0; i < p; ++i) pb.h_coef(lam[i], -bval[i]);
    for (int i = 0; i < m; ++i) pb.h_coef(mu_idx[i], -dval[i]);
    pb.offset_const(-offset.eval(gamma, L));
    return pb.finish();
  }
};

inline DualProgram dualize(const ConicProgram& p) {
  p.check();
  DualProgram dp;
  dp.h = p.h;
  dp.A = p.A;
  dp.C = p.C;
  dp.b = p.b;
  dp.d = p.d;
  dp.primal_cone = p.cone;
  dp.offset = p.offset;
  dp.gamma_dim = p.gamma_dim;
  dp.L_dim = p.L_dim;
  return dp;
}

// ---------------------------------------------------------------------------
// Program dump/load (documented JSON container for debugging and diffing).
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json sparse_to_json(const SparseMat& m) {
  nlohmann::json t = nlohmann::json::array();
  for (int col = 0; col < m.outerSize(); ++col)
    for (SparseMat::InnerIterator it(m, col); it; ++it)
      t.push_back({it.row(), it.col(), it.value()});
  return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"triplets", t}};
}

inline SparseMat sparse_from_json(const nlohmann::json& j) {
  std::vector<Triplet> ts;
  for (const auto& e : j.at("triplets"))
    ts.emplace_back(e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>());
  SparseMat m(j.at("rows").get<int>(), j.at("cols").get<int>());
  m.setFromTriplets(ts.begin(), ts.end());
  m.makeCompressed();
  return m;
}

inline const char* block_name(ConeBlockType t) {
  switch (t) {
    case ConeBlockType::free_vars: return "free";
    case ConeBlockType::nonneg: return "nonneg";
    case ConeBlockType::soc: return "soc";
    case ConeBlockType::rotated_soc: return "rotated_soc";
  }
  return "free";
}

inline ConeBlockType block_from_name(const std::string& s) {
  if (s == "free") return ConeBlockType::free_vars;
  if (s == "nonneg") return ConeBlockType::nonneg;
  if (s == "soc") return ConeBlockType::soc;
  if (s == "rotated_soc") return ConeBlockType::rotated_soc;
  throw std::invalid_argument("unknown cone block type: " + s);
}

}  // namespace detail

inline std::string program_to_json(const ConicProgram& p) {
  nlohmann::json j;
  j["gamma_dim"] = p.gamma_dim;
  j["L_dim"] = p.L_dim;
  j["h"] = std::vector<double>(p.h.data(), p.h.data() + p.h.size());
  j["A"] = detail::sparse_to_json(p.A);
  j["C"] = detail::sparse_to_json(p.C);
  j["b0"] = std::vector<double>(p.b.v0.data(), p.b.v0.data() + p.b.v0.size());
  j["Bg"] = detail::sparse_to_json(p.b.Vg);
  j["BL"] = detail::sparse_to_json(p.b.VL);
  j["d0"] = std::vector<double>(p.d.v0.data(), p.d.v0.data() + p.d.v0.size());
  j["Dg"] = detail::sparse_to_json(p.d.Vg);
  j["DL"] = detail::sparse_to_json(p.d.VL);
  j["cone"] = nlohmann::json::array();
  for (const ConeBlock& blk : p.cone.blocks)
    j["cone"].push_back({{"type", detail::block_name(blk.type)}, {"dim", blk.dim}});
  j["offset"] = {{"c0", p.offset.c0},
                 {"cg", std::vector<double>(p.offset.cg.data(), p.offset.cg.data() + p.offset.cg.size())},
                 {"cL", std::vector<double>(p.offset.cL.data(), p.offset.cL.data() + p.offset.cL.size())}};
  j["var_names"] = p.var_names;
  j["binary_cols"] = p.binary_cols;
  return j.dump(2);
}

inline ConicProgram program_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  ConicProgram p;
  p.gamma_dim = j.at("gamma_dim").get<int>();
  p.L_dim = j.at("L_dim").get<int>();
  const auto hv = j.at("h").get<std::vector<double>>();
  p.h = Eigen::Map<const Eigen::VectorXd>(hv.data(), static_cast<Eigen::Index>(hv.size()));
  p.A = detail::sparse_from_json(j.at("A"));
  p.C = detail::sparse_from_json(j.at("C"));
  auto vec = [&j](const char* key) {
    const auto v = j.at(key).get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  p.b.v0 = vec("b0");
  p.b.Vg = detail::sparse_from_json(j.at("Bg"));
  p.b.VL = detail::sparse_from_json(j.at("BL"));
  p.d.v0 = vec("d0");
  p.d.Vg = detail::sparse_from_json(j.at("Dg"));
  p.d.VL = detail::sparse_from_json(j.at("DL"));
  for (const auto& blk : j.at("cone"))
    p.cone.blocks.push_back(
        {detail::block_from_name(blk.at("type").get<std::string>()), blk.at("dim").get<int>()});
  p.offset.c0 = j.at("offset").at("c0").get<double>();
  const auto cg = j.at("offset").at("cg").get<std::vector<double>>();
  p.offset.cg = Eigen::Map<const Eigen::VectorXd>(cg.data(), static_cast<Eigen::Index>(cg.size()));
  const auto cL = j.at("offset").at("cL").get<std::vector<double>>();
  p.offset.cL = Eigen::Map<const Eigen::VectorXd>(cL.data(), static_cast<Eigen::Index>(cL.size()));
  p.var_names = j.at("var_names").get<std::vector<std::string>>();
  p.binary_cols = j.at("binary_cols").get<std::vector<int>>();
  p.check();
  return p;
}

}  // namespace shedbound
