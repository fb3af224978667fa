#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace shedbound {

enum class ConeBlockType { free_vars, nonneg, soc, rotated_soc };

struct ConeBlock {
  ConeBlockType type = ConeBlockType::free_vars;
  int dim = 0;
};

/// Ordered cone blocks tiling the variable vector.
/// Conventions: soc is x1 >= ||x2..n||, n >= 2; rotated_soc is
/// 2*x1*x2 >= ||x3..n||^2 with x1, x2 >= 0, n >= 3. Both are self-dual
/// under these conventions; the dual of a free block is the zero cone.
struct ConeSpec {
  std::vector<ConeBlock> blocks;

  int total_dim() const {
    int n = 0;
    for (const ConeBlock& b : blocks) n += b.dim;
    return n;
  }

  void check(int num_vars) const {
    if (total_dim() != num_vars)
      throw std::invalid_argument("cone blocks do not tile the variable vector");
    for (const ConeBlock& b : blocks) {
      if (b.type == ConeBlockType::soc && b.dim < 2)
        throw std::invalid_argument("soc block needs dim >= 2");
      if (b.type == ConeBlockType::rotated_soc && b.dim < 3)
        throw std::invalid_argument("rotated_soc block needs dim >= 3");
      if (b.dim < 0) throw std::invalid_argument("negative block dim");
    }
  }
};

namespace cones {

constexpr double kSqrtHalf = 0.7071067811865476;

/// Orthogonal involution mapping rotated_soc coordinates to soc coordinates:
/// (u, v, w) -> ((u+v)/sqrt2, (u-v)/sqrt2, w). Its own inverse and adjoint.
inline void rsoc_to_soc(Eigen::Ref<Eigen::VectorXd> v) {
  const double a = v[0], b = v[1];
  v[0] = kSqrtHalf * (a + b);
  v[1] = kSqrtHalf * (a - b);
}

inline double soc_violation(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double tail = v.size() > 1 ? v.tail(v.size() - 1).norm() : 0.0;
  return tail - v[0];
}

/// Signed infeasibility of one block: <= 0 means inside the (primal) cone.
inline double block_violation(ConeBlockType t, const Eigen::Ref<const Eigen::VectorXd>& v) {
  switch (t) {
    case ConeBlockType::free_vars:
      return 0.0;
    case ConeBlockType::nonneg:
      return v.size() ? -v.minCoeff() : 0.0;
    case ConeBlockType::soc:
      return soc_violation(v);
    case ConeBlockType::rotated_soc: {
      Eigen::VectorXd w = v;
      rsoc_to_soc(w);
      return soc_violation(w);
    }
  }
  return 0.0;
}

/// Violation of the dual block (free -> zero cone, others self-dual).
inline double dual_block_violation(ConeBlockType t, const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (t == ConeBlockType::free_vars) return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
  return block_violation(t, v);
}

inline void project_soc(Eigen::Ref<Eigen::VectorXd> v) {
  const Eigen::Index n = v.size();
  const double tail = n > 1 ? v.tail(n - 1).norm() : 0.0;
  if (tail <= v[0]) return;
  if (tail <= -v[0]) {
    v.setZero();
    return;
  }
  const double scale = 0.5 * (1.0 + v[0] / tail);
  v[0] = scale * tail;
  v.tail(n - 1) *= scale;
}

/// Euclidean projection onto the block (self-dual blocks only; projecting a
/// dual multiplier onto a free block's dual, the zero cone, zeroes it).
inline void project_block(ConeBlockType t, Eigen::Ref<Eigen::VectorXd> v, bool dual = false) {
  switch (t) {
    case ConeBlockType::free_vars:
      if (dual) v.setZero();
      return;
    case ConeBlockType::nonneg:
      v = v.cwiseMax(0.0);
      return;
    case ConeBlockType::soc:
      project_soc(v);
      return;
    case ConeBlockType::rotated_soc:
      rsoc_to_soc(v);  // orthogonal, so projection commutes with the rotation
      project_soc(v);
      rsoc_to_soc(v);
      return;
  }
}

inline double max_violation(const ConeSpec& spec, const Eigen::VectorXd& x, bool dual = false) {
  double worst = 0.0;
  int at = 0;
  for (const ConeBlock& blk : spec.blocks) {
    const auto seg = x.segment(at, blk.dim);
    worst = std::max(worst, dual ? dual_block_violation(blk.type, seg)
                                 : block_violation(blk.type, seg));
    at += blk.dim;
  }
  return worst;
}

inline void project(const ConeSpec& spec, Eigen::VectorXd& x, bool dual = false) {
  int at = 0;
  for (const ConeBlock& blk : spec.blocks) {
    auto seg = x.segment(at, blk.dim);
    project_block(blk.type, seg, dual);
    at += blk.dim;
  }
}

}  // namespace cones
}  // namespace shedbound
