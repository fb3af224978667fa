#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "shedbound/network.hpp"
#include "shedbound/rng.hpp"

namespace shedbound {

/// Frozen ordering of the scenario vector gamma: [p_d..., q_d..., r..., alpha]
/// with loads and lines in ascending-id (case) order.
struct GammaLayout {
  int n_loads = 0;
  int n_lines = 0;

  int dim() const { return 2 * n_loads + n_lines + 1; }
  int p_index(int d) const { return d; }
  int q_index(int d) const { return n_loads + d; }
  int r_index(int l) const { return 2 * n_loads + l; }
  int alpha_index() const { return 2 * n_loads + n_lines; }

  static GammaLayout of(const NetworkCase& c) {
    return {static_cast<int>(c.loads().size()), static_cast<int>(c.lines().size())};
  }
};

/// Verification box: loads within +-25% of base, risk multipliers and alpha
/// in [0.25, 0.75]. Components with zero base load degenerate to a point.
struct GammaBox {
  Eigen::VectorXd lo, hi;

  bool contains(const Eigen::VectorXd& g, double tol = 1e-9) const {
    return ((g - lo).minCoeff() >= -tol) && ((hi - g).minCoeff() >= -tol);
  }
  Eigen::VectorXd midpoint() const { return 0.5 * (lo + hi); }
};

inline GammaBox gamma_box(const NetworkCase& c) {
  const GammaLayout lay = GammaLayout::of(c);
  GammaBox box;
  box.lo.resize(lay.dim());
  box.hi.resize(lay.dim());
  for (int d = 0; d < lay.n_loads; ++d) {
    const Load& ld = c.loads()[d];
    box.lo[lay.p_index(d)] = std::min(0.75 * ld.p_base, 1.25 * ld.p_base);
    box.hi[lay.p_index(d)] = std::max(0.75 * ld.p_base, 1.25 * ld.p_base);
    box.lo[lay.q_index(d)] = std::min(0.75 * ld.q_base, 1.25 * ld.q_base);
    box.hi[lay.q_index(d)] = std::max(0.75 * ld.q_base, 1.25 * ld.q_base);
  }
  for (int l = 0; l < lay.n_lines; ++l) {
    box.lo[lay.r_index(l)] = 0.25;
    box.hi[lay.r_index(l)] = 0.75;
  }
  box.lo[lay.alpha_index()] = 0.25;
  box.hi[lay.alpha_index()] = 0.75;
  return box;
}

/// One NN input point: per-load demands, per-line risk multipliers, alpha.
struct ScenarioInput {
  Eigen::VectorXd p_d;
  Eigen::VectorXd q_d;
  Eigen::VectorXd r;
  double alpha = 0.5;

  Eigen::VectorXd to_vector() const {
    const int nd = static_cast<int>(p_d.size());
    const int nl = static_cast<int>(r.size());
    Eigen::VectorXd g(2 * nd + nl + 1);
    g.head(nd) = p_d;
    g.segment(nd, nd) = q_d;
    g.segment(2 * nd, nl) = r;
    g[2 * nd + nl] = alpha;
    return g;
  }

  static ScenarioInput from_vector(const GammaLayout& lay, const Eigen::VectorXd& g) {
    if (g.size() != lay.dim()) throw std::invalid_argument("gamma vector size mismatch");
    ScenarioInput s;
    s.p_d = g.head(lay.n_loads);
    s.q_d = g.segment(lay.n_loads, lay.n_loads);
    s.r = g.segment(2 * lay.n_loads, lay.n_lines);
    s.alpha = g[lay.alpha_index()];
    return s;
  }

  static ScenarioInput base_of(const NetworkCase& c) {
    ScenarioInput s;
    const int nd = static_cast<int>(c.loads().size());
    s.p_d.resize(nd);
    s.q_d.resize(nd);
    for (int d = 0; d < nd; ++d) {
      s.p_d[d] = c.loads()[d].p_base;
      s.q_d[d] = c.loads()[d].q_base;
    }
    s.r = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(c.lines().size()), 0.5);
    s.alpha = 0.5;
    return s;
  }
};

/// Uniform draw from the gamma box, component-wise independent.
inline ScenarioInput sample_gamma(const NetworkCase& c, Rng& rng) {
  const GammaLayout lay = GammaLayout::of(c);
  const GammaBox box = gamma_box(c);
  Eigen::VectorXd g(lay.dim());
  for (int i = 0; i < lay.dim(); ++i) g[i] = rng.uniform(box.lo[i], box.hi[i]);
  return ScenarioInput::from_vector(lay, g);
}

}  // namespace shedbound
