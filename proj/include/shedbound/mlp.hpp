#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "shedbound/rng.hpp"
#include "shedbound/scenario.hpp"
#include "shedbound/training.hpp"

namespace shedbound {

struct ModelSchemaError : std::runtime_error {
  explicit ModelSchemaError(const std::string& what) : std::runtime_error(what) {}
};

struct TrainingDivergence : std::runtime_error {
  int epoch;
  TrainingDivergence(const std::string& what, int epoch_)
      : std::runtime_error(what), epoch(epoch_) {}
};

namespace nn {

// clamped away from {0,1} so outputs stay strictly interior and the
// cross-entropy stays finite
inline double sigmoid(double a) {
  const double s = 1.0 / (1.0 + std::exp(-a));
  return std::min(1.0 - 1e-12, std::max(1e-12, s));
}

inline double sigmoid_prime_of(double s) { return s * (1.0 - s); }

}  // namespace nn

/// FNV-1a over the structural identity the NN input layout depends on.
inline std::uint64_t layout_hash(const NetworkCase& c) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t x) {
    for (int k = 0; k < 8; ++k) {
      h ^= (x >> (8 * k)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  mix(c.loads().size());
  mix(c.lines().size());
  for (const Load& d : c.loads()) mix(static_cast<std::uint64_t>(d.bus));
  for (const Line& l : c.lines()) {
    mix(static_cast<std::uint64_t>(l.id));
    mix(static_cast<std::uint64_t>(l.from_bus));
    mix(static_cast<std::uint64_t>(l.to_bus));
  }
  return h;
}

struct TrainConfig {
  int hidden = 32;
  double lr = 0.05;
  int epochs = 300;
  int batch = 32;
  std::uint64_t seed = 1;
};

/// Two-hidden-layer sigmoid MLP mapping a raw scenario vector to per-line
/// activation probabilities. Input normalization to [-1, 1] over the gamma
/// box is part of the model.
struct MLPModel {
  std::vector<int> dims;  // n_in, h, h, n_out
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;
  Eigen::VectorXd norm_lo, norm_hi;
  std::string case_name;
  std::uint64_t layout = 0;
  TrainConfig train_cfg;
  double final_loss = std::numeric_limits<double>::quiet_NaN();

  int n_in() const { return dims.front(); }
  int n_out() const { return dims.back(); }

  double norm_scale(int i) const {
    const double span = norm_hi[i] - norm_lo[i];
    return span > 1e-15 ? 2.0 / span : 0.0;
  }

  Eigen::VectorXd normalize(const Eigen::VectorXd& g) const {
    Eigen::VectorXd y(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const double s = norm_scale(static_cast<int>(i));
      y[i] = s > 0.0 ? s * (g[i] - norm_lo[i]) - 1.0 : 0.0;
    }
    return y;
  }

  Eigen::VectorXd denormalize(const Eigen::VectorXd& y) const {
    Eigen::VectorXd g(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double s = norm_scale(static_cast<int>(i));
      g[i] = s > 0.0 ? norm_lo[i] + (y[i] + 1.0) / s : norm_lo[i];
    }
    return g;
  }
};

struct ForwardTrace {
  Eigen::VectorXd y0;          // normalized input
  Eigen::VectorXd a1, y1, a2, y2, a3;
  Eigen::VectorXd out;
};

inline ForwardTrace forward_trace(const MLPModel& m, const Eigen::VectorXd& gamma) {
  if (gamma.size() != m.n_in()) throw DimensionError("input size does not match model");
  ForwardTrace t;
  t.y0 = m.normalize(gamma);
  t.a1 = m.W[0] * t.y0 + m.b[0];
  t.y1 = t.a1.unaryExpr([](double a) { return nn::sigmoid(a); });
  t.a2 = m.W[1] * t.y1 + m.b[1];
  t.y2 = t.a2.unaryExpr([](double a) { return nn::sigmoid(a); });
  t.a3 = m.W[2] * t.y2 + m.b[2];
  t.out = t.a3.unaryExpr([](double a) { return nn::sigmoid(a); });
  return t;
}

inline Eigen::VectorXd forward(const MLPModel& m, const Eigen::VectorXd& gamma) {
  return forward_trace(m, gamma).out;
}

inline Eigen::VectorXd forward(const MLPModel& m, const ScenarioInput& sc) {
  return forward(m, sc.to_vector());
}

/// Exact reverse-mode Jacobian dL/dgamma (n_out x n_in), including the
/// input normalization.
inline Eigen::MatrixXd jacobian(const MLPModel& m, const Eigen::VectorXd& gamma) {
  const ForwardTrace t = forward_trace(m, gamma);
  Eigen::MatrixXd J = t.out.unaryExpr([](double s) { return nn::sigmoid_prime_of(s); })
                          .asDiagonal() *
                      m.W[2];
  J = J * t.y2.unaryExpr([](double s) { return nn::sigmoid_prime_of(s); }).asDiagonal() * m.W[1];
  J = J * t.y1.unaryExpr([](double s) { return nn::sigmoid_prime_of(s); }).asDiagonal() * m.W[0];
  for (int i = 0; i < m.n_in(); ++i) J.col(i) *= m.norm_scale(i);
  return J;
}

/// Threshold probabilities into binary statuses; 0.5 snaps to energized.
inline Eigen::VectorXd snap(const Eigen::VectorXd& probabilities) {
  return probabilities.unaryExpr([](double p) { return p >= 0.5 ? 1.0 : 0.0; });
}

/// Supervised training: mean binary cross-entropy, plain mini-batch gradient
/// descent, deterministic under the seed.
inline MLPModel train(const NetworkCase& c, const TrainingSet& data, const TrainConfig& cfg) {
  if (data.samples.empty()) throw std::invalid_argument("empty training set");
  if (cfg.hidden < 1) throw std::invalid_argument("hidden width must be positive");
  const GammaLayout lay = GammaLayout::of(c);
  const GammaBox box = gamma_box(c);
  const int n_in = lay.dim();
  const int n_out = lay.n_lines;

  MLPModel m;
  m.dims = {n_in, cfg.hidden, cfg.hidden, n_out};
  m.norm_lo = box.lo;
  m.norm_hi = box.hi;
  m.case_name = c.name();
  m.layout = layout_hash(c);
  m.train_cfg = cfg;

  Rng rng(cfg.seed);
  for (int layer = 0; layer < 3; ++layer) {
    const int rows = m.dims[layer + 1], cols = m.dims[layer];
    const double lim = std::sqrt(6.0 / (rows + cols));
    Eigen::MatrixXd W(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) W(i, j) = rng.uniform(-lim, lim);
    m.W.push_back(std::move(W));
    m.b.push_back(Eigen::VectorXd::Zero(rows));
  }

  const int ns = static_cast<int>(data.samples.size());
  std::vector<Eigen::VectorXd> xs(ns), ys(ns);
  for (int i = 0; i < ns; ++i) {
    xs[i] = data.samples[i].gamma.to_vector();
    ys[i] = data.samples[i].z;
  }
  std::vector<int> order(ns);
  std::iota(order.begin(), order.end(), 0);

  const int batch = std::max(1, std::min(cfg.batch, ns));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = ns - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
    double epoch_loss = 0.0;
    for (int at = 0; at < ns; at += batch) {
      const int bsz = std::min(batch, ns - at);
      std::vector<Eigen::MatrixXd> gW(3);
      std::vector<Eigen::VectorXd> gb(3);
      for (int layer = 0; layer < 3; ++layer) {
        gW[layer].setZero(m.W[layer].rows(), m.W[layer].cols());
        gb[layer].setZero(m.b[layer].size());
      }
      const double inv = 1.0 / (static_cast<double>(bsz) * n_out);
      for (int k = 0; k < bsz; ++k) {
        const int idx = order[at + k];
        const ForwardTrace t = forward_trace(m, xs[idx]);
        for (int o = 0; o < n_out; ++o) {
          const double y = ys[idx][o];
          epoch_loss -= (y * std::log(t.out[o]) + (1.0 - y) * std::log(1.0 - t.out[o]));
        }
        const Eigen::VectorXd d3 = (t.out - ys[idx]) * inv;  // dLoss/da3
        const Eigen::VectorXd d2 =
            (m.W[2].transpose() * d3).cwiseProduct(t.y2.unaryExpr([](double s) {
              return nn::sigmoid_prime_of(s);
            }));
        const Eigen::VectorXd d1 =
            (m.W[1].transpose() * d2).cwiseProduct(t.y1.unaryExpr([](double s) {
              return nn::sigmoid_prime_of(s);
            }));
        gW[2] += d3 * t.y2.transpose();
        gb[2] += d3;
        gW[1] += d2 * t.y1.transpose();
        gb[1] += d2;
        gW[0] += d1 * t.y0.transpose();
        gb[0] += d1;
      }
      for (int layer = 0; layer < 3; ++layer) {
        m.W[layer] -= cfg.lr * gW[layer];
        m.b[layer] -= cfg.lr * gb[layer];
      }
    }
    epoch_loss /= static_cast<double>(ns) * n_out;
    if (!std::isfinite(epoch_loss))
      throw TrainingDivergence("loss diverged at epoch " + std::to_string(epoch), epoch);
    m.final_loss = epoch_loss;
  }
  return m;
}

/// Mean training loss of a model on a dataset (for reporting).
inline double bce_loss(const MLPModel& m, const TrainingSet& data) {
  double loss = 0.0;
  for (const TrainingSample& s : data.samples) {
    const Eigen::VectorXd out = forward(m, s.gamma.to_vector());
    for (Eigen::Index o = 0; o < out.size(); ++o)
      loss -= s.z[o] * std::log(out[o]) + (1.0 - s.z[o]) * std::log(1.0 - out[o]);
  }
  return loss / (static_cast<double>(data.samples.size()) * m.n_out());
}

/// Fraction of line decisions the snapped prediction gets right.
inline double snap_accuracy(const MLPModel& m, const TrainingSet& data) {
  long hits = 0, total = 0;
  for (const TrainingSample& s : data.samples) {
    const Eigen::VectorXd z = snap(forward(m, s.gamma.to_vector()));
    for (Eigen::Index o = 0; o < z.size(); ++o) {
      hits += z[o] == s.z[o] ? 1 : 0;
      ++total;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline std::string model_to_json(const MLPModel& m) {
  nlohmann::json j;
  j["schema"] = "shedbound-mlp-v1";
  j["dims"] = m.dims;
  j["layers"] = nlohmann::json::array();
  for (int layer = 0; layer < 3; ++layer) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.W[layer].rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index k = 0; k < m.W[layer].cols(); ++k) row.push_back(m.W[layer](i, k));
      rows.push_back(row);
    }
    j["layers"].push_back(
        {{"w", rows},
         {"b", std::vector<double>(m.b[layer].data(), m.b[layer].data() + m.b[layer].size())}});
  }
  j["norm"] = {{"lo", std::vector<double>(m.norm_lo.data(), m.norm_lo.data() + m.norm_lo.size())},
               {"hi", std::vector<double>(m.norm_hi.data(), m.norm_hi.data() + m.norm_hi.size())}};
  j["meta"] = {{"case", m.case_name},
               {"layout_hash", m.layout},
               {"final_loss", m.final_loss},
               {"train", {{"hidden", m.train_cfg.hidden},
                          {"lr", m.train_cfg.lr},
                          {"epochs", m.train_cfg.epochs},
                          {"batch", m.train_cfg.batch},
                          {"seed", m.train_cfg.seed}}}};
  return j.dump(2);
}

inline MLPModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelSchemaError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != "shedbound-mlp-v1")
      throw ModelSchemaError("unsupported model schema");
    MLPModel m;
    m.dims = j.at("dims").get<std::vector<int>>();
    if (m.dims.size() != 4) throw ModelSchemaError("expected 4 layer dims");
    for (const auto& layer : j.at("layers")) {
      const auto& wj = layer.at("w");
      Eigen::MatrixXd W(wj.size(), wj.empty() ? 0 : wj[0].size());
      for (std::size_t i = 0; i < wj.size(); ++i)
        for (std::size_t k = 0; k < wj[i].size(); ++k)
          W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = wj[i][k].get<double>();
      const auto bv = layer.at("b").get<std::vector<double>>();
      m.W.push_back(std::move(W));
      m.b.push_back(Eigen::Map<const Eigen::VectorXd>(bv.data(), static_cast<Eigen::Index>(bv.size())));
    }
    if (m.W.size() != 3) throw ModelSchemaError("expected 3 layers");
    for (int layer = 0; layer < 3; ++layer) {
      if (m.W[layer].rows() != m.dims[layer + 1] || m.W[layer].cols() != m.dims[layer] ||
          m.b[layer].size() != m.dims[layer + 1])
        throw ModelSchemaError("layer shapes inconsistent with dims");
      if (!m.W[layer].allFinite() || !m.b[layer].allFinite())
        throw ModelSchemaError("non-finite weights");
    }
    const auto lo = j.at("norm").at("lo").get<std::vector<double>>();
    const auto hi = j.at("norm").at("hi").get<std::vector<double>>();
    if (static_cast<int>(lo.size()) != m.dims[0] || static_cast<int>(hi.size()) != m.dims[0])
      throw ModelSchemaError("normalization size mismatch");
    m.norm_lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    m.norm_hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    m.case_name = j.at("meta").at("case").get<std::string>();
    m.layout = j.at("meta").at("layout_hash").get<std::uint64_t>();
    const auto& fl = j.at("meta").at("final_loss");
    m.final_loss =
        fl.is_number() ? fl.get<double>() : std::numeric_limits<double>::quiet_NaN();
    const auto& tj = j.at("meta").at("train");
    m.train_cfg.hidden = tj.at("hidden").get<int>();
    m.train_cfg.lr = tj.at("lr").get<double>();
    m.train_cfg.epochs = tj.at("epochs").get<int>();
    m.train_cfg.batch = tj.at("batch").get<int>();
    m.train_cfg.seed = tj.at("seed").get<std::uint64_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ModelSchemaError(std::string("malformed model container: ") + e.what());
  }
}

/// A model may only drive cases whose layout matches the one it was
/// trained against.
inline void check_compatible(const MLPModel& m, const NetworkCase& c) {
  if (m.layout != layout_hash(c))
    throw ModelSchemaError("model layout hash does not match case");
  const GammaLayout lay = GammaLayout::of(c);
  if (m.n_in() != lay.dim() || m.n_out() != lay.n_lines)
    throw ModelSchemaError("model dimensions do not match case");
}

}  // namespace shedbound
