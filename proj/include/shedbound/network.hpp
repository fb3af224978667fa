#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace shedbound {

struct SemanticError : std::runtime_error {
  explicit SemanticError(const std::string& what) : std::runtime_error(what) {}
};

struct Bus {
  int id = 0;
  double v_min = 0.0;  // p.u.
  double v_max = 0.0;  // p.u.
};

struct Shunt {
  int bus = 0;
  double gs = 0.0;  // p.u. conductance
  double bs = 0.0;  // p.u. susceptance
};

struct Line {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double g = 0.0;       // series conductance p.u.
  double b = 0.0;       // series susceptance p.u.
  double g_fr = 0.0;    // from-side line-shunt conductance
  double g_to = 0.0;
  double b_fr = 0.0;    // from-side line-shunt susceptance (charging/2)
  double b_to = 0.0;
  double tap_mag = 1.0;
  double tap_re = 1.0;
  double tap_im = 0.0;
  double thermal = 0.0;    // apparent-power limit p.u.
  double theta_min = 0.0;  // rad, must equal -theta_max
  double theta_max = 0.0;  // rad
  double risk = 1.0;       // base risk weight, scaled by scenario multiplier
};

struct Generator {
  int bus = 0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
};

struct Load {
  int bus = 0;
  double p_base = 0.0;
  double q_base = 0.0;
};

/// Box containing V_i V_j (cos, sin)(theta_i - theta_j) over the voltage
/// magnitude and symmetric angle-difference limits.
struct WBox {
  double wr_min = 0.0;
  double wr_max = 0.0;
  double wi_min = 0.0;
  double wi_max = 0.0;
};

inline WBox compute_w_bounds(double v_min_i, double v_max_i, double v_min_j,
                             double v_max_j, double theta_max) {
  if (!(v_min_i > 0.0 && v_min_j > 0.0 && v_min_i <= v_max_i &&
        v_min_j <= v_max_j))
    throw std::domain_error("compute_w_bounds: voltage bounds must satisfy 0 < vmin <= vmax");
  if (!(theta_max >= 0.0 && theta_max < 1.5707963267948966))
    throw std::domain_error("compute_w_bounds: theta_max must lie in [0, pi/2)");
  WBox w;
  w.wr_max = v_max_i * v_max_j;
  w.wr_min = v_min_i * v_min_j * std::cos(theta_max);
  w.wi_max = v_max_i * v_max_j * std::sin(theta_max);
  w.wi_min = -w.wi_max;
  return w;
}

struct Finding {
  enum class Severity { error, warning };
  Severity severity = Severity::error;
  std::string path;     // e.g. "lines[3]"
  std::string message;
};

struct CaseData {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> gens;
  std::vector<Load> loads;
  std::vector<Shunt> shunts;
};

struct CaseOptions {
  double theta_delta_max = M_PI / 3.0;  // big-M angle constant, dominates every theta_max
};

/// Immutable per-unit grid model with ascending-id ordering and precomputed
/// incidence maps and per-line W boxes. Shareable across threads.
class NetworkCase {
 public:
  static NetworkCase build(CaseData data, CaseOptions opts = {}) {
    NetworkCase c;
    c.name_ = data.name;
    c.base_mva_ = data.base_mva;
    c.theta_delta_max_ = opts.theta_delta_max;
    c.buses_ = std::move(data.buses);
    c.lines_ = std::move(data.lines);
    c.gens_ = std::move(data.gens);
    c.loads_ = std::move(data.loads);
    c.shunts_ = std::move(data.shunts);

    std::sort(c.buses_.begin(), c.buses_.end(),
              [](const Bus& a, const Bus& b) { return a.id < b.id; });
    std::sort(c.lines_.begin(), c.lines_.end(),
              [](const Line& a, const Line& b) { return a.id < b.id; });
    std::sort(c.gens_.begin(), c.gens_.end(),
              [](const Generator& a, const Generator& b) { return a.bus < b.bus; });
    std::sort(c.loads_.begin(), c.loads_.end(),
              [](const Load& a, const Load& b) { return a.bus < b.bus; });
    std::sort(c.shunts_.begin(), c.shunts_.end(),
              [](const Shunt& a, const Shunt& b) { return a.bus < b.bus; });

    for (std::size_t i = 0; i < c.buses_.size(); ++i) {
      if (!c.bus_index_.emplace(c.buses_[i].id, static_cast<int>(i)).second)
        throw SemanticError("duplicate bus id " + std::to_string(c.buses_[i].id));
    }
    c.gens_at_bus_.resize(c.buses_.size());
    c.loads_at_bus_.resize(c.buses_.size());
    c.shunts_at_bus_.resize(c.buses_.size());
    c.line_ends_at_bus_.resize(c.buses_.size());

    for (std::size_t k = 0; k < c.gens_.size(); ++k)
      c.gens_at_bus_[c.require_bus(c.gens_[k].bus, "gen")].push_back(static_cast<int>(k));
    for (std::size_t k = 0; k < c.loads_.size(); ++k)
      c.loads_at_bus_[c.require_bus(c.loads_[k].bus, "load")].push_back(static_cast<int>(k));
    for (std::size_t k = 0; k < c.shunts_.size(); ++k)
      c.shunts_at_bus_[c.require_bus(c.shunts_[k].bus, "shunt")].push_back(static_cast<int>(k));
    for (std::size_t k = 0; k < c.lines_.size(); ++k) {
      const int fi = c.require_bus(c.lines_[k].from_bus, "line");
      const int ti = c.require_bus(c.lines_[k].to_bus, "line");
      c.line_ends_at_bus_[fi].push_back({static_cast<int>(k), true});
      c.line_ends_at_bus_[ti].push_back({static_cast<int>(k), false});
    }

    c.p_tot_ = 0.0;
    for (const Load& d : c.loads_) c.p_tot_ += d.p_base;
    c.r_tot_ = 0.0;
    for (const Line& l : c.lines_) c.r_tot_ += l.risk;

    c.w_bounds_.reserve(c.lines_.size());
    for (const Line& l : c.lines_) {
      const Bus& bi = c.buses_[c.bus_index(l.from_bus)];
      const Bus& bj = c.buses_[c.bus_index(l.to_bus)];
      const double th = std::min(std::abs(l.theta_max), 1.5707963267948966 - 1e-9);
      if (bi.v_min > 0.0 && bj.v_min > 0.0 && bi.v_min <= bi.v_max && bj.v_min <= bj.v_max)
        c.w_bounds_.push_back(compute_w_bounds(bi.v_min, bi.v_max, bj.v_min, bj.v_max, th));
      else
        c.w_bounds_.push_back(WBox{});  // invalid voltages reported by validate()
    }
    return c;
  }

  const std::string& name() const { return name_; }
  double base_mva() const { return base_mva_; }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  const std::vector<Generator>& gens() const { return gens_; }
  const std::vector<Load>& loads() const { return loads_; }
  const std::vector<Shunt>& shunts() const { return shunts_; }

  int bus_index(int bus_id) const {
    auto it = bus_index_.find(bus_id);
    if (it == bus_index_.end())
      throw SemanticError("unknown bus id " + std::to_string(bus_id));
    return it->second;
  }

  const std::vector<int>& gens_at(int bus_idx) const { return gens_at_bus_[bus_idx]; }
  const std::vector<int>& loads_at(int bus_idx) const { return loads_at_bus_[bus_idx]; }
  const std::vector<int>& shunts_at(int bus_idx) const { return shunts_at_bus_[bus_idx]; }
  /// Incident line ends; .second is true for the from side.
  const std::vector<std::pair<int, bool>>& line_ends_at(int bus_idx) const {
    return line_ends_at_bus_[bus_idx];
  }

  double p_tot() const { return p_tot_; }
  double r_tot() const { return r_tot_; }
  double theta_delta_max() const { return theta_delta_max_; }
  const WBox& w_bounds(int line_idx) const { return w_bounds_[line_idx]; }

 private:
  int require_bus(int bus_id, const char* what) const {
    auto it = bus_index_.find(bus_id);
    if (it == bus_index_.end())
      throw SemanticError(std::string(what) + " references missing bus " + std::to_string(bus_id));
    return it->second;
  }

  std::string name_;
  double base_mva_ = 100.0;
  double p_tot_ = 0.0;
  double r_tot_ = 0.0;
  double theta_delta_max_ = M_PI / 3.0;
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::vector<Generator> gens_;
  std::vector<Load> loads_;
  std::vector<Shunt> shunts_;
  std::map<int, int> bus_index_;
  std::vector<std::vector<int>> gens_at_bus_, loads_at_bus_, shunts_at_bus_;
  std::vector<std::vector<std::pair<int, bool>>> line_ends_at_bus_;
  std::vector<WBox> w_bounds_;
};

/// Invariant audit. Empty result iff every type invariant holds.
inline std::vector<Finding> validate(const NetworkCase& c) {
  std::vector<Finding> out;
  auto err = [&out](std::string path, std::string msg) {
    out.push_back({Finding::Severity::error, std::move(path), std::move(msg)});
  };
  for (std::size_t i = 0; i < c.buses().size(); ++i) {
    const Bus& b = c.buses()[i];
    if (!(b.v_min > 0.0 && b.v_min <= b.v_max))
      err("buses[" + std::to_string(i) + "]", "voltage bounds must satisfy 0 < vmin <= vmax");
  }
  for (std::size_t i = 0; i < c.lines().size(); ++i) {
    const Line& l = c.lines()[i];
    const std::string path = "lines[" + std::to_string(i) + "]";
    if (std::abs(l.tap_mag * l.tap_mag - (l.tap_re * l.tap_re + l.tap_im * l.tap_im)) > 1e-9)
      err(path, "tap magnitude inconsistent with rectangular components");
    if (!(l.thermal > 0.0)) err(path, "nonpositive thermal limit");
    if (!(l.theta_min < 0.0 && l.theta_max > 0.0))
      err(path, "angle limits must straddle zero");
    else if (std::abs(l.theta_min + l.theta_max) > 1e-12)
      err(path, "asymmetric angle bounds");
    if (!(l.risk >= 0.0)) err(path, "negative risk weight");
  }
  for (std::size_t i = 0; i < c.gens().size(); ++i) {
    const Generator& g = c.gens()[i];
    const std::string path = "gens[" + std::to_string(i) + "]";
    if (!(g.p_max >= 0.0)) err(path, "negative active power limit");
    if (!(g.q_min <= g.q_max)) err(path, "reactive limits inverted");
  }
  for (std::size_t i = 0; i < c.loads().size(); ++i) {
    if (!(c.loads()[i].p_base >= 0.0))
      err("loads[" + std::to_string(i) + "]", "negative base active demand");
  }
  if (!(c.p_tot() > 0.0)) err("case", "total base demand must be positive");
  if (!(c.r_tot() > 0.0)) err("case", "total base risk must be positive");
  return out;
}

}  // namespace shedbound
