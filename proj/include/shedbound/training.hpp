#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "shedbound/bnb.hpp"
#include "shedbound/parallel.hpp"
#include "shedbound/scenario.hpp"

namespace shedbound {

struct TrainingSample {
  ScenarioInput gamma;
  Eigen::VectorXd z;  // globally optimal binary statuses
  double objective = 0.0;
  double alpha = 0.5;
};

struct TrainingSet {
  std::vector<TrainingSample> samples;
  int rejected = 0;
};

struct BudgetExhausted : std::runtime_error {
  explicit BudgetExhausted(const std::string& what) : std::runtime_error(what) {}
};

/// Draw gamma uniformly from the Eq.-15 box (alpha clamped to the requested
/// range), solve SOC-OPS to certified global optimality, and record the
/// (gamma, z*) pair. Rejected draws (non-certified or failed) are re-drawn;
/// each draw has its own index-derived seed, so results are byte-identical
/// whether the draws run serially or in parallel.
inline TrainingSet generate_training_set(const NetworkCase& c, int n, double alpha_lo,
                                         double alpha_hi, std::uint64_t seed,
                                         const OPSConfig& cfg = {}, int jobs = 1) {
  if (n < 1) throw std::invalid_argument("need n >= 1");
  if (!(alpha_lo <= alpha_hi)) throw std::invalid_argument("alpha range inverted");
  const int budget = 10 * n;
  TrainingSet out;

  struct Draw {
    TrainingSample sample;
    bool ok = false;
  };
  std::vector<Draw> draws(budget);
  int accepted = 0;
  int executed = 0;

  for (int lo = 0; lo < budget && accepted < n; lo += n) {
    const int hi = std::min(budget, lo + n);
    executed = hi;
    parallel_for(lo, hi, jobs, [&](int i) {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
      ScenarioInput sc = sample_gamma(c, rng);
      sc.alpha = alpha_lo + (alpha_hi - alpha_lo) * ((sc.alpha - 0.25) / 0.5);
      Draw& d = draws[i];
      try {
        const SwitchingDecision dec = solve_soc_ops_global(c, sc, cfg);
        if (!dec.certified) return;
        d.sample.gamma = sc;
        d.sample.z = dec.z;
        d.sample.objective = dec.objective;
        d.sample.alpha = sc.alpha;
        d.ok = true;
      } catch (const BnbError&) {
      } catch (const std::runtime_error&) {
      }
    });
    accepted = 0;
    for (int i = 0; i < hi; ++i)
      if (draws[i].ok) ++accepted;
  }

  for (int i = 0; i < executed && static_cast<int>(out.samples.size()) < n; ++i) {
    if (draws[i].ok)
      out.samples.push_back(draws[i].sample);
    else
      ++out.rejected;
  }
  if (static_cast<int>(out.samples.size()) < n)
    throw BudgetExhausted("resample budget exhausted: " + std::to_string(out.samples.size()) +
                          " of " + std::to_string(n) + " accepted");
  return out;
}

// JSON-lines dataset: one record per line
//   {"alpha": f, "gamma": {...}, "objective": f, "z": [...]}

inline std::string dataset_to_jsonl(const TrainingSet& ts) {
  std::string out;
  for (const TrainingSample& s : ts.samples) {
    nlohmann::json j;
    j["gamma"] = {{"p_d", std::vector<double>(s.gamma.p_d.data(), s.gamma.p_d.data() + s.gamma.p_d.size())},
                  {"q_d", std::vector<double>(s.gamma.q_d.data(), s.gamma.q_d.data() + s.gamma.q_d.size())},
                  {"r", std::vector<double>(s.gamma.r.data(), s.gamma.r.data() + s.gamma.r.size())},
                  {"alpha", s.gamma.alpha}};
    std::vector<int> z(s.z.size());
    for (Eigen::Index i = 0; i < s.z.size(); ++i) z[i] = static_cast<int>(std::lround(s.z[i]));
    j["z"] = z;
    j["objective"] = s.objective;
    j["alpha"] = s.alpha;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline TrainingSet dataset_from_jsonl(const std::string& text) {
  TrainingSet ts;
  std::size_t at = 0;
  while (at < text.size()) {
    std::size_t end = text.find('\n', at);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(at, end - at);
    at = end + 1;
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    TrainingSample s;
    auto vec = [](const nlohmann::json& a) {
      Eigen::VectorXd v(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
      return v;
    };
    s.gamma.p_d = vec(j.at("gamma").at("p_d"));
    s.gamma.q_d = vec(j.at("gamma").at("q_d"));
    s.gamma.r = vec(j.at("gamma").at("r"));
    s.gamma.alpha = j.at("gamma").at("alpha").get<double>();
    s.z = vec(j.at("z"));
    s.objective = j.at("objective").get<double>();
    s.alpha = j.at("alpha").get<double>();
    ts.samples.push_back(std::move(s));
  }
  return ts;
}

}  // namespace shedbound
