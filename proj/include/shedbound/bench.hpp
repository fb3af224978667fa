#pragma once

#include <optional>

#include "shedbound/verifier.hpp"

namespace shedbound {

struct SampleRecord {
  int index = 0;
  bool rejected = false;
  ScenarioInput gamma;
  Eigen::VectorXd L, z;
  double shed_I = std::numeric_limits<double>::quiet_NaN();
  double shed_II = std::numeric_limits<double>::quiet_NaN();
  double shed_III = std::numeric_limits<double>::quiet_NaN();
  SolveStatus status_I = SolveStatus::numerical_failure;
  SolveStatus status_II = SolveStatus::numerical_failure;
  SolveStatus status_III = SolveStatus::numerical_failure;
};

struct BenchmarkSummary {
  double max_shed_I = -std::numeric_limits<double>::infinity();
  double max_shed_II = -std::numeric_limits<double>::infinity();
  double max_shed_III = -std::numeric_limits<double>::infinity();
  int accepted = 0;
  int rejected = 0;
};

struct BenchmarkRun {
  std::string case_name;
  int nn_width = 0;
  int n_samples = 0;
  std::uint64_t seed = 0;
  std::vector<SampleRecord> records;  // every draw, accepted and rejected
  BenchmarkSummary summary;
  std::optional<VerificationResult> optimized;
  double bench_seconds = 0.0;
  bool complete = false;
  // base loading snapshot so stored runs stay self-contained for reports
  std::vector<int> load_bus;
  std::vector<double> base_p, base_q;
};

struct BenchConfig {
  int jobs = 1;
  double pipeline_tol = 1e-8;
  AcRedispatchConfig ac;
};

/// The random-sampling baseline: draw gamma, run the NN forward, apply the
/// Model I/II/III pipeline, reject failures and re-draw (budget 10 n). Each
/// draw gets an index-derived seed, so parallel and serial runs produce the
/// same record stream.
inline BenchmarkRun run_benchmark(const NetworkCase& c, const MLPModel& nn, int n,
                                  std::uint64_t seed, const BenchConfig& cfg = {}) {
  if (n < 1) throw std::invalid_argument("need n >= 1");
  check_compatible(nn, c);
  const auto t0 = std::chrono::steady_clock::now();
  BenchmarkRun run;
  run.case_name = c.name();
  run.nn_width = nn.dims.size() == 4 ? nn.dims[1] : 0;
  run.n_samples = n;
  run.seed = seed;
  for (const Load& d : c.loads()) {
    run.load_bus.push_back(d.bus);
    run.base_p.push_back(d.p_base);
    run.base_q.push_back(d.q_base);
  }

  const RedispatchBuild full = build_soc_redispatch(c, RedispatchOptions{});
  const int budget = 10 * n;
  std::vector<SampleRecord> draws(budget);
  int accepted = 0, executed = 0;

  for (int lo = 0; lo < budget && accepted < n; lo += n) {
    const int hi = std::min(budget, lo + n);
    executed = hi;
    parallel_for(lo, hi, cfg.jobs, [&](int i) {
      SampleRecord& rec = draws[i];
      rec.index = i;
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
      rec.gamma = sample_gamma(c, rng);
      rec.L = forward(nn, rec.gamma);
      rec.z = snap(rec.L);
      const RedispatchResult m1 =
          solve_soc_redispatch(c, full, rec.gamma, rec.L, cfg.pipeline_tol, ModelTag::I);
      rec.status_I = m1.status;
      if (m1.status == SolveStatus::optimal) rec.shed_I = m1.shed;
      const RedispatchResult m2 =
          solve_soc_redispatch(c, full, rec.gamma, rec.z, cfg.pipeline_tol, ModelTag::II);
      rec.status_II = m2.status;
      if (m2.status == SolveStatus::optimal) rec.shed_II = m2.shed;
      const RedispatchResult m3 = solve_ac_redispatch(c, rec.gamma, rec.z, cfg.ac);
      rec.status_III = m3.status;
      if (m3.status == SolveStatus::optimal) rec.shed_III = m3.shed;
      rec.rejected = rec.status_I != SolveStatus::optimal ||
                     rec.status_II != SolveStatus::optimal ||
                     rec.status_III != SolveStatus::optimal;
    });
    accepted = 0;
    for (int i = 0; i < hi; ++i)
      if (!draws[i].rejected) ++accepted;
  }

  accepted = 0;
  for (int i = 0; i < executed && accepted < n; ++i) {
    run.records.push_back(draws[i]);
    if (draws[i].rejected) {
      ++run.summary.rejected;
      continue;
    }
    ++accepted;
    run.summary.max_shed_I = std::max(run.summary.max_shed_I, draws[i].shed_I);
    run.summary.max_shed_II = std::max(run.summary.max_shed_II, draws[i].shed_II);
    run.summary.max_shed_III = std::max(run.summary.max_shed_III, draws[i].shed_III);
  }
  run.summary.accepted = accepted;
  run.complete = accepted == n;
  run.bench_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

struct IncompleteRunError : std::runtime_error {
  explicit IncompleteRunError(const std::string& what) : std::runtime_error(what) {}
};

struct ComparisonRow {
  std::string model;
  double optimized = 0.0;
  double sampled_max = 0.0;
  double ratio = 0.0;
};

/// Optimized-vs-sampled rows in fixed model order I, II, III.
inline std::vector<ComparisonRow> compare(const BenchmarkRun& run) {
  if (!run.complete) throw IncompleteRunError("benchmark run is incomplete");
  if (!run.optimized) throw IncompleteRunError("no optimized result attached");
  const VerificationResult& v = *run.optimized;
  auto row = [](std::string model, double opt, double smax) {
    ComparisonRow r;
    r.model = std::move(model);
    r.optimized = opt;
    r.sampled_max = smax;
    r.ratio = smax != 0.0 ? opt / smax : std::numeric_limits<double>::infinity();
    return r;
  };
  return {row("I", v.shed_I, run.summary.max_shed_I),
          row("II", v.shed_II, run.summary.max_shed_II),
          row("III", v.shed_III, run.summary.max_shed_III)};
}

struct TimingRow {
  std::string stage;
  double seconds = 0.0;
};

/// Solve-time rows: the verifier stage alone and combined with the AC
/// restoration, plus the sampling arm for context.
inline std::vector<TimingRow> timing_rows(const BenchmarkRun& run) {
  if (!run.optimized) throw IncompleteRunError("no optimized result attached");
  const VerificationResult& v = *run.optimized;
  return {{"verifier", v.time_stage_a},
          {"verifier_plus_ac", v.time_stage_a + v.time_III},
          {"model_I", v.time_I},
          {"model_II", v.time_II},
          {"model_III", v.time_III},
          {"sampling_total", run.bench_seconds}};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json record_to_json(const SampleRecord& r) {
  nlohmann::json j;
  j["index"] = r.index;
  j["rejected"] = r.rejected;
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  j["gamma"] = {{"p_d", vec(r.gamma.p_d)},
                {"q_d", vec(r.gamma.q_d)},
                {"r", vec(r.gamma.r)},
                {"alpha", r.gamma.alpha}};
  j["L"] = vec(r.L);
  j["z"] = vec(r.z);
  j["shed_I"] = r.shed_I;
  j["shed_II"] = r.shed_II;
  j["shed_III"] = r.shed_III;
  j["status"] = {to_string(r.status_I), to_string(r.status_II), to_string(r.status_III)};
  return j;
}

inline std::string benchmark_to_json(const BenchmarkRun& run) {
  nlohmann::json j;
  j["case"] = run.case_name;
  j["width"] = run.nn_width;
  j["n_samples"] = run.n_samples;
  j["seed"] = run.seed;
  j["complete"] = run.complete;
  j["bench_seconds"] = run.bench_seconds;
  j["summary"] = {{"max_shed_I", run.summary.max_shed_I},
                  {"max_shed_II", run.summary.max_shed_II},
                  {"max_shed_III", run.summary.max_shed_III},
                  {"accepted", run.summary.accepted},
                  {"rejected", run.summary.rejected}};
  j["loads"] = nlohmann::json::array();
  for (std::size_t d = 0; d < run.load_bus.size(); ++d)
    j["loads"].push_back({{"bus", run.load_bus[d]}, {"pd", run.base_p[d]}, {"qd", run.base_q[d]}});
  j["records"] = nlohmann::json::array();
  for (const SampleRecord& r : run.records) j["records"].push_back(record_to_json(r));
  if (run.optimized) j["optimized"] = nlohmann::json::parse(verification_to_json(*run.optimized));
  return j.dump(2);
}

}  // namespace shedbound
