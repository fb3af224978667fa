#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "shedbound/bench.hpp"

namespace shedbound::report {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Minimal view of a stored benchmark run; enough to rebuild every report.
struct RunView {
  std::string case_name;
  int width = 0;
  int n_samples = 0;
  BenchmarkSummary summary;
  std::vector<double> sample_shed_I;  // accepted samples, draw order
  double opt_shed_I = std::numeric_limits<double>::quiet_NaN();
  double opt_shed_II = std::numeric_limits<double>::quiet_NaN();
  double opt_shed_III = std::numeric_limits<double>::quiet_NaN();
  double time_stage_a = 0.0, time_III = 0.0;
  std::vector<double> gamma_p, gamma_q;  // optimized loading
  std::vector<double> base_p, base_q;
  std::vector<int> load_bus;
  bool complete = false;
};

inline RunView run_view(const BenchmarkRun& run) {
  RunView v;
  v.case_name = run.case_name;
  v.width = run.nn_width;
  v.n_samples = run.n_samples;
  v.summary = run.summary;
  v.complete = run.complete;
  for (const SampleRecord& r : run.records)
    if (!r.rejected) v.sample_shed_I.push_back(r.shed_I);
  if (run.optimized) {
    v.opt_shed_I = run.optimized->shed_I;
    v.opt_shed_II = run.optimized->shed_II;
    v.opt_shed_III = run.optimized->shed_III;
    v.time_stage_a = run.optimized->time_stage_a;
    v.time_III = run.optimized->time_III;
    const ScenarioInput& g = run.optimized->gamma_star;
    for (Eigen::Index d = 0; d < g.p_d.size(); ++d) {
      v.gamma_p.push_back(g.p_d[d]);
      v.gamma_q.push_back(g.q_d[d]);
    }
  }
  v.base_p = run.base_p;
  v.base_q = run.base_q;
  v.load_bus = run.load_bus;
  return v;
}

inline RunView run_view_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  RunView v;
  v.case_name = j.at("case").get<std::string>();
  v.width = j.at("width").get<int>();
  v.n_samples = j.at("n_samples").get<int>();
  v.complete = j.at("complete").get<bool>();
  auto numval = [](const nlohmann::json& x) {
    return x.is_number() ? x.get<double>() : std::numeric_limits<double>::quiet_NaN();
  };
  v.summary.max_shed_I = numval(j.at("summary").at("max_shed_I"));
  v.summary.max_shed_II = numval(j.at("summary").at("max_shed_II"));
  v.summary.max_shed_III = numval(j.at("summary").at("max_shed_III"));
  v.summary.accepted = j.at("summary").at("accepted").get<int>();
  v.summary.rejected = j.at("summary").at("rejected").get<int>();
  for (const auto& r : j.at("records"))
    if (!r.at("rejected").get<bool>()) v.sample_shed_I.push_back(numval(r.at("shed_I")));
  if (j.contains("loads")) {
    for (const auto& ld : j.at("loads")) {
      v.load_bus.push_back(ld.at("bus").get<int>());
      v.base_p.push_back(ld.at("pd").get<double>());
      v.base_q.push_back(ld.at("qd").get<double>());
    }
  }
  if (j.contains("optimized")) {
    const auto& o = j.at("optimized");
    v.opt_shed_I = numval(o.at("shed").at("I"));
    v.opt_shed_II = numval(o.at("shed").at("II"));
    v.opt_shed_III = numval(o.at("shed").at("III"));
    v.time_stage_a = numval(o.at("time_s").at("stage_a"));
    v.time_III = numval(o.at("time_s").at("III"));
    for (const auto& x : o.at("gamma").at("p_d")) v.gamma_p.push_back(x.get<double>());
    for (const auto& x : o.at("gamma").at("q_d")) v.gamma_q.push_back(x.get<double>());
  }
  return v;
}

/// Per-sample CSV: sample,rejected,shed_I,shed_II,shed_III (rejected rows
/// leave the shed columns empty).
inline std::string samples_csv(const BenchmarkRun& run) {
  std::string out = "sample,rejected,shed_I,shed_II,shed_III\n";
  for (const SampleRecord& r : run.records) {
    out += std::to_string(r.index);
    out += r.rejected ? ",1" : ",0";
    if (r.rejected) {
      out += ",,,\n";
    } else {
      out += "," + num(r.shed_I) + "," + num(r.shed_II) + "," + num(r.shed_III) + "\n";
    }
  }
  return out;
}

/// One table per model, rows keyed by (case, width).
inline std::string model_table_csv(const std::vector<RunView>& runs, int model) {
  std::string out = "case,width,optimized,sampled_max,ratio\n";
  for (const RunView& v : runs) {
    const double opt = model == 1 ? v.opt_shed_I : model == 2 ? v.opt_shed_II : v.opt_shed_III;
    const double smax = model == 1   ? v.summary.max_shed_I
                        : model == 2 ? v.summary.max_shed_II
                                     : v.summary.max_shed_III;
    out += v.case_name + "," + std::to_string(v.width) + "," + num(opt) + "," + num(smax) +
           "," + num(smax != 0.0 ? opt / smax : std::numeric_limits<double>::infinity()) + "\n";
  }
  return out;
}

inline std::string timing_csv(const std::vector<RunView>& runs) {
  std::string out = "case,width,verifier_s,verifier_plus_ac_s\n";
  for (const RunView& v : runs)
    out += v.case_name + "," + std::to_string(v.width) + "," + num(v.time_stage_a) + "," +
           num(v.time_stage_a + v.time_III) + "\n";
  return out;
}

/// Scatter data behind the bound-vs-sampling figure: n sample rows and one
/// bound row (Model I values).
inline std::string fig3_csv(const RunView& v) {
  std::string out = "index,kind,shed_I\n";
  int idx = 0;
  for (double s : v.sample_shed_I) {
    out += std::to_string(idx++) + ",sample," + num(s) + "\n";
  }
  out += std::to_string(idx) + ",bound," + num(v.opt_shed_I) + "\n";
  return out;
}

/// Optimized active-power loading pattern relative to base (sign column
/// summarizes the per-load direction).
inline std::string fig_loading_csv(const RunView& v, bool active) {
  std::string out = "load,bus,base,optimal,delta,sign\n";
  const auto& opt = active ? v.gamma_p : v.gamma_q;
  const auto& base = active ? v.base_p : v.base_q;
  for (std::size_t d = 0; d < opt.size(); ++d) {
    const double delta = opt[d] - base[d];
    const int sign = delta > 1e-9 ? 1 : delta < -1e-9 ? -1 : 0;
    const int bus = d < v.load_bus.size() ? v.load_bus[d] : -1;
    out += std::to_string(d) + "," + std::to_string(bus) + "," + num(base[d]) + "," +
           num(opt[d]) + "," + num(delta) + "," + std::to_string(sign) + "\n";
  }
  return out;
}

}  // namespace shedbound::report
