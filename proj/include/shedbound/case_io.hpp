#pragma once

#include <cctype>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "shedbound/network.hpp"

namespace shedbound {

struct ParseError : std::runtime_error {
  int line = 0;
  int col = 0;
  ParseError(const std::string& what, int line_, int col_)
      : std::runtime_error("parse error at " + std::to_string(line_) + ":" +
                           std::to_string(col_) + ": " + what),
        line(line_),
        col(col_) {}
};

namespace detail {

inline std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Canonical JSON grid format
// ---------------------------------------------------------------------------

inline CaseData case_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    auto [line, col] = detail::line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(e.what(), line, col);
  }
  CaseData c;
  try {
    c.name = j.value("name", std::string("case"));
    c.base_mva = j.value("base_mva", 100.0);
    for (const auto& jb : j.at("buses")) {
      Bus b;
      b.id = jb.at("id").get<int>();
      b.v_min = jb.at("vmin").get<double>();
      b.v_max = jb.at("vmax").get<double>();
      c.buses.push_back(b);
    }
    for (const auto& jl : j.at("lines")) {
      Line l;
      l.id = jl.at("id").get<int>();
      l.from_bus = jl.at("from").get<int>();
      l.to_bus = jl.at("to").get<int>();
      l.g = jl.at("g").get<double>();
      l.b = jl.at("b").get<double>();
      l.g_fr = jl.at("g_fr").get<double>();
      l.g_to = jl.at("g_to").get<double>();
      l.b_fr = jl.at("b_fr").get<double>();
      l.b_to = jl.at("b_to").get<double>();
      l.tap_mag = jl.at("tap_mag").get<double>();
      l.tap_re = jl.at("tap_re").get<double>();
      l.tap_im = jl.at("tap_im").get<double>();
      l.thermal = jl.at("thermal").get<double>();
      l.theta_max = jl.at("theta_max").get<double>();
      l.theta_min = -l.theta_max;
      l.risk = jl.value("risk", 1.0);
      c.lines.push_back(l);
    }
    for (const auto& jg : j.at("gens")) {
      Generator g;
      g.bus = jg.at("bus").get<int>();
      g.p_max = jg.at("pmax").get<double>();
      g.q_min = jg.at("qmin").get<double>();
      g.q_max = jg.at("qmax").get<double>();
      c.gens.push_back(g);
    }
    for (const auto& jd : j.at("loads")) {
      Load d;
      d.bus = jd.at("bus").get<int>();
      d.p_base = jd.at("pd").get<double>();
      d.q_base = jd.at("qd").get<double>();
      c.loads.push_back(d);
    }
    if (j.contains("shunts")) {
      for (const auto& js : j.at("shunts")) {
        Shunt s;
        s.bus = js.at("bus").get<int>();
        s.gs = js.at("gs").get<double>();
        s.bs = js.at("bs").get<double>();
        c.shunts.push_back(s);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SemanticError(std::string("malformed case document: ") + e.what());
  }
  return c;
}

inline std::string case_to_json(const NetworkCase& c) {
  nlohmann::json j;
  j["name"] = c.name();
  j["base_mva"] = c.base_mva();
  j["buses"] = nlohmann::json::array();
  for (const Bus& b : c.buses())
    j["buses"].push_back({{"id", b.id}, {"vmin", b.v_min}, {"vmax", b.v_max}});
  j["lines"] = nlohmann::json::array();
  for (const Line& l : c.lines())
    j["lines"].push_back({{"id", l.id},
                          {"from", l.from_bus},
                          {"to", l.to_bus},
                          {"g", l.g},
                          {"b", l.b},
                          {"g_fr", l.g_fr},
                          {"g_to", l.g_to},
                          {"b_fr", l.b_fr},
                          {"b_to", l.b_to},
                          {"tap_mag", l.tap_mag},
                          {"tap_re", l.tap_re},
                          {"tap_im", l.tap_im},
                          {"thermal", l.thermal},
                          {"theta_max", l.theta_max},
                          {"risk", l.risk}});
  j["gens"] = nlohmann::json::array();
  for (const Generator& g : c.gens())
    j["gens"].push_back(
        {{"bus", g.bus}, {"pmax", g.p_max}, {"qmin", g.q_min}, {"qmax", g.q_max}});
  j["loads"] = nlohmann::json::array();
  for (const Load& d : c.loads())
    j["loads"].push_back({{"bus", d.bus}, {"pd", d.p_base}, {"qd", d.q_base}});
  j["shunts"] = nlohmann::json::array();
  for (const Shunt& s : c.shunts())
    j["shunts"].push_back({{"bus", s.bus}, {"gs", s.gs}, {"bs", s.bs}});
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// MATPOWER subset importer: bus/gen/branch matrices plus an optional
// mpc.line_risk per-line risk vector. Unsupported columns are ignored;
// gen/branch rows with status 0 are skipped.
// ---------------------------------------------------------------------------

namespace detail {

struct MpMatrix {
  std::vector<std::vector<double>> rows;
};

inline std::string strip_comments(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  for (char ch : text) {
    if (ch == '%') in_comment = true;
    if (ch == '\n') in_comment = false;
    out.push_back(in_comment ? ' ' : ch);
  }
  return out;
}

inline bool parse_matrix(const std::string& text, const std::string& field,
                         MpMatrix& m, const std::string& raw) {
  const std::string key = "mpc." + field;
  std::size_t pos = text.find(key);
  if (pos == std::string::npos) return false;
  std::size_t open = text.find('[', pos);
  if (open == std::string::npos) {
    auto [ln, col] = line_col(raw, pos);
    throw ParseError("expected '[' after " + key, ln, col);
  }
  std::size_t close = text.find(']', open);
  if (close == std::string::npos) {
    auto [ln, col] = line_col(raw, open);
    throw ParseError("unterminated matrix " + key, ln, col);
  }
  std::string body = text.substr(open + 1, close - open - 1);
  // Rows are separated by ';' or newlines.
  for (char& ch : body)
    if (ch == ';') ch = '\n';
  std::istringstream rows(body);
  std::string row;
  while (std::getline(rows, row)) {
    std::istringstream vals(row);
    std::vector<double> r;
    double v;
    while (vals >> v) r.push_back(v);
    if (!r.empty()) m.rows.push_back(std::move(r));
  }
  return true;
}

inline double parse_scalar(const std::string& text, const std::string& field,
                           double fallback) {
  const std::string key = "mpc." + field;
  std::size_t pos = text.find(key);
  if (pos == std::string::npos) return fallback;
  std::size_t eq = text.find('=', pos);
  if (eq == std::string::npos) return fallback;
  return std::stod(text.substr(eq + 1));
}

}  // namespace detail

inline CaseData case_from_matpower(const std::string& raw) {
  const std::string text = detail::strip_comments(raw);
  if (text.find("function") == std::string::npos)
    throw ParseError("missing function header", 1, 1);

  CaseData c;
  {
    std::size_t fn = text.find("function");
    std::size_t eq = text.find('=', fn);
    if (eq != std::string::npos) {
      std::istringstream name(text.substr(eq + 1));
      name >> c.name;
    }
  }
  const double base = detail::parse_scalar(text, "baseMVA", 100.0);
  c.base_mva = base;

  detail::MpMatrix bus, gen, branch, risk;
  if (!detail::parse_matrix(text, "bus", bus, raw))
    throw ParseError("missing mpc.bus matrix", 1, 1);
  if (!detail::parse_matrix(text, "gen", gen, raw))
    throw ParseError("missing mpc.gen matrix", 1, 1);
  if (!detail::parse_matrix(text, "branch", branch, raw))
    throw ParseError("missing mpc.branch matrix", 1, 1);
  const bool has_risk = detail::parse_matrix(text, "line_risk", risk, raw);
  if (has_risk && risk.rows.size() != branch.rows.size())
    throw SemanticError("line_risk length does not match branch count");

  const double deg = M_PI / 180.0;
  for (const auto& r : bus.rows) {
    if (r.size() < 13) throw SemanticError("bus row needs 13 columns");
    Bus b;
    b.id = static_cast<int>(r[0]);
    b.v_max = r[11];
    b.v_min = r[12];
    c.buses.push_back(b);
    if (r[2] != 0.0 || r[3] != 0.0) {
      Load d;
      d.bus = b.id;
      d.p_base = r[2] / base;
      d.q_base = r[3] / base;
      c.loads.push_back(d);
    }
    if (r[4] != 0.0 || r[5] != 0.0) {
      Shunt s;
      s.bus = b.id;
      s.gs = r[4] / base;
      s.bs = r[5] / base;
      c.shunts.push_back(s);
    }
  }
  for (const auto& r : gen.rows) {
    if (r.size() < 10) throw SemanticError("gen row needs 10 columns");
    if (r[7] == 0.0) continue;  // out of service
    Generator g;
    g.bus = static_cast<int>(r[0]);
    g.q_max = r[3] / base;
    g.q_min = r[4] / base;
    g.p_max = r[8] / base;
    c.gens.push_back(g);
  }
  int line_id = 0;
  for (std::size_t k = 0; k < branch.rows.size(); ++k) {
    const auto& r = branch.rows[k];
    if (r.size() < 13) throw SemanticError("branch row needs 13 columns");
    if (r[10] == 0.0) continue;  // out of service
    Line l;
    l.id = line_id++;
    l.from_bus = static_cast<int>(r[0]);
    l.to_bus = static_cast<int>(r[1]);
    const double rr = r[2], xx = r[3];
    const double mag2 = rr * rr + xx * xx;
    if (mag2 <= 0.0) throw SemanticError("branch " + std::to_string(k) + " has zero impedance");
    l.g = rr / mag2;
    l.b = -xx / mag2;
    l.g_fr = l.g_to = 0.0;
    l.b_fr = l.b_to = r[4] / 2.0;
    const double ratio = r[8] == 0.0 ? 1.0 : r[8];
    const double shift = r[9] * deg;
    l.tap_mag = ratio;
    l.tap_re = ratio * std::cos(shift);
    l.tap_im = ratio * std::sin(shift);
    l.thermal = r[5] / base;
    const double ang_min = r[11] * deg;
    const double ang_max = r[12] * deg;
    if (std::abs(ang_min + ang_max) > 1e-9)
      throw SemanticError("branch " + std::to_string(k) + " has asymmetric angle bounds");
    l.theta_max = ang_max;
    l.theta_min = -ang_max;
    l.risk = has_risk ? risk.rows[k][0] : 1.0;
    c.lines.push_back(l);
  }
  return c;
}

// ---------------------------------------------------------------------------

/// Parse either the canonical JSON grid format or the MATPOWER subset,
/// validate, and index. Throws ParseError / SemanticError.
inline NetworkCase parse_case(const std::string& text, CaseOptions opts = {}) {
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  CaseData data = (i < text.size() && text[i] == '{') ? case_from_json(text)
                                                      : case_from_matpower(text);
  NetworkCase c = NetworkCase::build(std::move(data), opts);
  for (const Finding& f : validate(c)) {
    if (f.severity == Finding::Severity::error)
      throw SemanticError(f.path + ": " + f.message);
  }
  return c;
}

}  // namespace shedbound
