#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "shedbound/case_io.hpp"
#include "shedbound/network.hpp"
#include "shedbound/rng.hpp"
#include "support/util.hpp"

using namespace shedbound;
using testsupport::data_path;
using testsupport::read_file;

TEST(ParseCase, TwoBusJsonCounts) {
  const NetworkCase c = parse_case(read_file(data_path("case2.json")));
  EXPECT_EQ(c.buses().size(), 2u);
  EXPECT_EQ(c.lines().size(), 1u);
  EXPECT_EQ(c.gens().size(), 1u);
  EXPECT_EQ(c.loads().size(), 1u);
  EXPECT_DOUBLE_EQ(c.p_tot(), 0.5);
}

TEST(ParseCase, DanglingLoadBus) {
  std::string doc = read_file(data_path("case2.json"));
  const auto pos = doc.find("\"bus\": 2, \"pd\"");
  ASSERT_NE(pos, std::string::npos);
  doc.replace(pos, 10, "\"bus\": 99,");
  try {
    parse_case(doc);
    FAIL() << "expected SemanticError";
  } catch (const SemanticError& e) {
    EXPECT_NE(std::string(e.what()).find("load references missing bus"), std::string::npos);
  }
}

TEST(ParseCase, JsonSyntaxErrorHasLineCol) {
  try {
    parse_case("{\n  \"base_mva\": 100,\n  broken\n}");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GE(e.line, 2);
    EXPECT_GE(e.col, 1);
  }
}

// Independent oracle: a dumb column-sum over the raw .m text, no shared code
// with the importer.
static double sum_pd_column(const std::string& raw) {
  const auto start = raw.find("mpc.bus = [");
  const auto stop = raw.find("];", start);
  std::istringstream rows(raw.substr(start + 11, stop - start - 11));
  std::string row;
  double total = 0.0;
  while (std::getline(rows, row, ';')) {
    std::istringstream vals(row);
    double v;
    int k = 0;
    double pd = 0.0;
    while (vals >> v) {
      if (k == 2) pd = v;
      ++k;
    }
    if (k >= 13) total += pd;
  }
  return total;
}

TEST(ParseCase, FourteenBusMatpower) {
  const std::string raw = read_file(data_path("case14.m"));
  const NetworkCase c = parse_case(raw);
  EXPECT_EQ(c.buses().size(), 14u);
  EXPECT_EQ(c.lines().size(), 20u);
  EXPECT_EQ(c.gens().size(), 5u);
  EXPECT_EQ(c.shunts().size(), 1u);
  const double oracle = sum_pd_column(raw) / 100.0;
  EXPECT_NEAR(c.p_tot(), oracle, 1e-12 * std::abs(oracle));
  // risk vector extension picked up
  EXPECT_DOUBLE_EQ(c.lines()[1].risk, 2.0);
}

TEST(WBounds, ZeroAngleCollapse) {
  const WBox w = compute_w_bounds(1, 1, 1, 1, 0.0);
  EXPECT_DOUBLE_EQ(w.wr_max, 1.0);
  EXPECT_DOUBLE_EQ(w.wr_min, 1.0);
  EXPECT_DOUBLE_EQ(w.wi_max, 0.0);
  EXPECT_DOUBLE_EQ(w.wi_min, 0.0);
}

TEST(WBounds, AnalyticAndSampled) {
  const double th = M_PI / 6.0;
  const WBox w = compute_w_bounds(0.9, 1.1, 0.9, 1.1, th);
  EXPECT_NEAR(w.wr_min, 0.81 * std::cos(th), 1e-12);
  EXPECT_DOUBLE_EQ(w.wr_max, 1.21);
  EXPECT_NEAR(w.wi_max, 1.21 * std::sin(th), 1e-12);
  EXPECT_NEAR(w.wi_min, -1.21 * std::sin(th), 1e-12);

  // sampling oracle: analytic box must contain all samples
  Rng rng(42);
  double wr_lo = 1e30, wr_hi = -1e30, wi_lo = 1e30, wi_hi = -1e30;
  for (int k = 0; k < 20000; ++k) {
    const double vi = rng.uniform(0.9, 1.1);
    const double vj = rng.uniform(0.9, 1.1);
    const double t = rng.uniform(-th, th);
    const double wr = vi * vj * std::cos(t);
    const double wi = vi * vj * std::sin(t);
    wr_lo = std::min(wr_lo, wr);
    wr_hi = std::max(wr_hi, wr);
    wi_lo = std::min(wi_lo, wi);
    wi_hi = std::max(wi_hi, wi);
    ASSERT_GE(wr, w.wr_min - 1e-12);
    ASSERT_LE(wr, w.wr_max + 1e-12);
    ASSERT_GE(wi, w.wi_min - 1e-12);
    ASSERT_LE(wi, w.wi_max + 1e-12);
  }
  // and the box is not wildly loose
  EXPECT_NEAR(wr_hi, w.wr_max, 0.02);
  EXPECT_NEAR(wi_hi, w.wi_max, 0.02);
}

TEST(WBounds, QuarterPi) {
  const WBox w = compute_w_bounds(1, 1, 1, 1, M_PI / 4.0);
  EXPECT_NEAR(w.wr_min, std::cos(M_PI / 4.0), 1e-15);
  EXPECT_DOUBLE_EQ(w.wr_max, 1.0);
  EXPECT_NEAR(w.wi_max, std::sin(M_PI / 4.0), 1e-15);
  EXPECT_NEAR(w.wi_min, -std::sin(M_PI / 4.0), 1e-15);
}

TEST(WBounds, DomainError) {
  EXPECT_THROW(compute_w_bounds(1, 1, 1, 1, M_PI / 2.0), std::domain_error);
  EXPECT_THROW(compute_w_bounds(0.0, 1, 1, 1, 0.1), std::domain_error);
}

TEST(WBounds, ContainmentPropertyPerLine) {
  const NetworkCase c = parse_case(read_file(data_path("case14.m")));
  Rng rng(7);
  for (std::size_t li = 0; li < c.lines().size(); ++li) {
    const Line& l = c.lines()[li];
    const Bus& bi = c.buses()[c.bus_index(l.from_bus)];
    const Bus& bj = c.buses()[c.bus_index(l.to_bus)];
    const WBox& w = c.w_bounds(static_cast<int>(li));
    for (int k = 0; k < 10000; ++k) {
      const double vi = rng.uniform(bi.v_min, bi.v_max);
      const double vj = rng.uniform(bj.v_min, bj.v_max);
      const double t = rng.uniform(l.theta_min, l.theta_max);
      ASSERT_GE(vi * vj * std::cos(t), w.wr_min - 1e-12);
      ASSERT_LE(vi * vj * std::cos(t), w.wr_max + 1e-12);
      ASSERT_GE(vi * vj * std::sin(t), w.wi_min - 1e-12);
      ASSERT_LE(vi * vj * std::sin(t), w.wi_max + 1e-12);
    }
  }
}

TEST(RoundTrip, SerializeReparseBitEqual) {
  for (const char* name : {"case2.json", "case3.json", "case14.m"}) {
    const NetworkCase c = parse_case(read_file(data_path(name)));
    const NetworkCase c2 = parse_case(case_to_json(c));
    ASSERT_EQ(c.buses().size(), c2.buses().size());
    ASSERT_EQ(c.lines().size(), c2.lines().size());
    for (std::size_t i = 0; i < c.buses().size(); ++i) {
      EXPECT_EQ(c.buses()[i].id, c2.buses()[i].id);
      EXPECT_EQ(c.buses()[i].v_min, c2.buses()[i].v_min);
      EXPECT_EQ(c.buses()[i].v_max, c2.buses()[i].v_max);
    }
    for (std::size_t i = 0; i < c.lines().size(); ++i) {
      const Line &a = c.lines()[i], &b = c2.lines()[i];
      EXPECT_EQ(a.g, b.g);
      EXPECT_EQ(a.b, b.b);
      EXPECT_EQ(a.g_fr, b.g_fr);
      EXPECT_EQ(a.b_fr, b.b_fr);
      EXPECT_EQ(a.tap_re, b.tap_re);
      EXPECT_EQ(a.tap_im, b.tap_im);
      EXPECT_EQ(a.thermal, b.thermal);
      EXPECT_EQ(a.theta_max, b.theta_max);
      EXPECT_EQ(a.risk, b.risk);
    }
    for (std::size_t i = 0; i < c.gens().size(); ++i) {
      EXPECT_EQ(c.gens()[i].p_max, c2.gens()[i].p_max);
      EXPECT_EQ(c.gens()[i].q_min, c2.gens()[i].q_min);
    }
    for (std::size_t i = 0; i < c.loads().size(); ++i) {
      EXPECT_EQ(c.loads()[i].p_base, c2.loads()[i].p_base);
      EXPECT_EQ(c.loads()[i].q_base, c2.loads()[i].q_base);
    }
    EXPECT_EQ(c.p_tot(), c2.p_tot());
  }
}

TEST(Validate, CleanCaseHasNoFindings) {
  const NetworkCase c = parse_case(read_file(data_path("case2.json")));
  EXPECT_TRUE(validate(c).empty());
}

TEST(Validate, ZeroThermalFlagged) {
  CaseData d = case_from_json(read_file(data_path("case2.json")));
  d.lines[0].thermal = 0.0;
  const NetworkCase c = NetworkCase::build(std::move(d));
  const auto findings = validate(c);
  ASSERT_EQ(findings.size(), 1u);
  EXPECT_EQ(findings[0].severity, Finding::Severity::error);
  EXPECT_EQ(findings[0].path, "lines[0]");
}

TEST(Validate, AsymmetricAnglesFlagged) {
  CaseData d = case_from_json(read_file(data_path("case2.json")));
  d.lines[0].theta_min = -0.4;  // theta_max stays 30 deg
  const NetworkCase c = NetworkCase::build(std::move(d));
  const auto findings = validate(c);
  ASSERT_EQ(findings.size(), 1u);
  EXPECT_NE(findings[0].message.find("asymmetric"), std::string::npos);
}

TEST(Validate, PtotMatchesLoadSum) {
  const NetworkCase c = parse_case(read_file(data_path("case14.m")));
  double sum = 0.0;
  for (const Load& d : c.loads()) sum += d.p_base;
  EXPECT_NEAR(c.p_tot(), sum, 1e-12 * sum);
}
