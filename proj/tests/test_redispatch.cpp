#include <gtest/gtest.h>

#include "shedbound/ac_model.hpp"
#include "shedbound/case_io.hpp"
#include "shedbound/redispatch.hpp"
#include "support/util.hpp"

using namespace shedbound;
using testsupport::data_path;
using testsupport::read_file;

namespace {

NetworkCase case2() { return parse_case(read_file(data_path("case2.json"))); }
NetworkCase case14() { return parse_case(read_file(data_path("case14.m"))); }

Eigen::VectorXd ones(int n) { return Eigen::VectorXd::Ones(n); }
Eigen::VectorXd zeros(int n) { return Eigen::VectorXd::Zero(n); }

}  // namespace

TEST(SocRedispatch, TwoBusFullTopologyNoShed) {
  const NetworkCase c = case2();
  const ScenarioInput sc = ScenarioInput::base_of(c);
  const RedispatchResult r = solve_soc_redispatch(c, sc, ones(1), 1e-8, ModelTag::II);
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.shed, 0.0, 1e-6);
  EXPECT_NEAR(r.x_d[0], 1.0, 1e-6);
}

TEST(SocRedispatch, TwoBusIslandedShedsAll) {
  const NetworkCase c = case2();
  const ScenarioInput sc = ScenarioInput::base_of(c);
  const RedispatchResult r = solve_soc_redispatch(c, sc, zeros(1), 1e-8, ModelTag::II);
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.shed, 0.5, 1e-6);
  EXPECT_NEAR(r.x_d[0], 0.0, 1e-6);
}

TEST(SocRedispatch, ShedMonotoneInStatusSweep) {
  const NetworkCase c = case2();
  const ScenarioInput sc = ScenarioInput::base_of(c);
  const RedispatchBuild build = build_soc_redispatch(c);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 10; ++k) {
    Eigen::VectorXd L(1);
    L << 0.1 * k;
    const RedispatchResult r = solve_soc_redispatch(c, build, sc, L, 1e-8, ModelTag::I);
    ASSERT_EQ(r.status, SolveStatus::optimal) << "L=" << 0.1 * k;
    EXPECT_LE(r.shed, prev + 1e-7) << "L=" << 0.1 * k;
    prev = r.shed;
  }
  // endpoints: full shed at 0, none at 1
  Eigen::VectorXd L0(1), L1(1);
  L0 << 0.0;
  L1 << 1.0;
  EXPECT_NEAR(solve_soc_redispatch(c, build, sc, L0).shed, 0.5, 1e-6);
  EXPECT_NEAR(solve_soc_redispatch(c, build, sc, L1).shed, 0.0, 1e-6);
}

TEST(SocRedispatch, VerifierTogglesShrinkTheProgram) {
  const NetworkCase c = case14();
  const RedispatchBuild full = build_soc_redispatch(c, {});
  const RedispatchBuild toggled = build_soc_redispatch(c, RedispatchOptions::verifier_defaults());
  EXPECT_LT(toggled.program.num_ineq(), full.program.num_ineq());
  EXPECT_LT(toggled.program.num_vars(), full.program.num_vars());
  // the toggled feasible set is a relaxation: optimal shed can only drop
  const ScenarioInput sc = ScenarioInput::base_of(c);
  Eigen::VectorXd z = ones(20);
  z[10] = 0.0;
  z[16] = 0.0;
  const RedispatchResult a = solve_soc_redispatch(c, full, sc, z, 1e-8, ModelTag::II);
  const RedispatchResult b = solve_soc_redispatch(c, toggled, sc, z, 1e-8, ModelTag::II);
  ASSERT_EQ(a.status, SolveStatus::optimal);
  ASSERT_EQ(b.status, SolveStatus::optimal);
  EXPECT_LE(b.shed, a.shed + 1e-6);
}

TEST(AcRedispatch, TwoBusFullTopology) {
  const NetworkCase c = case2();
  const ScenarioInput sc = ScenarioInput::base_of(c);
  const RedispatchResult r = solve_ac_redispatch(c, sc, ones(1));
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.shed, 0.0, 1e-5);
  EXPECT_EQ(r.model_tag, ModelTag::III);
}

TEST(AcRedispatch, TwoBusIslanded) {
  const NetworkCase c = case2();
  const ScenarioInput sc = ScenarioInput::base_of(c);
  const RedispatchResult r = solve_ac_redispatch(c, sc, zeros(1));
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.shed, 0.5, 1e-8);
  EXPECT_EQ(r.x_d[0], 0.0);
}

// Independent mini-oracle for the all-lines-off case: each bus is its own
// island; a load is servable only from co-located generation, subject to the
// gen box and a feasible reactive match.
static double island_oracle_shed(const NetworkCase& c, const ScenarioInput& sc) {
  double shed = 0.0;
  for (std::size_t d = 0; d < c.loads().size(); ++d) {
    const int b = c.bus_index(c.loads()[d].bus);
    double pmax = 0.0, qmin = 0.0, qmax = 0.0;
    for (int g : c.gens_at(b)) {
      pmax += c.gens()[g].p_max;
      qmin += c.gens()[g].q_min;
      qmax += c.gens()[g].q_max;
    }
    // shunt reactive support range at feasible voltages
    double sh_lo = 0.0, sh_hi = 0.0;
    for (int s : c.shunts_at(b)) {
      const Shunt& sh = c.shunts()[s];
      const double v2lo = c.buses()[b].v_min * c.buses()[b].v_min;
      const double v2hi = c.buses()[b].v_max * c.buses()[b].v_max;
      for (double v2 : {v2lo, v2hi}) {
        sh_lo = std::min(sh_lo, sh.bs * v2);
        sh_hi = std::max(sh_hi, sh.bs * v2);
      }
      // active shunt draw at x_s > 0 only harms; oracle assumes x_s = 0 when
      // gs > 0, so no active adjustment
    }
    double x = 1.0;
    if (c.gens_at(b).empty()) {
      x = 0.0;
    } else {
      if (sc.p_d[d] > 1e-12) x = std::min(x, pmax / sc.p_d[d]);
      const double q = sc.q_d[d];
      if (q > 1e-12)
        x = std::min(x, (qmax + sh_hi) / q);
      else if (q < -1e-12)
        x = std::min(x, (qmin + sh_lo) / q);
      x = std::max(0.0, x);
    }
    shed += (1.0 - x) * sc.p_d[d];
  }
  return shed;
}

TEST(AcRedispatch, AllLinesOffMatchesIslandOracle) {
  const NetworkCase c = case14();
  const ScenarioInput sc = ScenarioInput::base_of(c);
  const double oracle = island_oracle_shed(c, sc);
  const RedispatchResult r = solve_ac_redispatch(c, sc, zeros(20));
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.shed, oracle, 1e-4 * (1.0 + oracle));
}

TEST(AcRedispatch, FourteenBusFullTopologyLowShed) {
  const NetworkCase c = case14();
  const ScenarioInput sc = ScenarioInput::base_of(c);
  const RedispatchResult r = solve_ac_redispatch(c, sc, ones(20));
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.shed, 0.0, 1e-4);
}

TEST(AcRedispatch, ZeroLoadScenarioNoShed) {
  const NetworkCase c = case14();
  ScenarioInput sc = ScenarioInput::base_of(c);
  sc.p_d.setZero();
  sc.q_d.setZero();
  Rng rng(3);
  Eigen::VectorXd z(20);
  for (int l = 0; l < 20; ++l) z[l] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  const RedispatchResult r = solve_ac_redispatch(c, sc, z);
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.shed, 0.0, 1e-8);
}

TEST(ShedGap, RelaxationLowerBoundsAc) {
  const NetworkCase c = case2();
  const ScenarioInput sc = ScenarioInput::base_of(c);
  const RedispatchResult ii = solve_soc_redispatch(c, sc, ones(1), 1e-8, ModelTag::II);
  const RedispatchResult iii = solve_ac_redispatch(c, sc, ones(1));
  ASSERT_EQ(ii.status, SolveStatus::optimal);
  ASSERT_EQ(iii.status, SolveStatus::optimal);
  const double gap = shed_gap(ii, iii);
  EXPECT_GE(gap, -1e-6);
  EXPECT_LE(gap, 1e-3);  // tight at low loading
}

TEST(ShedGap, ZeroStatusesGapExactlyZero) {
  const NetworkCase c = case2();
  const ScenarioInput sc = ScenarioInput::base_of(c);
  const RedispatchResult ii = solve_soc_redispatch(c, sc, zeros(1), 1e-8, ModelTag::II);
  const RedispatchResult iii = solve_ac_redispatch(c, sc, zeros(1));
  EXPECT_NEAR(shed_gap(ii, iii), 0.0, 1e-6);
}

TEST(ShedGap, MismatchedInputsThrow) {
  const NetworkCase c = case2();
  const ScenarioInput sc = ScenarioInput::base_of(c);
  const RedispatchResult a = solve_soc_redispatch(c, sc, ones(1), 1e-8, ModelTag::II);
  const RedispatchResult b = solve_ac_redispatch(c, sc, zeros(1));
  EXPECT_THROW(shed_gap(a, b), MismatchedResultsError);
}

TEST(ShedGap, FourteenBusRandomScenarios) {
  const NetworkCase c = case14();
  Rng rng(777);
  const RedispatchBuild build = build_soc_redispatch(c);
  for (int k = 0; k < 3; ++k) {
    ScenarioInput sc = sample_gamma(c, rng);
    Eigen::VectorXd z = Eigen::VectorXd::Ones(20);
    z[rng.uniform_int(0, 19)] = 0.0;
    z[rng.uniform_int(0, 19)] = 0.0;
    const RedispatchResult ii = solve_soc_redispatch(c, build, sc, z, 1e-8, ModelTag::II);
    const RedispatchResult iii = solve_ac_redispatch(c, sc, z);
    if (ii.status != SolveStatus::optimal || iii.status != SolveStatus::optimal) continue;
    EXPECT_GE(shed_gap(ii, iii), -1e-6) << "scenario " << k;
  }
}

TEST(AcRedispatch, LoadFractionsInsideBox) {
  const NetworkCase c = case14();
  Rng rng(12);
  const ScenarioInput sc = sample_gamma(c, rng);
  Eigen::VectorXd z = ones(20);
  z[5] = 0.0;
  const RedispatchResult r = solve_ac_redispatch(c, sc, z);
  ASSERT_EQ(r.status, SolveStatus::optimal);
  for (Eigen::Index d = 0; d < r.x_d.size(); ++d) {
    EXPECT_GE(r.x_d[d], -1e-9);
    EXPECT_LE(r.x_d[d], 1.0 + 1e-9);
  }
}
