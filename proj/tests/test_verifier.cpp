#include <gtest/gtest.h>

#include "shedbound/case_io.hpp"
#include "shedbound/verifier.hpp"
#include "support/util.hpp"

using namespace shedbound;
using testsupport::data_path;
using testsupport::read_file;

namespace {

NetworkCase case2() { return parse_case(read_file(data_path("case2.json"))); }

MLPModel constant_model(const NetworkCase& c, int hidden, double out_bias) {
  const GammaLayout lay = GammaLayout::of(c);
  const GammaBox box = gamma_box(c);
  MLPModel m;
  m.dims = {lay.dim(), hidden, hidden, lay.n_lines};
  m.W = {Eigen::MatrixXd::Zero(hidden, lay.dim()), Eigen::MatrixXd::Zero(hidden, hidden),
         Eigen::MatrixXd::Zero(lay.n_lines, hidden)};
  m.b = {Eigen::VectorXd::Zero(hidden), Eigen::VectorXd::Zero(hidden),
         Eigen::VectorXd::Constant(lay.n_lines, out_bias)};
  m.norm_lo = box.lo;
  m.norm_hi = box.hi;
  m.case_name = c.name();
  m.layout = layout_hash(c);
  return m;
}

MLPModel trained_2bus(double alpha_lo, double alpha_hi, std::uint64_t seed) {
  const NetworkCase c = case2();
  const TrainingSet ts = generate_training_set(c, 24, alpha_lo, alpha_hi, seed);
  TrainConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 150;
  cfg.lr = 0.4;
  cfg.seed = seed;
  return train(c, ts, cfg);
}

}  // namespace

TEST(BuildVerification, TwoBusVariableCount) {
  const NetworkCase c = case2();
  const MLPModel nn = constant_model(c, 4, 0.0);
  const VerificationProblem vp = build_verification(c, nn);
  // hand count for the toggled 2-bus canonical form:
  //   primal: xd + wp + wq + pg + qg + 2 wii + wfr + 3 rsoc blocks of 4 = 20
  EXPECT_EQ(vp.inner.program.num_vars(), 20);
  //   equalities: 2x2 thermal links + 1 cone link + 4 flows + 4 balance = 13
  EXPECT_EQ(vp.inner.program.num_eq(), 13);
  //   inequalities: xd box 2 + hulls 8 + gen 4 + wii 4 + gated 8 + linked 4 = 30
  EXPECT_EQ(vp.inner.program.num_ineq(), 30);
  EXPECT_EQ(vp.n_s, 12);
  const int expected = vp.n_gamma + 2 * 4 + 2 * 4 + 1 + 1  // gamma, a/y pairs, a3, L
                       + 13 + 30 + 12                      // lambda, mu, s
                       + 3;                                // cone slacks, one per block
  EXPECT_EQ(vp.n_vars, expected);
  EXPECT_EQ(vp.n_gamma, 4);
}

TEST(BuildVerification, TogglesDropRows) {
  const NetworkCase c = case2();
  const MLPModel nn = constant_model(c, 4, 0.0);
  VerifierConfig off;
  off.toggles = RedispatchOptions{};
  VerifierConfig on;
  const VerificationProblem vfull = build_verification(c, nn, off);
  const VerificationProblem vtog = build_verification(c, nn, on);
  EXPECT_LT(vtog.n_lambda + vtog.n_mu, vfull.n_lambda + vfull.n_mu);
}

TEST(BuildVerification, GammaBoxCarried) {
  const NetworkCase c = case2();
  const MLPModel nn = constant_model(c, 4, 0.0);
  const VerificationProblem vp = build_verification(c, nn);
  const GammaLayout lay = GammaLayout::of(c);
  EXPECT_DOUBLE_EQ(vp.box.lo[lay.p_index(0)], 0.75 * 0.5);
  EXPECT_DOUBLE_EQ(vp.box.hi[lay.p_index(0)], 1.25 * 0.5);
  EXPECT_DOUBLE_EQ(vp.box.lo[lay.alpha_index()], 0.25);
  EXPECT_DOUBLE_EQ(vp.box.hi[lay.alpha_index()], 0.75);
  EXPECT_THROW(build_verification(parse_case(read_file(data_path("case3.json"))), nn),
               ModelSchemaError);
}

// helper: upper bound of the p component of the box
static double vpbox_hi(const NetworkCase& c, const GammaLayout& lay) {
  return gamma_box(c).hi[lay.p_index(0)];
}

TEST(SolveVerification, ConstantNetDrivesLoadUp) {
  const NetworkCase c = case2();
  // On this fixture a constant 0.5 status still carries the whole load box,
  // so the shed lever only appears at a lower constant status. Use a net
  // whose fixed output binds everywhere in the box.
  const MLPModel nn = constant_model(c, 4, -3.0);  // L fixed at sigma(-3)
  const GammaLayout lay = GammaLayout::of(c);
  const double Lconst = 1.0 / (1.0 + std::exp(3.0));

  // sweep oracle: at this fixed L, shed is monotone increasing in gamma_P
  const RedispatchBuild toggled = build_soc_redispatch(c, RedispatchOptions::verifier_defaults());
  Eigen::VectorXd L(1);
  L << Lconst;
  double prev = -1.0;
  for (int k = 0; k <= 10; ++k) {
    ScenarioInput sc = ScenarioInput::base_of(c);
    sc.p_d[0] = 0.375 + (0.625 - 0.375) * k / 10.0;
    const RedispatchResult rr = solve_soc_redispatch(c, toggled, sc, L, 1e-8, ModelTag::I);
    ASSERT_EQ(rr.status, SolveStatus::optimal);
    EXPECT_GE(rr.shed, prev - 1e-7);
    prev = rr.shed;
  }
  EXPECT_GT(prev, 0.0);  // at the top of the box some load must shed

  VerifierConfig cfg;
  cfg.restarts = 2;
  const VerificationResult res = verify(c, nn, cfg);
  EXPECT_TRUE(res.stage_a_converged);
  EXPECT_NEAR(res.gamma_star.p_d[0], vpbox_hi(c, lay), 1e-3);

  // at a constant 0.5 status the fixture serves the whole box: the honest
  // outcome is a zero bound
  const VerificationResult half = verify(c, constant_model(c, 4, 0.0), cfg);
  EXPECT_NEAR(half.dual_objective, 0.0, 1e-3);
  EXPECT_NEAR(half.shed_I, 0.0, 1e-5);
}

TEST(SolveVerification, WeakDualityAtReturnedPoint) {
  const NetworkCase c = case2();
  const MLPModel nn = trained_2bus(0.25, 0.75, 42);
  VerifierConfig cfg;
  cfg.restarts = 2;
  const VerificationProblem vp = build_verification(c, nn, cfg);
  ConicSolver solver(vp.inner.program);
  const StageAResult sa = solve_verification_once(vp, vp.box.midpoint(), solver, cfg);
  ASSERT_TRUE(sa.converged);
  DualPoint pt{sa.v.segment(vp.off_lambda, vp.n_lambda), sa.v.segment(vp.off_mu, vp.n_mu),
               Eigen::VectorXd::Zero(vp.inner.program.num_vars())};
  for (int k = 0; k < vp.n_s; ++k) pt.s[vp.s_cols[k]] = sa.v[vp.off_s + k];
  const Eigen::VectorXd gam = sa.v.segment(vp.off_gamma, vp.n_gamma);
  const Eigen::VectorXd L = sa.v.segment(vp.off_L, vp.n_L);
  const double margin = weak_duality_check(vp.inner.program, pt, gam, L, cfg.stage_tol);
  EXPECT_GE(margin, -cfg.stage_tol);
}

TEST(SolveVerification, RestartDeterminism) {
  const NetworkCase c = case2();
  const MLPModel nn = trained_2bus(0.25, 0.75, 7);
  VerifierConfig cfg;
  cfg.restarts = 2;
  cfg.seed = 5;
  const VerificationResult a = verify(c, nn, cfg);
  const VerificationResult b = verify(c, nn, cfg);
  EXPECT_EQ(a.gamma_star.to_vector(), b.gamma_star.to_vector());
  EXPECT_EQ(a.dual_objective, b.dual_objective);
  EXPECT_EQ(a.restart_index, b.restart_index);
}

TEST(Pipeline, ConstantHalfNetSnapsAllOn) {
  const NetworkCase c = case2();
  const MLPModel nn = constant_model(c, 4, 0.0);
  VerifierConfig cfg;
  cfg.restarts = 1;
  const VerificationResult res = verify(c, nn, cfg);
  EXPECT_EQ(res.z_snapped[0], 1.0);  // 0.5 snaps on
  ASSERT_EQ(res.status_II, SolveStatus::optimal);
  ASSERT_EQ(res.status_III, SolveStatus::optimal);
  // full topology serves everything in the box
  EXPECT_NEAR(res.shed_II, 0.0, 1e-5);
  EXPECT_NEAR(res.shed_III, 0.0, 1e-4);
  EXPECT_LE(res.shed_II, res.shed_III + 1e-6);
}

TEST(Pipeline, AllOffNetShedsEverything) {
  const NetworkCase c = case2();
  const MLPModel nn = constant_model(c, 4, -8.0);  // L ~ 3e-4
  VerifierConfig cfg;
  cfg.restarts = 1;
  const VerificationResult res = verify(c, nn, cfg);
  EXPECT_EQ(res.z_snapped[0], 0.0);
  ASSERT_EQ(res.status_III, SolveStatus::optimal);
  EXPECT_NEAR(res.shed_III, res.gamma_star.p_d.sum(), 1e-6);
  EXPECT_GE(res.shed_III, 0.9 * 0.375);
}

TEST(Pipeline, NnConsistencyAndBoxRespect) {
  const NetworkCase c = case2();
  const MLPModel nn = trained_2bus(0.25, 0.75, 99);
  VerifierConfig cfg;
  cfg.restarts = 3;
  const VerificationResult res = verify(c, nn, cfg);
  const GammaBox box = gamma_box(c);
  EXPECT_TRUE(box.contains(res.gamma_star.to_vector(), 1e-9));
  // NLP copy of L close to the re-derived forward pass
  ASSERT_EQ(res.L_nlp.size(), res.L.size());
  EXPECT_LE((res.L_nlp - res.L).cwiseAbs().maxCoeff(), cfg.stage_tol);
  // the snap consumed forward(gamma_star)
  const Eigen::VectorXd fresh = forward(nn, res.gamma_star.to_vector());
  EXPECT_LE((fresh - res.L).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(snap(fresh), res.z_snapped);
}

TEST(Pipeline, OrderingAcrossRandomNets) {
  const NetworkCase c = case2();
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    MLPModel nn = constant_model(c, 4, 0.0);
    Rng rng(mix_seed(1234, seed));
    for (auto& W : nn.W)
      for (Eigen::Index i = 0; i < W.rows(); ++i)
        for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = rng.uniform(-2.0, 2.0);
    VerifierConfig cfg;
    cfg.restarts = 1;
    VerificationResult res;
    try {
      res = verify(c, nn, cfg);
    } catch (const VerifierError&) {
      continue;
    }
    if (res.status_II != SolveStatus::optimal || res.status_III != SolveStatus::optimal) continue;
    EXPECT_LE(res.shed_II, res.shed_III + 1e-6) << "seed " << seed;
    EXPECT_LE(res.dual_objective, res.shed_I + 5e-3) << "seed " << seed;
    ++checked;
  }
  EXPECT_GE(checked, 5);
}

TEST(Pipeline, AlphaExtremeNetNearTotalShed) {
  const NetworkCase c = case2();
  const MLPModel nn = trained_2bus(1.0, 1.0, 13);  // all labels off
  VerifierConfig cfg;
  cfg.restarts = 2;
  const VerificationResult res = verify(c, nn, cfg);
  EXPECT_EQ(res.z_snapped[0], 0.0);
  ASSERT_EQ(res.status_III, SolveStatus::optimal);
  EXPECT_GE(res.shed_III, 0.9 * res.gamma_star.p_d.sum());
}
