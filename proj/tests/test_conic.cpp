#include <gtest/gtest.h>

#include "shedbound/conic_solver.hpp"
#include "shedbound/program.hpp"
#include "shedbound/rng.hpp"
#include "support/oracles.hpp"

using namespace shedbound;

namespace {

ConicProgram one_dim_lp() {
  // min x s.t. -x + 1 <= 0
  ProgramBuilder pb(0, 0);
  const int x = pb.add_var("x");
  pb.h_coef(x, 1.0);
  const int row = pb.add_ineq_row();
  pb.C_coef(row, x, -1.0);
  pb.d_const(row, 1.0);
  return pb.finish();
}

}  // namespace

TEST(Dualize, OneDimLpStrongDuality) {
  const ConicProgram p = one_dim_lp();
  const DualProgram dp = dualize(p);
  EXPECT_EQ(dp.num_lambda(), 0);
  EXPECT_EQ(dp.num_mu(), 1);
  EXPECT_EQ(dp.stationarity_rows(), 1);

  const SolverSolution sol = solve_conic(p, 1e-8);
  ASSERT_EQ(sol.status, SolveStatus::optimal);
  EXPECT_NEAR(sol.objective, 1.0, 1e-7);
  EXPECT_NEAR(sol.x[0], 1.0, 1e-6);
  EXPECT_NEAR(sol.mu[0], 1.0, 1e-6);
  // stationarity of the returned duals
  EXPECT_LE(dp.feasibility_error(sol.lambda, sol.mu, sol.s), 1e-6);
  EXPECT_NEAR(dp.objective(sol.lambda, sol.mu, Eigen::VectorXd(), Eigen::VectorXd()), 1.0, 1e-6);
}

TEST(Dualize, Soc2FixedHead) {
  // min x2 s.t. (x1, x2) in soc, x1 = 1 -> optimum -1
  ProgramBuilder pb(0, 0);
  pb.add_cone_block(ConeBlockType::soc, {"x1", "x2"});
  pb.h_coef(1, 1.0);
  const int row = pb.add_eq_row();
  pb.A_coef(row, 0, 1.0);
  pb.b_const(row, -1.0);
  const ConicProgram p = pb.finish();
  const SolverSolution sol = solve_conic(p, 1e-8);
  ASSERT_EQ(sol.status, SolveStatus::optimal);
  EXPECT_NEAR(sol.objective, -1.0, 1e-6);
  EXPECT_NEAR(sol.dual_objective, -1.0, 1e-6);
  EXPECT_LE(std::abs(sol.objective - sol.dual_objective), 1e-6);
  // dual point is feasible for the mechanical dual
  const DualProgram dp = dualize(p);
  EXPECT_LE(dp.feasibility_error(sol.lambda, sol.mu, sol.s), 1e-6);
}

TEST(Dualize, DoubleDualMatchesPrimalOnRandomLp) {
  Rng rng(314);
  int tested = 0;
  for (int trial = 0; trial < 40 && tested < 10; ++trial) {
    const ConicProgram p = testsupport::random_socp(rng, 5, /*lp_only=*/true);
    const auto oracle = testsupport::lp_vertex_min(p, Eigen::VectorXd(), Eigen::VectorXd());
    if (!oracle) continue;
    const SolverSolution direct = solve_conic(p, 1e-8);
    ASSERT_EQ(direct.status, SolveStatus::optimal);
    ASSERT_NEAR(direct.objective, *oracle, 1e-5 * (1.0 + std::abs(*oracle)));

    // Recast the dual as a primal (min form), dualize again, and check the
    // value chain: recast optimum == -primal optimum, and its own duals
    // certify a matching bound.
    const DualProgram d1 = dualize(p);
    const ConicProgram recast = d1.as_primal(Eigen::VectorXd(), Eigen::VectorXd());
    const SolverSolution rsol = solve_conic(recast, 1e-8);
    ASSERT_EQ(rsol.status, SolveStatus::optimal);
    EXPECT_NEAR(rsol.objective, -*oracle, 1e-5 * (1.0 + std::abs(*oracle)));
    const DualProgram d2 = dualize(recast);
    EXPECT_NEAR(d2.objective(rsol.lambda, rsol.mu, Eigen::VectorXd(), Eigen::VectorXd()),
                -*oracle, 1e-5 * (1.0 + std::abs(*oracle)));
    ++tested;
  }
  EXPECT_GE(tested, 5);
}

TEST(Dualize, LinearInRhs) {
  ConicProgram p = one_dim_lp();
  const DualProgram d1 = dualize(p);
  ConicProgram p2 = p;
  p2.d.v0 *= 3.0;
  const DualProgram d2 = dualize(p2);
  Eigen::VectorXd mu(1);
  mu << 2.0;
  const Eigen::VectorXd none;
  EXPECT_DOUBLE_EQ(d2.objective(Eigen::VectorXd(), mu, none, none),
                   3.0 * d1.objective(Eigen::VectorXd(), mu, none, none));
}

TEST(SolveConic, EqualityInfeasible) {
  // x = 0 and x = 1 simultaneously
  ProgramBuilder pb(0, 0);
  const int x = pb.add_var("x");
  int r = pb.add_eq_row();
  pb.A_coef(r, x, 1.0);
  r = pb.add_eq_row();
  pb.A_coef(r, x, 1.0);
  pb.b_const(r, -1.0);
  const SolverSolution sol = solve_conic(pb.finish(), 1e-8);
  EXPECT_EQ(sol.status, SolveStatus::infeasible);
}

TEST(SolveConic, UnboundedDetected) {
  ProgramBuilder pb(0, 0);
  const int x = pb.add_var("x");
  pb.h_coef(x, 1.0);
  const int row = pb.add_ineq_row();  // x <= 1, free below
  pb.C_coef(row, x, 1.0);
  pb.d_const(row, -1.0);
  const SolverSolution sol = solve_conic(pb.finish(), 1e-8);
  EXPECT_EQ(sol.status, SolveStatus::unbounded);
}

TEST(SolveConic, RotatedConeEncoding) {
  // max w s.t. 2 u v >= w^2, u = 1, v = 1  ->  w* = sqrt(2)
  ProgramBuilder pb(0, 0);
  pb.add_cone_block(ConeBlockType::rotated_soc, {"u", "v", "w"});
  pb.h_coef(2, -1.0);
  int r = pb.add_eq_row();
  pb.A_coef(r, 0, 1.0);
  pb.b_const(r, -1.0);
  r = pb.add_eq_row();
  pb.A_coef(r, 1, 1.0);
  pb.b_const(r, -1.0);
  const SolverSolution sol = solve_conic(pb.finish(), 1e-8);
  ASSERT_EQ(sol.status, SolveStatus::optimal);
  EXPECT_NEAR(sol.x[2], std::sqrt(2.0), 1e-6);
}

TEST(Cones, RotatedEncodingMatchesRawInequality) {
  Rng rng(11);
  for (int k = 0; k < 1000; ++k) {
    Eigen::VectorXd v(4);
    for (int i = 0; i < 4; ++i) v[i] = rng.uniform(-1.5, 1.5);
    const bool raw = v[0] >= 0 && v[1] >= 0 &&
                     2.0 * v[0] * v[1] >= v[2] * v[2] + v[3] * v[3];
    const bool enc = cones::block_violation(ConeBlockType::rotated_soc, v) <= 1e-12;
    EXPECT_EQ(raw, enc) << v.transpose();
  }
}

TEST(Cones, SelfDualityBySampling) {
  Rng rng(5);
  const int dim = 4;
  for (ConeBlockType t : {ConeBlockType::nonneg, ConeBlockType::soc, ConeBlockType::rotated_soc}) {
    for (int k = 0; k < 1000; ++k) {
      Eigen::VectorXd v(dim), w(dim);
      for (int i = 0; i < dim; ++i) {
        v[i] = rng.uniform(-1.0, 1.0);
        w[i] = rng.uniform(-1.0, 1.0);
      }
      cones::project_block(t, v);
      cones::project_block(t, w, /*dual=*/true);
      EXPECT_GE(v.dot(w), -1e-12);
    }
  }
}

TEST(SolveConic, StrongDualityOnRandomSocps) {
  Rng rng(2718);
  int solved = 0;
  for (int k = 0; k < 25; ++k) {
    const ConicProgram p = testsupport::random_socp(rng, 20);
    const SolverSolution sol = solve_conic(p, 1e-8);
    ASSERT_EQ(sol.status, SolveStatus::optimal) << "instance " << k;
    EXPECT_LE(std::abs(sol.objective - sol.dual_objective),
              1e-6 * (1.0 + std::abs(sol.objective)))
        << "instance " << k;
    const DualProgram dp = dualize(p);
    EXPECT_LE(dp.feasibility_error(sol.lambda, sol.mu, sol.s), 1e-5);
    ++solved;
  }
  EXPECT_EQ(solved, 25);
}

TEST(WeakDuality, OptimalDualGivesZeroMargin) {
  const ConicProgram p = one_dim_lp();
  const SolverSolution sol = solve_conic(p, 1e-8);
  ASSERT_EQ(sol.status, SolveStatus::optimal);
  const double margin = weak_duality_check(p, {sol.lambda, sol.mu, sol.s},
                                           Eigen::VectorXd(), Eigen::VectorXd(), 1e-6);
  EXPECT_NEAR(margin, 0.0, 1e-6);
}

TEST(WeakDuality, ZeroDualPointOnZeroCostProgram) {
  ProgramBuilder pb(0, 0);
  const int x = pb.add_var("x");
  const int row = pb.add_ineq_row();
  pb.C_coef(row, x, -1.0);
  pb.d_const(row, 1.0);
  const ConicProgram p = pb.finish();  // h = 0
  DualPoint zero{Eigen::VectorXd::Zero(0), Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  const double margin =
      weak_duality_check(p, zero, Eigen::VectorXd(), Eigen::VectorXd(), 1e-8);
  EXPECT_GE(margin, -1e-9);
  EXPECT_NEAR(margin, 0.0, 1e-7);
}

TEST(WeakDuality, RejectionSampledDualPoints) {
  Rng rng(99);
  int accepted = 0;
  int programs = 0;
  while (accepted < 1000 && programs < 50) {
    const ConicProgram p =
        testsupport::random_socp(rng, 5, /*lp_only=*/true, /*nonneg_only=*/true);
    const auto oracle = testsupport::lp_vertex_min(p, Eigen::VectorXd(), Eigen::VectorXd());
    if (!oracle) continue;
    ++programs;
    const DualProgram dp = dualize(p);
    const int np = dp.num_lambda(), nm = dp.num_mu(), n = dp.num_s();
    for (int t = 0; t < 400 && accepted < 1000; ++t) {
      Eigen::VectorXd lam(np), mu(nm);
      for (int i = 0; i < np; ++i) lam[i] = 0.1 * rng.normal();
      for (int i = 0; i < nm; ++i) mu[i] = std::abs(0.2 * rng.normal());
      Eigen::VectorXd s = dp.h + dp.A.transpose() * lam + dp.C.transpose() * mu;
      // s must live in the dual cone: zero on free columns, >= 0 on nonneg.
      bool ok = true;
      int at = 0;
      for (const ConeBlock& blk : dp.primal_cone.blocks) {
        for (int k2 = 0; k2 < blk.dim && ok; ++k2) {
          if (blk.type == ConeBlockType::free_vars)
            ok = std::abs(s[at + k2]) <= 1e-12;
          else
            ok = s[at + k2] >= 0.0;
        }
        at += blk.dim;
      }
      if (!ok) continue;
      const double margin = *oracle - dp.objective(lam, mu, Eigen::VectorXd(), Eigen::VectorXd());
      EXPECT_GE(margin, -1e-9);
      ++accepted;
    }
  }
  EXPECT_GE(accepted, 1000);
}

TEST(ProgramJson, DumpLoadRoundTrip) {
  Rng rng(1234);
  const ConicProgram p = testsupport::random_socp(rng, 12);
  const std::string text = program_to_json(p);
  const ConicProgram q = program_from_json(text);
  EXPECT_EQ(p.num_vars(), q.num_vars());
  EXPECT_EQ(p.num_eq(), q.num_eq());
  EXPECT_EQ(p.num_ineq(), q.num_ineq());
  EXPECT_EQ(p.cone.blocks.size(), q.cone.blocks.size());
  EXPECT_EQ(p.var_names, q.var_names);
  const SolverSolution a = solve_conic(p, 1e-8);
  const SolverSolution b = solve_conic(q, 1e-8);
  ASSERT_EQ(a.status, SolveStatus::optimal);
  ASSERT_EQ(b.status, SolveStatus::optimal);
  EXPECT_NEAR(a.objective, b.objective, 1e-9 * (1.0 + std::abs(a.objective)));
}

TEST(SolveConic, DimensionMismatchThrows) {
  const ConicProgram p = one_dim_lp();
  Eigen::VectorXd bad(3);
  bad.setZero();
  EXPECT_THROW(solve_conic(p, bad, Eigen::VectorXd(), 1e-8), DimensionError);
}
