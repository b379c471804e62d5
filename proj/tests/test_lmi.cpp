#include <algorithm>

#include <gtest/gtest.h>

#include "forwardctl/lmi.hpp"

using namespace forwardctl;

namespace {

DataBatch batch_of(const LtiSystem& s, Index t, std::uint64_t seed) {
  const Mat u = pe_input_gen(s.m(), t, seed);
  const Trajectory tr = simulate(s, pe_input_gen(s.n(), 1, seed + 1).col(0), u);
  return build_batch(tr.x, u, t);
}

LtiSystem unstable_system() {
  Mat a(3, 3), b(3, 1);
  a << 1.2, 1.0, 0.0, 0.0, 0.9, 1.0, 0.0, 0.0, 1.1;
  b << 0.0, 0.0, 1.0;
  return {a, b};
}

}  // namespace

TEST(Lmi, AffineExprEvaluatesTerms) {
  const Mat l = Mat::Random(2, 3), r = Mat::Random(4, 2), c = Mat::Random(2, 2), m = Mat::Random(2, 2);
  const Mat q = Mat::Random(3, 4);
  Vec s(1);
  s << 0.7;
  const AffineExpr e = AffineExpr::constant(c) + AffineExpr::q(l, r) +
                       AffineExpr::qt(r.transpose(), l.transpose()) + AffineExpr::scalar(0, m);
  const Mat expect = c + l * q * r + r.transpose() * q.transpose() * l.transpose() + 0.7 * m;
  EXPECT_LT((e.eval(q, s) - expect).norm(), 1e-13);
  EXPECT_LT((e.transposed().eval(q, s) - expect.transpose()).norm(), 1e-13);
  EXPECT_LT((e.unit_q(1, 2) - (l.col(1) * r.row(2) + r.row(2).transpose() * l.col(1).transpose())).norm(),
            1e-13);
}

TEST(Lmi, BlockAssemblyIsSymmetric) {
  const Mat q = Mat::Random(3, 2);
  const LmiBlock blk = LmiBlock::two_by_two(AffineExpr::q(Mat::Random(2, 3), Mat::Identity(2, 2)),
                                            AffineExpr::q(Mat::Random(2, 3), Mat::Identity(2, 2)),
                                            AffineExpr::constant(Mat::Identity(2, 2)));
  const Mat m = blk.assemble(q, Vec());
  EXPECT_EQ(blk.size(), 4);
  EXPECT_LT((m - m.transpose()).norm(), 1e-14);
}

TEST(Lmi, DesignGainStabilisesTrueSystem) {
  const LtiSystem s = unstable_system();
  const GainCertificate g = design_gain(batch_of(s, 6, 3));
  EXPECT_LT(spectral_radius(s.a + s.b * g.k), 1.0);
  EXPECT_GT(g.margin, 0.0);
}

TEST(Lmi, RecheckRejectsBadCandidate) {
  const DataBatch b = batch_of(unstable_system(), 6, 3);
  const LmiProblem p = stabilising_template(b, 1e-7 * data_scale(b));
  const FeasibilityReport bad = recheck(p, Mat::Zero(6, 3), Vec());
  EXPECT_FALSE(bad.feasible);
  const FeasibilityReport rep = solve_feasibility(p);
  ASSERT_TRUE(rep.feasible);
  const FeasibilityReport again = recheck(p, rep.q, rep.scalars);
  EXPECT_TRUE(again.feasible);
  EXPECT_GE(again.min_eig_achieved, p.margin);
}

TEST(Lmi, UncontrollableUnstableModeIsInfeasible) {
  Mat a(2, 2), b(2, 1);
  a << 2.0, 0.0, 0.0, 0.5;
  b << 0.0, 1.0;
  EXPECT_THROW(design_gain(batch_of({a, b}, 6, 1)), LmiInfeasible);
}

TEST(Lmi, SnrConditionIsMonotoneInAlpha) {
  const Mat xp = Mat::Random(3, 8), r = 0.05 * Mat::Random(3, 8);
  bool seen = false;
  for (double a : alpha_grid()) {
    const bool holds = snr_check(r, xp, a).holds;
    EXPECT_TRUE(!seen || holds) << "alpha " << a;
    seen = seen || holds;
  }
  EXPECT_TRUE(seen);
}

TEST(Lmi, AlphaGridEndpoints) {
  const auto g = alpha_grid(5, 1e-2, 1e2);
  ASSERT_EQ(g.size(), 5u);
  EXPECT_NEAR(g.front(), 1e-2, 1e-16);
  EXPECT_NEAR(g.back(), 1e2, 1e-12);
  EXPECT_NEAR(g[2], 1.0, 1e-14);
}

namespace {

struct NoisyFixture {
  LtiSystem sys = fixture_system("stage_a");
  NoisyBatch nb;
  NoisyFixture() {
    const Mat u = pe_input_gen(4, 12, 1);
    const Trajectory tr = simulate(sys, pe_input_gen(4, 1, 100).col(0), u, NoiseSpec{1e-6, 0.0, 2});
    nb = build_noisy_batch(tr, u, Mat::Zero(4, 12), 12);
  }
};

}  // namespace

TEST(Lmi, RobustDesignWithSmallNoise) {
  const NoisyFixture f;
  const GainCertificate g = design_gain_robust(f.nb.batch, 1e-3);
  EXPECT_LT(spectral_radius(f.sys.a + f.sys.b * g.k), 1.0);
  EXPECT_EQ(g.alpha, 1e-3);
  EXPECT_THROW(design_gain_robust(f.nb.batch, 0.0), std::invalid_argument);
}

TEST(Lmi, AlphaSearchReportsAdmissibleInterval) {
  const NoisyFixture f;
  const Mat r = encapsulated_noise(f.sys, f.nb.ledger);
  const std::vector<double> grid = alpha_grid(9);
  const AlphaScan scan = alpha_search(r, f.nb.batch.x_plus, f.nb.batch, grid);
  ASSERT_TRUE(scan.found);
  ASSERT_FALSE(scan.admissible.empty());
  EXPECT_EQ(scan.admissible.front(), scan.alpha);
  EXPECT_TRUE(snr_check(r, f.nb.batch.x_plus, scan.alpha).holds);
  // A contiguous run of the grid.
  auto it = std::find(grid.begin(), grid.end(), scan.admissible.front());
  for (double a : scan.admissible) EXPECT_EQ(*it++, a);
  EXPECT_THROW(alpha_search(r, f.nb.batch.x_plus, f.nb.batch, {1.0, 0.1}), std::invalid_argument);
}

TEST(Lmi, LargestFeasibleAlphaIsFeasible) {
  const NoisyFixture f;
  const auto g = largest_feasible_alpha(f.nb.batch, alpha_grid(9));
  ASSERT_TRUE(g.has_value());
  EXPECT_NO_THROW(design_gain_robust(f.nb.batch, g->alpha));
}
