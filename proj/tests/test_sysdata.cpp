#include <gtest/gtest.h>

#include "forwardctl/io.hpp"
#include "forwardctl/sysdata.hpp"

using namespace forwardctl;

namespace {

LtiSystem small_system() {
  Mat a(2, 2), b(2, 1);
  a << 1.1, 0.2, 0.0, 0.7;
  b << 0.0, 1.0;
  return {a, b};
}

}  // namespace

TEST(Sysdata, SimulateFollowsRecursion) {
  const LtiSystem s = small_system();
  const Mat u = pe_input_gen(1, 6, 3);
  const Vec x0 = Vec::Ones(2);
  const Trajectory tr = simulate(s, x0, u);
  ASSERT_EQ(tr.x.cols(), 7);
  Vec x = x0;
  for (Index k = 0; k < 6; ++k) {
    EXPECT_LT((tr.x.col(k) - x).norm(), 1e-14);
    x = s.a * x + s.b * u.col(k);
  }
  EXPECT_LT((tr.x.col(6) - x).norm(), 1e-13);
  EXPECT_EQ(tr.x_meas, tr.x);
}

TEST(Sysdata, MeasurementNoiseRespectsCap) {
  const Trajectory tr = simulate(small_system(), Vec::Ones(2), pe_input_gen(1, 20, 1),
                                 NoiseSpec{1e-3, 0.0, 9});
  EXPECT_LE(tr.dx.cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_GT(tr.dx.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT((tr.x_meas - tr.x - tr.dx).norm(), 1e-12 * (1.0 + tr.x.norm()));
}

TEST(Sysdata, PeInputIsDeterministicPerSeed) {
  EXPECT_EQ(pe_input_gen(3, 10, 42), pe_input_gen(3, 10, 42));
  EXPECT_NE(pe_input_gen(3, 10, 42), pe_input_gen(3, 10, 43));
}

TEST(Sysdata, BatchShapesAndRank) {
  const LtiSystem s = small_system();
  const Mat u = pe_input_gen(1, 5, 2);
  const Trajectory tr = simulate(s, Vec::Ones(2), u);
  const DataBatch b = build_batch(tr.x, u, 3);
  EXPECT_EQ(b.t(), 3);
  EXPECT_EQ(b.n(), 2);
  EXPECT_EQ(b.m(), 1);
  EXPECT_LT((b.x_plus - s.a * b.x_minus - s.b * b.u_minus).norm(), 1e-13);
  EXPECT_TRUE(rank_check(b).ok);
  const DataBatch short_b = build_batch(tr.x, u, 2);
  EXPECT_FALSE(rank_check(short_b).ok);
  EXPECT_EQ(rank_check(short_b).required, 3);
}

TEST(Sysdata, EncapsulatedNoiseIdentity) {
  // X̄₊ = A X̄₋ + B Ū₋ − R₋ for the ledger's R₋.
  const LtiSystem s = small_system();
  const Mat u = pe_input_gen(1, 10, 5);
  const Trajectory tr = simulate(s, Vec::Ones(2), u, NoiseSpec{1e-2, 1e-2, 11});
  const Mat du = Mat::Zero(1, 10);
  const NoisyBatch nb = build_noisy_batch(tr, u, du, 10);
  const Mat r = encapsulated_noise(s, nb.ledger);
  const Mat lhs = nb.batch.x_plus;
  const Mat rhs = s.a * nb.batch.x_minus + s.b * nb.batch.u_minus - r;
  EXPECT_LT((lhs - rhs).norm(), 1e-13);
}

TEST(Sysdata, CascadeDrivesWithPreviousTrueState) {
  const CascadeSystem c = fixture_cascade(3);
  const Mat u = pe_input_gen(4, 6, 1);
  const std::vector<Vec> x0 = {Vec::Zero(4), Vec::Zero(4), Vec::Zero(4)};
  const auto tr = simulate_cascade(c, x0, u);
  ASSERT_EQ(tr.size(), 3u);
  for (Index k = 0; k < 6; ++k) {
    const Vec x2 = c.stages[1].a * tr[1].x.col(k) + c.stages[1].b * tr[0].x.col(k);
    EXPECT_LT((tr[1].x.col(k + 1) - x2).norm(), 1e-12);
  }
}

TEST(Sysdata, CascadeRejectsMismatchedStages) {
  Mat a = Mat::Identity(2, 2), b = Mat::Ones(2, 1);
  EXPECT_THROW(CascadeSystem({LtiSystem(a, b), LtiSystem(a, b)}), std::invalid_argument);
}

TEST(Sysdata, FixtureCsvMatchesEmbeddedFixture) {
  for (const char* name : {"stage_a", "stage_b"}) {
    const LtiSystem file = read_system_csv(fs::path(FORWARDCTL_FIXTURE_DIR) / (std::string(name) + ".csv"));
    const LtiSystem embedded = fixture_system(name);
    EXPECT_EQ(file.a, embedded.a) << name;
    EXPECT_EQ(file.b, embedded.b) << name;
  }
  EXPECT_THROW(fixture_system("nope"), std::invalid_argument);
}
