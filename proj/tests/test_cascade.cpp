#include <gtest/gtest.h>

#include "forwardctl/cascade.hpp"

using namespace forwardctl;

namespace {

std::vector<DataBatch> fixture_batches(Index stages, Index t, std::uint64_t seed) {
  const CascadeSystem c = fixture_cascade(stages);
  const Mat u = pe_input_gen(c.input_dim(), t, seed);
  std::vector<Vec> x0;
  for (Index i = 0; i < stages; ++i) x0.push_back(pe_input_gen(4, 1, 100 * seed + i).col(0));
  return cascade_batches(simulate_cascade(c, x0, u), u, t);
}

}  // namespace

TEST(Cascade, TwoCascadeStabilisesWithEightSamples) {
  const auto b = fixture_batches(2, 8, 1);
  const ForwardingDesign d = design_2cascade(b[0], b[1]);
  EXPECT_LT(spectral_radius(closed_loop_state_matrix(fixture_cascade(2), d.controller)), 1.0);
  ASSERT_EQ(d.trace.stages.size(), 2u);
  EXPECT_TRUE(d.trace.stages[0].gain.has_value());
  // Υ is solved when stage 2 is processed.
  EXPECT_TRUE(d.trace.stages[1].sylvester.has_value());
  EXPECT_LT(d.trace.stages[1].sylvester->residual_dyn, 1e-8);
}

TEST(Cascade, FeedbackEqualsGainsTimesCoordinates) {
  const ForwardingDesign d = design_ncascade(fixture_batches(3, 8, 2));
  const ForwardingController& c = d.controller;
  const Vec x = Vec::Random(c.total_dim());
  const Vec zeta = c.coordinate_map() * x;
  Vec u = Vec::Zero(c.input_dim);
  Index off = 0;
  for (std::size_t i = 0; i < c.gains.size(); ++i) {
    u += c.gains[i] * zeta.segment(off, c.stage_dims[i]);
    off += c.stage_dims[i];
  }
  EXPECT_LT((c.feedback() * x - u).norm(), 1e-10 * (1.0 + u.norm()));
}

TEST(Cascade, ZetaCoordinatesOfFirstStageAreStates) {
  const auto b = fixture_batches(2, 8, 3);
  const ForwardingDesign d = design_2cascade(b[0], b[1]);
  const Mat t = d.controller.coordinate_map();
  EXPECT_EQ(t.topLeftCorner(4, 4), Mat::Identity(4, 4));
  EXPECT_EQ(t.topRightCorner(4, 4), Mat::Zero(4, 4));
  EXPECT_LT((t.bottomLeftCorner(4, 4) + d.controller.transforms[0]).norm(), 1e-14);
}

TEST(Cascade, DataMatchesOracleForFixedGains) {
  const CascadeSystem truth = fixture_cascade(3);
  const ForwardingDesign d = design_ncascade(fixture_batches(3, 8, 4));
  const OracleCascade o = oracle_ncascade(truth, d.controller.gains);
  for (std::size_t i = 0; i < d.controller.transforms.size(); ++i) {
    const Mat& ref = o.controller.transforms[i];
    EXPECT_LE((d.controller.transforms[i] - ref).norm(), 1e-6 * (1.0 + ref.norm())) << "stage " << i + 1;
  }
}

TEST(Cascade, ShortDataIsARankFailure) {
  const auto b = fixture_batches(2, 5, 1);
  try {
    design_2cascade(b[0], b[1]);
    FAIL() << "expected DesignFailure";
  } catch (const DesignFailure& e) {
    EXPECT_EQ(e.kind, DesignFailure::Kind::kRank);
    EXPECT_EQ(e.stage, 1);
  }
}

TEST(Cascade, MinimalSampleCounts) {
  for (Index n = 2; n <= 11; ++n) {
    std::vector<Index> dims(static_cast<std::size_t>(n) + 1, 4);
    EXPECT_EQ(tmin(TminMode::kMonolithic, dims), 4 * (n + 1));
    EXPECT_EQ(tmin(TminMode::kForwarding, dims), 8);
  }
}

TEST(Cascade, NominalClosedLoopIsBlockTriangular) {
  const auto b = fixture_batches(2, 8, 5);
  const ForwardingDesign d = design_2cascade(b[0], b[1]);
  const ClosedLoopModel cl = closed_loop_assemble(fixture_cascade(2), d.controller);
  EXPECT_LT(cl.a_cl.bottomLeftCorner(4, 4).norm(), 1e-8 * (1.0 + cl.a_cl.norm()));
  EXPECT_NEAR(spectral_radius(cl.a_cl),
              spectral_radius(closed_loop_state_matrix(fixture_cascade(2), d.controller)), 1e-8);
}

TEST(Cascade, MonolithicBatchStacksStates) {
  const auto b = fixture_batches(3, 16, 1);
  const DataBatch m = monolithic_batch(b);
  EXPECT_EQ(m.n(), 12);
  EXPECT_EQ(m.m(), 4);
  const LtiSystem s = monolithic_system(fixture_cascade(3));
  EXPECT_LT((m.x_plus - s.a * m.x_minus - s.b * m.u_minus).norm(), 1e-9 * (1.0 + m.x_plus.norm()));
}

TEST(Cascade, SmallGainRequiresSchurDiagonal) {
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = 0.5;
  a(1, 1) = 0.5;
  a(1, 0) = 0.1;
  ClosedLoopModel cl{a, Mat::Identity(2, 2), {1, 1}};
  const IssCertificate c = iss_certificate(cl);
  EXPECT_TRUE(c.schur);
  EXPECT_TRUE(c.holds);  // upper-right block is zero
  cl.a_cl(1, 1) = 1.5;
  EXPECT_THROW(iss_certificate(cl), std::domain_error);
}
