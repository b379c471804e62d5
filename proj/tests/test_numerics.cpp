#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "forwardctl/numerics.hpp"

using namespace forwardctl;

TEST(Numerics, KronVecIdentity) {
  // vec(AXB) = (Bᵀ ⊗ A) vec(X)
  const Mat a = Mat::Random(3, 4), x = Mat::Random(4, 2), b = Mat::Random(2, 5);
  const Vec lhs = vec(a * x * b);
  const Vec rhs = kron(b.transpose(), a) * vec(x);
  EXPECT_LT((lhs - rhs).norm(), 1e-12);
}

TEST(Numerics, UnvecRoundTripAndMismatch) {
  const Mat a = Mat::Random(3, 5);
  EXPECT_EQ(unvec(vec(a), 3, 5), a);
  EXPECT_THROW(unvec(vec(a), 4, 4), std::invalid_argument);
}

TEST(Numerics, RequireFinite) {
  Mat a = Mat::Zero(2, 2);
  EXPECT_NO_THROW(require_finite(a, "a"));
  a(1, 0) = std::nan("");
  EXPECT_THROW(require_finite(a, "a"), std::invalid_argument);
}

TEST(Numerics, MinNormSolveMatchesPseudoInverse) {
  // Rank-deficient wide system: the minimum-norm solution is the pseudo-inverse one.
  Mat m = Mat::Random(3, 6);
  m.row(2) = m.row(0) + m.row(1);
  const Mat b = m * Mat::Random(6, 2);
  const MinNormSolution s = min_norm_solve(m, b);
  const Mat pinv = m.completeOrthogonalDecomposition().pseudoInverse();
  EXPECT_EQ(s.rank, 2);
  EXPECT_LT((s.x - pinv * b).norm(), 1e-10);
  EXPECT_LT(s.residual, 1e-10);
}

TEST(Numerics, RankAndSingularValues) {
  const Mat d = Vec::LinSpaced(4, 4.0, 1.0).asDiagonal();
  EXPECT_EQ(numerical_rank(d), 4);
  EXPECT_DOUBLE_EQ(norm2(d), 4.0);
  EXPECT_DOUBLE_EQ(sigma_min(d), 1.0);
  Mat z = d;
  z(3, 3) = 0.0;
  EXPECT_EQ(numerical_rank(z), 3);
}

TEST(Numerics, SpectralRadiusOfRotation) {
  const double th = 0.3, r = 0.8;
  Mat a(2, 2);
  a << r * std::cos(th), -r * std::sin(th), r * std::sin(th), r * std::cos(th);
  EXPECT_NEAR(spectral_radius(a), r, 1e-14);
  EXPECT_TRUE(is_schur(a));
  EXPECT_FALSE(is_schur(1.5 * a));
}

TEST(Numerics, SpectralGap) {
  const Mat a = Vec::LinSpaced(3, 0.1, 0.3).asDiagonal();
  const Mat b = Vec::LinSpaced(2, 0.5, 0.9).asDiagonal();
  EXPECT_NEAR(spectral_gap(a, b), 0.2, 1e-14);
}

TEST(Numerics, ResolventNormOfScalar) {
  // sup |1/(z − a)| over the unit circle is 1/(1 − |a|).
  Mat a(1, 1);
  a << -0.5;
  const HinfResult h = resolvent_hinf_norm(a);
  EXPECT_NEAR(h.value, 2.0, 1e-9);
  EXPECT_NEAR(std::abs(h.angle), std::numbers::pi, 1e-6);
  EXPECT_FALSE(h.flagged);
  a << 1.2;
  EXPECT_TRUE(resolvent_hinf_norm(a).flagged);
}

TEST(Numerics, DecayEnvelopeBoundsPowers) {
  Mat a(2, 2);
  a << 0.9, 5.0, 0.0, 0.8;  // non-normal: large transient
  const DecayEnvelope e = decay_envelope(a);
  EXPECT_NEAR(e.p, (1.0 + 0.9) / 2.0, 1e-12);
  Mat pk = Mat::Identity(2, 2);
  for (int k = 0; k <= 400; ++k) {
    EXPECT_LE(norm2(pk), e.c * std::pow(e.p, k) * (1.0 + 1e-12)) << "k = " << k;
    pk = a * pk;
  }
  EXPECT_THROW(decay_envelope(1.2 * a), std::domain_error);
}

TEST(Numerics, PsdMinEigUsesSymmetricPart) {
  Mat a(2, 2);
  a << 1.0, 4.0, -4.0, 2.0;  // skew part must not matter
  EXPECT_NEAR(psd_min_eig(a), 1.0, 1e-14);
}
