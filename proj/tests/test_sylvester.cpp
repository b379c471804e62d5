#include <gtest/gtest.h>

#include "forwardctl/sylvester.hpp"

using namespace forwardctl;

namespace {

// Direct Kronecker solve of A₂Θ − ΘA₁ = −B₂C₁, written out independently.
Mat kron_oracle(const Mat& a1, const Mat& a2, const Mat& b2, const Mat& c1) {
  const Index n1 = a1.rows(), n2 = a2.rows();
  Mat op = Mat::Zero(n1 * n2, n1 * n2);
  for (Index j = 0; j < n1; ++j)
    for (Index i = 0; i < n2; ++i)
      for (Index l = 0; l < n1; ++l)
        for (Index k = 0; k < n2; ++k) {
          // coefficient of Θ(k, l) in entry (i, j)
          double v = 0.0;
          if (l == j) v += a2(i, k);
          if (k == i) v -= a1(l, j);
          op(j * n2 + i, l * n2 + k) = v;
        }
  const Mat rhs = -b2 * c1;
  const Vec th = op.fullPivLu().solve(Eigen::Map<const Vec>(rhs.data(), rhs.size()));
  return Eigen::Map<const Mat>(th.data(), n2, n1);
}

struct Instance {
  Mat a1, c1;
  LtiSystem s2;
  DataBatch batch2;
};

Instance make_instance(std::uint64_t seed, Index n1, Index n2, Index m2) {
  Instance in;
  in.a1 = 0.5 * pe_input_gen(n1, n1, seed) / std::sqrt(static_cast<double>(n1));
  in.c1 = pe_input_gen(m2, n1, seed + 1);
  in.s2 = LtiSystem(Mat(Vec::LinSpaced(n2, 1.2, 1.5).asDiagonal()), pe_input_gen(n2, m2, seed + 2));
  const Index t = n2 + m2;
  const Mat u = pe_input_gen(m2, t, seed + 3);
  const Trajectory tr = simulate(in.s2, pe_input_gen(n2, 1, seed + 4).col(0), u);
  in.batch2 = build_batch(tr.x, u, t);
  return in;
}

}  // namespace

TEST(Sylvester, OperatorMatchesDefinition) {
  const Mat a1 = Mat::Random(2, 2), a2 = Mat::Random(3, 3), th = Mat::Random(3, 2);
  const Mat lhs = a2 * th - th * a1;
  const Vec v = sylvester_operator(a1, a2) * Eigen::Map<const Vec>(th.data(), th.size());
  EXPECT_LT((Eigen::Map<const Vec>(lhs.data(), lhs.size()) - v).norm(), 1e-13);
}

TEST(Sylvester, OracleSolvesEquation) {
  const Instance in = make_instance(7, 3, 4, 2);
  const Mat th = solve_oracle({in.a1, in.s2.a, in.s2.b, in.c1});
  EXPECT_LT((in.s2.a * th - th * in.a1 + in.s2.b * in.c1).norm(), 1e-12);
  EXPECT_LT((th - kron_oracle(in.a1, in.s2.a, in.s2.b, in.c1)).norm(), 1e-10);
}

TEST(Sylvester, OracleRejectsSharedSpectrum) {
  const Mat a = Vec::LinSpaced(2, 0.5, 0.7).asDiagonal();
  EXPECT_THROW(solve_oracle({a, a, Mat::Ones(2, 1), Mat::Ones(1, 2)}), SpectrumOverlap);
}

TEST(Sylvester, DataSolveMatchesIndependentOracle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Instance in = make_instance(10 * seed, 3, 4, 2);
    const SylvesterCertificate c = solve_from_data(in.batch2, in.a1, in.c1);
    const Mat ref = kron_oracle(in.a1, in.s2.a, in.s2.b, in.c1);
    EXPECT_LE((c.theta - ref).norm(), 1e-8 * (1.0 + ref.norm())) << "seed " << seed;
    EXPECT_LT(c.residual_dyn, 1e-9 * (1.0 + c.g_fro));
    EXPECT_LT(c.residual_out, 1e-9 * (1.0 + c.g_fro));
  }
}

TEST(Sylvester, CertifyReportsResidualsOfCandidate) {
  const Instance in = make_instance(3, 2, 3, 2);
  const SylvesterCertificate good = solve_from_data(in.batch2, in.a1, in.c1);
  const SylvesterCertificate again = certify(in.batch2, in.a1, in.c1, good.g);
  EXPECT_NEAR(again.residual_dyn, good.residual_dyn, 1e-12);
  const SylvesterCertificate bad = certify(in.batch2, in.a1, in.c1, good.g + Mat::Ones(good.g.rows(), good.g.cols()));
  EXPECT_GT(bad.residual_dyn + bad.residual_out, 1e-3);
}

TEST(Sylvester, UninformativeDataIsInfeasible) {
  // One sample too few for [X₋; U₋] to span the needed directions.
  Instance in = make_instance(5, 3, 4, 2);
  DataBatch b = in.batch2;
  b.x_minus = b.x_minus.leftCols(3).eval();
  b.x_plus = b.x_plus.leftCols(3).eval();
  b.u_minus = b.u_minus.leftCols(3).eval();
  EXPECT_THROW(solve_from_data(b, in.a1, in.c1), SylvesterInfeasible);
}

TEST(Sylvester, BestWindowPicksFeasibleSubwindow) {
  const Instance base = make_instance(21, 2, 3, 1);
  const Index t = 10;
  const Mat u = pe_input_gen(1, t, 99);
  const Trajectory tr = simulate(base.s2, Vec::Ones(3), u);
  const DataBatch b = build_batch(tr.x, u, t);
  const WindowChoice w = best_window(b, base.a1, base.c1, 4);
  EXPECT_GE(w.length, 4);
  EXPECT_LE(w.start + w.length, t);
  const Mat ref = kron_oracle(base.a1, base.s2.a, base.s2.b, base.c1);
  EXPECT_LE((w.cert.theta - ref).norm(), 1e-7 * (1.0 + ref.norm()));
}
