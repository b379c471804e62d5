#include "forwardctl/sylvester.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace forwardctl {

namespace {

constexpr double kGapTol = 1e-8;

void check_problem(const SylvesterProblem& p) {
  if (p.a1.rows() != p.a1.cols() || p.a2.rows() != p.a2.cols())
    throw std::invalid_argument("Sylvester problem: a1, a2 must be square");
  if (p.b2.rows() != p.a2.rows() || p.c1.cols() != p.a1.rows() || p.b2.cols() != p.c1.rows())
    throw std::invalid_argument("Sylvester problem: b2·c1 does not conform");
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

void check_informative(const SylvesterCertificate& cert, const DataBatch& b) {
  const double tol = feasibility_tolerance(b);
  if (!(cert.residual_dyn <= tol && cert.residual_out <= tol))
    throw SylvesterInfeasible("data not informative for Θ (residuals " + sci(cert.residual_dyn) + ", " +
                                  sci(cert.residual_out) + ", tolerance " + sci(tol) + ")",
                              cert.residual_dyn, cert.residual_out);
}

SylvesterCertificate solve_stacked(const DataBatch& b, const Eigen::Ref<const Mat>& a1,
                                   const Eigen::Ref<const Mat>& c1) {
  const Index t = b.t(), n1 = a1.rows(), n2 = b.n(), p1 = b.m();
  if (a1.cols() != n1) throw std::invalid_argument("data Sylvester: a1 must be square");
  if (c1.rows() != p1 || c1.cols() != n1)
    throw std::invalid_argument("data Sylvester: c1 must be m×n₁");
  const Mat eye = Mat::Identity(n1, n1);
  Mat m(n2 * n1 + p1 * n1, t * n1);
  m.topRows(n2 * n1) = kron(eye, b.x_plus) - kron(a1.transpose(), b.x_minus);
  m.bottomRows(p1 * n1) = kron(eye, b.u_minus);
  Vec rhs = Vec::Zero(m.rows());
  rhs.tail(p1 * n1) = vec(c1);
  const MinNormSolution sol = min_norm_solve(m, rhs);
  SylvesterCertificate cert = certify(b, a1, c1, unvec(sol.x.col(0), t, n1));
  check_informative(cert, b);
  return cert;
}

// G = [X₋; U₋]⁺·[Θ; c1]; substituting into X₊G = ΘA₁ leaves a Sylvester
// equation in Θ alone, solved by pivoted LU on the n₂n₁ Kronecker system.
SylvesterCertificate solve_range(const DataBatch& b, const Eigen::Ref<const Mat>& a1,
                                 const Eigen::Ref<const Mat>& c1) {
  const Index n1 = a1.rows(), n2 = b.n(), p1 = b.m();
  if (a1.cols() != n1) throw std::invalid_argument("data Sylvester: a1 must be square");
  if (c1.rows() != p1 || c1.cols() != n1)
    throw std::invalid_argument("data Sylvester: c1 must be m×n₁");
  const Mat s = b.stacked();
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(s);
  cod.setThreshold(1e-10);
  if (cod.rank() < s.rows())
    throw SylvesterInfeasible("data Sylvester: [X₋; U₋] is rank deficient", 0.0, 0.0);
  const Mat pinv = cod.pseudoInverse();
  const Mat a2 = b.x_plus * pinv.leftCols(n2);
  const Mat b2 = b.x_plus * pinv.rightCols(p1);
  Eigen::FullPivLU<Mat> lu(sylvester_operator(a1, a2));
  if (!lu.isInvertible())
    throw SylvesterInfeasible("data Sylvester: a1 shares an eigenvalue with the data-implied dynamics", 0.0,
                              0.0);
  auto lift = [&](const Mat& theta, const Mat& out) {
    Mat rhs(n2 + p1, n1);
    rhs << theta, out;
    return Mat(pinv * rhs);
  };
  Mat g = lift(unvec(lu.solve(vec(Mat(-b2 * c1))), n2, n1), c1);

  // Iterative refinement with residuals in extended precision: deep cascade
  // stages give ‖G‖ large enough that one pass leaves roundoff near the
  // feasibility tolerance.
  using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const LMat xm = b.x_minus.cast<long double>(), xp = b.x_plus.cast<long double>();
  const LMat um = b.u_minus.cast<long double>(), al = a1.cast<long double>();
  const LMat cl = c1.cast<long double>();
  Mat best = g;
  double best_r = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 5; ++it) {
    const LMat gl = g.cast<long double>();
    const Mat r_dyn = (xp * gl - (xm * gl) * al).cast<double>();
    const Mat r_out = (um * gl - cl).cast<double>();
    const double r = std::hypot(r_dyn.norm(), r_out.norm());
    if (!(r < best_r)) break;
    best = g;
    best_r = r;
    const Mat d_theta = unvec(lu.solve(vec(Mat(-r_dyn + b2 * r_out))), n2, n1);
    g -= lift(-d_theta, r_out);
  }
  SylvesterCertificate cert = certify(b, a1, c1, best);
  check_informative(cert, b);
  return cert;
}

}  // namespace

Mat sylvester_operator(const Eigen::Ref<const Mat>& a1, const Eigen::Ref<const Mat>& a2) {
  return kron(Mat::Identity(a1.rows(), a1.rows()), a2) -
         kron(a1.transpose(), Mat::Identity(a2.rows(), a2.rows()));
}

Mat solve_oracle(const SylvesterProblem& p) {
  check_problem(p);
  if (spectral_gap(p.a1, p.a2) <= kGapTol)
    throw SpectrumOverlap("solve_oracle: a1 and a2 share an eigenvalue");
  const Mat op = sylvester_operator(p.a1, p.a2);
  Eigen::FullPivLU<Mat> lu(op);
  if (!lu.isInvertible()) throw SpectrumOverlap("solve_oracle: singular Sylvester operator");
  const Vec x = lu.solve(vec(Mat(-p.b2 * p.c1)));
  return unvec(x, p.a2.rows(), p.a1.rows());
}

double feasibility_tolerance(const DataBatch& b) {
  const double scale = std::max({b.x_minus.norm(), b.x_plus.norm(), b.u_minus.norm()});
  return 1e-8 * (1.0 + scale);
}

SylvesterCertificate certify(const DataBatch& b, const Eigen::Ref<const Mat>& a1,
                             const Eigen::Ref<const Mat>& c1, const Eigen::Ref<const Mat>& g) {
  // Residuals evaluated in extended precision so that they measure the
  // candidate G rather than the roundoff of forming X₊G − X₋G·a1.
  using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const LMat gl = g.cast<long double>();
  const LMat theta_l = b.x_minus.cast<long double>() * gl;
  SylvesterCertificate cert;
  cert.g = g;
  cert.theta = theta_l.cast<double>();
  cert.residual_dyn =
      static_cast<double>((b.x_plus.cast<long double>() * gl - theta_l * a1.cast<long double>()).norm());
  cert.residual_out = static_cast<double>((b.u_minus.cast<long double>() * gl - c1.cast<long double>()).norm());
  cert.g_fro = g.norm();
  return cert;
}

SylvesterCertificate solve_from_data(const DataBatch& batch2, const Eigen::Ref<const Mat>& a1,
                                     const Eigen::Ref<const Mat>& c1) {
  return solve_range(batch2, a1, c1);
}

SylvesterCertificate solve_from_data_least_norm(const DataBatch& batch2,
                                                const Eigen::Ref<const Mat>& a1,
                                                const Eigen::Ref<const Mat>& c1) {
  return solve_stacked(batch2, a1, c1);
}

SylvesterCertificate solve_empirical_noisy(const DataBatch& batch2_bar,
                                           const Eigen::Ref<const Mat>& a1_bar,
                                           const Eigen::Ref<const Mat>& c1) {
  return solve_from_data_least_norm(batch2_bar, a1_bar, c1);
}

double error_residual_check(const Eigen::Ref<const Mat>& delta_theta, const Eigen::Ref<const Mat>& a1,
                            const Eigen::Ref<const Mat>& a2, const Eigen::Ref<const Mat>& r2_minus,
                            const Eigen::Ref<const Mat>& x2bar_minus,
                            const Eigen::Ref<const Mat>& g_hat,
                            const Eigen::Ref<const Mat>& delta_a1) {
  if (delta_theta.rows() != a2.rows() || delta_theta.cols() != a1.rows())
    throw std::invalid_argument("error_residual_check: ΔΘ shape mismatch");
  return (a2 * delta_theta - delta_theta * a1 + r2_minus * g_hat + x2bar_minus * g_hat * delta_a1).norm();
}

ErrorBoundReport error_bound(const SylvesterCertificate& cert, const Eigen::Ref<const Mat>& r2_minus,
                             const Eigen::Ref<const Mat>& x2bar_minus,
                             const Eigen::Ref<const Mat>& delta_a1, const Eigen::Ref<const Mat>& a1,
                             const Eigen::Ref<const Mat>& a2) {
  if (spectral_gap(a1, a2) <= kGapTol) throw SpectrumOverlap("error_bound: shared spectrum");
  ErrorBoundReport r;
  r.sigma_min_term = sigma_min(sylvester_operator(a1, a2));
  if (!(r.sigma_min_term > 0.0)) throw SpectrumOverlap("error_bound: singular Sylvester operator");
  r.g_fro = cert.g_fro;
  r.r_norm = norm2(r2_minus);
  r.model_mismatch_term = norm2(x2bar_minus) * norm2(delta_a1);
  r.bound = r.g_fro * (r.r_norm + r.model_mismatch_term) / r.sigma_min_term;
  return r;
}

WindowChoice best_window(const DataBatch& batch2, const Eigen::Ref<const Mat>& a1,
                         const Eigen::Ref<const Mat>& c1, Index min_length) {
  WindowChoice best;
  double best_norm = std::numeric_limits<double>::infinity();
  const Index t = batch2.t();
  for (Index len = std::max<Index>(1, min_length); len <= t; ++len) {
    for (Index start = 0; start + len <= t; ++start) {
      DataBatch w;
      w.x_minus = batch2.x_minus.middleCols(start, len);
      w.x_plus = batch2.x_plus.middleCols(start, len);
      w.u_minus = batch2.u_minus.middleCols(start, len);
      try {
        SylvesterCertificate c = solve_from_data_least_norm(w, a1, c1);
        if (c.g_fro < best_norm) {
          best_norm = c.g_fro;
          best = {start, len, std::move(c)};
        }
      } catch (const SylvesterInfeasible&) {
      }
    }
  }
  if (!std::isfinite(best_norm))
    throw SylvesterInfeasible("no contiguous window is informative for Θ", 0.0, 0.0);
  return best;
}

}  // namespace forwardctl
