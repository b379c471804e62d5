#pragma once

#include <stdexcept>
#include <string>

#include "forwardctl/numerics.hpp"
#include "forwardctl/sysdata.hpp"

namespace forwardctl {

// A₂Θ − ΘA₁ = −B₂C₁
struct SylvesterProblem {
  Mat a1;  // n₁×n₁
  Mat a2;  // n₂×n₂
  Mat b2;  // n₂×p₁
  Mat c1;  // p₁×n₁
};

struct SylvesterCertificate {
  Mat g;      // T×n₁
  Mat theta;  // n₂×n₁, equals X₋·g
  double residual_dyn = 0.0;  // ‖X₊G − X₋G·a1‖_F
  double residual_out = 0.0;  // ‖U₋G − c1‖_F
  double g_fro = 0.0;
};

struct ErrorBoundReport {
  double bound = 0.0;
  double sigma_min_term = 0.0;
  double g_fro = 0.0;
  double r_norm = 0.0;
  double model_mismatch_term = 0.0;
};

class SpectrumOverlap : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SylvesterInfeasible : public std::runtime_error {
 public:
  SylvesterInfeasible(const std::string& what, double dyn, double out)
      : std::runtime_error(what), residual_dyn(dyn), residual_out(out) {}
  double residual_dyn;
  double residual_out;
};

// I⊗A₂ − A₁ᵀ⊗I
Mat sylvester_operator(const Eigen::Ref<const Mat>& a1, const Eigen::Ref<const Mat>& a2);

Mat solve_oracle(const SylvesterProblem& p);

// Minimum-‖G‖_F solution of X₊G = X₋G·a1, U₋G = c1; Θ = X₋G.
SylvesterCertificate solve_from_data(const DataBatch& batch2, const Eigen::Ref<const Mat>& a1,
                                     const Eigen::Ref<const Mat>& c1);
SylvesterCertificate solve_from_data_least_norm(const DataBatch& batch2,
                                                const Eigen::Ref<const Mat>& a1,
                                                const Eigen::Ref<const Mat>& c1);
SylvesterCertificate solve_empirical_noisy(const DataBatch& batch2_bar,
                                           const Eigen::Ref<const Mat>& a1_bar,
                                           const Eigen::Ref<const Mat>& c1);

// Residuals of a candidate G (no feasibility decision).
SylvesterCertificate certify(const DataBatch& batch2, const Eigen::Ref<const Mat>& a1,
                             const Eigen::Ref<const Mat>& c1, const Eigen::Ref<const Mat>& g);

double feasibility_tolerance(const DataBatch& batch);

// ‖A₂ΔΘ − ΔΘA₁ + R₂Ĝ + X̄₂Ĝ·ΔA₁‖_F
double error_residual_check(const Eigen::Ref<const Mat>& delta_theta, const Eigen::Ref<const Mat>& a1,
                            const Eigen::Ref<const Mat>& a2, const Eigen::Ref<const Mat>& r2_minus,
                            const Eigen::Ref<const Mat>& x2bar_minus,
                            const Eigen::Ref<const Mat>& g_hat,
                            const Eigen::Ref<const Mat>& delta_a1);

ErrorBoundReport error_bound(const SylvesterCertificate& g_hat_cert,
                             const Eigen::Ref<const Mat>& r2_minus,
                             const Eigen::Ref<const Mat>& x2bar_minus,
                             const Eigen::Ref<const Mat>& delta_a1, const Eigen::Ref<const Mat>& a1,
                             const Eigen::Ref<const Mat>& a2);

struct WindowChoice {
  Index start = 0;
  Index length = 0;
  SylvesterCertificate cert;
};

// Contiguous sub-windows of the batch of length ≥ min_length; returns the
// feasible one with the smallest ‖G‖_F. Throws SylvesterInfeasible if none is.
WindowChoice best_window(const DataBatch& batch2, const Eigen::Ref<const Mat>& a1,
                         const Eigen::Ref<const Mat>& c1, Index min_length);

}  // namespace forwardctl
