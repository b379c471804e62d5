#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace forwardctl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Eigen::Index;

template <typename DA, typename DB>
Eigen::Matrix<typename DA::Scalar, Eigen::Dynamic, Eigen::Dynamic> kron(
    const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  Eigen::Matrix<typename DA::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(
      a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Column stacking.
template <typename D>
Eigen::Matrix<typename D::Scalar, Eigen::Dynamic, 1> vec(
    const Eigen::MatrixBase<D>& a) {
  Eigen::Matrix<typename D::Scalar, Eigen::Dynamic, Eigen::Dynamic> tmp = a;
  return Eigen::Map<const Eigen::Matrix<typename D::Scalar, Eigen::Dynamic, 1>>(
      tmp.data(), tmp.size());
}

// Inverse of vec; throws std::invalid_argument on a size mismatch.
Mat unvec(const Eigen::Ref<const Vec>& v, Index rows, Index cols);

// Throws std::invalid_argument if any entry is NaN/Inf.
void require_finite(const Eigen::Ref<const Mat>& a, const char* what);

struct MinNormSolution {
  Mat x;
  double residual = 0.0;  // ‖m x − b‖_F
  Index rank = 0;
};

// Minimum-Frobenius-norm least-squares solution through the SVD; singular
// values ≤ rel_tol·σ_max are dropped.
MinNormSolution min_norm_solve(const Eigen::Ref<const Mat>& m,
                               const Eigen::Ref<const Mat>& b,
                               double rel_tol = 1e-10);

// Count of singular values above max(rows, cols)·σ_max·1e-10.
Index numerical_rank(const Eigen::Ref<const Mat>& m);

Vec singular_values(const Eigen::Ref<const Mat>& m);
double norm2(const Eigen::Ref<const Mat>& m);
double sigma_min(const Eigen::Ref<const Mat>& m);

struct Spectrum {
  std::vector<std::complex<double>> eigenvalues;
  double radius = 0.0;
  // Filled only when requested; columns match `eigenvalues`.
  Eigen::MatrixXcd eigenvectors;
};

Spectrum eigvals(const Eigen::Ref<const Mat>& a, bool with_vectors = false);
double spectral_radius(const Eigen::Ref<const Mat>& a);
bool is_schur(const Eigen::Ref<const Mat>& a, double tol = 1e-9);

// Smallest distance between the two spectra.
double spectral_gap(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Mat>& b);

struct HinfResult {
  double value = 0.0;
  double angle = 0.0;
  bool flagged = false;  // non-Schur input or (zI − a) singular on the grid
};

// sup over |z| = 1 of σ_max((zI − a)⁻¹): uniform grid, then golden-section.
HinfResult resolvent_hinf_norm(const Eigen::Ref<const Mat>& a, int grid_size = 4096);

struct DecayEnvelope {
  double c = 1.0;
  double p = 0.0;
  int horizon = 0;  // last power inspected
};

// ‖a^k‖₂ ≤ c·p^k with p = (1 + ρ(a))/2. Throws std::domain_error for non-Schur a.
DecayEnvelope decay_envelope(const Eigen::Ref<const Mat>& a);

// Smallest eigenvalue of (a + aᵀ)/2.
double psd_min_eig(const Eigen::Ref<const Mat>& a);

}  // namespace forwardctl
