#include "forwardctl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace forwardctl {

namespace {

void require_square(const Eigen::Ref<const Mat>& a, const char* what) {
  if (a.rows() != a.cols())
    throw std::invalid_argument(std::string(what) + ": matrix is not square");
}

double resolvent_sigma_min(const Eigen::Ref<const Mat>& a, double theta) {
  const Index n = a.rows();
  Eigen::MatrixXcd m = -a.cast<std::complex<double>>();
  m.diagonal().array() += std::polar(1.0, theta);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues()(n - 1);
}

}  // namespace

Mat unvec(const Eigen::Ref<const Vec>& v, Index rows, Index cols) {
  if (v.size() != rows * cols)
    throw std::invalid_argument("unvec: size mismatch");
  return Eigen::Map<const Mat>(v.data(), rows, cols);
}

void require_finite(const Eigen::Ref<const Mat>& a, const char* what) {
  if (!a.allFinite())
    throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

MinNormSolution min_norm_solve(const Eigen::Ref<const Mat>& m,
                               const Eigen::Ref<const Mat>& b, double rel_tol) {
  if (m.size() == 0) throw std::invalid_argument("min_norm_solve: empty matrix");
  if (b.rows() != m.rows())
    throw std::invalid_argument("min_norm_solve: row mismatch");
  Eigen::BDCSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  const double cut = s.size() ? rel_tol * s(0) : 0.0;
  Index r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  MinNormSolution out;
  out.rank = r;
  Mat coef = svd.matrixU().leftCols(r).transpose() * b;
  coef = s.head(r).cwiseInverse().asDiagonal() * coef;
  out.x = svd.matrixV().leftCols(r) * coef;
  out.residual = (m * out.x - b).norm();
  return out;
}

Vec singular_values(const Eigen::Ref<const Mat>& m) {
  if (m.size() == 0) return Vec();
  return Eigen::BDCSVD<Mat>(m).singularValues();
}

Index numerical_rank(const Eigen::Ref<const Mat>& m) {
  const Vec s = singular_values(m);
  if (s.size() == 0) return 0;
  const double cut = static_cast<double>(std::max(m.rows(), m.cols())) * s(0) * 1e-10;
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++r;
  return r;
}

double norm2(const Eigen::Ref<const Mat>& m) {
  const Vec s = singular_values(m);
  return s.size() ? s(0) : 0.0;
}

double sigma_min(const Eigen::Ref<const Mat>& m) {
  const Vec s = singular_values(m);
  if (s.size() < std::min(m.rows(), m.cols()) || s.size() == 0) return 0.0;
  return s(s.size() - 1);
}

Spectrum eigvals(const Eigen::Ref<const Mat>& a, bool with_vectors) {
  require_square(a, "eigvals");
  Spectrum out;
  if (a.rows() == 0) return out;
  Eigen::EigenSolver<Mat> es(a, with_vectors);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigvals: no convergence");
  const Eigen::VectorXcd& ev = es.eigenvalues();
  out.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  for (const auto& l : out.eigenvalues) out.radius = std::max(out.radius, std::abs(l));
  if (with_vectors) out.eigenvectors = es.eigenvectors();
  return out;
}

double spectral_radius(const Eigen::Ref<const Mat>& a) { return eigvals(a).radius; }

bool is_schur(const Eigen::Ref<const Mat>& a, double tol) {
  return spectral_radius(a) < 1.0 - tol;
}

double spectral_gap(const Eigen::Ref<const Mat>& a, const Eigen::Ref<const Mat>& b) {
  const auto la = eigvals(a).eigenvalues;
  const auto lb = eigvals(b).eigenvalues;
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& x : la)
    for (const auto& y : lb) gap = std::min(gap, std::abs(x - y));
  return gap;
}

HinfResult resolvent_hinf_norm(const Eigen::Ref<const Mat>& a, int grid_size) {
  require_square(a, "resolvent_hinf_norm");
  if (grid_size < 8) grid_size = 8;
  HinfResult out;
  out.flagged = !is_schur(a, 0.0);
  const double scale = std::max(1.0, norm2(a));
  const double h = 2.0 * std::numbers::pi / grid_size;
  double best_s = std::numeric_limits<double>::infinity();
  int best = 0;
  for (int j = 0; j < grid_size; ++j) {
    const double s = resolvent_sigma_min(a, j * h);
    if (s < best_s) {
      best_s = s;
      best = j;
    }
  }
  if (best_s <= 1e-14 * scale) {
    out.flagged = true;
    out.value = std::numeric_limits<double>::infinity();
    out.angle = best * h;
    return out;
  }
  // golden section on σ_min over the bracketing cells
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = (best - 1) * h, hi = (best + 1) * h;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = resolvent_sigma_min(a, x1), f2 = resolvent_sigma_min(a, x2);
  for (int it = 0; it < 60 && hi - lo > 1e-13; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = resolvent_sigma_min(a, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = resolvent_sigma_min(a, x2);
    }
  }
  double theta = best * h;
  if (std::min(f1, f2) < best_s) {
    best_s = std::min(f1, f2);
    theta = f1 < f2 ? x1 : x2;
  }
  theta = std::fmod(theta + 2.0 * std::numbers::pi, 2.0 * std::numbers::pi);
  out.value = best_s > 0.0 ? 1.0 / best_s : std::numeric_limits<double>::infinity();
  out.angle = theta;
  return out;
}

DecayEnvelope decay_envelope(const Eigen::Ref<const Mat>& a) {
  require_square(a, "decay_envelope");
  const double rho = spectral_radius(a);
  if (!(rho < 1.0)) throw std::domain_error("decay_envelope: matrix is not Schur");
  DecayEnvelope env;
  env.p = 0.5 * (1.0 + rho);
  env.c = 1.0;
  Mat power = Mat::Identity(a.rows(), a.cols());
  double pk = 1.0;
  // hard cap guards against pathological non-normal inputs
  constexpr int kMaxPowers = 200000;
  int k = 0;
  for (; k < kMaxPowers; ++k) {
    const double nk = norm2(power);
    if (nk < 1e-12) break;
    if (pk > 0.0) env.c = std::max(env.c, nk / pk);
    power = power * a;
    pk *= env.p;
  }
  env.horizon = k;
  return env;
}

double psd_min_eig(const Eigen::Ref<const Mat>& a) {
  require_square(a, "psd_min_eig");
  if (a.rows() == 0) return std::numeric_limits<double>::infinity();
  Mat s = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace forwardctl
