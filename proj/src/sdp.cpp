#include "forwardctl/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/SparseCore>

namespace forwardctl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

// Largest α with x + α·dx ⪰ 0 (kInf when unbounded); 0 if x is not PD.
double max_step(const Mat& x, const Mat& dx) {
  Eigen::LLT<Mat> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  Mat t = llt.matrixL().solve(dx);
  Mat w = llt.matrixL().solve(t.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(w), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin >= 0.0 ? kInf : -1.0 / lmin;
}

struct Layout {
  std::vector<Index> sizes;
  std::vector<Index> offsets;
  Index total = 0;
  Index order = 0;  // Σ n_k

  explicit Layout(const std::vector<Index>& s) : sizes(s), offsets(svec_offsets(s)) {
    for (Index n : s) {
      total += svec_size(n);
      order += n;
    }
  }

  std::vector<Mat> unpack(const Vec& v) const {
    std::vector<Mat> out;
    out.reserve(sizes.size());
    for (size_t k = 0; k < sizes.size(); ++k)
      out.push_back(smat(v.segment(offsets[k], svec_size(sizes[k])), sizes[k]));
    return out;
  }

  Vec pack(const std::vector<Mat>& blocks) const {
    Vec v(total);
    for (size_t k = 0; k < sizes.size(); ++k)
      v.segment(offsets[k], svec_size(sizes[k])) = svec(blocks[k]);
    return v;
  }
};

}  // namespace

Index svec_size(Index n) { return n * (n + 1) / 2; }

Vec svec(const Eigen::Ref<const Mat>& m) {
  const Index n = m.rows();
  Vec v(svec_size(n));
  Index p = 0;
  for (Index j = 0; j < n; ++j)
    for (Index i = j; i < n; ++i)
      v(p++) = i == j ? m(i, j) : std::numbers::sqrt2 * 0.5 * (m(i, j) + m(j, i));
  return v;
}

Mat smat(const Eigen::Ref<const Vec>& v, Index n) {
  if (v.size() != svec_size(n)) throw std::invalid_argument("smat: size mismatch");
  Mat m(n, n);
  Index p = 0;
  for (Index j = 0; j < n; ++j)
    for (Index i = j; i < n; ++i) {
      if (i == j) {
        m(i, i) = v(p++);
      } else {
        m(i, j) = m(j, i) = v(p++) / std::numbers::sqrt2;
      }
    }
  return m;
}

std::vector<Index> svec_offsets(const std::vector<Index>& sizes) {
  std::vector<Index> off;
  Index acc = 0;
  for (Index n : sizes) {
    off.push_back(acc);
    acc += svec_size(n);
  }
  return off;
}

SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& options) {
  const Layout lay(problem.block_sizes);
  const Index d = problem.a.cols();
  if (problem.a.rows() != lay.total || problem.c.size() != lay.total || problem.b.size() != d)
    throw std::invalid_argument("solve_sdp: inconsistent problem dimensions");
  const size_t nb = lay.sizes.size();

  const double c_scale = std::max(1.0, problem.c.norm());
  const double b_scale = std::max(1.0, problem.b.norm());
  const Vec c = problem.c / c_scale;
  const Vec b = problem.b / b_scale;
  const Mat& a = problem.a;

  std::vector<Mat> x(nb), s(nb);
  for (size_t k = 0; k < nb; ++k) {
    const Index n = lay.sizes[k];
    const double rn = std::sqrt(static_cast<double>(n));
    double amax = 0.0, ratio = 0.0;
    for (Index i = 0; i < d; ++i) {
      const double an = a.col(i).segment(lay.offsets[k], svec_size(n)).norm();
      amax = std::max(amax, an);
      ratio = std::max(ratio, (1.0 + std::abs(b(i))) / (1.0 + an));
    }
    const double cn = c.segment(lay.offsets[k], svec_size(n)).norm();
    const double xi = std::max({10.0, rn, static_cast<double>(n) * ratio});
    const double eta = std::max({10.0, rn, (1.0 + std::max(amax, cn)) / rn});
    x[k] = xi * Mat::Identity(n, n);
    s[k] = eta * Mat::Identity(n, n);
  }
  Vec y = Vec::Zero(d);

  // Constraint matrices are often very sparse (bounding blocks, scalar
  // variables); products with A and the Schur complement exploit that.
  const Eigen::SparseMatrix<double> asp = a.sparseView();
  const Eigen::SparseMatrix<double> ast = asp.transpose();
  struct Entry {
    Index r, c;
    double v;  // A(r, c) = A(c, r) = v
  };
  std::vector<std::vector<Entry>> entries(static_cast<size_t>(d) * nb);
  std::vector<char> dense(static_cast<size_t>(d) * nb, 0);
  for (Index j = 0; j < d; ++j)
    for (size_t k = 0; k < nb; ++k) {
      const Index n = lay.sizes[k];
      auto& e = entries[static_cast<size_t>(j) * nb + k];
      Index p = lay.offsets[k];
      for (Index cc = 0; cc < n; ++cc)
        for (Index r = cc; r < n; ++r, ++p)
          if (a(p, j) != 0.0) e.push_back({r, cc, r == cc ? a(p, j) : a(p, j) / std::numbers::sqrt2});
      dense[static_cast<size_t>(j) * nb + k] = static_cast<Index>(e.size()) > n / 2;
    }

  SdpSolution out;
  const double order = static_cast<double>(lay.order);
  Mat wmat(lay.total, d);
  for (int it = 0; it < options.max_iterations; ++it) {
    out.iterations = it;
    const Vec xv = lay.pack(x);
    const Vec sv = lay.pack(s);
    const Vec rp = b - ast * xv;
    const Vec rdv = c - asp * y - sv;
    const double pobj = c.dot(xv);
    const double dobj = b.dot(y);
    const double mu = xv.dot(sv) / order;
    out.primal_infeasibility = rp.norm() / (1.0 + b.norm());
    out.dual_infeasibility = rdv.norm() / (1.0 + c.norm());
    const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double cgap = xv.dot(sv) / (1.0 + std::abs(pobj) + std::abs(dobj));
    out.primal_objective = pobj * c_scale * b_scale;
    out.dual_objective = dobj * c_scale * b_scale;
    if (out.primal_infeasibility < options.tolerance && out.dual_infeasibility < options.tolerance &&
        std::max(gap, cgap) < options.tolerance) {
      out.status = SdpStatus::kOptimal;
      break;
    }
    out.status = SdpStatus::kMaxIterations;

    std::vector<Mat> sinv(nb);
    bool ok = true;
    for (size_t k = 0; k < nb; ++k) {
      Eigen::LLT<Mat> llt(s[k]);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      sinv[k] = llt.solve(Mat::Identity(lay.sizes[k], lay.sizes[k]));
      sinv[k] = sym(sinv[k]);
    }
    if (!ok) {
      out.status = SdpStatus::kNumericalFailure;
      break;
    }

    for (Index j = 0; j < d; ++j) {
      for (size_t k = 0; k < nb; ++k) {
        const Index n = lay.sizes[k];
        auto dst = wmat.col(j).segment(lay.offsets[k], svec_size(n));
        const size_t id = static_cast<size_t>(j) * nb + k;
        if (entries[id].empty()) {
          dst.setZero();
        } else if (dense[id]) {
          const Mat aj = smat(a.col(j).segment(lay.offsets[k], svec_size(n)), n);
          dst = svec(x[k] * aj * sinv[k]);
        } else {
          Mat w = Mat::Zero(n, n);
          for (const Entry& e : entries[id]) {
            w.noalias() += e.v * x[k].col(e.r) * sinv[k].row(e.c);
            if (e.r != e.c) w.noalias() += e.v * x[k].col(e.c) * sinv[k].row(e.r);
          }
          dst = svec(w);
        }
      }
    }
    Mat m = ast * wmat;
    m = sym(m);
    Eigen::LLT<Mat> mchol(m);
    if (mchol.info() != Eigen::Success) {
      const double reg = 1e-14 * std::max(1.0, m.diagonal().cwiseAbs().maxCoeff());
      m.diagonal().array() += reg;
      mchol.compute(m);
      if (mchol.info() != Eigen::Success) {
        out.status = SdpStatus::kNumericalFailure;
        break;
      }
    }

    const std::vector<Mat> rd = lay.unpack(rdv);
    std::vector<Mat> xrs(nb);
    for (size_t k = 0; k < nb; ++k) xrs[k] = x[k] * rd[k] * sinv[k];
    const Vec a_xrs = ast * lay.pack(xrs);
    const Vec a_sinv = ast * lay.pack(sinv);

    auto direction = [&](double sigma, const std::vector<Mat>* corr, Vec& dy,
                         std::vector<Mat>& dx, std::vector<Mat>& ds) {
      Vec h = b - sigma * mu * a_sinv + a_xrs;
      if (corr) h += ast * lay.pack(*corr);
      dy = mchol.solve(h);
      ds = lay.unpack(rdv - asp * dy);
      dx.resize(nb);
      for (size_t k = 0; k < nb; ++k) {
        Mat t = sigma * mu * sinv[k] - x[k] - x[k] * ds[k] * sinv[k];
        if (corr) t -= (*corr)[k];
        dx[k] = sym(t);
      }
    };
    auto steps = [&](const std::vector<Mat>& dx, const std::vector<Mat>& ds, double frac,
                     double& ap, double& ad) {
      ap = kInf;
      ad = kInf;
      for (size_t k = 0; k < nb; ++k) {
        ap = std::min(ap, max_step(x[k], dx[k]));
        ad = std::min(ad, max_step(s[k], ds[k]));
      }
      ap = std::min(1.0, frac * ap);
      ad = std::min(1.0, frac * ad);
    };

    Vec dy;
    std::vector<Mat> dx, ds;
    direction(0.0, nullptr, dy, dx, ds);
    double ap = 0.0, ad = 0.0;
    steps(dx, ds, 1.0, ap, ad);
    double mu_aff = 0.0;
    for (size_t k = 0; k < nb; ++k)
      mu_aff += ((x[k] + ap * dx[k]).cwiseProduct(s[k] + ad * ds[k])).sum();
    mu_aff /= order;
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    std::vector<Mat> corr(nb);
    for (size_t k = 0; k < nb; ++k) corr[k] = dx[k] * ds[k] * sinv[k];
    direction(sigma, &corr, dy, dx, ds);
    steps(dx, ds, options.step_fraction, ap, ad);
    if (ap < 1e-12 && ad < 1e-12) {
      out.status = SdpStatus::kNumericalFailure;
      break;
    }
    for (size_t k = 0; k < nb; ++k) {
      x[k] = sym(x[k] + ap * dx[k]);
      s[k] = sym(s[k] + ad * ds[k]);
    }
    y += ad * dy;
  }

  out.y = y * c_scale;
  out.x.resize(nb);
  out.s.resize(nb);
  for (size_t k = 0; k < nb; ++k) {
    out.x[k] = x[k] * b_scale;
    out.s[k] = s[k] * c_scale;
  }
  return out;
}

}  // namespace forwardctl
