#include "forwardctl/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "forwardctl/sdp.hpp"

namespace forwardctl {

// ---------------------------------------------------------------- expressions

AffineExpr AffineExpr::constant(Mat c) {
  AffineExpr e;
  e.constant_ = std::move(c);
  return e;
}

AffineExpr AffineExpr::q(Mat left, Mat right) {
  AffineExpr e(left.rows(), right.cols());
  e.terms_.push_back({Term::Kind::kQ, std::move(left), std::move(right), 0});
  return e;
}

AffineExpr AffineExpr::qt(Mat left, Mat right) {
  AffineExpr e(left.rows(), right.cols());
  e.terms_.push_back({Term::Kind::kQt, std::move(left), std::move(right), 0});
  return e;
}

AffineExpr AffineExpr::scalar(Index j, Mat m) {
  AffineExpr e(m.rows(), m.cols());
  e.terms_.push_back({Term::Kind::kScalar, std::move(m), Mat(), j});
  return e;
}

Mat AffineExpr::eval(const Eigen::Ref<const Mat>& q, const Eigen::Ref<const Vec>& s) const {
  Mat out = constant_;
  for (const auto& t : terms_) {
    switch (t.kind) {
      case Term::Kind::kQ: out.noalias() += t.left * q * t.right; break;
      case Term::Kind::kQt: out.noalias() += t.left * q.transpose() * t.right; break;
      case Term::Kind::kScalar: out += s(t.scalar) * t.left; break;
    }
  }
  return out;
}

Mat AffineExpr::unit_q(Index r, Index c) const {
  Mat out = Mat::Zero(rows(), cols());
  for (const auto& t : terms_) {
    if (t.kind == Term::Kind::kQ) out.noalias() += t.left.col(r) * t.right.row(c);
    if (t.kind == Term::Kind::kQt) out.noalias() += t.left.col(c) * t.right.row(r);
  }
  return out;
}

Mat AffineExpr::unit_scalar(Index j) const {
  Mat out = Mat::Zero(rows(), cols());
  for (const auto& t : terms_)
    if (t.kind == Term::Kind::kScalar && t.scalar == j) out += t.left;
  return out;
}

AffineExpr AffineExpr::transposed() const {
  AffineExpr e = AffineExpr::constant(constant_.transpose());
  for (const auto& t : terms_) {
    switch (t.kind) {
      case Term::Kind::kQ:
        e.terms_.push_back({Term::Kind::kQt, t.right.transpose(), t.left.transpose(), 0});
        break;
      case Term::Kind::kQt:
        e.terms_.push_back({Term::Kind::kQ, t.right.transpose(), t.left.transpose(), 0});
        break;
      case Term::Kind::kScalar:
        e.terms_.push_back({Term::Kind::kScalar, t.left.transpose(), Mat(), t.scalar});
        break;
    }
  }
  return e;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& o) {
  if (o.rows() != rows() || o.cols() != cols())
    throw std::invalid_argument("AffineExpr: shape mismatch");
  constant_ += o.constant_;
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  return *this;
}

AffineExpr& AffineExpr::operator*=(double k) {
  constant_ *= k;
  for (auto& t : terms_) t.left *= k;
  return *this;
}

AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a += -1.0 * b; }
AffineExpr operator*(double k, AffineExpr a) { return a *= k; }

LmiBlock LmiBlock::single(AffineExpr e) {
  LmiBlock b;
  b.upper.push_back({std::move(e)});
  return b;
}

LmiBlock LmiBlock::two_by_two(AffineExpr e11, AffineExpr e12, AffineExpr e22) {
  LmiBlock b;
  b.upper.push_back({std::move(e11), std::move(e12)});
  b.upper.push_back({std::move(e22)});
  return b;
}

Index LmiBlock::size() const {
  Index n = 0;
  for (const auto& row : upper) n += row.front().rows();
  return n;
}

namespace {

// Assemble a block from per-expression matrices produced by `f`.
template <typename F>
Mat assemble_with(const LmiBlock& blk, F&& f) {
  const Index nb = blk.size();
  Mat out(nb, nb);
  Index r0 = 0;
  for (size_t i = 0; i < blk.upper.size(); ++i) {
    const Index ri = blk.upper[i].front().rows();
    Index c0 = r0;
    for (size_t j = 0; j < blk.upper[i].size(); ++j) {
      const AffineExpr& e = blk.upper[i][j];
      Mat m = f(e);
      if (j == 0) {
        out.block(r0, c0, ri, ri) = 0.5 * (m + m.transpose());
      } else {
        out.block(r0, c0, m.rows(), m.cols()) = m;
        out.block(c0, r0, m.cols(), m.rows()) = m.transpose();
      }
      c0 += m.cols();
    }
    r0 += ri;
  }
  return out;
}

}  // namespace

Mat LmiBlock::assemble(const Eigen::Ref<const Mat>& q, const Eigen::Ref<const Vec>& s) const {
  return assemble_with(*this, [&](const AffineExpr& e) { return e.eval(q, s); });
}

// ---------------------------------------------------------------- engine

namespace {

struct LinearBlock {
  Index size = 0;
  Vec c;  // svec of the constant part
  Mat a;  // svec of the linear part, one column per decision variable
};

LinearBlock linearise(const LmiBlock& blk, Index t, Index n, Index ns) {
  LinearBlock lb;
  lb.size = blk.size();
  lb.c = svec(assemble_with(blk, [](const AffineExpr& e) { return e.constant_part(); }));
  lb.a.resize(svec_size(lb.size), t * n + ns);
  for (Index c = 0; c < n; ++c)
    for (Index r = 0; r < t; ++r)
      lb.a.col(c * t + r) = svec(assemble_with(blk, [&](const AffineExpr& e) { return e.unit_q(r, c); }));
  for (Index j = 0; j < ns; ++j)
    lb.a.col(t * n + j) = svec(assemble_with(blk, [&](const AffineExpr& e) { return e.unit_scalar(j); }));
  return lb;
}

LmiBlock cap_block(Index j, double cap) {
  return LmiBlock::single(AffineExpr::constant(Mat::Constant(1, 1, cap)) -
                          AffineExpr::scalar(j, Mat::Ones(1, 1)));
}

struct Reduced {
  Vec v0;        // particular solution of the symmetry equalities
  Mat basis;     // v = v0 + basis·w
  Index dim = 0;
};

// Variables satisfying the symmetry constraints, then coordinates making the
// stacked block coefficients orthonormal.
Reduced reduce(const LmiProblem& p, const std::vector<LinearBlock>& blocks) {
  const Index nv = p.t * p.n + p.num_scalars;
  Reduced red;
  Mat null_basis = Mat::Identity(nv, nv);
  red.v0 = Vec::Zero(nv);
  Index neq = 0;
  for (const auto& e : p.symmetric) neq += e.rows() * (e.rows() - 1) / 2;
  if (neq > 0) {
    Mat eq(neq, nv);
    Vec e0(neq);
    Index row = 0;
    for (const auto& e : p.symmetric) {
      if (e.rows() != e.cols()) throw std::invalid_argument("symmetric constraint must be square");
      const Mat ce = e.constant_part();
      std::vector<Mat> units;
      units.reserve(nv);
      for (Index c = 0; c < p.n; ++c)
        for (Index r = 0; r < p.t; ++r) units.push_back(e.unit_q(r, c));
      for (Index j = 0; j < p.num_scalars; ++j) units.push_back(e.unit_scalar(j));
      for (Index a = 0; a < e.rows(); ++a)
        for (Index b = a + 1; b < e.rows(); ++b) {
          for (Index v = 0; v < nv; ++v) eq(row, v) = units[v](a, b) - units[v](b, a);
          e0(row) = ce(a, b) - ce(b, a);
          ++row;
        }
    }
    Eigen::BDCSVD<Mat> svd(eq, Eigen::ComputeFullV | Eigen::ComputeThinU);
    const Vec& s = svd.singularValues();
    const double cut = s.size() && s(0) > 0 ? 1e-12 * s(0) * std::max(neq, nv) : 0.0;
    Index rank = 0;
    while (rank < s.size() && s(rank) > cut) ++rank;
    if (rank > 0) {
      Vec coef = svd.matrixU().leftCols(rank).transpose() * (-e0);
      red.v0 = svd.matrixV().leftCols(rank) * s.head(rank).cwiseInverse().asDiagonal() * coef;
    }
    null_basis = svd.matrixV().rightCols(nv - rank);
  }
  Index rows = 0;
  for (const auto& b : blocks) rows += b.a.rows();
  Mat stacked(rows, null_basis.cols());
  rows = 0;
  for (const auto& b : blocks) {
    stacked.middleRows(rows, b.a.rows()) = b.a * null_basis;
    rows += b.a.rows();
  }
  Eigen::BDCSVD<Mat> svd(stacked, Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  const double cut = s.size() && s(0) > 0 ? 1e-12 * s(0) : 0.0;
  Index r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  red.dim = r;
  red.basis = null_basis * svd.matrixV().leftCols(r) * s.head(r).cwiseInverse().asDiagonal();
  return red;
}

struct Assembled {
  SdpProblem sdp;
  Index num_w = 0;
};

// Stack blocks for the engine: S = c + a·v0 + a·basis·w (− t·I on strict
// blocks when `with_t`), plus optional extra constant shift on strict blocks.
Assembled build_sdp(const std::vector<LinearBlock>& blocks, const std::vector<bool>& is_strict,
                    const Reduced& red, bool with_t, double strict_shift, double t_cap,
                    double ball_radius) {
  Assembled as;
  as.num_w = red.dim;
  const Index d = red.dim + (with_t ? 1 : 0);
  std::vector<Index> sizes;
  Index rows = 0;
  for (const auto& b : blocks) {
    sizes.push_back(b.size);
    rows += b.a.rows();
  }
  const bool ball = ball_radius > 0.0;
  if (ball) {
    sizes.push_back(red.dim + 1);
    rows += svec_size(red.dim + 1);
  }
  if (with_t) {
    sizes.push_back(1);
    rows += 1;
  }
  as.sdp.block_sizes = sizes;
  as.sdp.a = Mat::Zero(rows, d);
  as.sdp.c = Vec::Zero(rows);
  as.sdp.b = Vec::Zero(d);
  Index off = 0;
  for (size_t k = 0; k < blocks.size(); ++k) {
    const auto& b = blocks[k];
    const Index len = b.a.rows();
    Vec c = b.c + b.a * red.v0;
    const Vec eye = svec(Mat::Identity(b.size, b.size));
    if (is_strict[k]) c -= strict_shift * eye;
    as.sdp.c.segment(off, len) = c;
    as.sdp.a.block(off, 0, len, red.dim) = -(b.a * red.basis);
    if (with_t && is_strict[k]) as.sdp.a.block(off, red.dim, len, 1) = eye;
    off += len;
  }
  if (ball) {
    const Index m = red.dim + 1;
    as.sdp.c.segment(off, svec_size(m)) = svec(ball_radius * Mat::Identity(m, m));
    for (Index i = 0; i < red.dim; ++i) {
      Mat e = Mat::Zero(m, m);
      e(0, i + 1) = e(i + 1, 0) = -1.0;
      as.sdp.a.block(off, i, svec_size(m), 1) = svec(e);
    }
    off += svec_size(m);
  }
  if (with_t) {
    as.sdp.c(off) = t_cap;
    as.sdp.a(off, red.dim) = 1.0;
    as.sdp.b(red.dim) = 1.0;
  }
  return as;
}

void split(const LmiProblem& p, const Reduced& red, const Vec& w, Mat& q, Vec& s) {
  const Vec v = red.v0 + red.basis * w;
  q = unvec(v.head(p.t * p.n), p.t, p.n);
  s = v.tail(p.num_scalars);
}

}  // namespace

FeasibilityReport recheck(const LmiProblem& p, const Eigen::Ref<const Mat>& q,
                          const Eigen::Ref<const Vec>& s) {
  FeasibilityReport r;
  r.q = q;
  r.scalars = s;
  r.min_eig_achieved = std::numeric_limits<double>::infinity();
  for (const auto& b : p.strict) r.min_eig_achieved = std::min(r.min_eig_achieved, psd_min_eig(b.assemble(q, s)));
  r.nonstrict_min_eig = std::numeric_limits<double>::infinity();
  bool nonstrict_ok = true;
  for (const auto& b : p.nonstrict) {
    const Mat m = b.assemble(q, s);
    const double e = psd_min_eig(m);
    r.nonstrict_min_eig = std::min(r.nonstrict_min_eig, e);
    if (e < -1e-9 * (1.0 + m.norm())) nonstrict_ok = false;
  }
  for (const auto& [j, cap] : p.scalar_caps)
    if (s(j) > cap * (1.0 + 1e-9)) nonstrict_ok = false;
  r.symmetry_residual = 0.0;
  bool sym_ok = true;
  for (const auto& e : p.symmetric) {
    const Mat m = e.eval(q, s);
    const double res = (m - m.transpose()).norm();
    r.symmetry_residual = std::max(r.symmetry_residual, res);
    if (res > 1e-9 * (1.0 + m.norm())) sym_ok = false;
  }
  r.feasible = r.min_eig_achieved >= p.margin && nonstrict_ok && sym_ok && q.allFinite();
  return r;
}

FeasibilityReport solve_feasibility(const LmiProblem& p) {
  if (p.margin <= 0.0) throw std::invalid_argument("solve_feasibility: margin must be positive");
  const Index ns = p.num_scalars;
  std::vector<LinearBlock> blocks;
  std::vector<bool> is_strict;
  for (const auto& b : p.strict) {
    blocks.push_back(linearise(b, p.t, p.n, ns));
    is_strict.push_back(true);
  }
  for (const auto& b : p.nonstrict) {
    blocks.push_back(linearise(b, p.t, p.n, ns));
    is_strict.push_back(false);
  }
  for (const auto& [j, cap] : p.scalar_caps) {
    blocks.push_back(linearise(cap_block(j, cap), p.t, p.n, ns));
    is_strict.push_back(false);
  }
  const Reduced red = reduce(p, blocks);

  // Without any bounding constraint the optimal face can be unbounded; a wide
  // ball on the (orthonormal) coordinates keeps the engine well posed.
  double ball = 0.0;
  if (p.nonstrict.empty() && p.scalar_caps.empty()) {
    double cmax = 1.0;
    for (const auto& b : blocks) cmax = std::max(cmax, b.c.norm());
    ball = 1e4 * cmax;
  }

  const Assembled one = build_sdp(blocks, is_strict, red, true, 0.0, p.margin_cap, ball);
  const SdpSolution sol1 = solve_sdp(one.sdp);
  Mat q;
  Vec s;
  split(p, red, sol1.y.head(red.dim), q, s);
  FeasibilityReport best = recheck(p, q, s);
  best.phase_one_margin = sol1.y(red.dim);
  best.iterations = sol1.iterations;

  if (p.minimise_scalar && best.feasible) {
    const double t1 = best.min_eig_achieved;
    const double shift = std::max(p.margin, 0.5 * t1);
    if (t1 > 1.5 * p.margin) {
      Assembled two = build_sdp(blocks, is_strict, red, false, shift, 0.0, ball);
      const Index j = p.t * p.n + *p.minimise_scalar;
      two.sdp.b = -red.basis.row(j).transpose();
      const SdpSolution sol2 = solve_sdp(two.sdp);
      Mat q2;
      Vec s2;
      split(p, red, sol2.y, q2, s2);
      FeasibilityReport r2 = recheck(p, q2, s2);
      r2.phase_one_margin = best.phase_one_margin;
      r2.iterations = best.iterations + sol2.iterations;
      if (r2.feasible) best = r2;
    }
  }
  return best;
}

// ---------------------------------------------------------------- templates

double data_scale(const DataBatch& batch) {
  return std::max({1.0, norm2(batch.x_minus), norm2(batch.x_plus)});
}

LmiProblem stabilising_template(const DataBatch& batch, double margin) {
  const Index t = batch.t(), n = batch.n();
  LmiProblem p;
  p.t = t;
  p.n = n;
  p.margin = margin;
  const Mat eye_n = Mat::Identity(n, n);
  p.strict.push_back(LmiBlock::two_by_two(AffineExpr::q(batch.x_minus, eye_n),
                                          AffineExpr::q(batch.x_plus, eye_n),
                                          AffineExpr::q(batch.x_minus, eye_n)));
  p.symmetric.push_back(AffineExpr::q(batch.x_minus, eye_n));
  return p;
}

LmiProblem robust_template(const DataBatch& batch, double alpha, double margin) {
  const Index t = batch.t(), n = batch.n();
  LmiProblem p;
  p.t = t;
  p.n = n;
  p.margin = margin;
  const Mat eye_n = Mat::Identity(n, n);
  const AffineExpr xq = AffineExpr::q(batch.x_minus, eye_n);
  p.strict.push_back(LmiBlock::two_by_two(
      xq - AffineExpr::constant(alpha * batch.x_plus * batch.x_plus.transpose()),
      AffineExpr::q(batch.x_plus, eye_n), xq));
  p.strict.push_back(LmiBlock::two_by_two(AffineExpr::constant(Mat::Identity(t, t)),
                                          AffineExpr::q(Mat::Identity(t, t), eye_n), xq));
  p.symmetric.push_back(xq);
  return p;
}

namespace {

GainCertificate extract_gain(const DataBatch& batch, const Mat& q) {
  GainCertificate g;
  g.q = q;
  Mat p = batch.x_minus * q;
  p = 0.5 * (p + p.transpose());
  const Vec sv = singular_values(p);
  g.inverted_conditioning = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1)
                                                  : std::numeric_limits<double>::infinity();
  if (!(g.inverted_conditioning <= 1e12))
    throw LmiInfeasible("X₋Q is numerically singular (condition number " +
                        std::to_string(g.inverted_conditioning) + ")");
  Eigen::LDLT<Mat> ldlt(p);
  g.g_k = ldlt.solve(q.transpose()).transpose();  // Q P⁻¹ with P symmetric
  g.k = batch.u_minus * g.g_k;
  return g;
}

}  // namespace

namespace {

// Bound on ‖Q‖ keeping the search compact, `factor` times the inverse of the
// smallest data singular value.
double q_bound(const DataBatch& batch, double factor = 1e8) {
  const Vec sv = singular_values(batch.stacked());
  double smin = 0.0;
  for (Index i = sv.size() - 1; i >= 0; --i)
    if (sv(i) > 1e-12 * sv(0)) {
      smin = sv(i);
      break;
    }
  return factor * std::max(1.0, smin > 0 ? 1.0 / smin : 1.0);
}

// [[cap·I, Q], [Qᵀ, cap·I]] ⪰ 0, i.e. ‖Q‖₂ ≤ cap.
LmiBlock norm_cap_block(Index t, Index n, double cap) {
  return LmiBlock::two_by_two(AffineExpr::constant(cap * Mat::Identity(t, t)),
                              AffineExpr::q(Mat::Identity(t, t), Mat::Identity(n, n)),
                              AffineExpr::constant(cap * Mat::Identity(n, n)));
}

}  // namespace

GainCertificate design_gain(const DataBatch& batch, const GainDesignOptions& opt) {
  const Index t = batch.t(), n = batch.n();
  const double eps = opt.margin_rel * data_scale(batch);
  const LmiProblem bare = stabilising_template(batch, eps);
  const Mat eye_n = Mat::Identity(n, n), eye_t = Mat::Identity(t, t);

  const double q_cap = q_bound(batch);

  double best_margin = -std::numeric_limits<double>::infinity();
  for (double level : opt.decay_levels) {
    LmiProblem p;
    p.t = t;
    p.n = n;
    p.num_scalars = 1;
    p.margin = eps;
    const AffineExpr xq = AffineExpr::q(batch.x_minus, eye_n);
    p.strict.push_back(LmiBlock::two_by_two(level * xq, AffineExpr::q(batch.x_plus, eye_n), level * xq));
    p.strict.push_back(LmiBlock::single(xq - AffineExpr::constant(eye_n)));
    // ‖U₋Q‖ ≤ γ bounds ‖K‖ because X₋Q ⪰ I; ‖Q‖ ≤ q_cap keeps the set compact.
    const Index m = batch.m();
    p.nonstrict.push_back(LmiBlock::two_by_two(AffineExpr::scalar(0, Mat::Identity(m, m)),
                                               AffineExpr::q(batch.u_minus, eye_n),
                                               AffineExpr::scalar(0, eye_n)));
    p.nonstrict.push_back(norm_cap_block(t, n, q_cap));
    p.scalar_caps.push_back({0, q_cap});
    p.symmetric.push_back(xq);
    if (opt.minimise_gain) p.minimise_scalar = 0;
    const FeasibilityReport rep = solve_feasibility(p);
    if (!rep.feasible) {
      best_margin = std::max(best_margin, rep.min_eig_achieved);
      continue;
    }
    const FeasibilityReport chk = recheck(bare, rep.q, Vec());
    best_margin = std::max(best_margin, chk.min_eig_achieved);
    if (!chk.feasible) continue;
    GainCertificate g = extract_gain(batch, rep.q);
    g.margin = chk.min_eig_achieved;
    g.decay = level;
    return g;
  }
  throw LmiInfeasible("data not informative for stabilisation (best margin " +
                      std::to_string(best_margin) + ")");
}

GainCertificate design_gain_robust(const DataBatch& batch_bar, double alpha, double margin_rel) {
  if (!(alpha > 0.0)) throw std::invalid_argument("design_gain_robust: alpha must be positive");
  LmiProblem p = robust_template(batch_bar, alpha, margin_rel * data_scale(batch_bar));
  // Tighter than the nominal cap: the constant αX̄₊X̄₊ᵀ term makes this problem
  // badly scaled once the cap dwarfs it.
  p.nonstrict.push_back(norm_cap_block(batch_bar.t(), batch_bar.n(), q_bound(batch_bar, 1e3)));
  const FeasibilityReport rep = solve_feasibility(p);
  if (!rep.feasible)
    throw LmiInfeasible("robust design unavailable at alpha " + std::to_string(alpha));
  GainCertificate g = extract_gain(batch_bar, rep.q);
  g.margin = rep.min_eig_achieved;
  g.alpha = alpha;
  return g;
}

SnrReport snr_check(const Eigen::Ref<const Mat>& r_minus, const Eigen::Ref<const Mat>& x_plus_bar,
                    double alpha) {
  const double k = alpha * alpha / (2.0 * (2.0 + alpha));
  SnrReport r;
  r.slack = psd_min_eig(k * x_plus_bar * x_plus_bar.transpose() - r_minus * r_minus.transpose());
  r.holds = r.slack >= 0.0;
  return r;
}

std::vector<double> alpha_grid(int points, double lo, double hi) {
  std::vector<double> g;
  if (points == 1) return {lo};
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < points; ++i) g.push_back(std::pow(10.0, a + (b - a) * i / (points - 1)));
  return g;
}

namespace {

// Largest index in [lo, grid.size()) whose robust LMI is feasible, given that
// grid[lo] is. Feasibility only shrinks as α grows, so bisection suffices.
std::size_t bisect_feasible(const DataBatch& b, const std::vector<double>& grid, std::size_t lo,
                            GainCertificate& gain) {
  std::size_t hi = grid.size();
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    try {
      gain = design_gain_robust(b, grid[mid]);
      lo = mid;
    } catch (const LmiInfeasible&) {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace

AlphaScan alpha_search(const Eigen::Ref<const Mat>& r_minus, const Eigen::Ref<const Mat>& x_plus_bar,
                       const DataBatch& batch_bar, const std::vector<double>& grid) {
  if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("alpha_search: grid must ascend");
  // The SNR condition holds on an upper interval of α, robust feasibility on a
  // lower one; the admissible set is their intersection.
  AlphaScan scan;
  std::size_t first = 0;
  while (first < grid.size() && !snr_check(r_minus, x_plus_bar, grid[first]).holds) ++first;
  if (first == grid.size()) return scan;
  try {
    scan.gain = design_gain_robust(batch_bar, grid[first]);
  } catch (const LmiInfeasible&) {
    return scan;
  }
  scan.found = true;
  scan.alpha = grid[first];
  GainCertificate scratch;
  const std::size_t last = bisect_feasible(batch_bar, grid, first, scratch);
  scan.admissible.assign(grid.begin() + static_cast<std::ptrdiff_t>(first),
                         grid.begin() + static_cast<std::ptrdiff_t>(last) + 1);
  return scan;
}

std::optional<GainCertificate> largest_feasible_alpha(const DataBatch& batch_bar,
                                                      const std::vector<double>& grid) {
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()))
    throw std::invalid_argument("largest_feasible_alpha: grid must be non-empty and ascending");
  GainCertificate g;
  try {
    g = design_gain_robust(batch_bar, grid.front());
  } catch (const LmiInfeasible&) {
    return std::nullopt;
  }
  bisect_feasible(batch_bar, grid, 0, g);
  return g;
}

}  // namespace forwardctl
