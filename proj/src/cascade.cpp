#include "forwardctl/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace forwardctl {

namespace {

Mat vstack(const Mat& a, const Mat& b) {
  if (a.size() == 0) return b;
  Mat out(a.rows() + b.rows(), b.cols());
  out << a, b;
  return out;
}

Mat hstack(const Mat& a, const Mat& b) {
  Mat out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

GainCertificate gain_or_fail(const DataBatch& b, const GainDesignOptions& opt, Index stage) {
  try {
    return design_gain(b, opt);
  } catch (const LmiInfeasible& e) {
    throw DesignFailure(DesignFailure::Kind::kLmi, stage, e.what());
  }
}

SylvesterCertificate sylvester_or_fail(const DataBatch& b, const Mat& a1, const Mat& c1, Index stage) {
  try {
    return solve_from_data(b, a1, c1);
  } catch (const SylvesterInfeasible& e) {
    throw DesignFailure(DesignFailure::Kind::kSylvester, stage, e.what());
  }
}

void require_rank(const RankReport& r, Index stage, const char* what) {
  if (!r.ok)
    throw DesignFailure(DesignFailure::Kind::kRank, stage,
                        std::string(what) + " has rank " + std::to_string(r.rank) + ", need " +
                            std::to_string(r.required));
}

// Model-based gain: the stabilisation template on exact "data" [X₋; U₋] = I,
// X₊ = [A B].
Mat model_gain(const Mat& a, const Mat& b) {
  const Index n = a.rows(), m = b.cols();
  DataBatch d;
  d.x_minus = Mat::Zero(n, n + m);
  d.x_minus.leftCols(n).setIdentity();
  d.u_minus = Mat::Zero(m, n + m);
  d.u_minus.rightCols(m).setIdentity();
  d.x_plus = hstack(a, b);
  return design_gain(d).k;
}

Mat cascade_a(const CascadeSystem& c) {
  const auto dims = c.state_dims();
  const Index n = std::accumulate(dims.begin(), dims.end(), Index(0));
  Mat a = Mat::Zero(n, n);
  Index off = 0;
  for (Index i = 0; i < c.size(); ++i) {
    a.block(off, off, dims[i], dims[i]) = c.stages[i].a;
    if (i > 0) a.block(off, off - dims[i - 1], dims[i], dims[i - 1]) = c.stages[i].b;
    off += dims[i];
  }
  return a;
}

Mat cascade_b(const CascadeSystem& c) {
  const auto dims = c.state_dims();
  const Index n = std::accumulate(dims.begin(), dims.end(), Index(0));
  Mat b = Mat::Zero(n, c.input_dim());
  b.topRows(dims[0]) = c.stages[0].b;
  return b;
}

}  // namespace

// ---------------------------------------------------------------- controller

Index ForwardingController::total_dim() const {
  return std::accumulate(stage_dims.begin(), stage_dims.end(), Index(0));
}

Mat ForwardingController::coordinate_map() const {
  const Index n = total_dim();
  Mat t = Mat::Zero(n, n);
  Index off = 0;
  for (size_t i = 0; i < stage_dims.size(); ++i) {
    const Index ni = stage_dims[i];
    t.block(off, off, ni, ni).setIdentity();
    if (i > 0) t.middleRows(off, ni) -= transforms[i - 1] * t.topRows(off);
    off += ni;
  }
  return t;
}

Mat ForwardingController::feedback() const {
  Mat n_all(input_dim, total_dim());
  Index off = 0;
  for (size_t i = 0; i < gains.size(); ++i) {
    n_all.middleCols(off, stage_dims[i]) = gains[i];
    off += stage_dims[i];
  }
  return n_all * coordinate_map();
}

// ---------------------------------------------------------------- noise-free designs

std::vector<DataBatch> cascade_batches(const std::vector<Trajectory>& traj,
                                       const Eigen::Ref<const Mat>& u1, Index t) {
  std::vector<DataBatch> out;
  for (size_t i = 0; i < traj.size(); ++i)
    out.push_back(build_batch(traj[i].x_meas, i == 0 ? Mat(u1) : Mat(traj[i - 1].x_meas), t));
  return out;
}

DataBatch zeta_batch(const DataBatch& batch1, const DataBatch& batch2,
                     const Eigen::Ref<const Mat>& n1, const Eigen::Ref<const Mat>& upsilon) {
  DataBatch z;
  z.x_minus = batch2.x_minus - upsilon * batch1.x_minus;
  z.x_plus = batch2.x_plus - upsilon * batch1.x_plus;
  z.u_minus = batch1.u_minus - n1 * batch1.x_minus;
  return z;
}

ForwardingDesign design_ncascade(const std::vector<DataBatch>& batches, const GainDesignOptions& opt) {
  if (batches.size() < 2) throw std::invalid_argument("design_ncascade: need at least two stages");
  const Index nstages = static_cast<Index>(batches.size());
  const DataBatch& b1 = batches.front();
  ForwardingDesign out;
  out.controller.input_dim = b1.m();
  for (const auto& b : batches) out.controller.stage_dims.push_back(b.n());

  // stage 1: N₁, then [𝒜₁ ℬ₁] = X₁₊[G_{N₁} G_{B₁}]
  StageRecord rec1;
  rec1.stage = 1;
  rec1.ranks.push_back(rank_check(b1));
  require_rank(rec1.ranks.back(), 1, "[X₁₋; U₁₋]");
  const GainCertificate g1 = gain_or_fail(b1, opt, 1);
  const Index n1 = b1.n(), n0 = b1.m();
  Mat target = Mat::Zero(n1 + n0, n0);
  target.bottomRows(n0).setIdentity();
  const MinNormSolution gb = min_norm_solve(b1.stacked(), target);
  Mat a_i = b1.x_plus * g1.g_k;
  Mat b_i = b1.x_plus * gb.x;
  out.controller.gains.push_back(g1.k);
  out.a_data.push_back(a_i);
  out.b_data.push_back(b_i);
  rec1.gain = g1;
  rec1.z_minus_norm = b1.x_minus.norm();
  rec1.z_plus_norm = b1.x_plus.norm();
  rec1.v_minus_norm = b1.u_minus.norm();
  out.trace.stages.push_back(rec1);

  // Z_{1:i−1,±} and Vᵢ are carried forward instead of recomputed.
  Mat z_stack_m = b1.x_minus, z_stack_p = b1.x_plus;
  Mat v = b1.u_minus - g1.k * b1.x_minus;
  Mat y_prev;
  for (Index i = 2; i <= nstages; ++i) {
    const DataBatch& bi = batches[i - 1];
    StageRecord rec;
    rec.stage = i;
    rec.ranks.push_back(rank_check_pair(bi.x_minus, bi.u_minus));
    require_rank(rec.ranks.back(), i, "[Xᵢ₋; Xᵢ₋₁,₋]");
    const Index nprev = bi.m();
    const Mat c1 = i == 2 ? Mat(Mat::Identity(nprev, nprev)) : hstack(y_prev, Mat::Identity(nprev, nprev));
    SylvesterCertificate sc = sylvester_or_fail(bi, a_i, c1, i);
    const Mat y = sc.theta;
    rec.sylvester = std::move(sc);

    DataBatch zb;
    zb.x_minus = bi.x_minus - y * z_stack_m;
    zb.x_plus = bi.x_plus - y * z_stack_p;
    zb.u_minus = v;
    rec.z_minus_norm = zb.x_minus.norm();
    rec.z_plus_norm = zb.x_plus.norm();
    rec.v_minus_norm = zb.u_minus.norm();
    rec.ranks.push_back(rank_check(zb));
    require_rank(rec.ranks.back(), i, "[Zᵢ₋; Vᵢ₋]");
    const GainCertificate gi = gain_or_fail(zb, opt, i);
    rec.gain = gi;

    const Index ni = bi.n(), nacc = a_i.rows();
    Mat a_next = Mat::Zero(nacc + ni, nacc + ni);
    a_next.topLeftCorner(nacc, nacc) = a_i;
    a_next.topRightCorner(nacc, ni) = b_i * gi.k;
    a_next.bottomRightCorner(ni, ni) = zb.x_plus * gi.g_k;
    b_i = vstack(b_i, -y * b_i);
    a_i = std::move(a_next);

    out.controller.gains.push_back(gi.k);
    out.controller.transforms.push_back(y);
    out.a_data.push_back(a_i);
    out.b_data.push_back(b_i);
    out.trace.stages.push_back(std::move(rec));

    z_stack_m = vstack(z_stack_m, zb.x_minus);
    z_stack_p = vstack(z_stack_p, zb.x_plus);
    v -= gi.k * zb.x_minus;
    y_prev = y;
  }
  return out;
}

ForwardingDesign design_2cascade(const DataBatch& batch1, const DataBatch& batch2,
                                 const GainDesignOptions& opt) {
  return design_ncascade({batch1, batch2}, opt);
}

// ---------------------------------------------------------------- noisy 2-cascade

NoisyDesign design_2cascade_noisy(const DataBatch& b1, const DataBatch& b2, double alpha1,
                                  double alpha2) {
  NoisyDesign out;
  require_rank(rank_check(b1), 1, "[X̄₁₋; U₁₋]");
  try {
    out.gain1 = design_gain_robust(b1, alpha1);
  } catch (const LmiInfeasible& e) {
    throw DesignFailure(DesignFailure::Kind::kLmi, 1, e.what());
  }
  const Mat a1_bar = b1.x_plus * out.gain1.g_k;
  const Index n1 = b1.n();
  require_rank(rank_check_pair(b2.x_minus, b2.u_minus), 2, "[X̄₂₋; X̄₁₋]");
  try {
    out.upsilon = solve_empirical_noisy(b2, a1_bar, Mat::Identity(n1, n1));
  } catch (const SylvesterInfeasible& e) {
    throw DesignFailure(DesignFailure::Kind::kSylvester, 2, e.what());
  }
  out.zeta = zeta_batch(b1, b2, out.gain1.k, out.upsilon.theta);
  require_rank(rank_check(out.zeta), 2, "[Ẑ₋; V₋]");
  try {
    out.gain2 = design_gain_robust(out.zeta, alpha2);
  } catch (const LmiInfeasible& e) {
    throw DesignFailure(DesignFailure::Kind::kLmi, 2, e.what());
  }

  ForwardingDesign& d = out.design;
  d.controller.input_dim = b1.m();
  d.controller.stage_dims = {b1.n(), b2.n()};
  d.controller.gains = {out.gain1.k, out.gain2.k};
  d.controller.transforms = {out.upsilon.theta};
  StageRecord r1, r2;
  r1.stage = 1;
  r1.gain = out.gain1;
  r2.stage = 2;
  r2.gain = out.gain2;
  r2.sylvester = out.upsilon;
  r2.z_minus_norm = out.zeta.x_minus.norm();
  r2.z_plus_norm = out.zeta.x_plus.norm();
  r2.v_minus_norm = out.zeta.u_minus.norm();
  d.trace.stages = {r1, r2};
  d.a_data = {a1_bar};
  return out;
}

Mat build_r_zeta(const Eigen::Ref<const Mat>& r2, const Eigen::Ref<const Mat>& x2bar,
                 const Eigen::Ref<const Mat>& g, const Eigen::Ref<const Mat>& r1,
                 const Eigen::Ref<const Mat>& g_n1, const Eigen::Ref<const Mat>& x1bar) {
  if (r2.cols() != g.rows() || x2bar.cols() != g.rows() || r1.rows() != g.cols() ||
      g_n1.cols() != x1bar.rows())
    throw std::invalid_argument("build_r_zeta: dimension mismatch");
  return r2 - x2bar * g * r1 - r2 * g * x1bar + x2bar * g * r1 * g_n1 * x1bar;
}

// ---------------------------------------------------------------- closed loops

Mat closed_loop_state_matrix(const CascadeSystem& truth, const ForwardingController& ctrl) {
  return cascade_a(truth) + cascade_b(truth) * ctrl.feedback();
}

ClosedLoopModel closed_loop_assemble(const CascadeSystem& truth, const ForwardingController& ctrl,
                                     const std::optional<Mat>& delta_ups) {
  ClosedLoopModel cl;
  cl.block_dims = ctrl.stage_dims;
  const Mat t = ctrl.coordinate_map();
  cl.b_noise = -t;
  if (delta_ups) {
    if (truth.size() != 2) throw std::invalid_argument("closed_loop_assemble: ΔΥ form needs two stages");
    const auto& s1 = truth.stages[0];
    const auto& s2 = truth.stages[1];
    const Index n1 = s1.n(), n2 = s2.n();
    const Mat a11 = s1.a + s1.b * ctrl.gains[0];
    cl.a_cl.resize(n1 + n2, n1 + n2);
    cl.a_cl.topLeftCorner(n1, n1) = a11;
    cl.a_cl.topRightCorner(n1, n2) = s1.b * ctrl.gains[1];
    cl.a_cl.bottomLeftCorner(n2, n1) = *delta_ups * a11 - s2.a * *delta_ups;
    cl.a_cl.bottomRightCorner(n2, n2) = s2.a - ctrl.transforms[0] * s1.b * ctrl.gains[1];
    return cl;
  }
  Eigen::PartialPivLU<Mat> lu(t);
  cl.a_cl = t * closed_loop_state_matrix(truth, ctrl) * lu.inverse();
  return cl;
}

IssCertificate small_gain_check(const ClosedLoopModel& cl) {
  if (cl.block_dims.size() < 2) throw std::invalid_argument("small_gain_check: need two blocks");
  const Index n1 = cl.block_dims[0];
  const Index n2 = cl.a_cl.rows() - n1;
  const Mat a11 = cl.a_cl.topLeftCorner(n1, n1);
  const Mat a22 = cl.a_cl.bottomRightCorner(n2, n2);
  if (!is_schur(a11, 0.0) || !is_schur(a22, 0.0))
    throw std::domain_error("small_gain_check: diagonal block is not Schur");
  IssCertificate c;
  c.hinf_11 = resolvent_hinf_norm(a11).value;
  c.hinf_22 = resolvent_hinf_norm(a22).value;
  c.smallgain_lhs = norm2(cl.a_cl.bottomLeftCorner(n2, n1)) * norm2(cl.a_cl.topRightCorner(n1, n2)) *
                    c.hinf_11 * c.hinf_22;
  c.smallgain_rhs = 1.0;
  c.holds = c.smallgain_lhs < c.smallgain_rhs;
  c.schur = is_schur(cl.a_cl, 0.0);
  return c;
}

IssCertificate iss_certificate(const ClosedLoopModel& cl) {
  if (!is_schur(cl.a_cl, 0.0)) throw std::domain_error("iss_certificate: closed loop is not Schur");
  IssCertificate c;
  try {
    c = small_gain_check(cl);
  } catch (const std::domain_error&) {
    c.holds = false;
    c.smallgain_lhs = std::numeric_limits<double>::infinity();
  }
  const DecayEnvelope env = decay_envelope(cl.a_cl);
  c.c = env.c;
  c.p = env.p;
  c.b_norm = norm2(cl.b_noise);
  c.gamma_gain = c.c * c.b_norm / (1.0 - c.p);
  c.schur = true;
  return c;
}

NoisyClosedLoopRun simulate_noisy_closed_loop(const CascadeSystem& truth, const ForwardingController& ctrl,
                                              const Eigen::Ref<const Vec>& x1_0,
                                              const Eigen::Ref<const Vec>& x2_0, Index steps,
                                              const NoiseSpec& noise) {
  if (truth.size() != 2) throw std::invalid_argument("simulate_noisy_closed_loop: two stages expected");
  const auto& s1 = truth.stages[0];
  const auto& s2 = truth.stages[1];
  const Index n1 = s1.n(), n2 = s2.n();
  NoisyClosedLoopRun run;
  std::mt19937_64 gen(noise.seed);
  auto draw = [&](Index r, Index c, double bound) {
    Mat m = Mat::Zero(r, c);
    if (bound <= 0.0) return m;
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < r; ++i) m(i, j) = dist(gen);
    return m;
  };
  run.dx1 = draw(n1, steps + 1, noise.measurement_bound);
  run.dx2 = draw(n2, steps + 1, noise.measurement_bound);
  run.d1 = draw(n1, steps, noise.process_bound);
  run.d2 = draw(n2, steps, noise.process_bound);
  run.x1.resize(n1, steps + 1);
  run.x2.resize(n2, steps + 1);
  run.x1.col(0) = x1_0;
  run.x2.col(0) = x2_0;
  const Mat f = ctrl.feedback();
  for (Index k = 0; k < steps; ++k) {
    Vec xbar(n1 + n2);
    xbar << run.x1.col(k) + run.dx1.col(k), run.x2.col(k) + run.dx2.col(k);
    const Vec u = f * xbar;
    run.x1.col(k + 1) = s1.a * run.x1.col(k) + s1.b * u + run.d1.col(k);
    run.x2.col(k + 1) = s2.a * run.x2.col(k) + s2.b * run.x1.col(k) + run.d2.col(k);
  }
  return run;
}

IssVerification iss_verify(const NoisyClosedLoopRun& run, const CascadeSystem& truth,
                           const ForwardingController& ctrl, const IssCertificate& cert,
                           MeasurementTerm term) {
  if (run.dx1.size() == 0 || run.dx2.size() == 0)
    throw std::invalid_argument("iss_verify: missing noise ledger");
  const auto& s1 = truth.stages[0];
  const auto& s2 = truth.stages[1];
  const Mat& ups = ctrl.transforms.at(0);
  if (term == MeasurementTerm::kAsPrinted && ups.rows() != ups.cols())
    throw std::invalid_argument("iss_verify: printed measurement term needs equal stage dimensions");
  const Index steps = run.x1.cols() - 1;
  IssVerification v;
  v.holds = true;
  v.min_slack = std::numeric_limits<double>::infinity();
  auto stack = [](const Vec& a, const Vec& b) {
    Vec s(a.size() + b.size());
    s << a, b;
    return s;
  };
  const Vec xbar1_0 = run.x1.col(0) + run.dx1.col(0);
  const Vec zhat_0 = run.x2.col(0) + run.dx2.col(0) - ups * xbar1_0;
  const double s0 = stack(xbar1_0, zhat_0).norm();
  double r_sup = 0.0;
  for (Index k = 0; k <= steps; ++k) {
    if (k > 0) {
      const Index j = k - 1;
      const Vec r1 = s1.a * run.dx1.col(j) - run.dx1.col(j + 1) - run.d1.col(j);
      const Vec r2 = s2.a * run.dx2.col(j) - run.dx2.col(j + 1) + s2.b * run.dx1.col(j) - run.d2.col(j);
      r_sup = std::max(r_sup, stack(r1, r2).norm());
    }
    const Vec x1 = run.x1.col(k);
    const Vec zring = run.x2.col(k) - ups * x1;
    const double lhs = stack(x1, zring).norm();
    const Vec dx1 = run.dx1.col(k), dx2 = run.dx2.col(k);
    const double meas = term == MeasurementTerm::kDerived ? stack(dx1, dx2 - ups * dx1).norm()
                                                          : stack(dx1, dx1 - ups * dx2).norm();
    const double rhs = cert.c * std::pow(cert.p, static_cast<double>(k)) * s0 + cert.gamma_gain * r_sup + meas;
    v.lhs.push_back(lhs);
    v.rhs.push_back(rhs);
    v.min_slack = std::min(v.min_slack, rhs - lhs);
    if (lhs > rhs) v.holds = false;
  }
  return v;
}

// ---------------------------------------------------------------- oracle

OracleCascade oracle_ncascade(const CascadeSystem& truth, const std::vector<Mat>& gains) {
  if (static_cast<Index>(gains.size()) != truth.size())
    throw std::invalid_argument("oracle_ncascade: one gain per stage required");
  OracleCascade out;
  out.controller.input_dim = truth.input_dim();
  out.controller.stage_dims = truth.state_dims();
  const auto& s1 = truth.stages[0];
  Mat a_cl = s1.a + s1.b * gains[0];
  Mat b_cl = s1.b;
  out.a_cl.push_back(a_cl);
  out.b_cl.push_back(b_cl);
  Mat y_prev;
  for (Index i = 1; i < truth.size(); ++i) {
    const auto& si = truth.stages[i];
    const Index nprev = si.m();
    const Mat c1 = i == 1 ? Mat(Mat::Identity(nprev, nprev)) : hstack(y_prev, Mat::Identity(nprev, nprev));
    const Mat y = solve_oracle({a_cl, si.a, si.b, c1});
    const Mat& ni = gains[i];
    const Index nacc = a_cl.rows(), nn = si.n();
    Mat a_next = Mat::Zero(nacc + nn, nacc + nn);
    a_next.topLeftCorner(nacc, nacc) = a_cl;
    a_next.topRightCorner(nacc, nn) = b_cl * ni;
    a_next.bottomRightCorner(nn, nn) = si.a - y * b_cl * ni;
    b_cl = vstack(b_cl, -y * b_cl);
    a_cl = a_next;
    out.a_cl.push_back(a_cl);
    out.b_cl.push_back(b_cl);
    out.controller.transforms.push_back(y);
    y_prev = y;
  }
  out.controller.gains = gains;
  out.closed_loop.a_cl = a_cl;
  out.closed_loop.b_noise = -out.controller.coordinate_map();
  out.closed_loop.block_dims = out.controller.stage_dims;
  return out;
}

OracleCascade oracle_ncascade(const CascadeSystem& truth) {
  std::vector<Mat> gains;
  const auto& s1 = truth.stages[0];
  gains.push_back(model_gain(s1.a, s1.b));
  Mat a_cl = s1.a + s1.b * gains[0];
  Mat b_cl = s1.b;
  Mat y_prev;
  for (Index i = 1; i < truth.size(); ++i) {
    const auto& si = truth.stages[i];
    const Index nprev = si.m();
    const Mat c1 = i == 1 ? Mat(Mat::Identity(nprev, nprev)) : hstack(y_prev, Mat::Identity(nprev, nprev));
    const Mat y = solve_oracle({a_cl, si.a, si.b, c1});
    const Mat ni = model_gain(si.a, -y * b_cl);
    const Index nacc = a_cl.rows(), nn = si.n();
    Mat a_next = Mat::Zero(nacc + nn, nacc + nn);
    a_next.topLeftCorner(nacc, nacc) = a_cl;
    a_next.topRightCorner(nacc, nn) = b_cl * ni;
    a_next.bottomRightCorner(nn, nn) = si.a - y * b_cl * ni;
    b_cl = vstack(b_cl, -y * b_cl);
    a_cl = a_next;
    gains.push_back(ni);
    y_prev = y;
  }
  return oracle_ncascade(truth, gains);
}

Index tmin(TminMode mode, const std::vector<Index>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("tmin: need n₀ and at least one stage");
  for (Index d : dims)
    if (d < 1) throw std::invalid_argument("tmin: dimensions must be positive");
  if (mode == TminMode::kMonolithic) return std::accumulate(dims.begin(), dims.end(), Index(0));
  const Index n0 = dims[0];
  const Index nn = static_cast<Index>(dims.size()) - 1;
  Index t = dims[nn] + n0;
  for (Index i = 1; i <= nn - 1; ++i) t = std::max({t, dims[i] + n0, dims[i + 1] + dims[i]});
  if (nn == 1) t = std::max(t, dims[1] + n0);
  return t;
}

ErrorBoundReport error_bound_upsilon(const SylvesterCertificate& cert, const Eigen::Ref<const Mat>& r1,
                                     const Eigen::Ref<const Mat>& r2, const Eigen::Ref<const Mat>& g_n1,
                                     const Eigen::Ref<const Mat>& x2bar, const Eigen::Ref<const Mat>& a1_cl,
                                     const Eigen::Ref<const Mat>& a2) {
  if (spectral_gap(a1_cl, a2) <= 1e-8) throw SpectrumOverlap("error_bound_upsilon: shared spectrum");
  ErrorBoundReport r;
  r.sigma_min_term = sigma_min(sylvester_operator(a1_cl, a2));
  r.g_fro = cert.g_fro;
  r.r_norm = norm2(r2);
  r.model_mismatch_term = norm2(x2bar) * norm2(r1) * norm2(g_n1);
  r.bound = r.g_fro * (r.r_norm + r.model_mismatch_term) / r.sigma_min_term;
  return r;
}

double upsilon_error_residual(const Eigen::Ref<const Mat>& du, const Eigen::Ref<const Mat>& a1_cl,
                              const Eigen::Ref<const Mat>& a2, const Eigen::Ref<const Mat>& r2,
                              const Eigen::Ref<const Mat>& x2bar, const Eigen::Ref<const Mat>& g,
                              const Eigen::Ref<const Mat>& r1, const Eigen::Ref<const Mat>& g_n1) {
  return (a2 * du - du * a1_cl + r2 * g - x2bar * g * r1 * g_n1).norm();
}

DataBatch monolithic_batch(const std::vector<DataBatch>& batches) {
  DataBatch m;
  for (const auto& b : batches) {
    m.x_minus = vstack(m.x_minus, b.x_minus);
    m.x_plus = vstack(m.x_plus, b.x_plus);
  }
  m.u_minus = batches.front().u_minus;
  return m;
}

LtiSystem monolithic_system(const CascadeSystem& truth) {
  return LtiSystem(cascade_a(truth), cascade_b(truth));
}

GainCertificate design_monolithic(const std::vector<DataBatch>& batches, const GainDesignOptions& opt) {
  const DataBatch m = monolithic_batch(batches);
  require_rank(rank_check(m), 1, "[X₋; U₋] of the aggregated cascade");
  return gain_or_fail(m, opt, 1);
}

}  // namespace forwardctl
