#include "forwardctl/sysdata.hpp"

#include <random>
#include <stdexcept>

namespace forwardctl {

namespace {

Mat uniform_matrix(Index rows, Index cols, double bound, std::mt19937_64& gen) {
  Mat out = Mat::Zero(rows, cols);
  if (bound <= 0.0) return out;
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = dist(gen);
  return out;
}

// [A | B] of the two bundled subsystems, row-major as published.
constexpr double kStageA[4][8] = {
    {0.7024, 0.1639, -0.5026, 0.1318, 0.1121, -0.0274, 0.1904, 0.0153},
    {-0.1507, 0.9198, 0.1836, -0.0095, 0.0921, -0.0322, 0.0756, -0.0028},
    {0.4880, 0.0151, 0.7407, 0.2593, 0.0439, 0.0033, -0.0406, -0.0165},
    {-0.1897, 0.1716, -0.1388, 0.7960, -0.0485, 0.0914, 0.0949, -0.0124}};

constexpr double kStageB[4][8] = {
    {0.7426, -0.1530, 0.2112, 0.5858, -0.1977, -0.0318, -0.1206, -0.0121},
    {0.2451, 0.9275, 0.0160, -0.0617, 0.0034, -0.0272, 0.0927, 0.1312},
    {-0.3498, 0.0315, 0.9548, 0.0431, -0.3043, 0.0372, 0.1062, 0.0012},
    {-0.4782, 0.1994, -0.2835, 0.7992, -0.2300, -0.1325, -0.1445, 0.0127}};

LtiSystem from_table(const double (&t)[4][8]) {
  Mat ab(4, 8);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 8; ++j) ab(i, j) = t[i][j];
  return LtiSystem(ab.leftCols(4), ab.rightCols(4));
}

}  // namespace

LtiSystem::LtiSystem(Mat a_in, Mat b_in) : a(std::move(a_in)), b(std::move(b_in)) {
  if (a.rows() != a.cols()) throw std::invalid_argument("LtiSystem: A must be square");
  if (b.rows() != a.rows()) throw std::invalid_argument("LtiSystem: B row count must equal n");
  require_finite(a, "LtiSystem::a");
  require_finite(b, "LtiSystem::b");
}

CascadeSystem::CascadeSystem(std::vector<LtiSystem> s) : stages(std::move(s)) {
  if (stages.empty()) throw std::invalid_argument("CascadeSystem: no stages");
  for (size_t i = 1; i < stages.size(); ++i)
    if (stages[i].m() != stages[i - 1].n())
      throw std::invalid_argument("CascadeSystem: stage " + std::to_string(i + 1) +
                                  " input dimension must equal the previous state dimension");
}

std::vector<Index> CascadeSystem::state_dims() const {
  std::vector<Index> dims;
  for (const auto& s : stages) dims.push_back(s.n());
  return dims;
}

Mat DataBatch::stacked() const {
  Mat out(x_minus.rows() + u_minus.rows(), x_minus.cols());
  out << x_minus, u_minus;
  return out;
}

Trajectory simulate(const LtiSystem& sys, const Eigen::Ref<const Vec>& x0,
                    const Eigen::Ref<const Mat>& u, const std::optional<NoiseSpec>& noise) {
  if (x0.size() != sys.n()) throw std::invalid_argument("simulate: x0 has wrong length");
  if (u.rows() != sys.m()) throw std::invalid_argument("simulate: u has wrong row count");
  const Index t = u.cols();
  Trajectory out;
  out.x.resize(sys.n(), t + 1);
  out.dx = Mat::Zero(sys.n(), t + 1);
  out.d = Mat::Zero(sys.n(), t);
  if (noise) {
    if (noise->measurement_bound < 0.0 || noise->process_bound < 0.0)
      throw std::invalid_argument("simulate: negative noise bound");
    std::mt19937_64 gen(noise->seed);
    out.d = uniform_matrix(sys.n(), t, noise->process_bound, gen);
    out.dx = uniform_matrix(sys.n(), t + 1, noise->measurement_bound, gen);
  }
  out.x.col(0) = x0;
  for (Index k = 0; k < t; ++k)
    out.x.col(k + 1) = sys.a * out.x.col(k) + sys.b * u.col(k) + out.d.col(k);
  out.x_meas = out.x + out.dx;
  return out;
}

std::vector<Trajectory> simulate_cascade(const CascadeSystem& casc, const std::vector<Vec>& x0s,
                                         const Eigen::Ref<const Mat>& u1,
                                         const std::vector<NoiseSpec>& noise) {
  if (static_cast<Index>(x0s.size()) != casc.size())
    throw std::invalid_argument("simulate_cascade: one initial state per stage required");
  if (!noise.empty() && static_cast<Index>(noise.size()) != casc.size())
    throw std::invalid_argument("simulate_cascade: one noise spec per stage required");
  std::vector<Trajectory> out;
  Mat drive = u1;
  for (Index i = 0; i < casc.size(); ++i) {
    std::optional<NoiseSpec> ns;
    if (!noise.empty()) ns = noise[i];
    out.push_back(simulate(casc.stages[i], x0s[i], drive, ns));
    drive = out.back().x.leftCols(u1.cols());
  }
  return out;
}

DataBatch build_batch(const Eigen::Ref<const Mat>& trajectory, const Eigen::Ref<const Mat>& u,
                      Index t) {
  if (t < 1 || trajectory.cols() < t + 1 || u.cols() < t)
    throw std::invalid_argument("build_batch: t exceeds available samples");
  DataBatch b;
  b.x_minus = trajectory.leftCols(t);
  b.x_plus = trajectory.middleCols(1, t);
  b.u_minus = u.leftCols(t);
  return b;
}

NoisyBatch build_noisy_batch(const Trajectory& traj, const Eigen::Ref<const Mat>& u,
                             const Eigen::Ref<const Mat>& du, Index t) {
  if (du.rows() != u.rows() || du.cols() < t)
    throw std::invalid_argument("build_noisy_batch: input noise shape mismatch");
  NoisyBatch out;
  out.batch = build_batch(traj.x_meas, u + du.leftCols(u.cols()), t);
  out.ledger.dx_minus = traj.dx.leftCols(t);
  out.ledger.dx_plus = traj.dx.middleCols(1, t);
  out.ledger.du_minus = du.leftCols(t);
  out.ledger.d_minus = traj.d.leftCols(t);
  return out;
}

RankReport rank_check(const DataBatch& batch) {
  RankReport r;
  r.required = batch.n() + batch.m();
  r.rank = numerical_rank(batch.stacked());
  r.ok = r.rank == r.required;
  return r;
}

RankReport rank_check_pair(const Eigen::Ref<const Mat>& top, const Eigen::Ref<const Mat>& bottom) {
  if (top.cols() != bottom.cols()) throw std::invalid_argument("rank_check_pair: column mismatch");
  Mat s(top.rows() + bottom.rows(), top.cols());
  s << top, bottom;
  RankReport r;
  r.required = s.rows();
  r.rank = numerical_rank(s);
  r.ok = r.rank == r.required;
  return r;
}

double informativity_residual(const DataBatch& batch, const Eigen::Ref<const Mat>& target) {
  if (target.rows() != batch.n() + batch.m())
    throw std::invalid_argument("informativity_residual: target must have n + m rows");
  return min_norm_solve(batch.stacked(), target).residual;
}

Mat encapsulated_noise(const LtiSystem& sys, const NoiseLedger& l) {
  if (l.dx_minus.rows() != sys.n() || l.dx_plus.rows() != sys.n() ||
      l.d_minus.rows() != sys.n() || l.du_minus.rows() != sys.m())
    throw std::invalid_argument("encapsulated_noise: ledger does not conform to the system");
  return sys.a * l.dx_minus - l.dx_plus + sys.b * l.du_minus - l.d_minus;
}

Mat pe_input_gen(Index m, Index t, std::uint64_t seed) {
  if (m < 1 || t < 1) throw std::invalid_argument("pe_input_gen: m and t must be positive");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Mat u(m, t);
  for (Index j = 0; j < t; ++j)
    for (Index i = 0; i < m; ++i) u(i, j) = dist(gen);
  return u;
}

LtiSystem fixture_system(const std::string& name) {
  if (name == "stage_a") return from_table(kStageA);
  if (name == "stage_b") return from_table(kStageB);
  throw std::invalid_argument("unknown fixture: " + name);
}

CascadeSystem fixture_cascade(Index stages) {
  if (stages < 1) throw std::invalid_argument("fixture_cascade: need at least one stage");
  std::vector<LtiSystem> s;
  for (Index i = 0; i < stages; ++i) s.push_back(fixture_system(i % 2 == 0 ? "stage_a" : "stage_b"));
  return CascadeSystem(std::move(s));
}

}  // namespace forwardctl
