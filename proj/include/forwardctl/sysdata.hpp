#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "forwardctl/numerics.hpp"

namespace forwardctl {

struct LtiSystem {
  Mat a;  // n×n
  Mat b;  // n×m

  LtiSystem() = default;
  LtiSystem(Mat a_in, Mat b_in);
  Index n() const { return a.rows(); }
  Index m() const { return b.cols(); }
};

// Stage i ≥ 2 is driven by the state of stage i−1.
struct CascadeSystem {
  std::vector<LtiSystem> stages;

  CascadeSystem() = default;
  explicit CascadeSystem(std::vector<LtiSystem> s);
  Index size() const { return static_cast<Index>(stages.size()); }
  std::vector<Index> state_dims() const;
  Index input_dim() const { return stages.front().m(); }
};

struct NoiseSpec {
  double measurement_bound = 0.0;  // entrywise cap on Δx
  double process_bound = 0.0;      // entrywise cap on d
  std::uint64_t seed = 0;
};

struct DataBatch {
  Mat x_minus;
  Mat x_plus;
  Mat u_minus;

  Index t() const { return x_minus.cols(); }
  Index n() const { return x_minus.rows(); }
  Index m() const { return u_minus.rows(); }
  // [X₋; U₋]
  Mat stacked() const;
};

// Ground truth behind a corrupted batch. Oracle-side only: design code never
// reads it.
struct NoiseLedger {
  Mat dx_minus;
  Mat dx_plus;
  Mat du_minus;
  Mat d_minus;
};

struct Trajectory {
  Mat x;                  // true states, n×(T+1)
  Mat x_meas;             // x + Δx (equals x without noise)
  Mat dx;                 // measurement noise, n×(T+1)
  Mat d;                  // process noise, n×T
};

Trajectory simulate(const LtiSystem& sys, const Eigen::Ref<const Vec>& x0,
                    const Eigen::Ref<const Mat>& u,
                    const std::optional<NoiseSpec>& noise = std::nullopt);

// Stage 1 is driven by u1, stage i by the true x_{i−1}. One NoiseSpec per stage
// (or none).
std::vector<Trajectory> simulate_cascade(const CascadeSystem& casc,
                                         const std::vector<Vec>& x0s,
                                         const Eigen::Ref<const Mat>& u1,
                                         const std::vector<NoiseSpec>& noise = {});

DataBatch build_batch(const Eigen::Ref<const Mat>& trajectory,
                      const Eigen::Ref<const Mat>& u, Index t);

// Corrupted batch from a noisy trajectory (x̄ columns) and its ledger; the
// input block is corrupted by `du` (pass the driving stage's Δx for cascades).
struct NoisyBatch {
  DataBatch batch;   // measured quantities X̄₋, X̄₊, Ū₋
  NoiseLedger ledger;
};
NoisyBatch build_noisy_batch(const Trajectory& traj, const Eigen::Ref<const Mat>& u,
                             const Eigen::Ref<const Mat>& du, Index t);

struct RankReport {
  Index rank = 0;
  Index required = 0;
  bool ok = false;
};

RankReport rank_check(const DataBatch& batch);
// Rank of [top; bottom] against its row count.
RankReport rank_check_pair(const Eigen::Ref<const Mat>& top,
                           const Eigen::Ref<const Mat>& bottom);

double informativity_residual(const DataBatch& batch, const Eigen::Ref<const Mat>& target);

// R₋ = AΔX₋ − ΔX₊ + BΔU₋ − D₋, so that X̄₊ = A X̄₋ + B Ū₋ − R₋.
Mat encapsulated_noise(const LtiSystem& sys, const NoiseLedger& ledger);

// m×t standard normal matrix.
Mat pe_input_gen(Index m, Index t, std::uint64_t seed);

// Named fixtures: "stage_a" and "stage_b" (4×4 state, 4 inputs each).
LtiSystem fixture_system(const std::string& name);
// Alternating stage_a, stage_b, stage_a, ... cascade with `stages` subsystems.
CascadeSystem fixture_cascade(Index stages);

}  // namespace forwardctl
