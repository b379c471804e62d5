#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "forwardctl/lmi.hpp"
#include "forwardctl/numerics.hpp"
#include "forwardctl/sylvester.hpp"
#include "forwardctl/sysdata.hpp"

namespace forwardctl {

// u₁ = Σ Nᵢ ζᵢ with ζ₁ = x₁, ζᵢ = xᵢ − Υᵢ₋₁ ζ_{1:i−1}.
struct ForwardingController {
  std::vector<Mat> gains;       // Nᵢ, m×nᵢ
  std::vector<Mat> transforms;  // Υᵢ, n_{i+1} × Σ_{j≤i} nⱼ
  std::vector<Index> stage_dims;
  Index input_dim = 0;

  Index total_dim() const;
  // ζ = T·x for the stacked state x = col(x₁, …, x_N).
  Mat coordinate_map() const;
  // u = F·x
  Mat feedback() const;
};

struct ClosedLoopModel {
  Mat a_cl;
  Mat b_noise;
  std::vector<Index> block_dims;
};

struct IssCertificate {
  double c = 1.0;
  double p = 0.0;
  double gamma_gain = 0.0;
  double smallgain_lhs = 0.0;
  double smallgain_rhs = 1.0;
  double hinf_11 = 0.0;
  double hinf_22 = 0.0;
  double b_norm = 0.0;
  bool holds = false;       // small-gain condition met
  bool schur = false;       // direct eigencheck of the full matrix
};

struct StageRecord {
  Index stage = 0;  // 1-based
  std::optional<GainCertificate> gain;
  std::optional<SylvesterCertificate> sylvester;
  std::vector<RankReport> ranks;
  double z_minus_norm = 0.0;
  double z_plus_norm = 0.0;
  double v_minus_norm = 0.0;
};

struct DesignTrace {
  std::vector<StageRecord> stages;
};

struct ForwardingDesign {
  ForwardingController controller;
  DesignTrace trace;
  std::vector<Mat> a_data;  // data-defined closed-loop matrices 𝒜ᵢ
  std::vector<Mat> b_data;  // ℬᵢ
};

class DesignFailure : public std::runtime_error {
 public:
  enum class Kind { kRank, kLmi, kSylvester };
  DesignFailure(Kind k, Index stage, const std::string& what)
      : std::runtime_error("stage " + std::to_string(stage) + ": " + what), kind(k), stage(stage) {}
  Kind kind;
  Index stage;
};

// Stage i batch: (Xᵢ₋, Xᵢ₊, input) where the input of stage 1 is U₁₋ and that
// of stage i ≥ 2 is X_{i−1,−}.
std::vector<DataBatch> cascade_batches(const std::vector<Trajectory>& traj,
                                       const Eigen::Ref<const Mat>& u1, Index t);

ForwardingDesign design_2cascade(const DataBatch& batch1, const DataBatch& batch2,
                                 const GainDesignOptions& opt = {});

ForwardingDesign design_ncascade(const std::vector<DataBatch>& batches,
                                 const GainDesignOptions& opt = {});

// Z± = X₂± − ΥX₁±, V₋ = U₁₋ − N₁X₁₋
DataBatch zeta_batch(const DataBatch& batch1, const DataBatch& batch2,
                     const Eigen::Ref<const Mat>& n1, const Eigen::Ref<const Mat>& upsilon);

struct NoisyDesign {
  ForwardingDesign design;
  GainCertificate gain1;
  GainCertificate gain2;
  SylvesterCertificate upsilon;  // Υ̂ = X̄₂₋Ĝ
  DataBatch zeta;                // (Ẑ₋, Ẑ₊, V₋)
};

NoisyDesign design_2cascade_noisy(const DataBatch& batch1_bar, const DataBatch& batch2_bar,
                                  double alpha1, double alpha2);

// R₂ − X̄₂ĜR₁ − R₂ĜX̄₁ + X̄₂ĜR₁G_{N₁}X̄₁
Mat build_r_zeta(const Eigen::Ref<const Mat>& r2_minus, const Eigen::Ref<const Mat>& x2bar_minus,
                 const Eigen::Ref<const Mat>& g_ups_hat, const Eigen::Ref<const Mat>& r1_minus,
                 const Eigen::Ref<const Mat>& g_n1, const Eigen::Ref<const Mat>& x1bar_minus);

// Measurement-space closed loop of a 2-cascade under the forwarding law. With
// delta_ups = Υ − Υ̂ the lower-left block is ΔΥ(A₁+B₁N₁) − A₂ΔΥ; without it
// the model is the nominal block-triangular matrix in ζ coordinates.
ClosedLoopModel closed_loop_assemble(const CascadeSystem& truth, const ForwardingController& ctrl,
                                     const std::optional<Mat>& delta_ups = std::nullopt);

// True closed loop A + B·F in x coordinates (any number of stages).
Mat closed_loop_state_matrix(const CascadeSystem& truth, const ForwardingController& ctrl);

IssCertificate small_gain_check(const ClosedLoopModel& cl);
IssCertificate iss_certificate(const ClosedLoopModel& cl);

enum class MeasurementTerm { kDerived, kAsPrinted };

struct NoisyClosedLoopRun {
  Mat x1, x2;          // true states, n×(K+1)
  Mat dx1, dx2;        // measurement noise
  Mat d1, d2;          // process noise, n×K
};

NoisyClosedLoopRun simulate_noisy_closed_loop(const CascadeSystem& truth,
                                              const ForwardingController& ctrl,
                                              const Eigen::Ref<const Vec>& x1_0,
                                              const Eigen::Ref<const Vec>& x2_0, Index steps,
                                              const NoiseSpec& noise);

struct IssVerification {
  bool holds = false;
  std::vector<double> lhs;
  std::vector<double> rhs;
  double min_slack = 0.0;
};

IssVerification iss_verify(const NoisyClosedLoopRun& run, const CascadeSystem& truth,
                           const ForwardingController& ctrl, const IssCertificate& cert,
                           MeasurementTerm term = MeasurementTerm::kDerived);

// Model-based construction from the true matrices with the given gains.
struct OracleCascade {
  ForwardingController controller;
  std::vector<Mat> a_cl;  // A_cl,1:i
  std::vector<Mat> b_cl;  // B_cl,1:i
  ClosedLoopModel closed_loop;
};
OracleCascade oracle_ncascade(const CascadeSystem& truth, const std::vector<Mat>& gains);
// Same, choosing each gain by the model-based stabilisation LMI.
OracleCascade oracle_ncascade(const CascadeSystem& truth);

enum class TminMode { kForwarding, kMonolithic };
// dims = (n₀, n₁, …, n_N)
Index tmin(TminMode mode, const std::vector<Index>& dims);

ErrorBoundReport error_bound_upsilon(const SylvesterCertificate& cert, const Eigen::Ref<const Mat>& r1_minus,
                                     const Eigen::Ref<const Mat>& r2_minus,
                                     const Eigen::Ref<const Mat>& g_n1,
                                     const Eigen::Ref<const Mat>& x2bar_minus,
                                     const Eigen::Ref<const Mat>& a1_cl, const Eigen::Ref<const Mat>& a2);

// ‖A₂ΔΥ − ΔΥA_cl + R₂Ĝ − X̄₂ĜR₁G_{N₁}‖_F
double upsilon_error_residual(const Eigen::Ref<const Mat>& delta_ups, const Eigen::Ref<const Mat>& a1_cl,
                              const Eigen::Ref<const Mat>& a2, const Eigen::Ref<const Mat>& r2_minus,
                              const Eigen::Ref<const Mat>& x2bar_minus, const Eigen::Ref<const Mat>& g_hat,
                              const Eigen::Ref<const Mat>& r1_minus, const Eigen::Ref<const Mat>& g_n1);

// Whole cascade treated as one system: x = col(x₁…x_N), u = u₁.
DataBatch monolithic_batch(const std::vector<DataBatch>& batches);
LtiSystem monolithic_system(const CascadeSystem& truth);
GainCertificate design_monolithic(const std::vector<DataBatch>& batches,
                                  const GainDesignOptions& opt = {});

}  // namespace forwardctl
