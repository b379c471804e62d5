#pragma once

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "forwardctl/numerics.hpp"
#include "forwardctl/sysdata.hpp"

namespace forwardctl {

// Matrix expression affine in the decision matrix Q (T×n) and a few
// auxiliary scalars sⱼ:  C + Σ Lₖ Q Rₖ + Σ L'ₖ Qᵀ R'ₖ + Σ sⱼ Mⱼ.
class AffineExpr {
 public:
  struct Term {
    enum class Kind { kQ, kQt, kScalar };
    Kind kind;
    Mat left;   // kScalar: the coefficient matrix
    Mat right;
    Index scalar = 0;
  };

  AffineExpr() = default;
  AffineExpr(Index rows, Index cols) : constant_(Mat::Zero(rows, cols)) {}

  static AffineExpr constant(Mat c);
  static AffineExpr q(Mat left, Mat right);   // left·Q·right
  static AffineExpr qt(Mat left, Mat right);  // left·Qᵀ·right
  static AffineExpr scalar(Index j, Mat m);   // sⱼ·m

  Index rows() const { return constant_.rows(); }
  Index cols() const { return constant_.cols(); }
  const Mat& constant_part() const { return constant_; }
  const std::vector<Term>& terms() const { return terms_; }

  Mat eval(const Eigen::Ref<const Mat>& q, const Eigen::Ref<const Vec>& s) const;
  // Linear part at Q = e_r e_cᵀ, s = 0.
  Mat unit_q(Index r, Index c) const;
  Mat unit_scalar(Index j) const;

  AffineExpr transposed() const;
  AffineExpr& operator+=(const AffineExpr& o);
  AffineExpr& operator*=(double k);

 private:
  Mat constant_;
  std::vector<Term> terms_;
};

AffineExpr operator+(AffineExpr a, const AffineExpr& b);
AffineExpr operator-(AffineExpr a, const AffineExpr& b);
AffineExpr operator*(double k, AffineExpr a);

// Symmetric block matrix given by its upper triangle; the lower triangle is the
// transpose and diagonal blocks are symmetrised.
struct LmiBlock {
  std::vector<std::vector<AffineExpr>> upper;  // upper[i][j-i] holds block (i, j)

  static LmiBlock single(AffineExpr e);
  static LmiBlock two_by_two(AffineExpr e11, AffineExpr e12, AffineExpr e22);

  Index size() const;
  Mat assemble(const Eigen::Ref<const Mat>& q, const Eigen::Ref<const Vec>& s) const;
};

struct LmiProblem {
  Index t = 0;  // decision shape T×n
  Index n = 0;
  Index num_scalars = 0;
  std::vector<LmiBlock> strict;        // ⪰ margin·I
  std::vector<LmiBlock> nonstrict;     // ⪰ 0
  std::vector<AffineExpr> symmetric;   // square expressions that must be symmetric
  std::vector<std::pair<Index, double>> scalar_caps;  // sⱼ ≤ cap
  double margin = 1e-7;
  // Phase one maximises a common margin t ≤ margin_cap over the strict blocks.
  double margin_cap = 1.0;
  // Optional phase two: minimise this scalar keeping every strict block ⪰ a
  // margin below the phase-one optimum.
  std::optional<Index> minimise_scalar;
};

struct FeasibilityReport {
  Mat q;
  Vec scalars;
  double min_eig_achieved = 0.0;  // independent recheck, strict blocks
  double nonstrict_min_eig = 0.0;
  double symmetry_residual = 0.0;
  double phase_one_margin = 0.0;  // solver-reported, informational
  bool feasible = false;
  int iterations = 0;
};

FeasibilityReport solve_feasibility(const LmiProblem& p);

// Dense eigenvalue recheck of a candidate against all blocks of `p`.
FeasibilityReport recheck(const LmiProblem& p, const Eigen::Ref<const Mat>& q,
                          const Eigen::Ref<const Vec>& s);

struct GainCertificate {
  Mat k;
  Mat q;
  Mat g_k;
  double inverted_conditioning = 0.0;  // cond(X₋Q)
  double margin = 0.0;                 // recheck of the stabilisation template
  double decay = 1.0;                  // contraction level used by the selection
  double alpha = 0.0;                  // robust designs only
};

struct GainDesignOptions {
  // Candidate decay levels tried in order; 1 is the bare template.
  std::vector<double> decay_levels = {1.0};
  // Push the feasible point towards the smallest bound on ‖K‖₂ instead of
  // keeping the well-centred one.
  bool minimise_gain = false;
  double margin_rel = 1e-7;
};

class LmiInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stabilisation template [[X₋Q, X₊Q], [QᵀX₊ᵀ, X₋Q]] ≻ 0 with X₋Q symmetric.
LmiProblem stabilising_template(const DataBatch& batch, double margin);
// Noise-robust pair [[X̄₋Q − αX̄₊X̄₊ᵀ, X̄₊Q], [·, X̄₋Q]] ≻ 0, [[I, Q], [Qᵀ, X̄₋Q]] ≻ 0.
LmiProblem robust_template(const DataBatch& batch, double alpha, double margin);

double data_scale(const DataBatch& batch);

GainCertificate design_gain(const DataBatch& batch, const GainDesignOptions& opt = {});
GainCertificate design_gain_robust(const DataBatch& batch_bar, double alpha,
                                   double margin_rel = 1e-7);

struct SnrReport {
  bool holds = false;
  double slack = 0.0;
};

// α²/(2(2+α))·X̄₊X̄₊ᵀ − RRᵀ ⪰ 0.
SnrReport snr_check(const Eigen::Ref<const Mat>& r_minus, const Eigen::Ref<const Mat>& x_plus_bar,
                    double alpha);

std::vector<double> alpha_grid(int points = 25, double lo = 1e-3, double hi = 1e3);

struct AlphaScan {
  double alpha = 0.0;
  GainCertificate gain;
  std::vector<double> admissible;  // grid α passing both tests (an interval)
  bool found = false;
};

AlphaScan alpha_search(const Eigen::Ref<const Mat>& r_minus, const Eigen::Ref<const Mat>& x_plus_bar,
                       const DataBatch& batch_bar, const std::vector<double>& grid = alpha_grid());

// Data-only choice: the largest grid α with a feasible robust LMI.
std::optional<GainCertificate> largest_feasible_alpha(const DataBatch& batch_bar,
                                                      const std::vector<double>& grid = alpha_grid());

}  // namespace forwardctl
