#pragma once

#include <vector>

#include "forwardctl/numerics.hpp"

namespace forwardctl {

// Dense block SDP in dual form:
//   maximise bᵀy  subject to  S = C − Σᵢ yᵢ Aᵢ ⪰ 0  (block diagonal),
// with primal  minimise ⟨C, X⟩  s.t. ⟨Aᵢ, X⟩ = bᵢ, X ⪰ 0.
// Symmetric blocks are stored as svec (lower triangle, column-major,
// off-diagonals scaled by √2) so that ⟨A, B⟩ = svec(A)·svec(B).
struct SdpProblem {
  std::vector<Index> block_sizes;
  Mat a;  // one svec column per variable, blocks stacked
  Vec c;  // svec of C, blocks stacked
  Vec b;
};

struct SdpOptions {
  int max_iterations = 150;
  double tolerance = 1e-10;
  double step_fraction = 0.95;
};

enum class SdpStatus { kOptimal, kMaxIterations, kNumericalFailure };

struct SdpSolution {
  SdpStatus status = SdpStatus::kNumericalFailure;
  Vec y;
  std::vector<Mat> x;
  std::vector<Mat> s;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  int iterations = 0;
};

Index svec_size(Index n);
Vec svec(const Eigen::Ref<const Mat>& m);
Mat smat(const Eigen::Ref<const Vec>& v, Index n);

// Offsets of each block inside a stacked svec.
std::vector<Index> svec_offsets(const std::vector<Index>& sizes);

SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& options = {});

}  // namespace forwardctl
