#pragma once

#include <vector>

#include "rcml/linalg.hpp"

namespace rcml {

struct KernelConfig {
  // Explicit bandwidths. Empty means adaptive: resolve per call via the
  // median heuristic scaled by median_scales.
  std::vector<double> sigmas;
  std::vector<double> median_scales{0.5, 1.0, 2.0};

  bool adaptive() const { return sigmas.empty(); }
  void validate() const;  // all bandwidths/scales positive

  static KernelConfig fixed(std::vector<double> sigmas);
  static KernelConfig median_adaptive(std::vector<double> scales = {0.5, 1.0, 2.0});
};

// Lower median of the pairwise Euclidean distances among the stacked rows of
// P and Q (all n*(n-1)/2 unordered pairs). Returns 1.0 when the median is
// not meaningfully positive (<= 1e-12).
double median_heuristic(const Matrix& p, const Matrix& q);

// Resolves the bandwidth set actually used for these two batches.
std::vector<double> resolve_sigmas(const Matrix& p, const Matrix& q, const KernelConfig& cfg);

// Mixture-of-Gaussians kernel: mean over sigmas of exp(-|a-b|^2 / (2 sigma^2)).
double rbf_kernel(const RowVector& a, const RowVector& b, const std::vector<double>& sigmas);

struct MmdResult {
  double value = 0.0;  // squared-MMD estimate, clamped at 0
  Matrix grad_p;       // d value / d p, rows aligned with p
  Matrix grad_q;
  std::vector<double> sigmas;  // bandwidths the estimate used
};

// Biased squared-MMD estimator over two equal-size batches, with analytic
// gradients. Bandwidths are treated as constants in the gradient even when
// resolved adaptively from the same batches.
MmdResult mmd_sq(const Matrix& p, const Matrix& q, const KernelConfig& cfg);

// Role aliases: disparity is measured at the tap layer and maximized,
// consistency at the logits and minimized. Both are mmd_sq.
inline MmdResult disparity_loss(const Matrix& tap_f, const Matrix& tap_g, const KernelConfig& cfg) {
  return mmd_sq(tap_f, tap_g, cfg);
}
inline MmdResult consistency_loss(const Matrix& logits_f, const Matrix& logits_g, const KernelConfig& cfg) {
  return mmd_sq(logits_f, logits_g, cfg);
}

}  // namespace rcml
