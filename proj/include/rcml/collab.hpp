#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rcml/dataset.hpp"
#include "rcml/discrepancy.hpp"
#include "rcml/eval.hpp"
#include "rcml/nn.hpp"
#include "rcml/noise.hpp"
#include "rcml/ranking.hpp"

namespace rcml {

struct SwapConfig {
  // Fraction of each batch kept as presumed-clean; 1 keeps everything.
  double gamma = 1.0;
  // Convenience: when set, gamma must equal 1 - noise_rate_hint.
  std::optional<double> noise_rate_hint;

  void validate() const;
};

// gamma = 1 - r for a known or estimated sample-level noise rate.
double adaptive_gamma(double noise_rate);

// Pipeline policy tying gamma to a single effective corruption rate: under
// rate_to_spec, a rate r corrupts min(1, 2r) of the samples, so the batch
// fraction worth keeping is the complement of that prevalence, floored at
// 0.1 so a selection always survives.
double swap_gamma_for_rate(double effective_rate);

struct LossWeights {
  double lambda1 = 1.0;  // classification term
  double lambda2 = 1.0;  // consistency term
  double lambda3 = 0.1;  // disparity term (subtracted)

  void validate() const;
};

struct FinalLosses {
  double loss_f = 0.0;
  double loss_g = 0.0;
};

// loss_f = l1 * bce_f_on_low_g + l2 * l_c - l3 * l_d, and symmetrically for g.
FinalLosses final_losses(double bce_f_on_low_g, double bce_g_on_low_f, double l_c, double l_d,
                         const LossWeights& weights);

struct SwapDecision {
  // Batch-local row indices, ascending. low_* holds the ceil(gamma * B)
  // lowest-loss rows under that network's own ranking loss.
  std::vector<std::size_t> low_f, high_f;
  std::vector<std::size_t> low_g, high_g;
  std::vector<double> lasso_f, lasso_g;  // per-row ranking losses
};

// ceil(gamma * batch) with protection against floating-point overshoot,
// clamped to [1, batch].
std::size_t low_count(double gamma, std::size_t batch);

std::vector<std::size_t> swap_select(const std::vector<double>& lasso_values, double gamma);

// Full decision for one batch: each network keeps the ceil(gamma * B)
// lowest-loss rows under its own ranking losses. The two vectors must have
// the same length.
SwapDecision swap_select(const std::vector<double>& lasso_f, const std::vector<double>& lasso_g,
                         double gamma);

enum class DiscrepancyScope { full, selected };

struct BatchContext {
  std::size_t epoch = 0;
  std::size_t batch_index = 0;
  std::size_t batch_size = 0;
  const SwapDecision* decision = nullptr;
  // Classification-loss gradients w.r.t. each network's logits, batch rows.
  const Matrix* bce_grad_f = nullptr;
  const Matrix* bce_grad_g = nullptr;
  double bce_f = 0.0, bce_g = 0.0;
  double l_c = 0.0, l_d = 0.0;
  FinalLosses losses;
};

struct TrainOptions {
  bool use_mmd = true;
  bool use_lasso = true;  // off: clean-set selection is uniform-random
  bool use_swap = true;   // off: each network trains on its own selection
  DiscrepancyScope scope = DiscrepancyScope::full;
  std::function<void(const BatchContext&)> batch_probe;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss_f = 0.0, loss_g = 0.0;  // means over batches
  double bce_f = 0.0, bce_g = 0.0;
  double l_c = 0.0, l_d = 0.0;
  MetricReport val_f, val_g;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  // Per-train-sample ranking-loss running sums (mean of the two networks),
  // with per-sample visit counts; fuels diagnosis.
  std::vector<double> lasso_sum;
  std::vector<std::size_t> lasso_count;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Joint training loop. Both networks' gradients are computed from the
// pre-step parameters, then both step. Throws DivergenceError on a
// non-finite loss.
TrainReport train(NetworkPair& pair, const MultiLabelDataset& train_ds, const MultiLabelDataset& val_ds,
                  const SgdConfig& sgd, const KernelConfig& kernel, const LassoConfig& lasso,
                  const SwapConfig& swap, const LossWeights& weights, std::uint64_t seed,
                  const TrainOptions& options = {});

struct Selection {
  char which = 'f';  // 'f' or 'g'
  std::size_t epoch = 0;
  double val_map_micro = 0.0;
};

// Picks the network and epoch with the best validation micro mAP (ties favor
// f, then the earlier epoch). Throws on an empty report.
Selection select_best(const TrainReport& report);

struct EstimateConfig {
  std::vector<double> candidates{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::size_t folds = 3;
  std::size_t warmup_epochs = 5;

  void validate() const;
};

// Cross-validated sweep over candidate noise rates; each candidate trains a
// short warm-up at swap_gamma_for_rate(candidate) and the best held-out micro
// mAP wins (ties favor the smaller rate).
double estimate_noise_rate(const MultiLabelDataset& train_ds, const EstimateConfig& est,
                           const MlpConfig& mlp, const SgdConfig& sgd, const KernelConfig& kernel,
                           const LassoConfig& lasso, const LossWeights& weights, std::uint64_t seed);

struct FlipSuggestion {
  Index class_index = 0;
  FlipDirection direction = FlipDirection::added;
  double magnitude = 0.0;  // group magnitude backing the suggestion
};

struct SampleDiagnosis {
  std::size_t sample_index = 0;
  std::string sample_id;
  double suspicion = 0.0;  // mean of the two networks' ranking losses
  std::string dominant;    // "missing", "wrong", or "clean"
  std::vector<FlipSuggestion> suggested_flips;
};

struct DetectionSummary {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t flagged_count = 0;
  bool no_noise = false;  // ledger present but empty
};

struct NoiseReport {
  std::vector<SampleDiagnosis> samples;  // descending suspicion
  std::optional<DetectionSummary> detection;
};

// Scores every sample with both trained networks and ranks by suspicion.
// With a ledger, also grades the top flag_fraction (default: the ledger's
// noisy-sample prevalence) as a detector.
NoiseReport diagnose(const NetworkPair& pair, const MultiLabelDataset& ds, const LassoConfig& lasso,
                     std::size_t top_k_flips, const NoiseLedger* ledger = nullptr,
                     std::optional<double> flag_fraction = {});

const Network& selected_network(const NetworkPair& pair, const Selection& sel);

std::string train_report_to_json(const TrainReport& report);
std::string noise_report_to_json(const NoiseReport& report, const std::vector<std::string>& class_names);
// One row per sample: sample_id,suspicion,dominant,suggestions, where
// suggestions joins "add:<class>:<magnitude>" / "drop:<class>:<magnitude>"
// with semicolons.
std::string noise_report_to_csv(const NoiseReport& report, const std::vector<std::string>& class_names);

}  // namespace rcml
