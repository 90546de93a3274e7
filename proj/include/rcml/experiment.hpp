#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcml/collab.hpp"
#include "rcml/dataset.hpp"

namespace rcml {

enum class Method { rcml, bce_baseline, rcml_no_mmd, rcml_no_lasso, rcml_no_swap };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

// Training-loop switches for each method. bce_baseline turns every RCML
// module off and keeps gamma at 1; the ablations each drop one module.
TrainOptions options_for(Method m, DiscrepancyScope scope);

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetSource {
  bool synthetic = true;
  SyntheticSpec synthetic_spec;
  std::string features_path;
  std::string labels_path;
};

struct ExperimentConfig {
  int config_version = 1;
  DatasetSource dataset;
  SplitSpec split;
  std::vector<double> noise_rates{0.0};
  std::vector<Method> methods{Method::rcml};
  std::vector<std::uint64_t> seeds{1};

  std::vector<Index> hidden_widths{32, 32};
  Index tap_layer = 2;
  double init_scale = 1.0;

  SgdConfig sgd;
  KernelConfig kernel = KernelConfig::median_adaptive();
  LassoConfig lasso;
  LossWeights weights;
  DiscrepancyScope scope = DiscrepancyScope::full;

  // When absent, gamma = swap_gamma_for_rate(rate) per run (or of the
  // estimated rate when estimation is on).
  std::optional<double> gamma_override;
  bool estimate_noise_rate_enabled = false;
  EstimateConfig estimate;
  std::size_t diagnose_top_k = 3;

  void validate() const;  // at least one seed/method; rates in [0, 0.5]
};

// Parses a config_version:1 JSON document. Unknown keys anywhere are an
// error. "method" (string) and "methods" (array) are alternatives.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

// CLI process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitIo = 4;

// Full sweep: for each method x rate x seed, inject -> train -> evaluate on
// the clean test split -> diagnose the train split; writes per-run files
// under out_dir/<method>/rate_<r>/seed_<s>/ and aggregate.csv at the top.
// Returns a process exit code.
int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log);

// One train+evaluate+diagnose pass; reused by run_experiment and the CLI
// train subcommand.
struct RunOutput {
  NetworkPair pair;
  TrainReport report;
  Selection selection;
  MetricReport test_metrics;  // selected network on clean test labels
  NoiseReport noise_report;   // diagnosis of the (possibly noisy) train split
  NoiseLedger ledger;
  NoiseSpec noise_spec;
  std::vector<std::string> train_sample_ids;  // ledger indices refer to these
  double gamma = 1.0;
  double estimated_rate = -1.0;  // < 0 when estimation is off
};

RunOutput run_single(const ExperimentConfig& cfg, Method method, double rate, std::uint64_t seed,
                     const MultiLabelDataset& full, std::ostream& log);

}  // namespace rcml
