#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rcml/collab.hpp"
#include "rcml/dataset.hpp"
#include "rcml/eval.hpp"
#include "rcml/experiment.hpp"
#include "rcml/io.hpp"
#include "rcml/nn.hpp"
#include "rcml/noise.hpp"

namespace {

namespace fs = std::filesystem;
using namespace rcml;

ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return {};  // defaults: reference synthetic benchmark
  return config_from_json(read_text_file(path));
}

void apply_overrides(ExperimentConfig& cfg, const std::optional<std::uint64_t>& seed,
                     const std::string& method, const std::optional<double>& rate, bool estimate) {
  if (seed) cfg.seeds = {*seed};
  if (!method.empty()) cfg.methods = {method_from_name(method)};
  if (rate) cfg.noise_rates = {*rate};
  if (estimate) cfg.estimate_noise_rate_enabled = true;
  cfg.validate();
}

int gen_data(const std::string& config_path, const std::string& out,
             const std::optional<std::uint64_t>& seed) {
  ExperimentConfig cfg = load_config(config_path);
  if (!cfg.dataset.synthetic) throw ConfigError("gen-data needs a synthetic dataset config");
  if (seed) cfg.dataset.synthetic_spec.seed = *seed;
  const MultiLabelDataset ds = generate_synthetic(cfg.dataset.synthetic_spec);
  fs::create_directories(out);
  write_dataset_csv(ds, (fs::path(out) / "features.csv").string(),
                    (fs::path(out) / "labels.csv").string());
  std::cout << "wrote " << ds.num_samples() << " samples, " << ds.num_classes() << " classes to "
            << out << "\n";
  return kExitOk;
}

int inject_noise(const std::string& features, const std::string& labels, double rate,
                 std::uint64_t seed, const std::string& out) {
  const MultiLabelDataset ds = load_dataset(features, labels);
  const NoiseSpec spec = rate_to_spec(rate, seed);
  const InjectResult result = inject_rns(ds.labels, spec);
  MultiLabelDataset noisy = ds;
  noisy.labels = result.labels;
  fs::create_directories(out);
  write_dataset_csv(noisy, (fs::path(out) / "features.csv").string(),
                    (fs::path(out) / "labels_noisy.csv").string());
  write_text_file((fs::path(out) / "noise_ledger.json").string(),
                  ledger_to_json(result.ledger, spec, ds.sample_ids, ds.class_names));
  std::cout << "flipped " << result.ledger.flips.size() << " labels across "
            << result.ledger.noisy_sample_set.size() << " samples\n";
  return kExitOk;
}

int train_once(const std::string& config_path, const std::string& out,
               const std::optional<std::uint64_t>& seed, const std::string& method,
               const std::optional<double>& rate, bool estimate) {
  ExperimentConfig cfg = load_config(config_path);
  apply_overrides(cfg, seed, method, rate, estimate);
  cfg.methods.resize(1);
  cfg.noise_rates.resize(1);
  cfg.seeds.resize(1);
  return run_experiment(cfg, out, std::cout);
}

int evaluate(const std::string& checkpoint, const std::string& features, const std::string& labels,
             const std::string& out) {
  const Network net = checkpoint_from_json(read_text_file(checkpoint));
  const MultiLabelDataset ds = load_dataset(features, labels);
  const Matrix probs = sigmoid(forward(net, ds.features).logits);
  const MetricReport report = map_scores(probs, ds.labels, ds.class_names);
  fs::create_directories(out);
  write_text_file((fs::path(out) / "metrics.json").string(), metric_report_to_json(report));
  write_text_file((fs::path(out) / "metrics.csv").string(), metric_report_to_csv(report));
  std::cout << "map_macro=" << report.map_macro << " map_micro=" << report.map_micro
            << " f1_micro=" << report.f1_micro << "\n";
  return kExitOk;
}

int diagnose_cmd(const std::string& ckpt_f, const std::string& ckpt_g, const std::string& features,
                 const std::string& labels, const std::string& ledger_path, double alpha,
                 std::size_t top_k, const std::optional<double>& flag_fraction,
                 const std::string& out) {
  NetworkPair pair{checkpoint_from_json(read_text_file(ckpt_f)),
                   checkpoint_from_json(read_text_file(ckpt_g))};
  if (pair.f.config.layer_widths != pair.g.config.layer_widths ||
      pair.f.config.tap_layer != pair.g.config.tap_layer) {
    throw ConfigError("the two checkpoints disagree on architecture");
  }
  const MultiLabelDataset ds = load_dataset(features, labels);
  LassoConfig lasso;
  lasso.alpha = alpha;
  lasso.beta = 1.0 - alpha;

  std::optional<LedgerFile> ledger;
  if (!ledger_path.empty()) {
    ledger = ledger_from_json(read_text_file(ledger_path), ds.sample_ids, ds.class_names);
  }
  const NoiseReport report = diagnose(pair, ds, lasso, top_k,
                                      ledger ? &ledger->ledger : nullptr, flag_fraction);
  fs::create_directories(out);
  write_text_file((fs::path(out) / "noise_report.json").string(),
                  noise_report_to_json(report, ds.class_names));
  write_text_file((fs::path(out) / "noise_report.csv").string(),
                  noise_report_to_csv(report, ds.class_names));
  if (report.detection) {
    std::cout << "detection precision=" << report.detection->precision
              << " recall=" << report.detection->recall << " flagged="
              << report.detection->flagged_count << "\n";
  } else {
    std::cout << "ranked " << report.samples.size() << " samples by suspicion\n";
  }
  return kExitOk;
}

template <typename Fn>
int guarded(Fn&& body) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RCML laboratory: collaborative multi-label learning under label noise"};
  app.require_subcommand(1);

  std::string config_path, out_dir, method, features, labels, checkpoint, ckpt_f, ckpt_g, ledger_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> rate, flag_fraction;
  bool estimate = false;
  double alpha = 0.2;
  std::size_t top_k = 3;
  double inject_rate = 0.0;
  std::uint64_t inject_seed = 0;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset as CSV");
  gen->add_option("--config", config_path, "Experiment config JSON (defaults used when absent)");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--seed", seed, "Override the generator seed");

  auto* inject = app.add_subcommand("inject-noise", "Flip labels per RNS and record the ledger");
  inject->add_option("--features", features, "features.csv path")->required();
  inject->add_option("--labels", labels, "labels.csv path")->required();
  inject->add_option("--noise-rate", inject_rate, "Effective noise rate in [0, 0.5]")->required();
  inject->add_option("--seed", inject_seed, "Injection seed");
  inject->add_option("--out", out_dir, "Output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Train one run and write its artifacts");
  train_cmd->add_option("--config", config_path, "Experiment config JSON (defaults used when absent)");
  train_cmd->add_option("--out", out_dir, "Output directory")->required();
  train_cmd->add_option("--seed", seed, "Override: use this single seed");
  train_cmd->add_option("--method", method, "Override: rcml|bce_baseline|rcml_no_mmd|rcml_no_lasso|rcml_no_swap");
  train_cmd->add_option("--noise-rate", rate, "Override: single effective noise rate");
  train_cmd->add_flag("--estimate-noise-rate", estimate, "Estimate the noise rate to set gamma");

  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint against a labeled CSV dataset");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
  eval_cmd->add_option("--features", features, "features.csv path")->required();
  eval_cmd->add_option("--labels", labels, "labels.csv path")->required();
  eval_cmd->add_option("--out", out_dir, "Output directory")->required();

  auto* diag = app.add_subcommand("diagnose", "Rank samples by label-noise suspicion");
  diag->add_option("--checkpoint-f", ckpt_f, "Network f checkpoint")->required();
  diag->add_option("--checkpoint-g", ckpt_g, "Network g checkpoint")->required();
  diag->add_option("--features", features, "features.csv path")->required();
  diag->add_option("--labels", labels, "labels.csv path")->required();
  diag->add_option("--ledger", ledger_path, "Ground-truth noise ledger JSON for detection metrics");
  diag->add_option("--alpha", alpha, "Missing-label term weight");
  diag->add_option("--top-k", top_k, "Flip suggestions per sample");
  diag->add_option("--flag-fraction", flag_fraction, "Fraction of samples to flag (default: ledger prevalence)");
  diag->add_option("--out", out_dir, "Output directory")->required();

  auto* exp = app.add_subcommand("experiment", "Full method x rate x seed sweep with aggregate CSV");
  exp->add_option("--config", config_path, "Experiment config JSON (defaults used when absent)");
  exp->add_option("--out", out_dir, "Output directory")->required();
  exp->add_option("--seed", seed, "Override: use this single seed");
  exp->add_option("--method", method, "Override: run this single method");
  exp->add_option("--noise-rate", rate, "Override: single effective noise rate");
  exp->add_flag("--estimate-noise-rate", estimate, "Estimate the noise rate to set gamma");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (gen->parsed()) {
    return guarded([&] { return gen_data(config_path, out_dir, seed); });
  }
  if (inject->parsed()) {
    return guarded([&] { return inject_noise(features, labels, inject_rate, inject_seed, out_dir); });
  }
  if (train_cmd->parsed()) {
    return guarded([&] { return train_once(config_path, out_dir, seed, method, rate, estimate); });
  }
  if (eval_cmd->parsed()) {
    return guarded([&] { return evaluate(checkpoint, features, labels, out_dir); });
  }
  if (diag->parsed()) {
    return guarded([&] {
      return diagnose_cmd(ckpt_f, ckpt_g, features, labels, ledger_path, alpha, top_k, flag_fraction,
                          out_dir);
    });
  }
  if (exp->parsed()) {
    return guarded([&] {
      ExperimentConfig cfg = load_config(config_path);
      apply_overrides(cfg, seed, method, rate, estimate);
      return run_experiment(cfg, out_dir, std::cout);
    });
  }
  return kExitConfig;
}
