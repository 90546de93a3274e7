#include "rcml/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>

#include <json.hpp>

#include "rcml/io.hpp"
#include "rcml/rng.hpp"

namespace rcml {

std::string method_name(Method m) {
  switch (m) {
    case Method::rcml: return "rcml";
    case Method::bce_baseline: return "bce_baseline";
    case Method::rcml_no_mmd: return "rcml_no_mmd";
    case Method::rcml_no_lasso: return "rcml_no_lasso";
    case Method::rcml_no_swap: return "rcml_no_swap";
  }
  throw std::invalid_argument("unreachable method value");
}

Method method_from_name(const std::string& name) {
  if (name == "rcml") return Method::rcml;
  if (name == "bce_baseline") return Method::bce_baseline;
  if (name == "rcml_no_mmd") return Method::rcml_no_mmd;
  if (name == "rcml_no_lasso") return Method::rcml_no_lasso;
  if (name == "rcml_no_swap") return Method::rcml_no_swap;
  throw ConfigError("unknown method '" + name + "'");
}

TrainOptions options_for(Method m, DiscrepancyScope scope) {
  TrainOptions opt;
  opt.scope = scope;
  switch (m) {
    case Method::rcml: break;
    case Method::bce_baseline:
      opt.use_mmd = opt.use_lasso = opt.use_swap = false;
      break;
    case Method::rcml_no_mmd: opt.use_mmd = false; break;
    case Method::rcml_no_lasso: opt.use_lasso = false; break;
    case Method::rcml_no_swap: opt.use_swap = false; break;
  }
  return opt;
}

void ExperimentConfig::validate() const {
  if (config_version != 1) throw ConfigError("unsupported config_version");
  if (seeds.empty()) throw ConfigError("need at least one seed");
  if (methods.empty()) throw ConfigError("need at least one method");
  if (noise_rates.empty()) throw ConfigError("need at least one noise rate");
  for (double r : noise_rates) {
    if (!(r >= 0.0 && r <= 0.5)) throw ConfigError("noise rates must be in [0, 0.5]");
  }
  if (dataset.synthetic) {
    dataset.synthetic_spec.validate();
  } else if (dataset.features_path.empty() || dataset.labels_path.empty()) {
    throw ConfigError("file dataset needs both features and labels paths");
  }
  split.validate();
  sgd.validate();
  kernel.validate();
  lasso.validate();
  weights.validate();
  if (hidden_widths.empty()) throw ConfigError("need at least one hidden layer");
  for (Index w : hidden_widths) {
    if (w < 1) throw ConfigError("hidden widths must be positive");
  }
  if (tap_layer < 1 || tap_layer > static_cast<Index>(hidden_widths.size())) {
    throw ConfigError("tap_layer must name a hidden layer");
  }
  if (!(init_scale >= 0.0)) throw ConfigError("init_scale must be nonnegative");
  if (gamma_override && !(*gamma_override > 0.0 && *gamma_override <= 1.0)) {
    throw ConfigError("swap gamma override must be in (0, 1]");
  }
  if (estimate_noise_rate_enabled) estimate.validate();
}

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::vector<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read_into(const json& obj, const char* key, T& into) {
  if (obj.contains(key)) into = obj.at(key).get<T>();
}

DiscrepancyScope scope_from_name(const std::string& name) {
  if (name == "full") return DiscrepancyScope::full;
  if (name == "selected") return DiscrepancyScope::selected;
  throw ConfigError("discrepancy_scope must be 'full' or 'selected'");
}

json config_to_json_obj(const ExperimentConfig& cfg) {
  json doc;
  doc["config_version"] = cfg.config_version;
  if (cfg.dataset.synthetic) {
    const SyntheticSpec& s = cfg.dataset.synthetic_spec;
    doc["dataset"]["synthetic"] = {{"n", s.n},
                                   {"v", s.v},
                                   {"d", s.d},
                                   {"prototypes_per_class", s.prototypes_per_class},
                                   {"label_radius", s.label_radius},
                                   {"feature_noise_sigma", s.feature_noise_sigma},
                                   {"seed", s.seed}};
  } else {
    doc["dataset"]["files"] = {{"features", cfg.dataset.features_path},
                               {"labels", cfg.dataset.labels_path}};
  }
  doc["split"] = {{"train_fraction", cfg.split.train_fraction},
                  {"val_fraction", cfg.split.val_fraction},
                  {"test_fraction", cfg.split.test_fraction},
                  {"seed", cfg.split.seed}};
  doc["noise_rates"] = cfg.noise_rates;
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(method_name(m));
  doc["methods"] = methods;
  doc["seeds"] = cfg.seeds;
  doc["model"] = {{"hidden_widths", cfg.hidden_widths},
                  {"tap_layer", cfg.tap_layer},
                  {"init_scale", cfg.init_scale}};
  doc["sgd"] = {{"initial_lr", cfg.sgd.initial_lr},
                {"decay", cfg.sgd.decay},
                {"batch_size", cfg.sgd.batch_size},
                {"epochs", cfg.sgd.epochs}};
  if (cfg.kernel.adaptive()) {
    doc["kernel"] = {{"median_scales", cfg.kernel.median_scales}};
  } else {
    doc["kernel"] = {{"sigmas", cfg.kernel.sigmas}};
  }
  doc["lasso"] = {{"alpha", cfg.lasso.alpha}, {"beta", cfg.lasso.beta}};
  doc["loss_weights"] = {{"lambda1", cfg.weights.lambda1},
                         {"lambda2", cfg.weights.lambda2},
                         {"lambda3", cfg.weights.lambda3}};
  if (cfg.gamma_override) doc["swap"] = {{"gamma", *cfg.gamma_override}};
  doc["estimate_noise_rate"] = {{"enabled", cfg.estimate_noise_rate_enabled},
                                {"candidates", cfg.estimate.candidates},
                                {"folds", cfg.estimate.folds},
                                {"warmup_epochs", cfg.estimate.warmup_epochs}};
  doc["diagnose_top_k"] = cfg.diagnose_top_k;
  doc["discrepancy_scope"] = cfg.scope == DiscrepancyScope::full ? "full" : "selected";
  return doc;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  return config_to_json_obj(cfg).dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse failure: ") + e.what());
  }
  try {
    check_keys(doc,
               {"config_version", "dataset", "split", "noise_rates", "method", "methods", "seeds",
                "model", "sgd", "kernel", "lasso", "loss_weights", "swap", "estimate_noise_rate",
                "diagnose_top_k", "discrepancy_scope"},
               "config");
    ExperimentConfig cfg;
    cfg.config_version = doc.at("config_version").get<int>();

    if (doc.contains("dataset")) {
      const json& ds = doc.at("dataset");
      check_keys(ds, {"synthetic", "files"}, "dataset");
      if (ds.contains("synthetic") == ds.contains("files")) {
        throw ConfigError("dataset needs exactly one of 'synthetic' or 'files'");
      }
      if (ds.contains("synthetic")) {
        const json& s = ds.at("synthetic");
        check_keys(s, {"n", "v", "d", "prototypes_per_class", "label_radius", "feature_noise_sigma", "seed"},
                   "dataset.synthetic");
        cfg.dataset.synthetic = true;
        read_into(s, "n", cfg.dataset.synthetic_spec.n);
        read_into(s, "v", cfg.dataset.synthetic_spec.v);
        read_into(s, "d", cfg.dataset.synthetic_spec.d);
        read_into(s, "prototypes_per_class", cfg.dataset.synthetic_spec.prototypes_per_class);
        read_into(s, "label_radius", cfg.dataset.synthetic_spec.label_radius);
        read_into(s, "feature_noise_sigma", cfg.dataset.synthetic_spec.feature_noise_sigma);
        read_into(s, "seed", cfg.dataset.synthetic_spec.seed);
      } else {
        const json& f = ds.at("files");
        check_keys(f, {"features", "labels"}, "dataset.files");
        cfg.dataset.synthetic = false;
        cfg.dataset.features_path = f.at("features").get<std::string>();
        cfg.dataset.labels_path = f.at("labels").get<std::string>();
      }
    }

    if (doc.contains("split")) {
      const json& s = doc.at("split");
      check_keys(s, {"train_fraction", "val_fraction", "test_fraction", "seed"}, "split");
      read_into(s, "train_fraction", cfg.split.train_fraction);
      read_into(s, "val_fraction", cfg.split.val_fraction);
      read_into(s, "test_fraction", cfg.split.test_fraction);
      read_into(s, "seed", cfg.split.seed);
    }

    read_into(doc, "noise_rates", cfg.noise_rates);

    if (doc.contains("method") && doc.contains("methods")) {
      throw ConfigError("give either 'method' or 'methods', not both");
    }
    if (doc.contains("method")) {
      cfg.methods = {method_from_name(doc.at("method").get<std::string>())};
    } else if (doc.contains("methods")) {
      cfg.methods.clear();
      for (const auto& name : doc.at("methods")) {
        cfg.methods.push_back(method_from_name(name.get<std::string>()));
      }
    }

    read_into(doc, "seeds", cfg.seeds);

    if (doc.contains("model")) {
      const json& m = doc.at("model");
      check_keys(m, {"hidden_widths", "tap_layer", "init_scale"}, "model");
      read_into(m, "hidden_widths", cfg.hidden_widths);
      read_into(m, "tap_layer", cfg.tap_layer);
      read_into(m, "init_scale", cfg.init_scale);
    }

    if (doc.contains("sgd")) {
      const json& s = doc.at("sgd");
      check_keys(s, {"initial_lr", "decay", "batch_size", "epochs"}, "sgd");
      read_into(s, "initial_lr", cfg.sgd.initial_lr);
      read_into(s, "decay", cfg.sgd.decay);
      read_into(s, "batch_size", cfg.sgd.batch_size);
      read_into(s, "epochs", cfg.sgd.epochs);
    }

    if (doc.contains("kernel")) {
      const json& k = doc.at("kernel");
      check_keys(k, {"sigmas", "median_scales"}, "kernel");
      if (k.contains("sigmas") && k.contains("median_scales")) {
        throw ConfigError("give either kernel.sigmas or kernel.median_scales, not both");
      }
      if (k.contains("sigmas")) {
        cfg.kernel = KernelConfig::fixed(k.at("sigmas").get<std::vector<double>>());
      } else if (k.contains("median_scales")) {
        cfg.kernel = KernelConfig::median_adaptive(k.at("median_scales").get<std::vector<double>>());
      }
    }

    if (doc.contains("lasso")) {
      const json& l = doc.at("lasso");
      check_keys(l, {"alpha", "beta"}, "lasso");
      read_into(l, "alpha", cfg.lasso.alpha);
      cfg.lasso.beta = 1.0 - cfg.lasso.alpha;
      read_into(l, "beta", cfg.lasso.beta);
    }

    if (doc.contains("loss_weights")) {
      const json& w = doc.at("loss_weights");
      check_keys(w, {"lambda1", "lambda2", "lambda3"}, "loss_weights");
      read_into(w, "lambda1", cfg.weights.lambda1);
      read_into(w, "lambda2", cfg.weights.lambda2);
      read_into(w, "lambda3", cfg.weights.lambda3);
    }

    if (doc.contains("swap")) {
      const json& s = doc.at("swap");
      check_keys(s, {"gamma"}, "swap");
      if (s.contains("gamma")) cfg.gamma_override = s.at("gamma").get<double>();
    }

    if (doc.contains("estimate_noise_rate")) {
      const json& e = doc.at("estimate_noise_rate");
      check_keys(e, {"enabled", "candidates", "folds", "warmup_epochs"}, "estimate_noise_rate");
      read_into(e, "enabled", cfg.estimate_noise_rate_enabled);
      read_into(e, "candidates", cfg.estimate.candidates);
      read_into(e, "folds", cfg.estimate.folds);
      read_into(e, "warmup_epochs", cfg.estimate.warmup_epochs);
    }

    read_into(doc, "diagnose_top_k", cfg.diagnose_top_k);
    if (doc.contains("discrepancy_scope")) {
      cfg.scope = scope_from_name(doc.at("discrepancy_scope").get<std::string>());
    }

    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

namespace {

std::string fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

std::string metrics_per_epoch_csv(const TrainReport& report) {
  std::string out =
      "epoch,lr,loss_f,loss_g,bce_f,bce_g,l_c,l_d,"
      "val_map_micro_f,val_map_macro_f,val_f1_micro_f,"
      "val_map_micro_g,val_map_macro_g,val_f1_micro_g\n";
  for (const EpochRecord& r : report.epochs) {
    out += std::to_string(r.epoch) + "," + format_double(r.lr) + "," + format_double(r.loss_f) + "," +
           format_double(r.loss_g) + "," + format_double(r.bce_f) + "," + format_double(r.bce_g) + "," +
           format_double(r.l_c) + "," + format_double(r.l_d) + "," +
           format_double(r.val_f.map_micro) + "," + format_double(r.val_f.map_macro) + "," +
           format_double(r.val_f.f1_micro) + "," + format_double(r.val_g.map_micro) + "," +
           format_double(r.val_g.map_macro) + "," + format_double(r.val_g.f1_micro) + "\n";
  }
  return out;
}

json metric_obj(const MetricReport& m) {
  return {{"map_macro", m.map_macro},     {"map_micro", m.map_micro},
          {"f1_micro", m.f1_micro},       {"ap_per_class", m.ap_per_class},
          {"skipped_classes", m.skipped_classes}};
}

MultiLabelDataset load_full_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.synthetic) return generate_synthetic(cfg.dataset.synthetic_spec);
  return load_dataset(cfg.dataset.features_path, cfg.dataset.labels_path);
}

}  // namespace

RunOutput run_single(const ExperimentConfig& cfg, Method method, double rate, std::uint64_t seed,
                     const MultiLabelDataset& full, std::ostream& log) {
  SplitSpec split_spec = cfg.split;
  split_spec.seed = mix_seed(cfg.split.seed, seed);
  SplitResult splits = split(full, split_spec);

  RunOutput out;
  out.noise_spec = rate_to_spec(rate, mix_seed(seed, 11));
  MultiLabelDataset train_ds = std::move(splits.train);
  InjectResult injected = inject_rns(train_ds.labels, out.noise_spec);
  train_ds.clean_labels = train_ds.labels;  // pre-noise labels stay as the clean reference
  train_ds.labels = std::move(injected.labels);
  out.ledger = std::move(injected.ledger);

  const MlpConfig mlp = [&] {
    MlpConfig m = MlpConfig::with_hidden(full.feature_dim(), cfg.hidden_widths, full.num_classes(),
                                         cfg.tap_layer, cfg.init_scale);
    m.seed = seed;
    return m;
  }();

  if (method == Method::bce_baseline) {
    out.gamma = 1.0;
  } else if (cfg.gamma_override) {
    out.gamma = *cfg.gamma_override;
  } else if (cfg.estimate_noise_rate_enabled) {
    out.estimated_rate = estimate_noise_rate(train_ds, cfg.estimate, mlp, cfg.sgd, cfg.kernel,
                                             cfg.lasso, cfg.weights, mix_seed(seed, 41));
    out.gamma = swap_gamma_for_rate(out.estimated_rate);
    log << "estimated noise rate " << out.estimated_rate << " -> gamma " << out.gamma << "\n";
  } else {
    out.gamma = swap_gamma_for_rate(rate);
  }

  SwapConfig swap_cfg;
  swap_cfg.gamma = out.gamma;

  out.pair = init_pair(mlp, mix_seed(seed, 21), mix_seed(seed, 22));
  const TrainOptions options = options_for(method, cfg.scope);
  out.report = train(out.pair, train_ds, splits.val, cfg.sgd, cfg.kernel, cfg.lasso, swap_cfg,
                     cfg.weights, mix_seed(seed, 31), options);
  out.selection = select_best(out.report);

  const Network& chosen = selected_network(out.pair, out.selection);
  const Matrix test_probs = sigmoid(forward(chosen, splits.test.features).logits);
  out.test_metrics = map_scores(test_probs, splits.test.labels, splits.test.class_names);

  out.noise_report = diagnose(out.pair, train_ds, cfg.lasso, cfg.diagnose_top_k, &out.ledger);
  out.train_sample_ids = train_ds.sample_ids;
  return out;
}

int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log) {
  namespace fs = std::filesystem;
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    const MultiLabelDataset full = load_full_dataset(cfg);

    std::vector<double> rates = cfg.noise_rates;
    std::sort(rates.begin(), rates.end());

    std::string aggregate = "method,noise_rate,f1_micro,map_micro,map_macro\n";
    for (Method method : cfg.methods) {
      for (double rate : rates) {
        double sum_f1 = 0.0, sum_micro = 0.0, sum_macro = 0.0;
        for (std::uint64_t seed : cfg.seeds) {
          log << "run: method=" << method_name(method) << " rate=" << rate << " seed=" << seed << "\n";
          const RunOutput run = run_single(cfg, method, rate, seed, full, log);
          sum_f1 += run.test_metrics.f1_micro;
          sum_micro += run.test_metrics.map_micro;
          sum_macro += run.test_metrics.map_macro;

          const fs::path dir = fs::path(out_dir) / method_name(method) /
                               ("rate_" + format_double(rate)) / ("seed_" + std::to_string(seed));
          fs::create_directories(dir);

          json report;
          report["config"] = config_to_json_obj(cfg);
          report["method"] = method_name(method);
          report["noise_rate"] = rate;
          report["seed"] = seed;
          report["gamma"] = run.gamma;
          if (run.estimated_rate >= 0.0) {
            report["estimated_noise_rate"] = run.estimated_rate;
          } else {
            report["estimated_noise_rate"] = nullptr;
          }
          report["selection"] = {{"network", std::string(1, run.selection.which)},
                                 {"epoch", run.selection.epoch},
                                 {"val_map_micro", run.selection.val_map_micro}};
          report["test_metrics"] = metric_obj(run.test_metrics);
          report["train_report"] = json::parse(train_report_to_json(run.report));
          write_text_file((dir / "report.json").string(), report.dump(2) + "\n");

          write_text_file((dir / "noise_ledger.json").string(),
                          ledger_to_json(run.ledger, run.noise_spec, run.train_sample_ids, full.class_names));
          write_text_file((dir / "checkpoint_f.json").string(), checkpoint_to_json(run.pair.f));
          write_text_file((dir / "checkpoint_g.json").string(), checkpoint_to_json(run.pair.g));
          write_text_file((dir / "metrics_per_epoch.csv").string(), metrics_per_epoch_csv(run.report));
          write_text_file((dir / "noise_report.json").string(),
                          noise_report_to_json(run.noise_report, full.class_names));
          write_text_file((dir / "noise_report.csv").string(),
                          noise_report_to_csv(run.noise_report, full.class_names));
        }
        const double inv = 1.0 / static_cast<double>(cfg.seeds.size());
        aggregate += method_name(method) + "," + format_double(rate) + "," + fixed6(sum_f1 * inv) +
                     "," + fixed6(sum_micro * inv) + "," + fixed6(sum_macro * inv) + "\n";
      }
    }
    fs::create_directories(out_dir);
    write_text_file((fs::path(out_dir) / "aggregate.csv").string(), aggregate);
    return kExitOk;
  } catch (const DivergenceError& e) {
    log << "training diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "I/O or runtime failure: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace rcml
