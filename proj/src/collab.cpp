#include "rcml/collab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "rcml/io.hpp"
#include "rcml/rng.hpp"

namespace rcml {

void SwapConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (noise_rate_hint) {
    if (!(*noise_rate_hint >= 0.0 && *noise_rate_hint <= 0.5)) {
      throw std::invalid_argument("noise_rate_hint must be in [0, 0.5]");
    }
    if (std::abs(gamma - (1.0 - *noise_rate_hint)) > 1e-12) {
      throw std::invalid_argument("gamma must equal 1 - noise_rate_hint");
    }
  }
}

double adaptive_gamma(double noise_rate) {
  if (!(noise_rate >= 0.0 && noise_rate <= 0.5)) {
    throw std::invalid_argument("noise rate must be in [0, 0.5]");
  }
  return 1.0 - noise_rate;
}

double swap_gamma_for_rate(double effective_rate) {
  if (!(effective_rate >= 0.0 && effective_rate <= 0.5)) {
    throw std::invalid_argument("noise rate must be in [0, 0.5]");
  }
  double prevalence = std::min(1.0, 2.0 * effective_rate);
  return std::max(1.0 - prevalence, 0.1);
}

void LossWeights::validate() const {
  const bool ok = lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0 && std::isfinite(lambda1) &&
                  std::isfinite(lambda2) && std::isfinite(lambda3);
  if (!ok) throw std::invalid_argument("loss weights must be nonnegative and finite");
}

FinalLosses final_losses(double bce_f_on_low_g, double bce_g_on_low_f, double l_c, double l_d,
                         const LossWeights& weights) {
  weights.validate();
  FinalLosses out;
  out.loss_f = weights.lambda1 * bce_f_on_low_g + weights.lambda2 * l_c - weights.lambda3 * l_d;
  out.loss_g = weights.lambda1 * bce_g_on_low_f + weights.lambda2 * l_c - weights.lambda3 * l_d;
  return out;
}

std::size_t low_count(double gamma, std::size_t batch) {
  // The subtraction guards against products like 0.7 * 10 landing a hair
  // above the true integer and ceiling one too high.
  const double x = gamma * static_cast<double>(batch);
  auto n = static_cast<std::size_t>(std::ceil(x - 1e-9));
  return std::clamp<std::size_t>(n, 1, batch);
}

namespace {

std::vector<std::size_t> complement_of(const std::vector<std::size_t>& low, std::size_t batch) {
  std::vector<std::size_t> high;
  high.reserve(batch - low.size());
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < batch; ++i) {
    if (cursor < low.size() && low[cursor] == i) {
      ++cursor;
    } else {
      high.push_back(i);
    }
  }
  return high;
}

}  // namespace

std::vector<std::size_t> swap_select(const std::vector<double>& lasso_values, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (lasso_values.empty()) throw std::invalid_argument("swap_select: empty batch");
  std::vector<std::size_t> order(lasso_values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return lasso_values[a] != lasso_values[b] ? lasso_values[a] < lasso_values[b] : a < b;
  });
  order.resize(low_count(gamma, lasso_values.size()));
  std::sort(order.begin(), order.end());
  return order;
}

SwapDecision swap_select(const std::vector<double>& lasso_f, const std::vector<double>& lasso_g,
                         double gamma) {
  if (lasso_f.size() != lasso_g.size()) {
    throw std::invalid_argument("swap_select: loss vectors differ in length");
  }
  SwapDecision d;
  d.lasso_f = lasso_f;
  d.lasso_g = lasso_g;
  d.low_f = swap_select(lasso_f, gamma);
  d.low_g = swap_select(lasso_g, gamma);
  d.high_f = complement_of(d.low_f, lasso_f.size());
  d.high_g = complement_of(d.low_g, lasso_g.size());
  return d;
}

namespace {

std::vector<std::size_t> random_low(Rng& rng, std::size_t batch, double gamma) {
  std::vector<std::size_t> order(batch);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  order.resize(low_count(gamma, batch));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> sorted_union(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<std::size_t> u;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
  return u;
}

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(rows[i]));
  }
  return out;
}

void scatter_rows(Matrix& into, const Matrix& rows_data, const std::vector<std::size_t>& rows) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    into.row(static_cast<Index>(rows[i])) = rows_data.row(static_cast<Index>(i));
  }
}

MetricReport validation_metrics(const Network& net, const MultiLabelDataset& val_ds) {
  if (val_ds.num_samples() == 0) return {};
  const Matrix probs = sigmoid(forward(net, val_ds.features).logits);
  return map_scores(probs, val_ds.labels, val_ds.class_names);
}

}  // namespace

TrainReport train(NetworkPair& pair, const MultiLabelDataset& train_ds, const MultiLabelDataset& val_ds,
                  const SgdConfig& sgd, const KernelConfig& kernel, const LassoConfig& lasso,
                  const SwapConfig& swap, const LossWeights& weights, std::uint64_t seed,
                  const TrainOptions& options) {
  sgd.validate();
  kernel.validate();
  lasso.validate();
  swap.validate();
  weights.validate();

  const auto n = static_cast<std::size_t>(train_ds.num_samples());
  const Index tap = pair.f.config.tap_layer;
  Rng shuffle_rng(mix_seed(seed, 0));
  Rng random_sel_rng(mix_seed(seed, 1));

  TrainReport report;
  report.lasso_sum.assign(n, 0.0);
  report.lasso_count.assign(n, 0);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  for (std::size_t epoch = 0; epoch < sgd.epochs; ++epoch) {
    shuffle_rng.shuffle(perm);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = sgd.initial_lr * std::pow(sgd.decay, static_cast<double>(epoch));
    std::size_t batches = 0;

    for (std::size_t start = 0; start < n; start += sgd.batch_size, ++batches) {
      const std::size_t b = std::min(sgd.batch_size, n - start);
      std::vector<std::size_t> rows(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                    perm.begin() + static_cast<std::ptrdiff_t>(start + b));
      const Matrix x = take_rows(train_ds.features, rows);
      const Matrix y = take_rows(train_ds.labels, rows);

      const ForwardTrace trace_f = forward_trace(pair.f, x);
      const ForwardTrace trace_g = forward_trace(pair.g, x);
      const Matrix& logits_f = trace_f.activations.back();
      const Matrix& logits_g = trace_g.activations.back();
      const Matrix& tap_f = trace_f.activations[static_cast<std::size_t>(tap)];
      const Matrix& tap_g = trace_g.activations[static_cast<std::size_t>(tap)];
      const Matrix probs_f = sigmoid(logits_f);
      const Matrix probs_g = sigmoid(logits_g);

      SwapDecision decision;
      decision.lasso_f.resize(b);
      decision.lasso_g.resize(b);
      for (std::size_t i = 0; i < b; ++i) {
        const Index r = static_cast<Index>(i);
        decision.lasso_f[i] = group_lasso(probs_f.row(r), y.row(r), lasso).total;
        decision.lasso_g[i] = group_lasso(probs_g.row(r), y.row(r), lasso).total;
        const std::size_t global = rows[i];
        report.lasso_sum[global] += (decision.lasso_f[i] + decision.lasso_g[i]) / 2.0;
        report.lasso_count[global] += 1;
      }
      if (options.use_lasso) {
        decision = swap_select(decision.lasso_f, decision.lasso_g, swap.gamma);
      } else {
        decision.low_f = random_low(random_sel_rng, b, swap.gamma);
        decision.low_g = random_low(random_sel_rng, b, swap.gamma);
        decision.high_f = complement_of(decision.low_f, b);
        decision.high_g = complement_of(decision.low_g, b);
      }

      const auto& sel_f = options.use_swap ? decision.low_g : decision.low_f;
      const auto& sel_g = options.use_swap ? decision.low_f : decision.low_g;
      const BceResult bce_f = bce_loss(logits_f, y, sel_f);
      const BceResult bce_g = bce_loss(logits_g, y, sel_g);

      Matrix grad_logits_f = weights.lambda1 * bce_f.grad_logits;
      Matrix grad_logits_g = weights.lambda1 * bce_g.grad_logits;
      Matrix grad_tap_f = Matrix::Zero(tap_f.rows(), tap_f.cols());
      Matrix grad_tap_g = Matrix::Zero(tap_g.rows(), tap_g.cols());
      double l_c = 0.0, l_d = 0.0;
      if (options.use_mmd) {
        std::vector<std::size_t> mmd_rows;
        if (options.scope == DiscrepancyScope::selected) {
          mmd_rows = sorted_union(decision.low_f, decision.low_g);
        } else {
          mmd_rows.resize(b);
          std::iota(mmd_rows.begin(), mmd_rows.end(), 0);
        }
        const MmdResult cons = consistency_loss(take_rows(logits_f, mmd_rows),
                                                take_rows(logits_g, mmd_rows), kernel);
        const MmdResult disp = disparity_loss(take_rows(tap_f, mmd_rows),
                                              take_rows(tap_g, mmd_rows), kernel);
        l_c = cons.value;
        l_d = disp.value;
        Matrix add = weights.lambda2 * cons.grad_p;
        Matrix scattered = Matrix::Zero(logits_f.rows(), logits_f.cols());
        scatter_rows(scattered, add, mmd_rows);
        grad_logits_f += scattered;
        add = weights.lambda2 * cons.grad_q;
        scattered.setZero();
        scatter_rows(scattered, add, mmd_rows);
        grad_logits_g += scattered;
        scatter_rows(grad_tap_f, Matrix(-weights.lambda3 * disp.grad_p), mmd_rows);
        scatter_rows(grad_tap_g, Matrix(-weights.lambda3 * disp.grad_q), mmd_rows);
      }

      const FinalLosses losses = final_losses(bce_f.loss, bce_g.loss, l_c, l_d, weights);
      if (!std::isfinite(losses.loss_f) || !std::isfinite(losses.loss_g)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batches));
      }

      if (options.batch_probe) {
        BatchContext ctx;
        ctx.epoch = epoch;
        ctx.batch_index = batches;
        ctx.batch_size = b;
        ctx.decision = &decision;
        ctx.bce_grad_f = &bce_f.grad_logits;
        ctx.bce_grad_g = &bce_g.grad_logits;
        ctx.bce_f = bce_f.loss;
        ctx.bce_g = bce_g.loss;
        ctx.l_c = l_c;
        ctx.l_d = l_d;
        ctx.losses = losses;
        options.batch_probe(ctx);
      }

      // Both gradients come from the pre-step parameters; only then do both
      // networks move.
      const ParamGrads grads_f = backprop(pair.f, trace_f, grad_logits_f, &grad_tap_f);
      const ParamGrads grads_g = backprop(pair.g, trace_g, grad_logits_g, &grad_tap_g);
      pair.f = sgd_step(pair.f, grads_f, epoch, sgd);
      pair.g = sgd_step(pair.g, grads_g, epoch, sgd);

      rec.loss_f += losses.loss_f;
      rec.loss_g += losses.loss_g;
      rec.bce_f += bce_f.loss;
      rec.bce_g += bce_g.loss;
      rec.l_c += l_c;
      rec.l_d += l_d;
    }

    if (batches > 0) {
      const double inv = 1.0 / static_cast<double>(batches);
      rec.loss_f *= inv;
      rec.loss_g *= inv;
      rec.bce_f *= inv;
      rec.bce_g *= inv;
      rec.l_c *= inv;
      rec.l_d *= inv;
    }
    rec.val_f = validation_metrics(pair.f, val_ds);
    rec.val_g = validation_metrics(pair.g, val_ds);
    report.epochs.push_back(std::move(rec));
  }
  return report;
}

Selection select_best(const TrainReport& report) {
  if (report.epochs.empty()) throw std::invalid_argument("select_best: empty report");
  Selection best_f{'f', 0, -1.0}, best_g{'g', 0, -1.0};
  for (const EpochRecord& rec : report.epochs) {
    if (rec.val_f.map_micro > best_f.val_map_micro) {
      best_f.epoch = rec.epoch;
      best_f.val_map_micro = rec.val_f.map_micro;
    }
    if (rec.val_g.map_micro > best_g.val_map_micro) {
      best_g.epoch = rec.epoch;
      best_g.val_map_micro = rec.val_g.map_micro;
    }
  }
  return best_g.val_map_micro > best_f.val_map_micro ? best_g : best_f;
}

const Network& selected_network(const NetworkPair& pair, const Selection& sel) {
  return sel.which == 'g' ? pair.g : pair.f;
}

void EstimateConfig::validate() const {
  if (candidates.empty()) throw std::invalid_argument("need at least one candidate rate");
  for (double r : candidates) {
    if (!(r >= 0.0 && r <= 0.5)) throw std::invalid_argument("candidate rates must be in [0, 0.5]");
  }
  if (folds < 2) throw std::invalid_argument("need at least 2 folds");
  if (warmup_epochs < 1) throw std::invalid_argument("need at least 1 warm-up epoch");
}

double estimate_noise_rate(const MultiLabelDataset& train_ds, const EstimateConfig& est,
                           const MlpConfig& mlp, const SgdConfig& sgd, const KernelConfig& kernel,
                           const LassoConfig& lasso, const LossWeights& weights, std::uint64_t seed) {
  est.validate();
  const auto n = static_cast<std::size_t>(train_ds.num_samples());
  if (n < est.folds) throw std::invalid_argument("fewer samples than folds");

  std::vector<double> candidates = est.candidates;
  std::sort(candidates.begin(), candidates.end());

  // One shared fold assignment keeps the comparison across candidates fair.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng fold_rng(mix_seed(seed, 101));
  fold_rng.shuffle(perm);
  auto chunk_begin = [&](std::size_t k) { return k * n / est.folds; };

  SgdConfig warm = sgd;
  warm.epochs = est.warmup_epochs;

  double best_rate = candidates.front();
  double best_score = -1.0;
  for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
    const double rate = candidates[ci];
    SwapConfig swap;
    swap.gamma = swap_gamma_for_rate(rate);

    double score_sum = 0.0;
    for (std::size_t k = 0; k < est.folds; ++k) {
      std::vector<std::size_t> held_out(perm.begin() + static_cast<std::ptrdiff_t>(chunk_begin(k)),
                                        perm.begin() + static_cast<std::ptrdiff_t>(chunk_begin(k + 1)));
      std::vector<std::size_t> held_in;
      held_in.reserve(n - held_out.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (i < chunk_begin(k) || i >= chunk_begin(k + 1)) held_in.push_back(perm[i]);
      }
      std::sort(held_out.begin(), held_out.end());
      std::sort(held_in.begin(), held_in.end());

      NetworkPair fold_pair = init_pair(mlp, mix_seed(seed, 1000 * ci + 2 * k),
                                        mix_seed(seed, 1000 * ci + 2 * k + 1));
      const TrainReport rep = train(fold_pair, train_ds.subset(held_in), train_ds.subset(held_out),
                                    warm, kernel, lasso, swap, weights,
                                    mix_seed(seed, 5000 + 100 * ci + k));
      score_sum += select_best(rep).val_map_micro;
    }
    const double mean_score = score_sum / static_cast<double>(est.folds);
    if (mean_score > best_score) {
      best_score = mean_score;
      best_rate = rate;
    }
  }
  return best_rate;
}

NoiseReport diagnose(const NetworkPair& pair, const MultiLabelDataset& ds, const LassoConfig& lasso,
                     std::size_t top_k_flips, const NoiseLedger* ledger,
                     std::optional<double> flag_fraction) {
  const Matrix probs_f = sigmoid(forward(pair.f, ds.features).logits);
  const Matrix probs_g = sigmoid(forward(pair.g, ds.features).logits);
  const auto n = static_cast<std::size_t>(ds.num_samples());

  NoiseReport report;
  report.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Index r = static_cast<Index>(i);
    const RankingBreakdown bf = group_lasso(probs_f.row(r), ds.labels.row(r), lasso);
    const RankingBreakdown bg = group_lasso(probs_g.row(r), ds.labels.row(r), lasso);

    SampleDiagnosis diag;
    diag.sample_index = i;
    diag.sample_id = ds.sample_ids[i];
    diag.suspicion = (bf.total + bg.total) / 2.0;
    const double missing = (bf.missing_term + bg.missing_term) / 2.0;
    const double wrong = (bf.wrong_term + bg.wrong_term) / 2.0;
    diag.dominant = diag.suspicion == 0.0 ? "clean" : (missing > wrong ? "missing" : "wrong");

    for (const auto& [label, mag_f] : bf.missing_group_by_label) {
      const double mag = (mag_f + bg.missing_group_by_label.at(label)) / 2.0;
      if (mag > 0.0) diag.suggested_flips.push_back({label, FlipDirection::added, mag});
    }
    for (const auto& [label, mag_f] : bf.wrong_group_by_label) {
      const double mag = (mag_f + bg.wrong_group_by_label.at(label)) / 2.0;
      if (mag > 0.0) diag.suggested_flips.push_back({label, FlipDirection::removed, mag});
    }
    std::sort(diag.suggested_flips.begin(), diag.suggested_flips.end(),
              [](const FlipSuggestion& a, const FlipSuggestion& b) {
                return a.magnitude != b.magnitude ? a.magnitude > b.magnitude
                                                  : a.class_index < b.class_index;
              });
    if (diag.suggested_flips.size() > top_k_flips) diag.suggested_flips.resize(top_k_flips);
    report.samples.push_back(std::move(diag));
  }

  std::sort(report.samples.begin(), report.samples.end(),
            [](const SampleDiagnosis& a, const SampleDiagnosis& b) {
              return a.suspicion != b.suspicion ? a.suspicion > b.suspicion
                                                : a.sample_index < b.sample_index;
            });

  if (ledger) {
    DetectionSummary det;
    det.no_noise = ledger->flips.empty();
    const double prevalence =
        n == 0 ? 0.0 : static_cast<double>(ledger->noisy_sample_set.size()) / static_cast<double>(n);
    const double ff = flag_fraction.value_or(prevalence);
    if (!(ff >= 0.0 && ff <= 1.0)) throw std::invalid_argument("flag fraction must be in [0, 1]");
    det.flagged_count = std::min<std::size_t>(
        n, static_cast<std::size_t>(std::llround(ff * static_cast<double>(n))));
    std::set<std::size_t> flagged;
    for (std::size_t i = 0; i < det.flagged_count; ++i) flagged.insert(report.samples[i].sample_index);
    const DetectionMetrics dm = detection_metrics(*ledger, flagged);
    det.precision = dm.precision;
    det.recall = dm.recall;
    report.detection = det;
  }
  return report;
}

namespace {

nlohmann::json metric_obj(const MetricReport& m) {
  return {{"map_macro", m.map_macro},     {"map_micro", m.map_micro},
          {"f1_micro", m.f1_micro},       {"ap_per_class", m.ap_per_class},
          {"skipped_classes", m.skipped_classes}};
}

const char* suggestion_word(FlipDirection d) {
  return d == FlipDirection::added ? "add" : "drop";
}

}  // namespace

std::string train_report_to_json(const TrainReport& report) {
  nlohmann::json doc;
  auto& epochs = doc["epochs"] = nlohmann::json::array();
  for (const EpochRecord& rec : report.epochs) {
    epochs.push_back({{"epoch", rec.epoch},
                      {"lr", rec.lr},
                      {"loss_f", rec.loss_f},
                      {"loss_g", rec.loss_g},
                      {"bce_f", rec.bce_f},
                      {"bce_g", rec.bce_g},
                      {"l_c", rec.l_c},
                      {"l_d", rec.l_d},
                      {"val_f", metric_obj(rec.val_f)},
                      {"val_g", metric_obj(rec.val_g)}});
  }
  doc["lasso_sum"] = report.lasso_sum;
  doc["lasso_count"] = report.lasso_count;
  return doc.dump(2) + "\n";
}

std::string noise_report_to_json(const NoiseReport& report, const std::vector<std::string>& class_names) {
  nlohmann::json doc;
  auto& samples = doc["samples"] = nlohmann::json::array();
  for (const SampleDiagnosis& diag : report.samples) {
    nlohmann::json flips = nlohmann::json::array();
    for (const FlipSuggestion& s : diag.suggested_flips) {
      flips.push_back({{"class_name", class_names.at(static_cast<std::size_t>(s.class_index))},
                       {"direction", suggestion_word(s.direction)},
                       {"magnitude", s.magnitude}});
    }
    samples.push_back({{"sample_id", diag.sample_id},
                       {"suspicion", diag.suspicion},
                       {"dominant", diag.dominant},
                       {"suggested_flips", flips}});
  }
  if (report.detection) {
    doc["detection"] = {{"precision", report.detection->precision},
                        {"recall", report.detection->recall},
                        {"flagged_count", report.detection->flagged_count},
                        {"no_noise", report.detection->no_noise}};
  }
  return doc.dump(2) + "\n";
}

std::string noise_report_to_csv(const NoiseReport& report, const std::vector<std::string>& class_names) {
  std::string out = "sample_id,suspicion,dominant,suggestions\n";
  for (const SampleDiagnosis& diag : report.samples) {
    out += diag.sample_id + "," + format_double(diag.suspicion) + "," + diag.dominant + ",";
    for (std::size_t i = 0; i < diag.suggested_flips.size(); ++i) {
      const FlipSuggestion& s = diag.suggested_flips[i];
      if (i > 0) out += ";";
      out += std::string(suggestion_word(s.direction)) + ":" +
             class_names.at(static_cast<std::size_t>(s.class_index)) + ":" +
             format_double(s.magnitude);
    }
    out += "\n";
  }
  return out;
}

}  // namespace rcml
