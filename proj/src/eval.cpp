#include "rcml/eval.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "rcml/io.hpp"

namespace rcml {

double average_precision(const std::vector<double>& scores, const std::vector<double>& truth) {
  if (scores.size() != truth.size()) throw std::invalid_argument("average_precision: size mismatch");
  std::size_t positives = 0;
  for (double t : truth) {
    if (t != 0.0 && t != 1.0) throw std::invalid_argument("average_precision: non-binary truth");
    if (t == 1.0) ++positives;
  }
  if (positives == 0) throw UndefinedApError("average precision undefined without positives");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  });

  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (truth[order[rank]] == 1.0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return sum / static_cast<double>(positives);
}

MetricReport map_scores(const Matrix& scores, const Matrix& truth, const std::vector<std::string>& class_names) {
  if (scores.rows() != truth.rows() || scores.cols() != truth.cols()) {
    throw std::invalid_argument("map_scores: shape mismatch");
  }
  if (static_cast<Index>(class_names.size()) != scores.cols()) {
    throw std::invalid_argument("map_scores: class name count mismatch");
  }
  const Index n = scores.rows();
  const Index v = scores.cols();

  MetricReport report;
  double macro_sum = 0.0;
  std::size_t macro_count = 0;
  for (Index c = 0; c < v; ++c) {
    std::vector<double> col_scores(static_cast<std::size_t>(n));
    std::vector<double> col_truth(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      col_scores[static_cast<std::size_t>(i)] = scores(i, c);
      col_truth[static_cast<std::size_t>(i)] = truth(i, c);
    }
    try {
      const double ap = average_precision(col_scores, col_truth);
      report.ap_per_class[class_names[static_cast<std::size_t>(c)]] = ap;
      macro_sum += ap;
      ++macro_count;
    } catch (const UndefinedApError&) {
      report.skipped_classes.push_back(class_names[static_cast<std::size_t>(c)]);
    }
  }
  if (macro_count == 0) throw UndefinedApError("every class lacks positives");
  report.map_macro = macro_sum / static_cast<double>(macro_count);

  // Micro pools every (sample, class) cell, row-major.
  std::vector<double> flat_scores(static_cast<std::size_t>(n * v));
  std::vector<double> flat_truth(static_cast<std::size_t>(n * v));
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < v; ++c) {
      flat_scores[static_cast<std::size_t>(i * v + c)] = scores(i, c);
      flat_truth[static_cast<std::size_t>(i * v + c)] = truth(i, c);
    }
  }
  report.map_micro = average_precision(flat_scores, flat_truth);

  std::size_t tp = 0, fp = 0, fn = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < v; ++c) {
      const bool pred = scores(i, c) >= 0.5;
      const bool pos = truth(i, c) == 1.0;
      if (pred && pos) ++tp;
      if (pred && !pos) ++fp;
      if (!pred && pos) ++fn;
    }
  }
  const double denom = static_cast<double>(2 * tp + fp + fn);
  report.f1_micro = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
  return report;
}

DetectionMetrics detection_metrics(const NoiseLedger& ledger, const std::set<std::size_t>& flagged) {
  std::size_t hit = 0;
  for (std::size_t s : flagged) hit += ledger.noisy_sample_set.count(s);
  DetectionMetrics out;
  out.precision = flagged.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(flagged.size());
  out.recall = ledger.noisy_sample_set.empty()
                   ? 1.0
                   : static_cast<double>(hit) / static_cast<double>(ledger.noisy_sample_set.size());
  return out;
}

std::string metric_report_to_json(const MetricReport& report) {
  nlohmann::json doc;
  doc["map_macro"] = report.map_macro;
  doc["map_micro"] = report.map_micro;
  doc["f1_micro"] = report.f1_micro;
  doc["ap_per_class"] = report.ap_per_class;
  doc["skipped_classes"] = report.skipped_classes;
  return doc.dump(2) + "\n";
}

std::string metric_report_to_csv(const MetricReport& report) {
  std::string out = "metric,value\n";
  out += "map_macro," + format_double(report.map_macro) + "\n";
  out += "map_micro," + format_double(report.map_micro) + "\n";
  out += "f1_micro," + format_double(report.f1_micro) + "\n";
  for (const auto& [name, ap] : report.ap_per_class) {
    out += "ap:" + name + "," + format_double(ap) + "\n";
  }
  return out;
}

}  // namespace rcml
