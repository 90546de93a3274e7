#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcml/linalg.hpp"
#include "rcml/noise.hpp"

namespace rcml {

// AP over a truth vector with no positives has no value.
struct UndefinedApError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MetricReport {
  double map_macro = 0.0;
  double map_micro = 0.0;
  double f1_micro = 0.0;
  std::map<std::string, double> ap_per_class;
  std::vector<std::string> skipped_classes;  // classes with no positives
};

// Average precision: rank by descending score (ties broken by ascending
// index), then mean precision at each positive's rank. Throws
// UndefinedApError when truth has no positives.
double average_precision(const std::vector<double>& scores, const std::vector<double>& truth);

// scores are probabilities in [0, 1]; truth is binary. Macro mAP averages
// per-class AP over classes that have at least one positive; micro AP pools
// all (sample, class) cells row-major. F1 thresholds at p >= 0.5.
MetricReport map_scores(const Matrix& scores, const Matrix& truth, const std::vector<std::string>& class_names);

struct DetectionMetrics {
  double precision = 0.0;
  double recall = 0.0;
};

// Flagged-set quality against the ledger's noisy samples. Empty flagged set
// gives precision 1; empty noisy set gives recall 1.
DetectionMetrics detection_metrics(const NoiseLedger& ledger, const std::set<std::size_t>& flagged);

std::string metric_report_to_json(const MetricReport& report);
// Rows of metric,value covering the three headline metrics and per-class AP.
std::string metric_report_to_csv(const MetricReport& report);

}  // namespace rcml
