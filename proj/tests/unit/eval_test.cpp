#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcml/eval.hpp"
#include "rcml/rng.hpp"

using namespace rcml;

namespace {

// Quadratic-time AP oracle: precision at a positive's rank is the number of
// positives scoring better or equal (earlier index on ties) over that rank.
double naive_ap(const std::vector<double>& scores, const std::vector<double>& truth) {
  const std::size_t n = scores.size();
  const auto before = [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  double sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (truth[i] != 1.0) continue;
    ++positives;
    std::size_t rank = 1, hits = 1;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !before(j, i)) continue;
      ++rank;
      if (truth[j] == 1.0) ++hits;
    }
    sum += static_cast<double>(hits) / static_cast<double>(rank);
  }
  return sum / static_cast<double>(positives);
}

}  // namespace

TEST_CASE("average precision worked values") {
  // Positives at ranks 1 and 3: (1/1 + 2/3) / 2.
  CHECK(average_precision({0.9, 0.8, 0.7, 0.1}, {1, 0, 1, 0}) ==
        doctest::Approx(0.833333).epsilon(1e-6));
  // Single positive ranked last of four.
  CHECK(average_precision({0.9, 0.8, 0.7, 0.1}, {0, 0, 0, 1}) == doctest::Approx(0.25).epsilon(1e-12));
  // Perfect ranking.
  CHECK(average_precision({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
  // All positives: AP is 1 regardless of the scores.
  CHECK(average_precision({0.2, 0.9}, {1, 1}) == 1.0);
}

TEST_CASE("average precision breaks ties by ascending index") {
  // The positive shares its score with an earlier negative, so the negative
  // outranks it: AP = 1/2.
  CHECK(average_precision({0.5, 0.5}, {0, 1}) == doctest::Approx(0.5).epsilon(1e-12));
  // Reversed order: the positive comes first.
  CHECK(average_precision({0.5, 0.5}, {1, 0}) == 1.0);
}

TEST_CASE("average precision input validation") {
  CHECK_THROWS_AS(average_precision({0.5, 0.5}, {0, 0}), UndefinedApError);
  CHECK_THROWS_AS(average_precision({0.5}, {1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(average_precision({0.5, 0.5}, {1, 0.5}), std::invalid_argument);
}

TEST_CASE("average precision matches the quadratic oracle on random cases") {
  Rng rng(41);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> scores(n), truth(n);
    bool any_pos = false;
    for (std::size_t i = 0; i < n; ++i) {
      // A coarse score grid makes ties common.
      scores[i] = static_cast<double>(rng.below(5)) / 4.0;
      truth[i] = rng.next_unit() < 0.4 ? 1.0 : 0.0;
      any_pos |= truth[i] == 1.0;
    }
    if (!any_pos) truth[rng.below(n)] = 1.0;
    CHECK(average_precision(scores, truth) == doctest::Approx(naive_ap(scores, truth)).epsilon(1e-12));
  }
}

TEST_CASE("ap is invariant under monotone transforms of the scores") {
  Rng rng(43);
  std::vector<double> scores(20), truth(20);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.next_unit();
    truth[i] = rng.next_unit() < 0.5 ? 1.0 : 0.0;
  }
  truth[0] = 1.0;
  std::vector<double> transformed = scores;
  for (double& s : transformed) s = std::sqrt(s);
  CHECK(average_precision(scores, truth) == average_precision(transformed, truth));
}

TEST_CASE("map_scores on a frozen 3x2 case") {
  Matrix scores(3, 2), truth(3, 2);
  scores << 0.9, 0.2, 0.6, 0.8, 0.4, 0.7;
  truth << 0, 1, 1, 0, 1, 1;
  const MetricReport r = map_scores(scores, truth, {"a", "b"});

  // Class a: positives at scores 0.6, 0.4 against a 0.9 negative -> (1/2 + 2/3) / 2.
  CHECK(r.ap_per_class.at("a") == doctest::Approx((0.5 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
  // Class b: positives at 0.2 and 0.7 against an 0.8 negative.
  CHECK(r.ap_per_class.at("b") == doctest::Approx((0.5 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
  CHECK(r.map_macro == doctest::Approx(0.583333).epsilon(1e-6));
  // Pooled cells sorted by score: 0.9(-), 0.8(-), 0.7(+), 0.6(+), 0.4(+), 0.2(+).
  CHECK(r.map_micro == doctest::Approx(0.525).epsilon(1e-6));
  // Thresholding at 0.5: predictions (1,0),(1,1),(0,1) -> tp=2, fp=2, fn=2.
  CHECK(r.f1_micro == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.skipped_classes.empty());
}

TEST_CASE("perfect predictions score 1 everywhere") {
  Matrix scores(2, 2), truth(2, 2);
  scores << 0.9, 0.1, 0.2, 0.8;
  truth << 1, 0, 0, 1;
  const MetricReport r = map_scores(scores, truth, {"a", "b"});
  CHECK(r.map_macro == 1.0);
  CHECK(r.map_micro == 1.0);
  CHECK(r.f1_micro == 1.0);
}

TEST_CASE("classes without positives are skipped by macro but kept out of ap_per_class") {
  Matrix scores(2, 3), truth(2, 3);
  scores << 0.9, 0.4, 0.3, 0.2, 0.6, 0.1;
  truth << 1, 0, 0, 0, 1, 0;
  const MetricReport r = map_scores(scores, truth, {"a", "b", "empty"});
  CHECK(r.ap_per_class.size() == 2);
  CHECK(r.ap_per_class.count("empty") == 0);
  CHECK(r.skipped_classes == std::vector<std::string>{"empty"});
  CHECK(r.map_macro == doctest::Approx(0.5 * (r.ap_per_class.at("a") + r.ap_per_class.at("b"))).epsilon(1e-12));

  Matrix no_pos = Matrix::Zero(2, 3);
  CHECK_THROWS_WITH_AS(map_scores(scores, no_pos, {"a", "b", "empty"}),
                       doctest::Contains("every class lacks positives"), UndefinedApError);
}

TEST_CASE("f1 handles the all-negative-prediction edge by returning zero") {
  Matrix scores(2, 2), truth(2, 2);
  scores << 0.1, 0.2, 0.3, 0.4;  // nothing reaches the 0.5 threshold
  truth << 1, 0, 0, 1;
  const MetricReport r = map_scores(scores, truth, {"a", "b"});
  CHECK(r.f1_micro == 0.0);
}

TEST_CASE("metric bounds hold on random inputs") {
  Rng rng(47);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.below(10));
    Matrix scores(n, 3), truth(n, 3);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < 3; ++j) {
        scores(i, j) = rng.next_unit();
        truth(i, j) = rng.next_unit() < 0.5 ? 1.0 : 0.0;
      }
    }
    truth(0, 0) = truth(0, 1) = truth(0, 2) = 1.0;
    const MetricReport r = map_scores(scores, truth, {"a", "b", "c"});
    CHECK(r.map_macro >= 0.0);
    CHECK(r.map_macro <= 1.0);
    CHECK(r.map_micro >= 0.0);
    CHECK(r.map_micro <= 1.0);
    CHECK(r.f1_micro >= 0.0);
    CHECK(r.f1_micro <= 1.0);
  }
}

TEST_CASE("detection metrics against a hand ledger") {
  NoiseLedger ledger;
  ledger.noisy_sample_set = {1, 3};
  // Two of three flags are right, one of the two noisy samples is caught.
  CHECK(detection_metrics(ledger, {0, 1, 3}).precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(detection_metrics(ledger, {1, 5}).recall == doctest::Approx(0.5).epsilon(1e-12));

  const DetectionMetrics exact = detection_metrics(ledger, {1, 3});
  CHECK(exact.precision == 1.0);
  CHECK(exact.recall == 1.0);

  const DetectionMetrics disjoint = detection_metrics(ledger, {0, 2});
  CHECK(disjoint.precision == 0.0);
  CHECK(disjoint.recall == 0.0);

  // Degenerate sides default to perfect scores.
  CHECK(detection_metrics(ledger, {}).precision == 1.0);
  CHECK(detection_metrics(NoiseLedger{}, {4}).recall == 1.0);
}

TEST_CASE("metric report serialization") {
  MetricReport r;
  r.map_macro = 0.5;
  r.map_micro = 0.25;
  r.f1_micro = 0.75;
  r.ap_per_class = {{"a", 1.0}, {"b", 0.125}};
  r.skipped_classes = {"c"};

  const nlohmann::json doc = nlohmann::json::parse(metric_report_to_json(r));
  CHECK(doc.at("map_macro").get<double>() == 0.5);
  CHECK(doc.at("map_micro").get<double>() == 0.25);
  CHECK(doc.at("f1_micro").get<double>() == 0.75);
  CHECK(doc.at("ap_per_class").at("b").get<double>() == 0.125);
  CHECK(doc.at("skipped_classes").at(0).get<std::string>() == "c");

  const std::string csv = metric_report_to_csv(r);
  CHECK(csv.rfind("metric,value\n", 0) == 0);
  CHECK(csv.find("map_macro,0.5\n") != std::string::npos);
  CHECK(csv.find("map_micro,0.25\n") != std::string::npos);
  CHECK(csv.find("f1_micro,0.75\n") != std::string::npos);
  CHECK(csv.find("ap:a,1\n") != std::string::npos);
  CHECK(csv.find("ap:b,0.125\n") != std::string::npos);
}
