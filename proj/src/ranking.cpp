#include "rcml/ranking.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace rcml {

void LassoConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in [0, 1]");
  if (std::abs(alpha + beta - 1.0) > 1e-12) throw std::invalid_argument("alpha + beta must equal 1");
}

double ranking_error(double p_assigned, double p_unassigned) {
  if (!(p_assigned >= 0.0 && p_assigned <= 1.0) || !(p_unassigned >= 0.0 && p_unassigned <= 1.0)) {
    throw std::invalid_argument("ranking_error expects probabilities in [0, 1]");
  }
  return std::max(0.0, 1.0 - 2.0 * (p_assigned - p_unassigned));
}

RankingBreakdown group_lasso(const RowVector& probs, const RowVector& assigned, const LassoConfig& cfg) {
  cfg.validate();
  if (probs.size() != assigned.size()) throw std::invalid_argument("group_lasso: shape mismatch");
  std::vector<Index> in_set, out_set;
  for (Index v = 0; v < assigned.size(); ++v) {
    const double a = assigned(v);
    if (a == 1.0) {
      in_set.push_back(v);
    } else if (a == 0.0) {
      out_set.push_back(v);
    } else {
      throw std::invalid_argument("group_lasso: assigned vector must be binary");
    }
  }

  RankingBreakdown out;
  for (Index u : out_set) {
    double sq = 0.0;
    for (Index l : in_set) sq += ranking_error(probs(l), probs(u));
    out.missing_group_by_label[u] = std::sqrt(sq);
  }
  for (Index l : in_set) {
    double sq = 0.0;
    for (Index u : out_set) sq += ranking_error(probs(l), probs(u));
    out.wrong_group_by_label[l] = std::sqrt(sq);
  }
  for (const auto& [label, mag] : out.missing_group_by_label) out.missing_term += mag;
  for (const auto& [label, mag] : out.wrong_group_by_label) out.wrong_term += mag;
  out.missing_term *= cfg.alpha;
  out.wrong_term *= cfg.beta;
  out.total = out.missing_term + out.wrong_term;
  return out;
}

}  // namespace rcml
