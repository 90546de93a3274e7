#pragma once

#include <map>

#include "rcml/linalg.hpp"

namespace rcml {

struct LassoConfig {
  double alpha = 0.2;  // weight on the missing-label term
  double beta = 0.8;   // weight on the wrong-label term; alpha + beta = 1

  void validate() const;
};

// Hinge on the margin between an assigned and an unassigned label's
// probability: max(0, 1 - 2 * (p_assigned - p_unassigned)). Zero once the
// assigned label leads by at least half, maximal (3) when fully inverted.
double ranking_error(double p_assigned, double p_unassigned);

struct RankingBreakdown {
  double total = 0.0;
  double missing_term = 0.0;  // alpha-weighted
  double wrong_term = 0.0;    // beta-weighted
  // Per-label group magnitudes (L2 norms of that label's error vector),
  // before the alpha/beta weighting.
  std::map<Index, double> missing_group_by_label;
  std::map<Index, double> wrong_group_by_label;
};

// Group-lasso ranking loss for one sample. Groups the pairwise ranking
// errors by unassigned label (missing term) and by assigned label (wrong
// term); either side being empty contributes zero.
RankingBreakdown group_lasso(const RowVector& probs, const RowVector& assigned, const LassoConfig& cfg);

}  // namespace rcml
