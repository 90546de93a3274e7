#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "rcml/linalg.hpp"

namespace rcml {

// Random noise sampling: pick a fraction of samples, flip a fraction of each
// picked sample's label positions.
struct NoiseSpec {
  double sampling_rate = 0.0;  // fraction of samples that receive flips
  double class_rate = 0.0;     // fraction of label positions flipped per picked sample
  std::uint64_t seed = 0;

  void validate() const;  // both rates in [0, 1]
};

enum class FlipDirection {
  added,    // 0 -> 1
  removed,  // 1 -> 0
};

struct Flip {
  std::size_t sample_index = 0;
  std::size_t class_index = 0;
  FlipDirection direction = FlipDirection::added;

  friend bool operator==(const Flip&, const Flip&) = default;
};

// Ground-truth record of what was corrupted. noisy_sample_set is derived from
// flips: a sample picked for flipping but assigned zero positions is absent.
struct NoiseLedger {
  std::vector<Flip> flips;  // sorted by (sample_index, class_index)
  std::set<std::size_t> noisy_sample_set;
};

struct InjectResult {
  Matrix labels;  // corrupted copy; input is untouched
  NoiseLedger ledger;
};

InjectResult inject_rns(const Matrix& labels, const NoiseSpec& spec);

// Decomposes a single effective corruption rate r = sampling_rate * class_rate
// into the pair used by inject_rns: sampling_rate = min(1, 2r), class_rate =
// r / sampling_rate (0 when r = 0).
NoiseSpec rate_to_spec(double effective_rate, std::uint64_t seed);

// Ledger files carry the NoiseSpec that produced them plus one record per
// flip, keyed by sample id and class name rather than raw indices.
struct LedgerFile {
  NoiseSpec spec;
  NoiseLedger ledger;
};

std::string ledger_to_json(const NoiseLedger& ledger, const NoiseSpec& spec,
                           const std::vector<std::string>& sample_ids,
                           const std::vector<std::string>& class_names);
LedgerFile ledger_from_json(const std::string& text, const std::vector<std::string>& sample_ids,
                            const std::vector<std::string>& class_names);

}  // namespace rcml
