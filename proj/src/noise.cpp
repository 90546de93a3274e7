#include "rcml/noise.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "rcml/rng.hpp"

namespace rcml {

void NoiseSpec::validate() const {
  if (!(sampling_rate >= 0.0 && sampling_rate <= 1.0)) {
    throw std::invalid_argument("sampling_rate must be in [0, 1]");
  }
  if (!(class_rate >= 0.0 && class_rate <= 1.0)) {
    throw std::invalid_argument("class_rate must be in [0, 1]");
  }
}

InjectResult inject_rns(const Matrix& labels, const NoiseSpec& spec) {
  spec.validate();
  const Index n = labels.rows();
  const Index v = labels.cols();
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < v; ++c) {
      const double y = labels(i, c);
      if (y != 0.0 && y != 1.0) {
        throw std::invalid_argument("inject_rns: non-binary label at row " + std::to_string(i));
      }
    }
  }

  const auto n_sel = static_cast<std::size_t>(
      std::llround(spec.sampling_rate * static_cast<double>(n)));
  const auto k = static_cast<std::size_t>(std::llround(spec.class_rate * static_cast<double>(v)));

  InjectResult out;
  out.labels = labels;
  if (n_sel == 0 || k == 0) return out;

  Rng rng(spec.seed);
  const auto samples = rng.choose(static_cast<std::size_t>(n), n_sel);
  for (std::size_t s : samples) {
    const auto positions = rng.choose(static_cast<std::size_t>(v), k);
    for (std::size_t c : positions) {
      const Index i = static_cast<Index>(s);
      const Index j = static_cast<Index>(c);
      const bool was_one = out.labels(i, j) == 1.0;
      out.labels(i, j) = was_one ? 0.0 : 1.0;
      out.ledger.flips.push_back({s, c, was_one ? FlipDirection::removed : FlipDirection::added});
    }
  }
  std::sort(out.ledger.flips.begin(), out.ledger.flips.end(), [](const Flip& a, const Flip& b) {
    return a.sample_index != b.sample_index ? a.sample_index < b.sample_index
                                            : a.class_index < b.class_index;
  });
  for (const Flip& f : out.ledger.flips) out.ledger.noisy_sample_set.insert(f.sample_index);
  return out;
}

NoiseSpec rate_to_spec(double effective_rate, std::uint64_t seed) {
  if (!(effective_rate >= 0.0 && effective_rate <= 0.5)) {
    throw std::invalid_argument("effective noise rate must be in [0, 0.5]");
  }
  NoiseSpec spec;
  spec.seed = seed;
  spec.sampling_rate = std::min(1.0, 2.0 * effective_rate);
  spec.class_rate = effective_rate == 0.0 ? 0.0 : effective_rate / spec.sampling_rate;
  return spec;
}

namespace {

const char* direction_name(FlipDirection d) {
  return d == FlipDirection::added ? "added" : "removed";
}

FlipDirection direction_from_name(const std::string& s) {
  if (s == "added") return FlipDirection::added;
  if (s == "removed") return FlipDirection::removed;
  throw std::invalid_argument("unknown flip direction '" + s + "'");
}

template <typename T>
std::map<std::string, std::size_t> index_by_name(const std::vector<T>& names) {
  std::map<std::string, std::size_t> m;
  for (std::size_t i = 0; i < names.size(); ++i) m[names[i]] = i;
  return m;
}

}  // namespace

std::string ledger_to_json(const NoiseLedger& ledger, const NoiseSpec& spec,
                           const std::vector<std::string>& sample_ids,
                           const std::vector<std::string>& class_names) {
  nlohmann::json doc;
  doc["spec"] = {{"sampling_rate", spec.sampling_rate},
                 {"class_rate", spec.class_rate},
                 {"seed", spec.seed}};
  auto& flips = doc["flips"] = nlohmann::json::array();
  for (const Flip& f : ledger.flips) {
    flips.push_back({{"sample_id", sample_ids.at(f.sample_index)},
                     {"class_name", class_names.at(f.class_index)},
                     {"direction", direction_name(f.direction)}});
  }
  return doc.dump(2) + "\n";
}

LedgerFile ledger_from_json(const std::string& text, const std::vector<std::string>& sample_ids,
                            const std::vector<std::string>& class_names) {
  const auto doc = nlohmann::json::parse(text);
  LedgerFile out;
  const auto& spec = doc.at("spec");
  out.spec.sampling_rate = spec.at("sampling_rate").get<double>();
  out.spec.class_rate = spec.at("class_rate").get<double>();
  out.spec.seed = spec.at("seed").get<std::uint64_t>();
  out.spec.validate();

  const auto sample_index = index_by_name(sample_ids);
  const auto class_index = index_by_name(class_names);
  for (const auto& rec : doc.at("flips")) {
    Flip f;
    const auto sid = rec.at("sample_id").get<std::string>();
    const auto cname = rec.at("class_name").get<std::string>();
    const auto sit = sample_index.find(sid);
    if (sit == sample_index.end()) throw std::invalid_argument("ledger names unknown sample '" + sid + "'");
    const auto cit = class_index.find(cname);
    if (cit == class_index.end()) throw std::invalid_argument("ledger names unknown class '" + cname + "'");
    f.sample_index = sit->second;
    f.class_index = cit->second;
    f.direction = direction_from_name(rec.at("direction").get<std::string>());
    out.ledger.flips.push_back(f);
  }
  std::sort(out.ledger.flips.begin(), out.ledger.flips.end(), [](const Flip& a, const Flip& b) {
    return a.sample_index != b.sample_index ? a.sample_index < b.sample_index
                                            : a.class_index < b.class_index;
  });
  for (const Flip& f : out.ledger.flips) out.ledger.noisy_sample_set.insert(f.sample_index);
  return out;
}

}  // namespace rcml
