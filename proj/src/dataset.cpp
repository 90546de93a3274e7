#include "rcml/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rcml/rng.hpp"

namespace rcml {

namespace {

std::size_t round_half_away(double x) {
  return static_cast<std::size_t>(std::llround(x));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_double(const std::string& s, const std::string& context) {
  double value = 0.0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw DatasetError("could not parse number '" + s + "' in " + context);
  }
  return value;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> cells;  // per row, without the id column
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DatasetError("empty file " + path);
  table.header = split_csv_line(line);
  if (table.header.empty() || table.header[0] != "id") {
    throw DatasetError("first header column must be 'id' in " + path);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != table.header.size()) {
      throw ShapeMismatchError("row with " + std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(table.header.size()) + " in " + path);
    }
    table.ids.push_back(cells[0]);
    cells.erase(cells.begin());
    table.cells.push_back(std::move(cells));
  }
  return table;
}

// Sorts rows by ascending id, rejecting duplicates.
std::vector<std::size_t> sorted_order(const std::vector<std::string>& ids, const std::string& path) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (ids[order[i - 1]] == ids[order[i]]) {
      throw DuplicateIdError("duplicate id '" + ids[order[i]] + "' in " + path);
    }
  }
  return order;
}

}  // namespace

void MultiLabelDataset::validate() const {
  const Index n = features.rows();
  const Index v = labels.cols();
  if (labels.rows() != n) throw ShapeMismatchError("labels row count differs from features");
  if (v < 2) throw DatasetError("need at least 2 classes");
  if (features.cols() < 1) throw DatasetError("need at least 1 feature dimension");
  if (static_cast<Index>(class_names.size()) != v) throw ShapeMismatchError("class_names size mismatch");
  if (static_cast<Index>(sample_ids.size()) != n) throw ShapeMismatchError("sample_ids size mismatch");
  if (!features.allFinite()) throw DatasetError("non-finite feature value");
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < v; ++c) {
      const double y = labels(i, c);
      if (y != 0.0 && y != 1.0) throw NonBinaryLabelError("non-binary label at row " + std::to_string(i));
    }
  }
  if (clean_labels) {
    if (clean_labels->rows() != n || clean_labels->cols() != v) {
      throw ShapeMismatchError("clean_labels shape differs from labels");
    }
  }
}

MultiLabelDataset MultiLabelDataset::subset(const std::vector<std::size_t>& rows) const {
  MultiLabelDataset out;
  out.features.resize(static_cast<Index>(rows.size()), features.cols());
  out.labels.resize(static_cast<Index>(rows.size()), labels.cols());
  if (clean_labels) out.clean_labels = Matrix(static_cast<Index>(rows.size()), labels.cols());
  out.class_names = class_names;
  out.sample_ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = static_cast<Index>(rows[i]);
    out.features.row(static_cast<Index>(i)) = features.row(r);
    out.labels.row(static_cast<Index>(i)) = labels.row(r);
    if (clean_labels) out.clean_labels->row(static_cast<Index>(i)) = clean_labels->row(r);
    out.sample_ids.push_back(sample_ids[rows[i]]);
  }
  return out;
}

void SplitSpec::validate() const {
  if (train_fraction < 0 || val_fraction < 0 || test_fraction < 0) {
    throw std::invalid_argument("split fractions must be nonnegative");
  }
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-12) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
}

void SyntheticSpec::validate() const {
  if (v < 2) throw std::invalid_argument("synthetic spec: v must be >= 2");
  if (d < 1) throw std::invalid_argument("synthetic spec: d must be >= 1");
  if (prototypes_per_class < 1) throw std::invalid_argument("synthetic spec: prototypes_per_class must be >= 1");
  if (!(label_radius > 0)) throw std::invalid_argument("synthetic spec: label_radius must be positive");
  if (!(feature_noise_sigma > 0)) throw std::invalid_argument("synthetic spec: feature_noise_sigma must be positive");
}

MultiLabelDataset load_dataset(const std::string& features_path, const std::string& labels_path) {
  CsvTable ftab = read_csv(features_path);
  CsvTable ltab = read_csv(labels_path);

  const std::size_t d = ftab.header.size() - 1;
  const std::size_t v = ltab.header.size() - 1;
  for (std::size_t j = 0; j < d; ++j) {
    const std::string expected = "f" + std::to_string(j);
    if (ftab.header[j + 1] != expected) {
      throw DatasetError("feature header column " + std::to_string(j + 1) + " must be '" + expected + "'");
    }
  }
  if (v < 2) throw DatasetError("labels file must declare at least 2 classes");
  if (ftab.ids.size() != ltab.ids.size()) {
    throw ShapeMismatchError("row count mismatch: " + std::to_string(ftab.ids.size()) + " feature rows vs " +
                             std::to_string(ltab.ids.size()) + " label rows");
  }

  const auto forder = sorted_order(ftab.ids, features_path);
  const auto lorder = sorted_order(ltab.ids, labels_path);
  for (std::size_t i = 0; i < forder.size(); ++i) {
    const std::string& fid = ftab.ids[forder[i]];
    const std::string& lid = ltab.ids[lorder[i]];
    if (fid != lid) throw UnmatchedIdError("unmatched id: " + fid + "/" + lid);
  }

  const std::size_t n = forder.size();
  MultiLabelDataset ds;
  ds.features.resize(static_cast<Index>(n), static_cast<Index>(d));
  ds.labels.resize(static_cast<Index>(n), static_cast<Index>(v));
  ds.class_names.assign(ltab.header.begin() + 1, ltab.header.end());
  ds.sample_ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.sample_ids.push_back(ftab.ids[forder[i]]);
    const auto& frow = ftab.cells[forder[i]];
    for (std::size_t j = 0; j < d; ++j) {
      ds.features(static_cast<Index>(i), static_cast<Index>(j)) = parse_double(frow[j], features_path);
    }
    const auto& lrow = ltab.cells[lorder[i]];
    for (std::size_t j = 0; j < v; ++j) {
      const std::string& cell = lrow[j];
      if (cell == "0") {
        ds.labels(static_cast<Index>(i), static_cast<Index>(j)) = 0.0;
      } else if (cell == "1") {
        ds.labels(static_cast<Index>(i), static_cast<Index>(j)) = 1.0;
      } else {
        throw NonBinaryLabelError("non-binary label '" + cell + "' for id " + ds.sample_ids.back());
      }
    }
  }
  ds.validate();
  return ds;
}

bool within_radius_of_class(const RowVector& x, const Matrix& class_prototypes, double radius) {
  for (Index p = 0; p < class_prototypes.rows(); ++p) {
    if ((x - class_prototypes.row(p)).norm() <= radius) return true;
  }
  return false;
}

std::vector<Matrix> synthetic_prototypes(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(mix_seed(spec.seed, 0));
  std::vector<Matrix> protos(spec.v);
  for (std::size_t c = 0; c < spec.v; ++c) {
    Matrix m(static_cast<Index>(spec.prototypes_per_class), static_cast<Index>(spec.d));
    for (Index p = 0; p < m.rows(); ++p) {
      for (Index j = 0; j < m.cols(); ++j) m(p, j) = rng.normal();
    }
    protos[c] = std::move(m);
  }
  return protos;
}

MultiLabelDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto protos = synthetic_prototypes(spec);
  Rng rng(mix_seed(spec.seed, 1));

  MultiLabelDataset ds;
  ds.features.resize(static_cast<Index>(spec.n), static_cast<Index>(spec.d));
  ds.labels = Matrix::Zero(static_cast<Index>(spec.n), static_cast<Index>(spec.v));
  for (std::size_t c = 0; c < spec.v; ++c) ds.class_names.push_back("c" + std::to_string(c));

  std::size_t id_width = 1;
  for (std::size_t x = spec.n > 0 ? spec.n - 1 : 0; x >= 10; x /= 10) ++id_width;

  RowVector x(static_cast<Index>(spec.d));
  std::vector<double> row_labels(spec.v);
  for (std::size_t i = 0; i < spec.n; ++i) {
    constexpr int kMaxAttempts = 10000;
    int attempt = 0;
    for (;; ++attempt) {
      if (attempt >= kMaxAttempts) {
        throw DatasetError("synthetic generator failed to place a labeled sample; widen label_radius");
      }
      const std::size_t cls = static_cast<std::size_t>(rng.below(spec.v));
      const std::size_t proto = static_cast<std::size_t>(rng.below(spec.prototypes_per_class));
      for (Index j = 0; j < x.size(); ++j) {
        x(j) = protos[cls](static_cast<Index>(proto), j) + spec.feature_noise_sigma * rng.normal();
      }
      bool any = false;
      for (std::size_t c = 0; c < spec.v; ++c) {
        row_labels[c] = within_radius_of_class(x, protos[c], spec.label_radius) ? 1.0 : 0.0;
        any = any || row_labels[c] == 1.0;
      }
      if (any) break;
    }
    ds.features.row(static_cast<Index>(i)) = x;
    for (std::size_t c = 0; c < spec.v; ++c) ds.labels(static_cast<Index>(i), static_cast<Index>(c)) = row_labels[c];
    std::string id = std::to_string(i);
    ds.sample_ids.push_back("s" + std::string(id_width - std::min(id_width, id.size()), '0') + id);
  }
  ds.clean_labels = ds.labels;
  ds.validate();
  return ds;
}

SplitResult split(const MultiLabelDataset& ds, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = static_cast<std::size_t>(ds.num_samples());
  std::size_t n_train = round_half_away(spec.train_fraction * static_cast<double>(n));
  n_train = std::min(n_train, n);
  std::size_t n_val = round_half_away(spec.val_fraction * static_cast<double>(n));
  n_val = std::min(n_val, n - n_train);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(perm);

  auto take = [&](std::size_t begin, std::size_t count) {
    std::vector<std::size_t> rows(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                                  perm.begin() + static_cast<std::ptrdiff_t>(begin + count));
    std::sort(rows.begin(), rows.end());
    return ds.subset(rows);
  };

  SplitResult out;
  out.train = take(0, n_train);
  out.val = take(n_train, n_val);
  out.test = take(n_train + n_val, n - n_train - n_val);
  return out;
}

}  // namespace rcml
