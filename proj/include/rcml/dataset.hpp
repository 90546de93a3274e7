#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcml/linalg.hpp"

namespace rcml {

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeMismatchError : DatasetError {
  using DatasetError::DatasetError;
};
struct NonBinaryLabelError : DatasetError {
  using DatasetError::DatasetError;
};
struct DuplicateIdError : DatasetError {
  using DatasetError::DatasetError;
};
struct UnmatchedIdError : DatasetError {
  using DatasetError::DatasetError;
};

/// A multi-label dataset: N samples with d-dimensional features and V binary
/// labels. `clean_labels`, when present, holds the pre-noise truth and is
/// used for evaluation only; training code never reads it.
struct MultiLabelDataset {
  Matrix features;                      // N x d
  Matrix labels;                        // N x V, entries exactly 0 or 1
  std::optional<Matrix> clean_labels;   // same shape as labels when present
  std::vector<std::string> class_names; // V
  std::vector<std::string> sample_ids;  // N

  Index num_samples() const { return features.rows(); }
  Index feature_dim() const { return features.cols(); }
  Index num_classes() const { return labels.cols(); }

  void validate() const;

  /// New dataset holding the given rows, in the given order.
  MultiLabelDataset subset(const std::vector<std::size_t>& rows) const;
};

struct SplitSpec {
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticSpec {
  std::size_t n = 2000;
  std::size_t v = 8;
  std::size_t d = 16;
  std::size_t prototypes_per_class = 3;
  double label_radius = 4.5;
  double feature_noise_sigma = 0.75;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Loads a dataset from two CSV files: features with header `id,f0,...,f{d-1}`
/// and labels with header `id,<class_name_0>,...`. Rows are matched by id and
/// returned sorted by ascending id. `clean_labels` is absent.
MultiLabelDataset load_dataset(const std::string& features_path, const std::string& labels_path);

/// Deterministic synthetic generator. Prototype points are drawn per class;
/// each sample is a noisy copy of a random prototype and receives label v iff
/// it lies within `label_radius` of any prototype of class v. Samples with no
/// label are redrawn, so every row has at least one positive. `clean_labels`
/// is a copy of `labels`.
MultiLabelDataset generate_synthetic(const SyntheticSpec& spec);

struct SplitResult {
  MultiLabelDataset train;
  MultiLabelDataset val;
  MultiLabelDataset test;
};

/// Seeded shuffle split. Train takes round(train_fraction*N) samples (half
/// away from zero), val takes round(val_fraction*N), test the remainder.
SplitResult split(const MultiLabelDataset& ds, const SplitSpec& spec);

/// The labeling rule used by generate_synthetic, exposed so the assignment
/// can be re-checked sample by sample.
bool within_radius_of_class(const RowVector& x, const Matrix& class_prototypes, double radius);

/// Prototype matrix [prototypes_per_class x d] for one class, as drawn by
/// generate_synthetic for the given spec.
std::vector<Matrix> synthetic_prototypes(const SyntheticSpec& spec);

}  // namespace rcml
