#pragma once

#include <string>
#include <vector>

#include "rcml/dataset.hpp"
#include "rcml/linalg.hpp"

namespace rcml {

// Shortest decimal string that round-trips the exact double.
std::string format_double(double value);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Writes features.csv (id,f0..fD-1) and labels.csv (id,<class names>) next to
// each other under the given paths.
void write_dataset_csv(const MultiLabelDataset& ds, const std::string& features_path,
                       const std::string& labels_path);

}  // namespace rcml
