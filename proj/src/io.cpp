#include "rcml/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace rcml {

std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failure on " + path);
}

void write_dataset_csv(const MultiLabelDataset& ds, const std::string& features_path,
                       const std::string& labels_path) {
  std::string features = "id";
  for (Index j = 0; j < ds.feature_dim(); ++j) features += ",f" + std::to_string(j);
  features += "\n";
  std::string labels = "id";
  for (const std::string& name : ds.class_names) labels += "," + name;
  labels += "\n";
  for (Index i = 0; i < ds.num_samples(); ++i) {
    const std::string& id = ds.sample_ids[static_cast<std::size_t>(i)];
    features += id;
    for (Index j = 0; j < ds.feature_dim(); ++j) features += "," + format_double(ds.features(i, j));
    features += "\n";
    labels += id;
    for (Index c = 0; c < ds.num_classes(); ++c) {
      labels += ds.labels(i, c) == 1.0 ? ",1" : ",0";
    }
    labels += "\n";
  }
  write_text_file(features_path, features);
  write_text_file(labels_path, labels);
}

}  // namespace rcml
