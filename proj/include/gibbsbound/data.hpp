#pragma once

// Labeled binary-classification datasets: IDX (MNIST) and CIFAR-10 binary
// readers, binarization, label randomization and a synthetic two-cluster
// generator. Datasets are immutable values once built.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gibbs {

/// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * cols, cols};
  }
  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

struct LabeledDataset {
  std::string name;
  Matrix features;
  /// +1 / -1 after binarization; empty for raw (multi-class) datasets.
  std::vector<int> labels;
  /// Integer class labels as read from disk; empty for synthetic data.
  std::vector<int> raw_labels;

  std::size_t size() const { return features.rows; }
  std::size_t input_dim() const { return features.cols; }
};

class DataError : public std::runtime_error {
 public:
  enum class Code { BadMagic, CountMismatch, TruncatedStream, UnknownLabel, Io };
  DataError(Code code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// Set of raw labels mapped to +1; every other label in the alphabet maps
/// to -1.
class BinarizationRule {
 public:
  /// Throws std::invalid_argument for an empty set, or one that is not a
  /// proper subset of {0, ..., alphabet_size - 1}.
  BinarizationRule(std::set<int> positive_classes, int alphabet_size = 10);

  static BinarizationRule mnist_low_digits();  // {0,1,2,3,4}
  static BinarizationRule cifar_vehicles();    // {0,1,8,9}

  const std::set<int>& positive_classes() const { return positive_; }
  int alphabet_size() const { return alphabet_size_; }
  bool is_positive(int raw) const { return positive_.contains(raw); }

 private:
  std::set<int> positive_;
  int alphabet_size_;
};

LabeledDataset load_idx(std::span<const std::uint8_t> image_bytes,
                        std::span<const std::uint8_t> label_bytes);
LabeledDataset load_cifar_binary(std::span<const std::uint8_t> record_bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
LabeledDataset load_idx_files(const std::filesystem::path& images,
                              const std::filesystem::path& labels);
LabeledDataset load_cifar_files(const std::vector<std::filesystem::path>& files);

LabeledDataset binarize(const LabeledDataset& raw, const BinarizationRule& rule);

/// Each label replaced by an independent fair +-1 draw; features untouched.
LabeledDataset randomize_labels(const LabeledDataset& ds, std::uint64_t seed);

struct SyntheticSpec {
  std::size_t n = 500;
  std::size_t input_dim = 20;
  double separation = 4.0;
  double flip_rate = 0.0;
};

/// Two unit-variance isotropic Gaussian clusters centred at
/// +-(separation / 2) e_1, labelled by cluster, then flipped with
/// probability flip_rate.
LabeledDataset make_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// First `count` examples (all of them if count >= size).
LabeledDataset take_prefix(const LabeledDataset& ds, std::size_t count);

}  // namespace gibbs
