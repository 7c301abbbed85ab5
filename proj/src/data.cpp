#include "gibbsbound/data.hpp"

#include <fstream>
#include <iterator>
#include <random>

#include "gibbsbound/rng.hpp"

namespace gibbs {
namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
constexpr std::size_t kCifarPixels = 3072;
constexpr std::size_t kCifarRecord = 1 + kCifarPixels;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset,
                        const char* what) {
  if (bytes.size() < offset + 4)
    throw DataError(DataError::Code::TruncatedStream,
                    std::string(what) + ": stream ends inside the header");
  return (std::uint32_t{bytes[offset]} << 24) |
         (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

BinarizationRule::BinarizationRule(std::set<int> positive_classes, int alphabet_size)
    : positive_(std::move(positive_classes)), alphabet_size_(alphabet_size) {
  if (positive_.empty())
    throw std::invalid_argument("binarization rule needs at least one positive class");
  if (static_cast<int>(positive_.size()) >= alphabet_size_)
    throw std::invalid_argument("positive classes must be a proper subset of the labels");
  for (int c : positive_)
    if (c < 0 || c >= alphabet_size_)
      throw std::invalid_argument("positive class " + std::to_string(c) +
                                  " outside the label alphabet");
}

BinarizationRule BinarizationRule::mnist_low_digits() {
  return BinarizationRule({0, 1, 2, 3, 4});
}

BinarizationRule BinarizationRule::cifar_vehicles() {
  return BinarizationRule({0, 1, 8, 9});
}

LabeledDataset load_idx(std::span<const std::uint8_t> image_bytes,
                        std::span<const std::uint8_t> label_bytes) {
  if (read_be32(image_bytes, 0, "idx images") != kIdxImageMagic)
    throw DataError(DataError::Code::BadMagic, "idx images: bad magic number");
  if (read_be32(label_bytes, 0, "idx labels") != kIdxLabelMagic)
    throw DataError(DataError::Code::BadMagic, "idx labels: bad magic number");

  const std::size_t n = read_be32(image_bytes, 4, "idx images");
  const std::size_t rows = read_be32(image_bytes, 8, "idx images");
  const std::size_t cols = read_be32(image_bytes, 12, "idx images");
  const std::size_t n_labels = read_be32(label_bytes, 4, "idx labels");
  if (n != n_labels)
    throw DataError(DataError::Code::CountMismatch,
                    "idx: " + std::to_string(n) + " images but " +
                        std::to_string(n_labels) + " labels");

  const std::size_t dim = rows * cols;
  if (image_bytes.size() < 16 + n * dim)
    throw DataError(DataError::Code::TruncatedStream, "idx images: pixel data truncated");
  if (label_bytes.size() < 8 + n)
    throw DataError(DataError::Code::TruncatedStream, "idx labels: label data truncated");
  if (image_bytes.size() != 16 + n * dim || label_bytes.size() != 8 + n)
    throw DataError(DataError::Code::CountMismatch, "idx: trailing bytes after the data");

  LabeledDataset ds;
  ds.name = "idx";
  ds.features = Matrix(n, dim);
  for (std::size_t i = 0; i < n * dim; ++i)
    ds.features.values[i] = image_bytes[16 + i] / 255.0;
  ds.raw_labels.assign(label_bytes.begin() + 8, label_bytes.end());
  return ds;
}

LabeledDataset load_cifar_binary(std::span<const std::uint8_t> record_bytes) {
  if (record_bytes.size() % kCifarRecord != 0)
    throw DataError(DataError::Code::TruncatedStream,
                    "cifar: stream length is not a multiple of 3073");
  const std::size_t n = record_bytes.size() / kCifarRecord;
  LabeledDataset ds;
  ds.name = "cifar10";
  ds.features = Matrix(n, kCifarPixels);
  ds.raw_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = record_bytes.data() + i * kCifarRecord;
    ds.raw_labels[i] = rec[0];
    auto row = ds.features.row(i);
    for (std::size_t j = 0; j < kCifarPixels; ++j) row[j] = rec[1 + j] / 255.0;
  }
  return ds;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Code::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

LabeledDataset load_idx_files(const std::filesystem::path& images,
                              const std::filesystem::path& labels) {
  const auto img = read_file_bytes(images);
  const auto lab = read_file_bytes(labels);
  auto ds = load_idx(img, lab);
  ds.name = images.filename().string();
  return ds;
}

LabeledDataset load_cifar_files(const std::vector<std::filesystem::path>& files) {
  std::vector<std::uint8_t> all;
  for (const auto& f : files) {
    const auto bytes = read_file_bytes(f);
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  return load_cifar_binary(all);
}

LabeledDataset binarize(const LabeledDataset& raw, const BinarizationRule& rule) {
  LabeledDataset out;
  out.name = raw.name;
  out.features = raw.features;
  out.raw_labels = raw.raw_labels;
  out.labels.resize(raw.raw_labels.size());
  for (std::size_t i = 0; i < raw.raw_labels.size(); ++i) {
    const int c = raw.raw_labels[i];
    if (c < 0 || c >= rule.alphabet_size())
      throw DataError(DataError::Code::UnknownLabel,
                      "label " + std::to_string(c) + " outside the alphabet");
    out.labels[i] = rule.is_positive(c) ? 1 : -1;
  }
  return out;
}

LabeledDataset randomize_labels(const LabeledDataset& ds, std::uint64_t seed) {
  LabeledDataset out = ds;
  out.name = ds.name + "+random-labels";
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  out.labels.resize(ds.size());
  for (auto& y : out.labels) y = coin(rng) ? 1 : -1;
  return out;
}

LabeledDataset make_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.n < 1 || spec.input_dim < 1)
    throw std::invalid_argument("synthetic dataset needs n >= 1 and input_dim >= 1");
  if (spec.flip_rate < 0.0 || spec.flip_rate > 0.5)
    throw std::invalid_argument("flip_rate must lie in [0, 0.5]");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution side(0.5);
  std::bernoulli_distribution flip(spec.flip_rate);

  LabeledDataset ds;
  ds.name = "synthetic";
  ds.features = Matrix(spec.n, spec.input_dim);
  ds.labels.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const int cluster = side(rng) ? 1 : -1;
    auto row = ds.features.row(i);
    for (auto& v : row) v = normal(rng);
    row[0] += cluster * spec.separation / 2.0;
    ds.labels[i] = flip(rng) ? -cluster : cluster;
  }
  return ds;
}

LabeledDataset take_prefix(const LabeledDataset& ds, std::size_t count) {
  if (count >= ds.size()) return ds;
  LabeledDataset out;
  out.name = ds.name;
  out.features = Matrix(count, ds.input_dim());
  std::copy_n(ds.features.values.begin(), count * ds.input_dim(),
              out.features.values.begin());
  if (!ds.labels.empty()) out.labels.assign(ds.labels.begin(), ds.labels.begin() + count);
  if (!ds.raw_labels.empty())
    out.raw_labels.assign(ds.raw_labels.begin(), ds.raw_labels.begin() + count);
  return out;
}

}  // namespace gibbs
