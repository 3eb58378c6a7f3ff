#include "fsprune/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace fsprune {
namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::string& file) {
  if (bytes.size() < offset + 4) throw FormatError(file + ": truncated IDX header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double normal(std::mt19937_64& rng) {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

Shape LabeledDataset::sample_shape() const {
  if (images.rank() != 4) return {};
  return {images.dim(1), images.dim(2), images.dim(3)};
}

LabeledDataset LabeledDataset::head(std::size_t count) const {
  count = std::min(count, size());
  const Batch b = slice(*this, 0, count);
  return {b.images, b.labels};
}

LabeledDataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  const std::string iname = images_path.string(), lname = labels_path.string();
  if (read_be32(images, 0, iname) != 0x00000803) throw FormatError(iname + ": bad IDX image magic");
  if (read_be32(labels, 0, lname) != 0x00000801) throw FormatError(lname + ": bad IDX label magic");
  const std::size_t count = read_be32(images, 4, iname);
  const std::size_t rows = read_be32(images, 8, iname);
  const std::size_t cols = read_be32(images, 12, iname);
  const std::size_t label_count = read_be32(labels, 4, lname);
  if (count != label_count) {
    throw FormatError("IDX count mismatch: " + std::to_string(count) + " images vs " + std::to_string(label_count) +
                      " labels");
  }
  if (count == 0 || rows == 0 || cols == 0) throw FormatError(iname + ": empty IDX image file");
  if (images.size() != 16 + count * rows * cols) {
    throw FormatError(iname + ": payload length " + std::to_string(images.size() - 16) + " does not match header " +
                      std::to_string(count) + "x" + std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (labels.size() != 8 + count) throw FormatError(lname + ": payload length does not match header count");
  LabeledDataset data{Tensor({count, 1, rows, cols}), std::vector<int>(count)};
  for (std::size_t i = 0; i < data.images.size(); ++i) data.images[i] = images[16 + i] / 255.0;
  for (std::size_t i = 0; i < count; ++i) {
    const int label = labels[8 + i];
    if (label > 9) throw FormatError(lname + ": label " + std::to_string(label) + " outside [0, 10)");
    data.labels[i] = label;
  }
  return data;
}

LabeledDataset load_mnist_dir(const std::filesystem::path& dir, bool train) {
  const std::string prefix = train ? "train" : "t10k";
  return load_mnist_idx(dir / (prefix + "-images-idx3-ubyte"), dir / (prefix + "-labels-idx1-ubyte"));
}

void save_mnist_idx(const LabeledDataset& data, const std::filesystem::path& images_path,
                    const std::filesystem::path& labels_path) {
  const Shape s = data.sample_shape();
  if (s.size() != 3 || s[0] != 1) throw ShapeError("save_mnist_idx: expected single-channel images");
  std::ofstream images(images_path, std::ios::binary);
  std::ofstream labels(labels_path, std::ios::binary);
  if (!images || !labels) throw std::runtime_error("cannot write IDX files");
  write_be32(images, 0x00000803);
  write_be32(images, static_cast<std::uint32_t>(data.size()));
  write_be32(images, static_cast<std::uint32_t>(s[1]));
  write_be32(images, static_cast<std::uint32_t>(s[2]));
  for (double v : data.images.values()) {
    images.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  write_be32(labels, 0x00000801);
  write_be32(labels, static_cast<std::uint32_t>(data.size()));
  for (int l : data.labels) labels.put(static_cast<char>(l));
}

LabeledDataset load_cifar10(std::span<const std::filesystem::path> files) {
  std::vector<unsigned char> all;
  for (const auto& path : files) {
    const auto bytes = read_file(path);
    if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
      throw FormatError(path.string() + ": length " + std::to_string(bytes.size()) + " is not a multiple of " +
                        std::to_string(kCifarRecordBytes));
    }
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  if (all.empty()) throw FormatError("load_cifar10: no records");
  const std::size_t count = all.size() / kCifarRecordBytes;
  constexpr std::size_t pixels = kCifarRecordBytes - 1;
  LabeledDataset data{Tensor({count, 3, 32, 32}), std::vector<int>(count)};
  for (std::size_t r = 0; r < count; ++r) {
    const unsigned char* rec = all.data() + r * kCifarRecordBytes;
    if (rec[0] > 9) throw FormatError("load_cifar10: record " + std::to_string(r) + " has label " + std::to_string(rec[0]));
    data.labels[r] = rec[0];
    double* out = data.images.data() + r * pixels;
    for (std::size_t i = 0; i < pixels; ++i) out[i] = rec[1 + i] / 255.0;
  }
  return data;
}

LabeledDataset load_cifar10_dir(const std::filesystem::path& dir, bool train) {
  std::vector<std::filesystem::path> files;
  if (train) {
    for (int i = 1; i <= 5; ++i) files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  } else {
    files.push_back(dir / "test_batch.bin");
  }
  return load_cifar10(files);
}

LabeledDataset synthetic_blobs(std::size_t classes, std::size_t samples_per_class, const Shape& image_shape,
                               std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("synthetic_blobs: need at least 2 classes");
  if (classes > 10) throw std::invalid_argument("synthetic_blobs: at most 10 classes");
  if (image_shape.size() != 3) throw ShapeError("synthetic_blobs: image shape must be (channels, height, width)");
  const std::size_t channels = image_shape[0], height = image_shape[1], width = image_shape[2];
  std::mt19937_64 rng(seed);
  // Class centres on a ring around the image centre, with a seeded phase.
  const double phase = 2.0 * std::numbers::pi * uniform01(rng);
  const double radius = 0.3 * static_cast<double>(std::min(height, width));
  const double sigma = std::max(1.0, static_cast<double>(std::min(height, width)) / 8.0);
  std::vector<double> cy(classes), cx(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const double angle = phase + 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes);
    cy[c] = 0.5 * static_cast<double>(height - 1) + radius * std::sin(angle);
    cx[c] = 0.5 * static_cast<double>(width - 1) + radius * std::cos(angle);
  }
  const std::size_t count = classes * samples_per_class;
  LabeledDataset data{Tensor({count, channels, height, width}), std::vector<int>(count)};
  const std::size_t plane = height * width;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t c = i % classes;
    data.labels[i] = static_cast<int>(c);
    const double y0 = cy[c] + normal(rng);
    const double x0 = cx[c] + normal(rng);
    const double amplitude = 0.7 + 0.3 * uniform01(rng);
    double* img = data.images.data() + i * channels * plane;
    for (std::size_t ch = 0; ch < channels; ++ch) {
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          const double dy = static_cast<double>(y) - y0, dx = static_cast<double>(x) - x0;
          const double bump = amplitude * std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
          img[ch * plane + y * width + x] = std::clamp(bump + 0.05 * normal(rng), 0.0, 1.0);
        }
      }
    }
  }
  return data;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);
  return order;
}

std::vector<std::vector<std::size_t>> batches(std::size_t dataset_size, const BatchPlan& plan) {
  if (plan.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (plan.batch_size > dataset_size) throw std::invalid_argument("batch size exceeds dataset size");
  const auto order = epoch_permutation(dataset_size, plan.seed, plan.epoch);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < dataset_size; start += plan.batch_size) {
    const std::size_t end = std::min(dataset_size, start + plan.batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

Batch gather(const LabeledDataset& data, std::span<const std::size_t> indices) {
  const Shape s = data.sample_shape();
  const std::size_t sample = shape_size(s);
  Batch b{Tensor({indices.size(), s[0], s[1], s[2]}), std::vector<int>(indices.size())};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices[i];
    if (src >= data.size()) throw std::out_of_range("gather: sample index out of range");
    std::copy_n(data.images.data() + src * sample, sample, b.images.data() + i * sample);
    b.labels[i] = data.labels[src];
  }
  return b;
}

Batch slice(const LabeledDataset& data, std::size_t first, std::size_t count) {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = first + i;
  return gather(data, idx);
}

}  // namespace fsprune
