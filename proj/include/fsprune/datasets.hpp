#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fsprune/tensor.hpp"

namespace fsprune {

/// Images (count, channels, height, width) scaled to [0, 1] and labels in [0, 10).
struct LabeledDataset {
  Tensor images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  Shape sample_shape() const;
  /// First `count` samples (or all, when fewer).
  LabeledDataset head(std::size_t count) const;
};

/// Big-endian IDX: images magic 0x00000803 (count, rows, cols), labels magic
/// 0x00000801 (count). Throws FormatError on bad magic, truncation or a count
/// mismatch between the files.
LabeledDataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
/// `train-images-idx3-ubyte` etc. (train) or `t10k-*` (test) inside `dir`.
LabeledDataset load_mnist_dir(const std::filesystem::path& dir, bool train);
/// Writes a 1-channel dataset as IDX files (pixels rounded from [0, 1] to bytes).
void save_mnist_idx(const LabeledDataset& data, const std::filesystem::path& images,
                    const std::filesystem::path& labels);

inline constexpr std::size_t kCifarRecordBytes = 3073;

/// CIFAR-10 binary batches: 3073-byte records, one label byte then 3072
/// channel-planar RGB pixel bytes.
LabeledDataset load_cifar10(std::span<const std::filesystem::path> files);
/// data_batch_1..5.bin (train) or test_batch.bin (test) inside `dir`.
LabeledDataset load_cifar10_dir(const std::filesystem::path& dir, bool train);

/// Class-dependent Gaussian bumps plus pixel noise; deterministic in `seed`.
LabeledDataset synthetic_blobs(std::size_t classes, std::size_t samples_per_class, const Shape& image_shape,
                               std::uint64_t seed);

struct BatchPlan {
  std::uint64_t seed = 0;
  std::size_t batch_size = 64;
  int epoch = 0;
};

/// Sample order for one epoch, a pure function of (n, seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch);

/// Index sets of consecutive batches over the epoch permutation. The last
/// batch may be partial.
std::vector<std::vector<std::size_t>> batches(std::size_t dataset_size, const BatchPlan& plan);

struct Batch {
  Tensor images;
  std::vector<int> labels;
};

Batch gather(const LabeledDataset& data, std::span<const std::size_t> indices);
/// Contiguous samples [first, first + count).
Batch slice(const LabeledDataset& data, std::size_t first, std::size_t count);

}  // namespace fsprune
