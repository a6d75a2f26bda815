#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssc/tensor.hpp"

namespace ssc {

enum class Split { Train, Test };
enum class DataSource { Mnist, Synthetic };

const char* to_string(Split split);
const char* to_string(DataSource source);

/// Images [N, C, H, W] with values in [0, 1] and integer labels in
/// [0, num_classes).
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::size_t num_classes = 10;
  Split split = Split::Train;
  DataSource source = DataSource::Synthetic;

  std::size_t size() const noexcept { return labels.size(); }
  /// Shape of a single image, [C, H, W].
  Shape image_shape() const;
  /// Copy of image `i` as a [C, H, W] tensor.
  Tensor image(std::size_t i) const;

  /// Throws Error(InvalidArgument) if labels or pixel values are out of range.
  void validate() const;
};

// MNIST IDX files: big-endian u32 header fields, unsigned byte payload.
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

Dataset load_mnist(const std::filesystem::path& images_path,
                   const std::filesystem::path& labels_path, Split split = Split::Test);

struct MnistFiles {
  std::filesystem::path train_images, train_labels, test_images, test_labels;

  bool exist() const;
};

/// The four standard file names under `dir` (uncompressed).
MnistFiles mnist_files(const std::filesystem::path& dir);

void write_idx_images(const std::filesystem::path& path, std::size_t count, std::size_t rows,
                      std::size_t cols, std::span<const std::uint8_t> pixels);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

/// Seeded 28x28 geometric patterns, one family per class (bars, crosses,
/// disks, rings, ...), with random placement, size, and intensity plus
/// additive Gaussian noise, clipped to [0, 1]. Supports 2..10 classes.
Dataset synthetic(std::size_t num_classes, std::size_t n_per_class, std::uint64_t seed,
                  Split split = Split::Train);

inline constexpr std::size_t kSyntheticMaxClasses = 10;

/// Where a dataset comes from and, for synthetic data, how to generate it.
struct DataOptions {
  DataSource source = DataSource::Synthetic;
  std::filesystem::path mnist_dir = "data/mnist";
  std::size_t synthetic_classes = 10;
  std::size_t synthetic_train_per_class = 200;
  std::size_t synthetic_test_per_class = 50;
  std::uint64_t synthetic_train_seed = 11;
  std::uint64_t synthetic_test_seed = 12;
};

DataSource parse_data_source(const std::string& name);

/// Loads one split. MNIST reads the standard IDX files under mnist_dir and
/// throws Error(Io) if they are missing.
Dataset load_dataset(const DataOptions& opts, Split split);

struct TestBed {
  std::vector<std::size_t> indices;

  std::size_t size() const noexcept { return indices.size(); }
};

/// Seeded sample without replacement, stratified as evenly as possible across
/// classes. Indices are returned in ascending order.
TestBed sample_testbed(const Dataset& ds, std::size_t size, std::uint64_t seed);

}  // namespace ssc
