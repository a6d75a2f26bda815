#include "ssc/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "ssc/error.hpp"
#include "ssc/random.hpp"

namespace ssc {

const char* to_string(Split split) { return split == Split::Train ? "train" : "test"; }
const char* to_string(DataSource source) {
  return source == DataSource::Mnist ? "mnist" : "synthetic";
}

Shape Dataset::image_shape() const {
  return Shape(images.shape().begin() + 1, images.shape().end());
}

Tensor Dataset::image(std::size_t i) const {
  if (i >= size()) {
    throw Error(ErrorCode::InvalidArgument, "image index " + std::to_string(i) +
                                                " out of range for dataset of " +
                                                std::to_string(size()));
  }
  const std::size_t stride = images.size() / images.extent(0);
  auto begin = images.values().begin() + static_cast<std::ptrdiff_t>(i * stride);
  return Tensor(image_shape(), std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(stride)));
}

void Dataset::validate() const {
  if (images.rank() != 4 || images.extent(0) != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "dataset images " + shape_to_string(images.shape()) +
                                              " do not match " + std::to_string(labels.size()) +
                                              " labels");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw Error(ErrorCode::InvalidArgument, "label " + std::to_string(l) + " outside [0, " +
                                                  std::to_string(num_classes) + ")");
    }
  }
  for (double v : images.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "pixel value outside [0, 1]");
    }
  }
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) {
    throw Error(ErrorCode::Truncated, path.string() + ": header truncated");
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

}  // namespace

Dataset load_mnist(const std::filesystem::path& images_path,
                   const std::filesystem::path& labels_path, Split split) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);

  const auto img_magic = read_be32(img, 0, images_path);
  if (img_magic != kIdxImageMagic) {
    throw Error(ErrorCode::BadMagic, images_path.string() + ": expected IDX image magic 0x00000803");
  }
  const auto lab_magic = read_be32(lab, 0, labels_path);
  if (lab_magic != kIdxLabelMagic) {
    throw Error(ErrorCode::BadMagic, labels_path.string() + ": expected IDX label magic 0x00000801");
  }
  const std::size_t n = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t n_labels = read_be32(lab, 4, labels_path);
  if (n != n_labels) {
    throw Error(ErrorCode::CountMismatch, "image file holds " + std::to_string(n) +
                                              " images but label file holds " +
                                              std::to_string(n_labels) + " labels");
  }
  if (n == 0 || rows == 0 || cols == 0) {
    throw Error(ErrorCode::InvalidArgument, images_path.string() + ": empty IDX image file");
  }
  if (img.size() < 16 + n * rows * cols) {
    throw Error(ErrorCode::Truncated, images_path.string() + ": pixel data truncated");
  }
  if (lab.size() < 8 + n) {
    throw Error(ErrorCode::Truncated, labels_path.string() + ": label data truncated");
  }

  Dataset ds;
  ds.split = split;
  ds.source = DataSource::Mnist;
  ds.num_classes = 10;
  std::vector<double> pixels(n * rows * cols);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = img[16 + i] / 255.0;
  ds.images = Tensor({n, 1, rows, cols}, std::move(pixels));
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = lab[8 + i];
  ds.validate();
  return ds;
}

bool MnistFiles::exist() const {
  return std::filesystem::exists(train_images) && std::filesystem::exists(train_labels) &&
         std::filesystem::exists(test_images) && std::filesystem::exists(test_labels);
}

MnistFiles mnist_files(const std::filesystem::path& dir) {
  return {dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte",
          dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte"};
}

void write_idx_images(const std::filesystem::path& path, std::size_t count, std::size_t rows,
                      std::size_t cols, std::span<const std::uint8_t> pixels) {
  if (pixels.size() != count * rows * cols) {
    throw Error(ErrorCode::ShapeMismatch, "write_idx_images: pixel count does not match dims");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(count));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

namespace {

constexpr std::size_t kSide = 28;

class Canvas {
 public:
  explicit Canvas(double* px) : px_(px) {}

  void set(long r, long c, double v) {
    if (r < 0 || c < 0 || r >= static_cast<long>(kSide) || c >= static_cast<long>(kSide)) return;
    double& p = px_[static_cast<std::size_t>(r) * kSide + static_cast<std::size_t>(c)];
    p = std::max(p, v);
  }

  void rect(long r0, long c0, long h, long w, double v) {
    for (long r = r0; r < r0 + h; ++r)
      for (long c = c0; c < c0 + w; ++c) set(r, c, v);
  }

  // Points whose distance from (cr, cc) lies in [inner, outer].
  void annulus(double cr, double cc, double inner, double outer, double v) {
    for (long r = 0; r < static_cast<long>(kSide); ++r) {
      for (long c = 0; c < static_cast<long>(kSide); ++c) {
        const double d = std::hypot(r - cr, c - cc);
        if (d >= inner && d <= outer) set(r, c, v);
      }
    }
  }

  void diagonal(long r0, long c0, long len, int dir, long thick, double v) {
    for (long t = 0; t < len; ++t)
      for (long k = 0; k < thick; ++k) set(r0 + t, c0 + dir * t + k, v);
  }

 private:
  double* px_;
};

long jitter(Rng& rng, long lo, long hi) {
  return lo + static_cast<long>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

void draw_pattern(std::size_t family, Rng& rng, double* px) {
  Canvas cv(px);
  const double v = rng.uniform(0.7, 1.0);
  const long cr = jitter(rng, 10, 17);
  const long cc = jitter(rng, 10, 17);
  switch (family) {
    case 0: {  // horizontal bar
      const long len = jitter(rng, 14, 20), th = jitter(rng, 3, 4);
      cv.rect(cr - th / 2, cc - len / 2, th, len, v);
      break;
    }
    case 1: {  // vertical bar
      const long len = jitter(rng, 14, 20), th = jitter(rng, 3, 4);
      cv.rect(cr - len / 2, cc - th / 2, len, th, v);
      break;
    }
    case 2: {  // plus
      const long len = jitter(rng, 12, 18), th = 3;
      cv.rect(cr - th / 2, cc - len / 2, th, len, v);
      cv.rect(cr - len / 2, cc - th / 2, len, th, v);
      break;
    }
    case 3: {  // diagonal cross
      const long len = jitter(rng, 12, 16);
      cv.diagonal(cr - len / 2, cc - len / 2, len, +1, 3, v);
      cv.diagonal(cr - len / 2, cc + len / 2 - 2, len, -1, 3, v);
      break;
    }
    case 4:  // filled disk
      cv.annulus(cr, cc, 0.0, static_cast<double>(jitter(rng, 4, 6)), v);
      break;
    case 5: {  // ring
      const double r = static_cast<double>(jitter(rng, 7, 9));
      cv.annulus(cr, cc, r - 1.5, r, v);
      break;
    }
    case 6: {  // square outline
      const long s = jitter(rng, 12, 16);
      const long r0 = cr - s / 2, c0 = cc - s / 2;
      cv.rect(r0, c0, 2, s, v);
      cv.rect(r0 + s - 2, c0, 2, s, v);
      cv.rect(r0, c0, s, 2, v);
      cv.rect(r0, c0 + s - 2, s, 2, v);
      break;
    }
    case 7: {  // two horizontal bars
      const long len = jitter(rng, 14, 20), gap = jitter(rng, 6, 9);
      cv.rect(cr - gap / 2 - 2, cc - len / 2, 2, len, v);
      cv.rect(cr + gap / 2, cc - len / 2, 2, len, v);
      break;
    }
    case 8: {  // L corner
      const long len = jitter(rng, 12, 16), th = 3;
      cv.rect(cr - len / 2, cc - len / 2, len, th, v);
      cv.rect(cr + len / 2 - th, cc - len / 2, th, len, v);
      break;
    }
    case 9: {  // 2x2 grid of dots
      const long gap = jitter(rng, 5, 7);
      for (long dr : {-gap, gap})
        for (long dc : {-gap, gap}) cv.annulus(cr + dr, cc + dc, 0.0, 2.0, v);
      break;
    }
    default:
      break;
  }
}

}  // namespace

Dataset synthetic(std::size_t num_classes, std::size_t n_per_class, std::uint64_t seed,
                  Split split) {
  if (num_classes < 2 || num_classes > kSyntheticMaxClasses) {
    throw Error(ErrorCode::InvalidArgument, "synthetic dataset supports 2.." +
                                                std::to_string(kSyntheticMaxClasses) +
                                                " classes, got " + std::to_string(num_classes));
  }
  if (n_per_class == 0) throw Error(ErrorCode::InvalidArgument, "n_per_class must be >= 1");

  const std::size_t n = num_classes * n_per_class;
  const std::size_t plane = kSide * kSide;
  std::vector<double> pixels(n * plane, 0.0);
  Dataset ds;
  ds.num_classes = num_classes;
  ds.split = split;
  ds.source = DataSource::Synthetic;
  ds.labels.resize(n);
  // Classes interleaved so any prefix is roughly balanced.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % num_classes;
    ds.labels[i] = static_cast<int>(label);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    double* px = &pixels[i * plane];
    draw_pattern(label, rng, px);
    for (std::size_t p = 0; p < plane; ++p) {
      px[p] = std::clamp(px[p] + 0.1 * rng.normal(), 0.0, 1.0);
    }
  }
  ds.images = Tensor({n, 1, kSide, kSide}, std::move(pixels));
  ds.validate();
  return ds;
}

TestBed sample_testbed(const Dataset& ds, std::size_t size, std::uint64_t seed) {
  if (size > ds.size()) {
    throw Error(ErrorCode::InvalidArgument, "test bed of " + std::to_string(size) +
                                                " exceeds dataset size " +
                                                std::to_string(ds.size()));
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  }
  // Partial Fisher-Yates within each class; the first `quota` entries are the sample.
  for (auto& members : by_class) {
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[rng.below(i)]);
    }
  }

  std::vector<std::size_t> classes;
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    if (!by_class[c].empty()) classes.push_back(c);
  }
  for (std::size_t i = classes.size(); i > 1; --i) std::swap(classes[i - 1], classes[rng.below(i)]);

  // Round-robin over the shuffled class order until the quota is filled; this
  // spreads the remainder randomly and spills over when a class runs out.
  std::vector<std::size_t> taken(ds.num_classes, 0);
  std::size_t remaining = size;
  while (remaining > 0) {
    for (auto c : classes) {
      if (remaining == 0) break;
      if (taken[c] < by_class[c].size()) {
        ++taken[c];
        --remaining;
      }
    }
  }

  TestBed bed;
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    bed.indices.insert(bed.indices.end(), by_class[c].begin(),
                       by_class[c].begin() + static_cast<std::ptrdiff_t>(taken[c]));
  }
  std::sort(bed.indices.begin(), bed.indices.end());
  return bed;
}

DataSource parse_data_source(const std::string& name) {
  if (name == "mnist") return DataSource::Mnist;
  if (name == "synthetic") return DataSource::Synthetic;
  throw Error(ErrorCode::InvalidArgument, "unknown dataset '" + name + "'");
}

Dataset load_dataset(const DataOptions& opts, Split split) {
  if (opts.source == DataSource::Mnist) {
    const MnistFiles files = mnist_files(opts.mnist_dir);
    return split == Split::Train ? load_mnist(files.train_images, files.train_labels, split)
                                 : load_mnist(files.test_images, files.test_labels, split);
  }
  return split == Split::Train
             ? synthetic(opts.synthetic_classes, opts.synthetic_train_per_class,
                         opts.synthetic_train_seed, split)
             : synthetic(opts.synthetic_classes, opts.synthetic_test_per_class,
                         opts.synthetic_test_seed, split);
}

}  // namespace ssc
