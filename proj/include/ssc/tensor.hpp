#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ssc {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles. Rank >= 1 and every extent >= 1.
///
/// Element (i0, ..., ik) lives at flat index sum_j i_j * stride_j with
/// stride_k = 1 and stride_j = stride_{j+1} * extent_{j+1}.
class Tensor {
 public:
  Tensor() : shape_{1}, data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor vector(std::initializer_list<double> values);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double& at(std::initializer_list<std::size_t> index);
  double at(std::initializer_list<std::size_t> index) const;

  /// Same data under a new shape of equal element count.
  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t flat_index(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

enum class ElementwiseOp { Add, Sub, Mul };
enum class ReduceOp { Sum, Mean, Variance, Max };

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

/// Reduces over `axes` (all axes when nullopt). Reduced axes are removed;
/// reducing every axis yields shape [1]. An empty axis set is the identity.
/// Variance is the population variance (divides by N).
Tensor reduce(ReduceOp op, const Tensor& t,
              const std::optional<std::vector<std::size_t>>& axes = std::nullopt);

double sum(const Tensor& t);
double max_value(const Tensor& t);
double min_value(const Tensor& t);
bool all_finite(const Tensor& t);

Tensor matmul(const Tensor& a, const Tensor& b);

/// 2-D cross-correlation (no kernel flip), the deep-learning convention.
/// input is [C,H,W] or [N,C,H,W]; kernel is [O,C,KH,KW]. Zero padding.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride = 1,
              std::size_t padding = 0);

/// Max pooling over square windows; input [C,H,W] or [N,C,H,W].
Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride);

std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               std::size_t stride, std::size_t padding);

/// Output positions [first, last) whose tap at kernel offset `offset` reads
/// inside the unpadded input, i.e. 0 <= o * stride + offset - padding < in.
struct TapRange {
  std::size_t first = 0;
  std::size_t last = 0;
};
TapRange conv_tap_range(std::size_t in, std::size_t out, std::size_t offset, std::size_t stride,
                        std::size_t padding);

}  // namespace ssc
