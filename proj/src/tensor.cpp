#include "ssc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ssc/error.hpp"

namespace ssc {

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw Error(ErrorCode::ShapeMismatch, "tensor rank must be >= 1");
  for (auto e : shape) {
    if (e == 0) {
      throw Error(ErrorCode::ShapeMismatch,
                  "tensor extents must be >= 1, got " + shape_to_string(shape));
    }
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": shapes " +
                                              shape_to_string(a.shape()) + " and " +
                                              shape_to_string(b.shape()) + " differ");
  }
}

// Views a rank-3 [C,H,W] tensor as a batch of one.
struct Image4 {
  std::size_t n, c, h, w;
};

Image4 as_nchw(const Tensor& t, const char* what) {
  if (t.rank() == 3) return {1, t.extent(0), t.extent(1), t.extent(2)};
  if (t.rank() == 4) return {t.extent(0), t.extent(1), t.extent(2), t.extent(3)};
  throw Error(ErrorCode::ShapeMismatch, std::string(what) +
                                            ": expected [C,H,W] or [N,C,H,W], got " +
                                            shape_to_string(t.shape()));
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_size(shape_) != data_.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "shape " + shape_to_string(shape_) + " holds " +
                    std::to_string(shape_size(shape_)) + " elements, data has " +
                    std::to_string(data_.size()));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw Error(ErrorCode::ShapeMismatch, "ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw Error(ErrorCode::AxisOutOfRange, "axis " + std::to_string(axis) +
                                               " out of range for shape " +
                                               shape_to_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::flat_index(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "index rank does not match tensor rank");
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) throw Error(ErrorCode::AxisOutOfRange, "index out of bounds");
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
  return data_[flat_index(index)];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return data_[flat_index(index)];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "cannot reshape " + shape_to_string(shape_) +
                                              " to " + shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "elementwise");
  Tensor out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  switch (op) {
    case ElementwiseOp::Add:
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + y[i];
      break;
    case ElementwiseOp::Sub:
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] - y[i];
      break;
    case ElementwiseOp::Mul:
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * y[i];
      break;
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::Mul, a, b); }

Tensor scale(const Tensor& a, double factor) {
  Tensor out = a;
  for (auto& v : out.data()) v *= factor;
  return out;
}

Tensor reduce(ReduceOp op, const Tensor& t,
              const std::optional<std::vector<std::size_t>>& axes) {
  std::vector<bool> reduced(t.rank(), !axes.has_value());
  if (axes) {
    for (auto a : *axes) {
      if (a >= t.rank()) {
        throw Error(ErrorCode::AxisOutOfRange,
                    "reduce axis " + std::to_string(a) + " out of range for shape " +
                        shape_to_string(t.shape()));
      }
      reduced[a] = true;
    }
    if (axes->empty()) return t;
  }

  Shape out_shape;
  for (std::size_t a = 0; a < t.rank(); ++a) {
    if (!reduced[a]) out_shape.push_back(t.shape()[a]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  const std::size_t out_size = shape_size(out_shape);
  const std::size_t group = t.size() / out_size;

  // Map each input flat index to its output flat index.
  std::vector<std::size_t> out_index(t.size());
  {
    std::vector<std::size_t> idx(t.rank(), 0);
    for (std::size_t flat = 0; flat < t.size(); ++flat) {
      std::size_t o = 0;
      for (std::size_t a = 0; a < t.rank(); ++a) {
        if (!reduced[a]) o = o * t.shape()[a] + idx[a];
      }
      out_index[flat] = o;
      for (std::size_t a = t.rank(); a-- > 0;) {
        if (++idx[a] < t.shape()[a]) break;
        idx[a] = 0;
      }
    }
  }

  auto in = t.data();
  Tensor out(out_shape, op == ReduceOp::Max ? -std::numeric_limits<double>::infinity() : 0.0);
  auto o = out.data();
  switch (op) {
    case ReduceOp::Sum:
      for (std::size_t i = 0; i < in.size(); ++i) o[out_index[i]] += in[i];
      break;
    case ReduceOp::Mean:
      for (std::size_t i = 0; i < in.size(); ++i) o[out_index[i]] += in[i];
      for (auto& v : o) v /= static_cast<double>(group);
      break;
    case ReduceOp::Variance: {
      std::vector<double> mean(out_size, 0.0);
      for (std::size_t i = 0; i < in.size(); ++i) mean[out_index[i]] += in[i];
      for (auto& m : mean) m /= static_cast<double>(group);
      for (std::size_t i = 0; i < in.size(); ++i) {
        const double d = in[i] - mean[out_index[i]];
        o[out_index[i]] += d * d;
      }
      for (auto& v : o) v /= static_cast<double>(group);
      break;
    }
    case ReduceOp::Max:
      for (std::size_t i = 0; i < in.size(); ++i) o[out_index[i]] = std::max(o[out_index[i]], in[i]);
      break;
  }
  return out;
}

double sum(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s;
}

double max_value(const Tensor& t) { return *std::max_element(t.values().begin(), t.values().end()); }
double min_value(const Tensor& t) { return *std::min_element(t.values().begin(), t.values().end()); }

bool all_finite(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](double v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
    std::string expected = a.rank() == 2 ? "[" + std::to_string(a.shape()[1]) + ",*]" : "rank-2";
    throw Error(ErrorCode::ShapeMismatch, "matmul: cannot multiply " + shape_to_string(a.shape()) +
                                              " by " + shape_to_string(b.shape()) +
                                              "; right operand must be " + expected);
  }
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor out({m, n});
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double s = x[i * k + p];
      if (s == 0.0) continue;
      const double* row = &y[p * n];
      double* dst = &z[i * n];
      for (std::size_t j = 0; j < n; ++j) dst[j] += s * row[j];
    }
  }
  return out;
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  if (stride == 0) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1");
  if (in + 2 * padding < kernel) return 0;
  return (in + 2 * padding - kernel) / stride + 1;
}

TapRange conv_tap_range(std::size_t in, std::size_t out, std::size_t offset, std::size_t stride,
                        std::size_t padding) {
  TapRange r;
  if (offset + in <= padding) return r;
  r.first = padding > offset ? (padding - offset + stride - 1) / stride : 0;
  r.last = std::min(out, (in - 1 + padding - offset) / stride + 1);
  if (r.first > r.last) r.first = r.last;
  return r;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
              std::size_t padding) {
  const auto img = as_nchw(input, "conv2d input");
  if (kernel.rank() != 4 || kernel.extent(1) != img.c) {
    throw Error(ErrorCode::ShapeMismatch,
                "conv2d: kernel " + shape_to_string(kernel.shape()) +
                    " incompatible with input " + shape_to_string(input.shape()) +
                    "; expected [O," + std::to_string(img.c) + ",KH,KW]");
  }
  const std::size_t oc = kernel.extent(0), kh = kernel.extent(2), kw = kernel.extent(3);
  const std::size_t oh = conv_output_extent(img.h, kh, stride, padding);
  const std::size_t ow = conv_output_extent(img.w, kw, stride, padding);
  if (oh == 0 || ow == 0) {
    throw Error(ErrorCode::ShapeMismatch, "conv2d: kernel " + shape_to_string(kernel.shape()) +
                                              " larger than padded input " +
                                              shape_to_string(input.shape()));
  }

  Shape out_shape = input.rank() == 3 ? Shape{oc, oh, ow} : Shape{img.n, oc, oh, ow};
  Tensor out(out_shape);
  auto x = input.data();
  auto k = kernel.data();
  auto y = out.data();
  for (std::size_t n = 0; n < img.n; ++n) {
    for (std::size_t o = 0; o < oc; ++o) {
      double* dst = &y[(n * oc + o) * oh * ow];
      for (std::size_t c = 0; c < img.c; ++c) {
        const double* src = &x[(n * img.c + c) * img.h * img.w];
        for (std::size_t i = 0; i < kh; ++i) {
          const TapRange rows = conv_tap_range(img.h, oh, i, stride, padding);
          for (std::size_t j = 0; j < kw; ++j) {
            const TapRange cols = conv_tap_range(img.w, ow, j, stride, padding);
            const double wv = k[((o * img.c + c) * kh + i) * kw + j];
            for (std::size_t r = rows.first; r < rows.last; ++r) {
              const double* srow = src + (r * stride + i - padding) * img.w + j - padding;
              double* drow = dst + r * ow;
              for (std::size_t s = cols.first; s < cols.last; ++s) drow[s] += wv * srow[s * stride];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  const auto img = as_nchw(input, "maxpool2d input");
  if (window == 0) throw Error(ErrorCode::InvalidArgument, "maxpool2d: window must be >= 1");
  const std::size_t oh = conv_output_extent(img.h, window, stride, 0);
  const std::size_t ow = conv_output_extent(img.w, window, stride, 0);
  if (oh == 0 || ow == 0) {
    throw Error(ErrorCode::ShapeMismatch, "maxpool2d: window " + std::to_string(window) +
                                              " larger than input " +
                                              shape_to_string(input.shape()));
  }
  Shape out_shape = input.rank() == 3 ? Shape{img.c, oh, ow} : Shape{img.n, img.c, oh, ow};
  Tensor out(out_shape);
  auto x = input.data();
  auto y = out.data();
  for (std::size_t plane = 0; plane < img.n * img.c; ++plane) {
    const double* src = &x[plane * img.h * img.w];
    double* dst = &y[plane * oh * ow];
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t s = 0; s < ow; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < window; ++i) {
          for (std::size_t j = 0; j < window; ++j) {
            best = std::max(best, src[(r * stride + i) * img.w + s * stride + j]);
          }
        }
        dst[r * ow + s] = best;
      }
    }
  }
  return out;
}

}  // namespace ssc
