#include "ssc/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "ssc/error.hpp"

namespace ssc {

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'S', 'C', 'K'};
constexpr char kTensorMagic[4] = {'S', 'S', 'C', 'T'};
constexpr std::uint32_t kTensorVersion = 1;

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void size(std::size_t v, const char* what) {
    if (v > 0xffffffffULL) throw Error(ErrorCode::InvalidArgument, std::string(what) + " exceeds u32");
    u32(static_cast<std::uint32_t>(v));
  }

  void tensor(const Tensor& t) {
    size(t.rank(), "rank");
    for (auto e : t.shape()) size(e, "extent");
    for (double v : t.data()) f64(v);
  }

  void finish_with_crc() { u32(crc32_of(out_.data(), out_.size())); }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw Error(ErrorCode::Truncated, "unexpected end of data at byte " + std::to_string(pos_));
    }
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[pos_++]} << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(&in_[pos_]), n);
    pos_ += n;
    return s;
  }

  Tensor tensor() {
    const std::uint32_t rank = u32();
    if (rank == 0 || rank > 8) throw Error(ErrorCode::ShapeMismatch, "invalid tensor rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t count = 1;
    for (auto& e : shape) {
      e = u32();
      if (e == 0) throw Error(ErrorCode::ShapeMismatch, "zero tensor extent");
      count *= e;
    }
    need(count * 8);
    std::vector<double> data(count);
    for (auto& v : data) v = f64();
    return Tensor(std::move(shape), std::move(data));
  }

  void magic(const char (&expected)[4]) {
    need(4);
    if (std::memcmp(&in_[pos_], expected, 4) != 0) {
      throw Error(ErrorCode::BadMagic, std::string("bad magic: expected \"") +
                                           std::string(expected, 4) + "\"");
    }
    pos_ += 4;
  }

  // Reads the trailing CRC and checks it covers everything before it.
  void verify_crc() {
    const std::size_t covered = pos_;
    const std::uint32_t stored = u32();
    if (pos_ != in_.size()) {
      throw Error(ErrorCode::InvalidArgument, "trailing bytes after checksum");
    }
    if (stored != crc32_of(in_.data(), covered)) {
      throw Error(ErrorCode::ChecksumMismatch, "CRC-32 mismatch");
    }
  }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Network& net) {
  Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.size(net.layer_count(), "layer count");
  w.size(net.input_shape().size(), "input rank");
  for (auto e : net.input_shape()) w.size(e, "input extent");
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const auto& layer = net.layer(i);
    w.size(layer.name.size(), "name length");
    w.bytes(layer.name.data(), layer.name.size());
    w.u8(static_cast<std::uint8_t>(layer.kind));
    switch (layer.kind) {
      case LayerKind::Dense:
        w.size(layer.units, "units");
        break;
      case LayerKind::Conv2d:
        w.size(layer.out_channels, "out_channels");
        w.size(layer.kernel, "kernel");
        w.size(layer.stride, "stride");
        w.size(layer.padding, "padding");
        break;
      case LayerKind::MaxPool2d:
        w.size(layer.window, "window");
        w.size(layer.stride, "stride");
        break;
      case LayerKind::Relu:
      case LayerKind::Flatten:
        break;
    }
    if (net.has_params(i)) {
      const auto& p = net.params(i);
      w.u32(2);
      w.tensor(p.weights);
      w.tensor(p.bias);
    } else {
      w.u32(0);
    }
  }
  w.finish_with_crc();
  return w.take();
}

Network decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.magic(kCheckpointMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::UnsupportedVersion,
                "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t layer_count = r.u32();
  const std::uint32_t input_rank = r.u32();
  if (input_rank == 0 || input_rank > 8) {
    throw Error(ErrorCode::ShapeMismatch, "invalid input rank " + std::to_string(input_rank));
  }
  NetworkSpec spec;
  spec.input_shape.resize(input_rank);
  for (auto& e : spec.input_shape) e = r.u32();

  std::vector<std::vector<Tensor>> params;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    LayerSpec layer;
    layer.name = r.string(r.u32());
    const std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(LayerKind::Flatten)) {
      throw Error(ErrorCode::InvalidArgument, "unknown layer kind " + std::to_string(kind));
    }
    layer.kind = static_cast<LayerKind>(kind);
    switch (layer.kind) {
      case LayerKind::Dense:
        layer.units = r.u32();
        break;
      case LayerKind::Conv2d:
        layer.out_channels = r.u32();
        layer.kernel = r.u32();
        layer.stride = r.u32();
        layer.padding = r.u32();
        break;
      case LayerKind::MaxPool2d:
        layer.window = r.u32();
        layer.stride = r.u32();
        break;
      case LayerKind::Relu:
      case LayerKind::Flatten:
        break;
    }
    const std::uint32_t count = r.u32();
    std::vector<Tensor> tensors;
    for (std::uint32_t k = 0; k < count; ++k) tensors.push_back(r.tensor());
    spec.layers.push_back(std::move(layer));
    params.push_back(std::move(tensors));
  }
  r.verify_crc();

  Network net(std::move(spec));
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const std::size_t expected = net.has_params(i) ? 2 : 0;
    if (params[i].size() != expected) {
      throw Error(ErrorCode::ShapeMismatch, "layer '" + net.layer(i).name + "' stores " +
                                                std::to_string(params[i].size()) +
                                                " params, expected " + std::to_string(expected));
    }
    if (!expected) continue;
    auto& p = net.params(i);
    if (params[i][0].shape() != p.weights.shape() || params[i][1].shape() != p.bias.shape()) {
      throw Error(ErrorCode::ShapeMismatch, "layer '" + net.layer(i).name +
                                                "' parameter shapes do not match its layer definition");
    }
    p.weights = std::move(params[i][0]);
    p.bias = std::move(params[i][1]);
  }
  return net;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(net));
}

Network load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kTensorMagic, 4);
  w.u32(kTensorVersion);
  w.tensor(t);
  w.finish_with_crc();
  write_file(path, w.take());
}

Tensor load_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  Reader r(bytes);
  r.magic(kTensorMagic);
  const std::uint32_t version = r.u32();
  if (version != kTensorVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "unsupported tensor file version " + std::to_string(version));
  }
  Tensor t = r.tensor();
  r.verify_crc();
  return t;
}

}  // namespace ssc
