#pragma once

// Versioned binary container for model weights. Layout is documented in
// docs/checkpoint-format.md; all integers and doubles are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tif/nn/layer_spec.hpp"
#include "tif/nn/tensor.hpp"

namespace tif::nn {

inline constexpr char kCheckpointMagic[8] = {'T', 'I', 'F', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  std::string model_kind;          // "text-cnn", "mini-cnn", ...
  std::string config;              // key = value text
  std::vector<LayerSpec> layers;
  std::vector<NamedTensor> params;
  std::map<std::string, std::string> sections;  // model-specific blobs

  const Tensor& param(const std::string& name) const {
    for (const auto& p : params)
      if (p.name == name) return p.value;
    throw CheckpointError("checkpoint has no parameter '" + name + "'");
  }

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// ---------------------------------------------------------------------------

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void blob(const std::string& s) {
    u64(s.size());
    buf_.append(s);
  }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string blob() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::uint64_t n) const {
    if (n > data_.size() - pos_) throw CheckpointError("checkpoint truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------

inline std::string serialize(const Checkpoint& ck) {
  ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(ck.model_kind);
  w.blob(ck.config);
  w.u32(static_cast<std::uint32_t>(ck.layers.size()));
  for (const auto& l : ck.layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.str(l.name);
    w.u64(l.kernel);
    w.u64(l.stride);
    w.u64(l.padding);
    w.u64(l.fan_in);
    w.u64(l.fan_out);
    w.u32(static_cast<std::uint32_t>(l.inputs.size()));
    for (int src : l.inputs) w.i32(src);
  }
  w.u32(static_cast<std::uint32_t>(ck.params.size()));
  for (const auto& p : ck.params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) w.u64(d);
    for (double v : p.value.data()) w.f64(v);
  }
  w.u32(static_cast<std::uint32_t>(ck.sections.size()));
  for (const auto& [name, body] : ck.sections) {
    w.str(name);
    w.blob(body);
  }
  return w.bytes();
}

inline Checkpoint deserialize_checkpoint(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.take(sizeof kCheckpointMagic) != std::string_view(kCheckpointMagic, sizeof kCheckpointMagic)) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.model_kind = r.str();
  ck.config = r.blob();
  const std::uint32_t n_layers = r.u32();
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec l;
    const std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(LayerKind::SoftmaxXent)) {
      throw CheckpointError("unknown layer kind " + std::to_string(kind));
    }
    l.kind = static_cast<LayerKind>(kind);
    l.name = r.str();
    l.kernel = r.u64();
    l.stride = r.u64();
    l.padding = r.u64();
    l.fan_in = r.u64();
    l.fan_out = r.u64();
    l.inputs.resize(r.u32());
    for (int& src : l.inputs) src = r.i32();
    ck.layers.push_back(std::move(l));
  }
  const std::uint32_t n_params = r.u32();
  for (std::uint32_t i = 0; i < n_params; ++i) {
    NamedTensor p;
    p.name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) throw CheckpointError("parameter " + p.name + ": bad rank " + std::to_string(rank));
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& d : shape) {
      d = r.u64();
      if (d == 0 || d > r.remaining() / 8 || count > r.remaining() / 8 / d) {
        throw CheckpointError("parameter " + p.name + ": shape exceeds file size");
      }
      count *= d;
    }
    std::vector<double> data(count);
    for (double& v : data) v = r.f64();
    p.value = Tensor(std::move(shape), std::move(data));
    ck.params.push_back(std::move(p));
  }
  const std::uint32_t n_sections = r.u32();
  for (std::uint32_t i = 0; i < n_sections; ++i) {
    std::string name = r.str();
    ck.sections[name] = r.blob();
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint");
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path);
  const std::string bytes = serialize(ck);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace tif::nn
