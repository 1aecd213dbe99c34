#include "cts/nn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cts/common/error.hpp"

namespace cts::nn {

namespace {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    // Fixed little-endian layout regardless of host order.
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out_.append(reinterpret_cast<const char*>(b), sizeof(T));
  }
  void bytes(const std::string& s) { out_ += s; }
  template <typename M, typename T>
  void matrix(const M& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put<T>(static_cast<T>(m(r, c)));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    unsigned char b[sizeof(T)];
    std::memcpy(b, s_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    auto out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  template <typename M, typename T>
  M matrix(std::uint32_t rows, std::uint32_t cols) {
    need(static_cast<std::size_t>(rows) * cols * sizeof(T));
    M m(rows, cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get<T>();
    return m;
  }
  bool at_end() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (s_.size() - pos_ < n) throw CheckpointError("checkpoint is truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes("CTSN");
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.meta.size()));
  w.bytes(ckpt.meta);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.cols()));
    w.matrix<Eigen::MatrixXf, float>(t);
  }
  w.put<std::uint8_t>(ckpt.adam ? 1 : 0);
  if (ckpt.adam) {
    if (ckpt.adam->m.size() != ckpt.tensors.size() || ckpt.adam->v.size() != ckpt.tensors.size())
      throw CheckpointError("optimizer state does not match the tensor list");
    w.put<std::uint64_t>(ckpt.adam->step);
    for (const auto& m : ckpt.adam->m) w.matrix<Eigen::MatrixXd, double>(m);
    for (const auto& v : ckpt.adam->v) w.matrix<Eigen::MatrixXd, double>(v);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.bytes(4) != "CTSN") throw CheckpointError("not a checkpoint file (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.meta = r.bytes(r.get<std::uint32_t>());
  const auto count = r.get<std::uint32_t>();
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    shapes.emplace_back(rows, cols);
    ckpt.tensors.push_back(r.matrix<Eigen::MatrixXf, float>(rows, cols));
  }
  if (r.get<std::uint8_t>()) {
    Checkpoint::AdamState adam;
    adam.step = r.get<std::uint64_t>();
    for (const auto& [rows, cols] : shapes) adam.m.push_back(r.matrix<Eigen::MatrixXd, double>(rows, cols));
    for (const auto& [rows, cols] : shapes) adam.v.push_back(r.matrix<Eigen::MatrixXd, double>(rows, cols));
    ckpt.adam = std::move(adam);
  }
  if (!r.at_end()) throw CheckpointError("trailing bytes after checkpoint data");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write '" + path + "'");
  const auto bytes = encode_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace cts::nn
