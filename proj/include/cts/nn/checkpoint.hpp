#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cts::nn {

/// Contents of a checkpoint file. All numbers little-endian:
///   "CTSN" | u32 version=1 | u32 meta_len | meta (UTF-8 JSON)
///   | u32 tensor_count | per tensor: u32 rows, u32 cols, rows*cols f32 row-major
///   | u8 has_adam | if 1: u64 step, then per tensor the first and second
///     moments as rows*cols f64 row-major (first moments of all tensors, then
///     second moments of all tensors).
struct Checkpoint {
  std::string meta;
  std::vector<Eigen::MatrixXf> tensors;
  struct AdamState {
    std::uint64_t step = 0;
    std::vector<Eigen::MatrixXd> m;
    std::vector<Eigen::MatrixXd> v;
  };
  std::optional<AdamState> adam;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointError on a bad magic, version or truncated data.
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cts::nn
