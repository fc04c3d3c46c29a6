#pragma once

#include "cosmic/encoder.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace cosmic {

// Binary layout (little-endian host order):
//   8 bytes  magic "COSMICCK"
//   u32      format version
//   u32      header length L
//   L bytes  JSON header: dtype, dims, seed, episode, tensor names, config
//   per tensor (weight, head_weight, head_bias): u64 rows, u64 cols,
//   rows*cols values of dtype in row-major order
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t seed = 0;
  int episode = 0;
  nlohmann::json config = nlohmann::json::object();
};

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<Scalar>& params, const CheckpointMeta& meta);

/// Reads only the JSON header.
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

/// Loads parameters, converting from the stored dtype if needed.
template <typename Scalar>
ModelParams<Scalar> load_checkpoint(const std::filesystem::path& path, nlohmann::json* header = nullptr);

extern template void save_checkpoint<float>(const std::filesystem::path&, const ModelParams<float>&, const CheckpointMeta&);
extern template void save_checkpoint<double>(const std::filesystem::path&, const ModelParams<double>&, const CheckpointMeta&);
extern template ModelParams<float> load_checkpoint<float>(const std::filesystem::path&, nlohmann::json*);
extern template ModelParams<double> load_checkpoint<double>(const std::filesystem::path&, nlohmann::json*);

}  // namespace cosmic
