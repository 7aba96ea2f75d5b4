#pragma once

// Model checkpoint file (all integers little-endian):
//
//   magic      4 bytes  "BFCK"
//   version    u32      = 1
//   meta_len   u32      byte length of the JSON metadata that follows
//   meta       UTF-8 JSON: {"format_version", "code_version", "net": {...},
//              "step", "seed", "train": {...}?}
//   n_blocks   u32
//   per block:
//     name_len u16, name (ASCII)
//     ndim     u8, dims u32 x ndim
//     values   f32 x prod(dims)
//
// Block names are the parameter names (see param_names), then
// stem.bn.running_mean, stem.bn.running_var, and optimiser moments as
// adam.m.<param> / adam.v.<param> once training has started.

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "breathflow/net.hpp"

namespace breathflow {

inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json net_config_to_json(const NetConfig& c);
NetConfig net_config_from_json(const nlohmann::json& j);

/// `extra` is merged into the metadata (used for the training config echo).
void save_checkpoint(const std::filesystem::path& path, const ModelState<float>& state,
                     const nlohmann::json& extra = nlohmann::json::object());

/// Throws kIo on unreadable files and kDataError on malformed contents.
ModelState<float> load_checkpoint(const std::filesystem::path& path,
                                  nlohmann::json* metadata = nullptr);

}  // namespace breathflow
