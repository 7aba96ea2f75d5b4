#pragma once

// Per-clip flow cache:
//
//   offset  size  field
//   0       4     magic "AFLW"
//   4       2     version (u16, little-endian) = 1
//   6       2     width (u16)
//   8       2     height (u16)
//   10      4     field count (u32)
//   14      4     rate_hz (f32)
//   18      ...   per field: u plane then v plane, row-major little-endian f32
//
// HSV is recomputed on load and never stored.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "breathflow/flow.hpp"

namespace breathflow {

inline constexpr std::uint16_t kFlowCacheVersion = 1;

struct FlowCacheHeader {
  std::uint16_t version = kFlowCacheVersion;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint32_t field_count = 0;
  float rate_hz = 0.0f;
};

void write_flow_cache(const std::filesystem::path& path, const std::vector<FlowField>& fields,
                      double rate_hz = kFlowRateHz);

/// Header only; nullopt if the file is missing, truncated, or has a bad magic
/// or version, or if its size does not match the header.
std::optional<FlowCacheHeader> probe_flow_cache(const std::filesystem::path& path);

std::vector<FlowField> read_flow_cache(const std::filesystem::path& path,
                                       FlowCacheHeader* header = nullptr);

}  // namespace breathflow
