#pragma once

// JSON pipeline configuration. Every field is optional; missing keys keep
// their defaults. Example:
//
//   {
//     "net":   {"chunk_len": 150, "block_channels": [16, 32], "tsm_fraction": 0.25},
//     "train": {"loss": "sb", "learning_rate": 0.001, "epochs": 30,
//               "batch_size": 1, "seed": 0},
//     "flow":  {"alpha": 0.02, "warp_iterations": 3, "relaxation_sweeps": 30},
//     "reference": {"radius_frames": 4}
//   }

#include <filesystem>

#include <json.hpp>

#include "breathflow/flow.hpp"
#include "breathflow/net.hpp"

namespace breathflow {

struct PipelineConfig {
  NetConfig net;
  TrainConfig train;
  FlowParams flow;
  double radius_frames = 4.0;  // Gaussian sigma for annotation waveforms, native frames

  void validate() const;
};

PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& c);
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace breathflow
