#include "breathflow/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "breathflow/checkpoint.hpp"
#include "breathflow/error.hpp"

namespace breathflow {
namespace {

using nlohmann::json;

void reject_unknown(const json& section, const std::string& name,
                    const std::set<std::string>& known) {
  require(section.is_object(), ErrorCode::kInvalidArgument,
          "config: section '" + name + "' must be an object");
  for (const auto& [key, _] : section.items())
    require(known.count(key) > 0, ErrorCode::kInvalidArgument,
            "config: unknown key '" + name + "." + key + "'");
}

}  // namespace

void PipelineConfig::validate() const {
  net.validate();
  require(train.learning_rate > 0.0 && std::isfinite(train.learning_rate),
          ErrorCode::kInvalidArgument, "train.learning_rate must be > 0");
  require(train.epochs >= 1, ErrorCode::kInvalidArgument, "train.epochs must be >= 1");
  require(train.batch_size >= 1, ErrorCode::kInvalidArgument, "train.batch_size must be >= 1");
  require(flow.pyramid_scale > 0.0 && flow.pyramid_scale < 1.0, ErrorCode::kInvalidArgument,
          "flow.pyramid_scale must be in (0, 1)");
  require(flow.min_side >= 4 && flow.alpha > 0.0 && flow.epsilon > 0.0 &&
              flow.warp_iterations >= 1 && flow.irls_iterations >= 1 &&
              flow.relaxation_sweeps >= 1 && flow.omega > 0.0 && flow.omega < 2.0 &&
              flow.hsv_mag_ref > 0.0,
          ErrorCode::kInvalidArgument, "flow parameters out of range");
  require(radius_frames >= 0.0, ErrorCode::kInvalidArgument,
          "reference.radius_frames must be >= 0");
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  require(j.is_object(), ErrorCode::kInvalidArgument, "config must be a JSON object");
  reject_unknown(j, "config", {"net", "train", "flow", "reference"});
  try {
    if (j.contains("net")) {
      reject_unknown(j["net"], "net",
                     {"chunk_len", "in_channels", "block_channels", "tsm_fraction", "input_size"});
      c.net = net_config_from_json(j["net"]);
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      reject_unknown(t, "train", {"loss", "learning_rate", "epochs", "batch_size", "seed"});
      if (t.contains("loss")) c.train.loss = parse_loss_kind(t["loss"].get<std::string>());
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.seed = t.value("seed", c.train.seed);
    }
    if (j.contains("flow")) {
      const json& f = j["flow"];
      reject_unknown(f, "flow",
                     {"pyramid_scale", "min_side", "alpha", "epsilon", "warp_iterations",
                      "irls_iterations", "relaxation_sweeps", "omega", "hsv_mag_ref"});
      c.flow.pyramid_scale = f.value("pyramid_scale", c.flow.pyramid_scale);
      c.flow.min_side = f.value("min_side", c.flow.min_side);
      c.flow.alpha = f.value("alpha", c.flow.alpha);
      c.flow.epsilon = f.value("epsilon", c.flow.epsilon);
      c.flow.warp_iterations = f.value("warp_iterations", c.flow.warp_iterations);
      c.flow.irls_iterations = f.value("irls_iterations", c.flow.irls_iterations);
      c.flow.relaxation_sweeps = f.value("relaxation_sweeps", c.flow.relaxation_sweeps);
      c.flow.omega = f.value("omega", c.flow.omega);
      c.flow.hsv_mag_ref = f.value("hsv_mag_ref", c.flow.hsv_mag_ref);
    }
    if (j.contains("reference")) {
      reject_unknown(j["reference"], "reference", {"radius_frames"});
      c.radius_frames = j["reference"].value("radius_frames", c.radius_frames);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

json config_to_json(const PipelineConfig& c) {
  return {
      {"net", net_config_to_json(c.net)},
      {"train",
       {{"loss", std::string(loss_kind_name(c.train.loss))},
        {"learning_rate", c.train.learning_rate},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"seed", c.train.seed}}},
      {"flow",
       {{"pyramid_scale", c.flow.pyramid_scale},
        {"min_side", c.flow.min_side},
        {"alpha", c.flow.alpha},
        {"epsilon", c.flow.epsilon},
        {"warp_iterations", c.flow.warp_iterations},
        {"irls_iterations", c.flow.irls_iterations},
        {"relaxation_sweeps", c.flow.relaxation_sweeps},
        {"omega", c.flow.omega},
        {"hsv_mag_ref", c.flow.hsv_mag_ref}}},
      {"reference", {{"radius_frames", c.radius_frames}}},
  };
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace breathflow
