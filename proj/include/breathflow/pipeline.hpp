#pragma once

// The command-line pipeline as library calls; tools/breathflow_cli.cpp is a
// thin argument-parsing layer over these.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "breathflow/config.hpp"
#include "breathflow/manifest.hpp"
#include "breathflow/net.hpp"
#include "breathflow/report.hpp"
#include "breathflow/synth.hpp"

namespace breathflow {

inline constexpr const char* kCacheDirEnv = "BREATHFLOW_CACHE_DIR";

/// --cache-dir if given, else $BREATHFLOW_CACHE_DIR, else <manifest dir>/cache.
std::filesystem::path resolve_cache_dir(const std::optional<std::filesystem::path>& flag,
                                        const Manifest& manifest);

std::filesystem::path cache_file(const std::filesystem::path& cache_dir, const std::string& clip_id);

/// Annotation waveform at the clip's native rate, resampled to 5 Hz.
Waveform reference_waveform(const AnnotationTrack& track, double native_fps, double radius_frames);

/// Annotation tracks for each manifest entry, with durations filled in and
/// validated. Throws naming the clip on a missing or invalid track.
AnnotationTrack load_track(const Manifest& manifest, const ManifestEntry& entry);

/// One waveform file per clip, written to out_dir/<clip_id>.csv. Without
/// duration_s a clip ends one frame after its last annotation.
std::vector<std::filesystem::path> cmd_convert_annotations(
    const std::filesystem::path& annotations, double fps, const std::filesystem::path& out_dir,
    std::optional<double> duration_s = std::nullopt, double radius_frames = 4.0);

struct ComputeFlowStats {
  std::size_t computed = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
};

/// Flow caches for every manifest clip; caches newer than their frames are
/// kept, corrupt ones are recomputed, per-clip failures are logged and
/// counted while the run continues.
ComputeFlowStats cmd_compute_flow(const Manifest& manifest, const std::filesystem::path& cache_dir,
                                  const FlowParams& params, std::ostream& log);

/// Trains on the train split and writes the checkpoint and a history file
/// ("epoch,loss" rows). Refuses manifests that leak a subject across splits.
/// Returns the per-epoch mean losses.
std::vector<double> cmd_train(const Manifest& manifest, const PipelineConfig& config,
                              const std::filesystem::path& cache_dir,
                              const std::filesystem::path& out_model,
                              const std::filesystem::path& history_path, std::ostream& log);

/// Evaluates the given split (default: test). Clips without a usable cache
/// are reported as failed and excluded from the metrics.
EvalReport cmd_evaluate(const Manifest& manifest, const std::filesystem::path& model,
                        const std::filesystem::path& cache_dir,
                        std::optional<Split> split = Split::kTest);

/// Frames directory -> flow -> network -> rate, using the flow and HSV
/// settings stored with the model unless `flow` overrides them.
ClipPrediction cmd_estimate(const std::filesystem::path& frames_dir, double fps,
                            const std::filesystem::path& model,
                            std::optional<FlowParams> flow = std::nullopt);

/// Pipeline settings saved alongside a checkpoint (defaults if absent).
PipelineConfig checkpoint_config(const std::filesystem::path& model);

std::filesystem::path cmd_synth(const DatasetOptions& options, const std::filesystem::path& out_dir);

}  // namespace breathflow
