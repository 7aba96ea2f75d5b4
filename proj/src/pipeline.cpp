#include "breathflow/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "breathflow/annotations.hpp"
#include "breathflow/checkpoint.hpp"
#include "breathflow/error.hpp"
#include "breathflow/flow_cache.hpp"
#include "breathflow/netpbm.hpp"
#include "breathflow/text.hpp"

namespace breathflow {
namespace fs = std::filesystem;

namespace {

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

// Newest modification time among the frames directory and its images.
fs::file_time_type newest_input(const fs::path& frames_dir) {
  auto newest = fs::last_write_time(frames_dir);
  for (const auto& f : list_frames(frames_dir)) newest = std::max(newest, fs::last_write_time(f));
  return newest;
}

FlowClip load_clip(const fs::path& cache, double mag_ref) {
  require(fs::exists(cache), ErrorCode::kDataError, "missing flow cache " + cache.string());
  require(probe_flow_cache(cache).has_value(), ErrorCode::kDataError,
          "corrupt flow cache " + cache.string());
  return make_flow_clip(read_flow_cache(cache), mag_ref);
}

}  // namespace

fs::path resolve_cache_dir(const std::optional<fs::path>& flag, const Manifest& manifest) {
  if (flag) return *flag;
  if (const char* env = std::getenv(kCacheDirEnv); env && *env) return fs::path(env);
  return manifest.base_dir / "cache";
}

fs::path cache_file(const fs::path& cache_dir, const std::string& clip_id) {
  return cache_dir / (clip_id + ".aflw");
}

Waveform reference_waveform(const AnnotationTrack& track, double native_fps, double radius_frames) {
  return resample(annotations_to_waveform(track, native_fps, radius_frames), kFlowRateHz);
}

AnnotationTrack load_track(const Manifest& manifest, const ManifestEntry& entry) {
  const auto tracks = read_annotations(manifest.resolve(entry.annotation_path));
  for (const auto& t : tracks)
    if (t.clip_id == entry.clip_id) {
      AnnotationTrack out = t;
      out.clip_duration_s = entry.duration_s;
      try {
        out.validate();
      } catch (const Error& e) {
        throw Error(e.code(), "clip " + entry.clip_id + ": " + e.what());
      }
      return out;
    }
  throw Error(ErrorCode::kDataError, "clip " + entry.clip_id + ": no annotations");
}

std::vector<fs::path> cmd_convert_annotations(const fs::path& annotations, double fps,
                                              const fs::path& out_dir,
                                              std::optional<double> duration_s,
                                              double radius_frames) {
  require(fps > 0.0 && std::isfinite(fps), ErrorCode::kInvalidArgument, "fps must be > 0");
  auto tracks = read_annotations(annotations);
  require(!tracks.empty(), ErrorCode::kDataError,
          annotations.string() + ": no annotations");
  // validate everything before writing anything
  for (auto& t : tracks) {
    t.clip_duration_s = duration_s ? *duration_s
                                   : (t.exhalation_times_s.empty()
                                          ? 0.0
                                          : *std::max_element(t.exhalation_times_s.begin(),
                                                              t.exhalation_times_s.end()) +
                                                1.0 / fps);
    try {
      t.validate();
    } catch (const Error& e) {
      throw Error(e.code(), "clip " + t.clip_id + ": " + e.what());
    }
  }
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (const auto& t : tracks) {
    const fs::path out = out_dir / (t.clip_id + ".csv");
    write_waveform(out, annotations_to_waveform(t, fps, radius_frames));
    written.push_back(out);
  }
  return written;
}

ComputeFlowStats cmd_compute_flow(const Manifest& manifest, const fs::path& cache_dir,
                                  const FlowParams& params, std::ostream& log) {
  manifest.validate();
  fs::create_directories(cache_dir);
  enum class Outcome { kComputed, kSkipped, kFailed };
  const std::size_t n = manifest.entries.size();
  std::vector<Outcome> outcome(n, Outcome::kFailed);
  std::vector<std::string> messages(n);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = manifest.entries[i];
    const fs::path cache = cache_file(cache_dir, e.clip_id);
    std::ostringstream msg;
    try {
      const bool exists = fs::exists(cache);
      const bool valid = exists && probe_flow_cache(cache).has_value();
      if (!e.has_frames()) {
        require(valid, ErrorCode::kDataError, "no frames and no valid flow cache");
        outcome[i] = Outcome::kSkipped;
        msg << "skip " << e.clip_id << " (flow-only clip, cache present)";
      } else {
        const fs::path frames = manifest.resolve(e.frames_path);
        if (valid && fs::last_write_time(cache) >= newest_input(frames)) {
          outcome[i] = Outcome::kSkipped;
          msg << "skip " << e.clip_id << " (cache up to date)";
        } else {
          if (exists && !valid)
            msg << "warning: corrupt flow cache for " << e.clip_id << ", recomputing\n";
          const FlowClip clip = preprocess_clip(read_frame_dir(frames), e.native_fps, params);
          write_flow_cache(cache, clip.fields, clip.rate_hz);
          outcome[i] = Outcome::kComputed;
          msg << "flow " << e.clip_id << ": " << clip.fields.size() << " fields";
        }
      }
    } catch (const std::exception& ex) {
      outcome[i] = Outcome::kFailed;
      msg << "error: " << e.clip_id << ": " << one_line(ex.what());
    }
    messages[i] = msg.str();
  }

  ComputeFlowStats stats;
  for (std::size_t i = 0; i < n; ++i) {
    log << messages[i] << '\n';
    if (outcome[i] == Outcome::kComputed) ++stats.computed;
    else if (outcome[i] == Outcome::kSkipped) ++stats.skipped;
    else ++stats.failed;
  }
  return stats;
}

std::vector<double> cmd_train(const Manifest& manifest, const PipelineConfig& config,
                              const fs::path& cache_dir, const fs::path& out_model,
                              const fs::path& history_path, std::ostream& log) {
  manifest.validate();  // refuses subject leakage
  config.validate();
  const auto len = static_cast<std::size_t>(config.net.chunk_len);

  std::vector<TrainSample<float>> samples;
  for (const auto& e : manifest.entries) {
    if (e.split != Split::kTrain) continue;
    const FlowClip clip = load_clip(cache_file(cache_dir, e.clip_id), config.flow.hsv_mag_ref);
    require(!clip.hsv.empty() && clip.hsv.front().h.width() == config.net.input_size,
            ErrorCode::kDataError, "clip " + e.clip_id + ": flow size does not match input_size");
    const Waveform ref = reference_waveform(load_track(manifest, e), e.native_fps,
                                            config.radius_frames);
    const std::size_t usable = std::min(clip.hsv.size(), ref.size());
    require(usable >= len, ErrorCode::kDataError,
            "clip " + e.clip_id + ": clip too short for one chunk");
    for (std::size_t k = 0; k + len <= usable; k += len) {
      TrainSample<float> s;
      s.chunk = prepare_chunk<float>(clip, k, len);
      s.ref.assign(ref.samples().begin() + static_cast<std::ptrdiff_t>(k),
                   ref.samples().begin() + static_cast<std::ptrdiff_t>(k + len));
      samples.push_back(std::move(s));
    }
  }
  require(!samples.empty(), ErrorCode::kDataError, "no training clips in manifest");
  log << "training on " << samples.size() << " chunks, loss " << loss_kind_name(config.train.loss)
      << '\n';

  ModelState<float> state = init_model<float>(config.net, config.train.seed);
  std::mt19937_64 rng(config.train.seed);
  std::vector<std::size_t> order(samples.size());
  std::vector<double> history;
  for (int epoch = 0; epoch < config.train.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.train.batch_size)) {
      std::vector<TrainSample<float>> batch;
      for (std::size_t k = b; k < std::min(order.size(), b + config.train.batch_size); ++k)
        batch.push_back(samples[order[k]]);
      sum += train_step(state, batch, config.train);
      ++steps;
    }
    history.push_back(sum / static_cast<double>(steps));
    log << "epoch " << epoch + 1 << " loss " << text::format_double(history.back()) << '\n';
  }

  nlohmann::json extra;
  extra["config"] = config_to_json(config);
  save_checkpoint(out_model, state, extra);
  std::ofstream hist(history_path, std::ios::trunc);
  require(hist.good(), ErrorCode::kIo, "cannot write history " + history_path.string());
  hist << "epoch,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i)
    hist << i + 1 << ',' << text::format_double(history[i]) << '\n';
  require(hist.good(), ErrorCode::kIo, "short write to " + history_path.string());
  return history;
}

PipelineConfig checkpoint_config(const fs::path& model) {
  nlohmann::json meta;
  const ModelState<float> state = load_checkpoint(model, &meta);
  PipelineConfig c = meta.contains("config") ? config_from_json(meta["config"]) : PipelineConfig{};
  c.net = state.config;
  return c;
}

EvalReport cmd_evaluate(const Manifest& manifest, const fs::path& model, const fs::path& cache_dir,
                        std::optional<Split> split) {
  manifest.validate();
  nlohmann::json meta;
  const ModelState<float> state = load_checkpoint(model, &meta);
  PipelineConfig config = meta.contains("config") ? config_from_json(meta["config"]) : PipelineConfig{};
  config.net = state.config;

  std::vector<const ManifestEntry*> entries;
  for (const auto& e : manifest.entries)
    if (!split || e.split == *split) entries.push_back(&e);
  require(!entries.empty(), ErrorCode::kDataError, "no clips to evaluate");

  std::vector<ClipResult> rows(entries.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const ManifestEntry& e = *entries[i];
    ClipResult& r = rows[i];
    r.clip_id = e.clip_id;
    try {
      const FlowClip clip = load_clip(cache_file(cache_dir, e.clip_id), config.flow.hsv_mag_ref);
      const ClipPrediction p = predict_clip(state, clip);
      const Waveform ref =
          reference_waveform(load_track(manifest, e), e.native_fps, config.radius_frames);
      const RateEstimate ref_rate = estimate_rate(bandpass_filter(ref));
      r.ok = true;
      r.pred_bpm = p.rate.bpm;
      r.pred_hz = p.rate.peak_freq_hz;
      r.ref_bpm = ref_rate.bpm;
    } catch (const std::exception& ex) {
      r.ok = false;
      r.reason = one_line(ex.what());
    }
  }

  EvalReport report;
  report.code_version = BREATHFLOW_VERSION;
  report.config_json = config_to_json(config).dump();
  report.clips = std::move(rows);
  report.failed = static_cast<std::size_t>(
      std::count_if(report.clips.begin(), report.clips.end(), [](const ClipResult& c) { return !c.ok; }));
  report.metrics = metrics_from_rows(report.clips);
  return report;
}

ClipPrediction cmd_estimate(const fs::path& frames_dir, double fps, const fs::path& model,
                            std::optional<FlowParams> flow) {
  nlohmann::json meta;
  const ModelState<float> state = load_checkpoint(model, &meta);
  PipelineConfig config = meta.contains("config") ? config_from_json(meta["config"]) : PipelineConfig{};
  const FlowParams params = flow.value_or(config.flow);
  FlowClip clip = preprocess_clip(read_frame_dir(frames_dir), fps, params);
  return predict_clip(state, clip);
}

fs::path cmd_synth(const DatasetOptions& options, const fs::path& out_dir) {
  return make_synthetic_dataset(out_dir, options);
}

}  // namespace breathflow
