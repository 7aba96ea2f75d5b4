// breathflow: respiration rate from video-derived optical flow.
//
// Exit codes: 0 ok, 1 unexpected failure, 2 usage, 3 invalid argument,
// 4 data error, 5 validation (e.g. subject leakage), 6 numerical, 7 I/O.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "breathflow/annotations.hpp"
#include "breathflow/error.hpp"
#include "breathflow/pipeline.hpp"
#include "breathflow/text.hpp"

namespace fs = std::filesystem;
using namespace breathflow;

namespace {

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Infant respiration rate from optical flow"};
  app.set_version_flag("--version", std::string(BREATHFLOW_VERSION));
  app.require_subcommand(1);

  // convert-annotations
  auto* conv = app.add_subcommand("convert-annotations", "Annotation CSV -> waveform files");
  std::string conv_in, conv_out;
  double conv_fps = 0.0, conv_radius = 4.0;
  std::optional<double> conv_duration;
  conv->add_option("--annotations", conv_in, "clip_id,exhalation_time_s CSV")->required();
  conv->add_option("--fps", conv_fps, "Output sample rate (video frame rate)")->required();
  conv->add_option("--out", conv_out, "Output directory")->required();
  conv->add_option("--duration", conv_duration, "Clip duration in seconds (all clips)");
  conv->add_option("--radius", conv_radius, "Gaussian sigma in frames")->capture_default_str();

  // compute-flow
  auto* flow = app.add_subcommand("compute-flow", "Compute per-clip flow caches");
  std::string flow_manifest, flow_cache, flow_config;
  flow->add_option("--manifest", flow_manifest)->required();
  flow->add_option("--cache-dir", flow_cache, std::string("Overrides $") + kCacheDirEnv);
  flow->add_option("--config", flow_config, "JSON config (flow section used)");

  // train
  auto* train = app.add_subcommand("train", "Train on the train split");
  std::string tr_manifest, tr_config, tr_out, tr_history, tr_cache, tr_loss;
  std::optional<int> tr_epochs;
  std::optional<std::uint64_t> tr_seed;
  train->add_option("--manifest", tr_manifest)->required();
  train->add_option("--config", tr_config, "JSON config");
  train->add_option("--out", tr_out, "Checkpoint path")->required();
  train->add_option("--history", tr_history, "Loss history CSV (default <out>.history.csv)");
  train->add_option("--cache-dir", tr_cache);
  train->add_option("--loss", tr_loss, "sb | l1 | l2 | negpearson (overrides config)");
  train->add_option("--epochs", tr_epochs);
  train->add_option("--seed", tr_seed);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint");
  std::string ev_manifest, ev_model, ev_cache, ev_out, ev_split = "test";
  eval->add_option("--manifest", ev_manifest)->required();
  eval->add_option("--model", ev_model)->required();
  eval->add_option("--cache-dir", ev_cache);
  eval->add_option("--out", ev_out, "Report path (default: stdout)");
  eval->add_option("--split", ev_split)->check(CLI::IsMember({"test", "train", "all"}))
      ->capture_default_str();

  // estimate
  auto* est = app.add_subcommand("estimate", "Rate for one frames directory");
  std::string es_frames, es_model, es_waveform;
  double es_fps = 0.0;
  est->add_option("--frames", es_frames, "Directory of PGM/PPM frames")->required();
  est->add_option("--fps", es_fps)->required();
  est->add_option("--model", es_model)->required();
  est->add_option("--waveform", es_waveform, "Write the filtered waveform here");

  // synth
  auto* syn = app.add_subcommand("synth", "Generate a synthetic dataset");
  DatasetOptions so;
  std::string sy_out, sy_distractor = "none";
  syn->add_option("--out", sy_out)->required();
  syn->add_option("--n", so.n_clips)->capture_default_str();
  syn->add_option("--rate-lo", so.rate_lo_bpm)->capture_default_str();
  syn->add_option("--rate-hi", so.rate_hi_bpm)->capture_default_str();
  syn->add_option("--seed", so.seed)->capture_default_str();
  syn->add_option("--duration", so.duration_s)->capture_default_str();
  syn->add_option("--amplitude", so.amplitude_px)->capture_default_str();
  syn->add_option("--noise", so.noise_std)->capture_default_str();
  syn->add_option("--distractor", sy_distractor)
      ->check(CLI::IsMember({"none", "global_jitter", "secondary_oscillator"}));
  syn->add_option("--jitter", so.annotation_jitter_s, "Per-clip annotation shift bound, s");
  syn->add_flag("--frames", so.render_frames, "Render frame sequences instead of flow caches");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*conv) {
      const auto files = cmd_convert_annotations(conv_in, conv_fps, conv_out, conv_duration, conv_radius);
      for (const auto& f : files) std::cout << f.string() << '\n';
    } else if (*flow) {
      const Manifest m = read_manifest(flow_manifest);
      const PipelineConfig cfg = flow_config.empty() ? PipelineConfig{} : load_config(flow_config);
      const auto stats = cmd_compute_flow(m, resolve_cache_dir(opt_path(flow_cache), m), cfg.flow, std::cerr);
      std::cout << "computed=" << stats.computed << " skipped=" << stats.skipped
                << " failed=" << stats.failed << '\n';
      if (stats.failed > 0) return static_cast<int>(ErrorCode::kDataError);
    } else if (*train) {
      const Manifest m = read_manifest(tr_manifest);
      PipelineConfig cfg = tr_config.empty() ? PipelineConfig{} : load_config(tr_config);
      if (!tr_loss.empty()) cfg.train.loss = parse_loss_kind(tr_loss);
      if (tr_epochs) cfg.train.epochs = *tr_epochs;
      if (tr_seed) cfg.train.seed = *tr_seed;
      const fs::path history = tr_history.empty() ? fs::path(tr_out + ".history.csv") : fs::path(tr_history);
      const auto losses = cmd_train(m, cfg, resolve_cache_dir(opt_path(tr_cache), m), tr_out, history, std::cerr);
      std::cout << "final_loss=" << text::format_double(losses.back()) << '\n';
    } else if (*eval) {
      const Manifest m = read_manifest(ev_manifest);
      std::optional<Split> split;
      if (ev_split == "test") split = Split::kTest;
      else if (ev_split == "train") split = Split::kTrain;
      const EvalReport r = cmd_evaluate(m, ev_model, resolve_cache_dir(opt_path(ev_cache), m), split);
      if (ev_out.empty()) write_report(std::cout, r);
      else write_report(fs::path(ev_out), r);
    } else if (*est) {
      const ClipPrediction p = cmd_estimate(es_frames, es_fps, es_model);
      if (!es_waveform.empty()) write_waveform(es_waveform, p.filtered);
      std::cout << "bpm=" << text::format_double(p.rate.bpm)
                << " peak_hz=" << text::format_double(p.rate.peak_freq_hz)
                << " chunks=" << p.chunks << '\n';
    } else if (*syn) {
      so.distractor = parse_distractor(sy_distractor);
      std::cout << cmd_synth(so, sy_out).string() << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
