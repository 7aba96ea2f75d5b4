#pragma once

// Evaluation report: line-oriented text, one record per clip then a summary.
//
//   # breathflow evaluation report
//   code_version 0.1.0
//   config {"net":{...},...}
//   merge concatenate-nonoverlapping
//   spectrum one-sided
//   clip clip_id=clip_003 status=ok pred_bpm=30.1 ref_bpm=30 pred_hz=0.50166
//   clip clip_id=clip_008 status=failed reason=missing flow cache
//   summary n=15 failed=1 mae_bpm=0.8 rmse_bpm=1.1 pearson_r=0.97
//
// Numbers are written with 17 significant digits so the summary can be
// recomputed bit-for-bit from the rows. `reason` runs to the end of the line.
// pearson_r is "na" when undefined.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "breathflow/signal.hpp"

namespace breathflow {

struct ClipResult {
  std::string clip_id;
  bool ok = false;
  double pred_bpm = 0.0;
  double ref_bpm = 0.0;
  double pred_hz = 0.0;
  std::string reason;  // failure message
};

struct EvalReport {
  std::string code_version;
  std::string config_json;
  std::vector<ClipResult> clips;
  MetricsReport metrics;
  std::size_t failed = 0;
};

/// compute_metrics over the successful rows, in row order.
MetricsReport metrics_from_rows(const std::vector<ClipResult>& clips);

void write_report(std::ostream& out, const EvalReport& r);
void write_report(const std::filesystem::path& path, const EvalReport& r);
EvalReport read_report(std::istream& in);
EvalReport read_report(const std::filesystem::path& path);

}  // namespace breathflow
