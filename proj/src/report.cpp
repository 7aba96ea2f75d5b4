#include "breathflow/report.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "breathflow/error.hpp"
#include "breathflow/text.hpp"

namespace breathflow {
namespace {

constexpr const char* kTitle = "# breathflow evaluation report";

// key=value tokens after the record keyword; a `reason=` token swallows the
// rest of the line.
std::map<std::string, std::string> parse_fields(const std::string& rest, std::size_t line_no) {
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  while (pos < rest.size()) {
    while (pos < rest.size() && rest[pos] == ' ') ++pos;
    if (pos >= rest.size()) break;
    const auto eq = rest.find('=', pos);
    require(eq != std::string::npos, ErrorCode::kDataError,
            "report line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = rest.substr(pos, eq - pos);
    if (key == "reason") {
      out[key] = rest.substr(eq + 1);
      break;
    }
    auto end = rest.find(' ', eq);
    if (end == std::string::npos) end = rest.size();
    out[key] = rest.substr(eq + 1, end - eq - 1);
    pos = end;
  }
  return out;
}

double number(const std::map<std::string, std::string>& f, const std::string& key,
              std::size_t line_no) {
  const auto it = f.find(key);
  double v = 0.0;
  require(it != f.end() && text::parse_double(it->second, v), ErrorCode::kDataError,
          "report line " + std::to_string(line_no) + ": missing or bad " + key);
  return v;
}

}  // namespace

MetricsReport metrics_from_rows(const std::vector<ClipResult>& clips) {
  std::vector<double> pred, ref;
  for (const auto& c : clips)
    if (c.ok) {
      pred.push_back(c.pred_bpm);
      ref.push_back(c.ref_bpm);
    }
  if (pred.empty()) return MetricsReport{};
  return compute_metrics(pred, ref);
}

void write_report(std::ostream& out, const EvalReport& r) {
  using text::format_double;
  out << kTitle << '\n';
  out << "code_version " << r.code_version << '\n';
  out << "config " << r.config_json << '\n';
  out << "merge concatenate-nonoverlapping\n";
  out << "spectrum one-sided\n";
  for (const auto& c : r.clips) {
    out << "clip clip_id=" << c.clip_id;
    if (c.ok)
      out << " status=ok pred_bpm=" << format_double(c.pred_bpm)
          << " ref_bpm=" << format_double(c.ref_bpm) << " pred_hz=" << format_double(c.pred_hz);
    else
      out << " status=failed reason=" << c.reason;
    out << '\n';
  }
  out << "summary n=" << r.metrics.n << " failed=" << r.failed
      << " mae_bpm=" << format_double(r.metrics.mae_bpm)
      << " rmse_bpm=" << format_double(r.metrics.rmse_bpm) << " pearson_r="
      << (r.metrics.pearson_r ? format_double(*r.metrics.pearson_r) : std::string("na")) << '\n';
}

void write_report(const std::filesystem::path& path, const EvalReport& r) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "cannot write report " + path.string());
  write_report(out, r);
  require(out.good(), ErrorCode::kIo, "short write to " + path.string());
}

EvalReport read_report(std::istream& in) {
  EvalReport r;
  std::string line;
  std::size_t line_no = 0;
  bool summary = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto sp = line.find(' ');
    const std::string kind = line.substr(0, sp);
    const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (kind == "code_version") {
      r.code_version = rest;
    } else if (kind == "config") {
      r.config_json = rest;
    } else if (kind == "clip") {
      const auto f = parse_fields(rest, line_no);
      ClipResult c;
      c.clip_id = f.count("clip_id") ? f.at("clip_id") : "";
      c.ok = f.count("status") && f.at("status") == "ok";
      if (c.ok) {
        c.pred_bpm = number(f, "pred_bpm", line_no);
        c.ref_bpm = number(f, "ref_bpm", line_no);
        c.pred_hz = number(f, "pred_hz", line_no);
      } else {
        c.reason = f.count("reason") ? f.at("reason") : "";
      }
      r.clips.push_back(std::move(c));
    } else if (kind == "summary") {
      const auto f = parse_fields(rest, line_no);
      r.metrics.n = static_cast<std::size_t>(number(f, "n", line_no));
      r.failed = static_cast<std::size_t>(number(f, "failed", line_no));
      r.metrics.mae_bpm = number(f, "mae_bpm", line_no);
      r.metrics.rmse_bpm = number(f, "rmse_bpm", line_no);
      if (f.count("pearson_r") && f.at("pearson_r") != "na")
        r.metrics.pearson_r = number(f, "pearson_r", line_no);
      summary = true;
    }
  }
  require(summary, ErrorCode::kDataError, "report has no summary line");
  return r;
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open report " + path.string());
  return read_report(in);
}

}  // namespace breathflow
