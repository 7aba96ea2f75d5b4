#include "breathflow/annotations.hpp"

#include <fstream>
#include <sstream>

#include "breathflow/error.hpp"
#include "breathflow/text.hpp"

namespace breathflow {
using text::format_double;
using text::parse_double;
using text::trim;

std::vector<AnnotationTrack> parse_annotations(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kDataError,
          "annotation file: missing header line");
  // tolerate a UTF-8 byte order mark
  text::strip_bom(line);
  require(trim(line) == kAnnotationHeader, ErrorCode::kDataError,
          std::string("annotation file line 1: expected header '") + kAnnotationHeader + "'");

  std::vector<AnnotationTrack> tracks;
  std::map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    const std::string where = "annotation file line " + std::to_string(line_no) + ": ";
    require(comma != std::string::npos && line.find(',', comma + 1) == std::string::npos,
            ErrorCode::kDataError, where + "expected 'clip_id,exhalation_time_s'");
    const std::string id = trim(line.substr(0, comma));
    const std::string time_text = trim(line.substr(comma + 1));
    require(!id.empty(), ErrorCode::kDataError, where + "empty clip id");
    double t = 0.0;
    require(parse_double(time_text, t), ErrorCode::kDataError,
            where + "bad timestamp '" + time_text + "'");
    auto [it, inserted] = index.try_emplace(id, tracks.size());
    if (inserted) tracks.push_back(AnnotationTrack{id, {}, 0.0});
    tracks[it->second].exhalation_times_s.push_back(t);
  }
  return tracks;
}

std::vector<AnnotationTrack> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open annotation file " + path.string());
  return parse_annotations(in);
}

void write_annotations(std::ostream& out, const std::vector<AnnotationTrack>& tracks) {
  out << kAnnotationHeader << '\n';
  for (const auto& t : tracks)
    for (double s : t.exhalation_times_s) out << t.clip_id << ',' << format_double(s) << '\n';
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<AnnotationTrack>& tracks) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  write_annotations(out, tracks);
}

void write_waveform(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out << "sample_rate_hz," << format_double(w.sample_rate_hz()) << '\n';
  for (double s : w.samples()) out << format_double(s) << '\n';
}

Waveform read_waveform(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open waveform file " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line.rfind("sample_rate_hz,", 0) == 0,
          ErrorCode::kDataError, path.string() + ": missing sample_rate_hz header");
  double rate = 0.0;
  require(parse_double(trim(line.substr(15)), rate), ErrorCode::kDataError,
          path.string() + ": bad sample rate");
  std::vector<double> samples;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    double v = 0.0;
    require(parse_double(line, v), ErrorCode::kDataError, path.string() + ": bad sample");
    samples.push_back(v);
  }
  return Waveform(std::move(samples), rate);
}

}  // namespace breathflow
