#include "breathflow/manifest.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "breathflow/error.hpp"
#include "breathflow/text.hpp"

namespace breathflow {

std::string split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }

std::filesystem::path Manifest::resolve(const std::string& p) const {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

void Manifest::validate() const {
  require(!entries.empty(), ErrorCode::kValidation, "manifest has no entries");
  std::set<std::string> ids;
  std::map<std::string, std::set<Split>> subject_splits;
  for (const auto& e : entries) {
    require(!e.clip_id.empty(), ErrorCode::kValidation, "manifest: empty clip_id");
    require(ids.insert(e.clip_id).second, ErrorCode::kValidation,
            "manifest: duplicate clip_id " + e.clip_id);
    require(!e.subject_id.empty(), ErrorCode::kValidation,
            "manifest: clip " + e.clip_id + " has no subject_id");
    require(std::isfinite(e.native_fps) && e.native_fps >= 5.0, ErrorCode::kValidation,
            "manifest: clip " + e.clip_id + " needs native_fps >= 5");
    require(std::isfinite(e.duration_s) && e.duration_s > 0.0, ErrorCode::kValidation,
            "manifest: clip " + e.clip_id + " needs a positive duration_s");
    require(!e.annotation_path.empty(), ErrorCode::kValidation,
            "manifest: clip " + e.clip_id + " has no annotation_path");
    subject_splits[e.subject_id].insert(e.split);
  }
  for (const auto& [subject, splits] : subject_splits)
    require(splits.size() == 1, ErrorCode::kValidation,
            "manifest: subject " + subject + " appears in both train and test splits");
}

Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  Manifest m;
  m.base_dir = base_dir;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kDataError,
          "manifest: missing header line");
  text::strip_bom(line);
  require(text::trim(line) == kManifestHeader, ErrorCode::kDataError,
          std::string("manifest line 1: expected header '") + kManifestHeader + "'");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "manifest line " + std::to_string(line_no) + ": ";
    const auto f = text::split_csv(line);
    require(f.size() == 7, ErrorCode::kDataError,
            where + "expected 7 fields, got " + std::to_string(f.size()));
    ManifestEntry e;
    e.clip_id = f[0];
    e.subject_id = f[1];
    e.frames_path = f[2];
    require(text::parse_double(f[3], e.native_fps), ErrorCode::kDataError,
            where + "bad native_fps '" + f[3] + "'");
    e.annotation_path = f[4];
    if (f[5] == "train") e.split = Split::kTrain;
    else if (f[5] == "test") e.split = Split::kTest;
    else throw Error(ErrorCode::kDataError, where + "split must be train or test, got '" + f[5] + "'");
    require(text::parse_double(f[6], e.duration_s), ErrorCode::kDataError,
            where + "bad duration_s '" + f[6] + "'");
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open manifest " + path.string());
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_manifest(in, base);
}

void write_manifest(std::ostream& out, const Manifest& m) {
  out << kManifestHeader << '\n';
  for (const auto& e : m.entries)
    out << e.clip_id << ',' << e.subject_id << ',' << e.frames_path << ','
        << text::format_double(e.native_fps) << ',' << e.annotation_path << ','
        << split_name(e.split) << ',' << text::format_double(e.duration_s) << '\n';
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "cannot write manifest " + path.string());
  write_manifest(out, m);
  require(out.good(), ErrorCode::kIo, "short write to " + path.string());
}

}  // namespace breathflow
