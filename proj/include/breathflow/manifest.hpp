#pragma once

// Dataset manifest, CSV with a header row:
//
//   clip_id,subject_id,frames_path,native_fps,annotation_path,split,duration_s
//
// Paths are relative to the manifest's directory unless absolute.
// frames_path "-" marks a flow-only clip whose cache is produced elsewhere.
// The annotation file may be shared between clips; rows are matched on
// clip_id.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace breathflow {

enum class Split { kTrain, kTest };

struct ManifestEntry {
  std::string clip_id;
  std::string subject_id;
  std::string frames_path;  // as written; "-" for none
  double native_fps = 0.0;
  std::string annotation_path;
  Split split = Split::kTrain;
  double duration_s = 0.0;

  bool has_frames() const { return frames_path != "-"; }
};

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const std::string& p) const;

  /// Unique clip ids, valid fields, and no subject in both splits
  /// (kValidation).
  void validate() const;
};

inline constexpr const char* kManifestHeader =
    "clip_id,subject_id,frames_path,native_fps,annotation_path,split,duration_s";

Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir);
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(std::ostream& out, const Manifest& m);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

std::string split_name(Split s);

}  // namespace breathflow
