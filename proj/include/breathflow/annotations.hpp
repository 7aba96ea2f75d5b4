#pragma once

// Text formats for annotations and waveforms.
//
// Annotation file (UTF-8):
//   clip_id,exhalation_time_s        <- header, required
//   clip_a,1.25
//   clip_a,3.80
//   clip_b,0.90
//
// Waveform file:
//   sample_rate_hz,<rate>
//   <sample>
//   ...

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "breathflow/signal.hpp"

namespace breathflow {

inline constexpr const char* kAnnotationHeader = "clip_id,exhalation_time_s";

// Tracks keyed by clip id in order of first appearance. Durations are left at
// zero; the caller supplies them. Ordering is not checked here so that the
// caller can report unsorted tracks by clip.
std::vector<AnnotationTrack> parse_annotations(std::istream& in);
std::vector<AnnotationTrack> read_annotations(const std::filesystem::path& path);

void write_annotations(std::ostream& out, const std::vector<AnnotationTrack>& tracks);
void write_annotations(const std::filesystem::path& path,
                       const std::vector<AnnotationTrack>& tracks);

void write_waveform(const std::filesystem::path& path, const Waveform& w);
Waveform read_waveform(const std::filesystem::path& path);

}  // namespace breathflow
