#pragma once

// Netpbm frame I/O (P2/P3/P5/P6, 8 or 16 bit). Colour images are reduced to
// Rec. 601 luma so RGB and infrared clips share one input domain.

#include <filesystem>
#include <vector>

#include "breathflow/image.hpp"

namespace breathflow {

GrayFrame read_netpbm(const std::filesystem::path& path);

/// Binary 16-bit PGM; values clamped to [0, 1].
void write_pgm16(const std::filesystem::path& path, const Plane& image);

/// *.pgm, *.ppm, *.pnm in a directory, sorted by file name.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

std::vector<GrayFrame> read_frame_dir(const std::filesystem::path& dir);

}  // namespace breathflow
