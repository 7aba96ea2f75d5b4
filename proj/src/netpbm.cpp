#include "breathflow/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "breathflow/error.hpp"

namespace breathflow {
namespace {

class Scanner {
 public:
  Scanner(std::string buf, std::string source) : buf_(std::move(buf)), src_(std::move(source)) {}

  // Header token, skipping whitespace and # comments.
  std::string token() {
    while (pos_ < buf_.size()) {
      if (std::isspace(static_cast<unsigned char>(buf_[pos_]))) {
        ++pos_;
      } else if (buf_[pos_] == '#') {
        while (pos_ < buf_.size() && buf_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
    const std::size_t start = pos_;
    while (pos_ < buf_.size() && !std::isspace(static_cast<unsigned char>(buf_[pos_]))) ++pos_;
    require(pos_ > start, ErrorCode::kDataError, src_ + ": truncated netpbm header");
    return buf_.substr(start, pos_ - start);
  }

  long number() {
    const std::string t = token();
    try {
      std::size_t used = 0;
      const long v = std::stol(t, &used);
      if (used == t.size() && v >= 0) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::kDataError, src_ + ": bad number '" + t + "' in netpbm file");
  }

  // Binary payload starts after exactly one whitespace byte.
  const unsigned char* raster(std::size_t bytes) {
    ++pos_;
    require(pos_ + bytes <= buf_.size(), ErrorCode::kDataError, src_ + ": truncated raster");
    return reinterpret_cast<const unsigned char*>(buf_.data() + pos_);
  }

 private:
  std::string buf_;
  std::string src_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayFrame read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open frame " + path.string());
  Scanner sc(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()),
             path.string());
  const std::string magic = sc.token();
  const bool ascii = magic == "P2" || magic == "P3";
  const bool color = magic == "P3" || magic == "P6";
  require(magic == "P2" || magic == "P3" || magic == "P5" || magic == "P6", ErrorCode::kDataError,
          path.string() + ": unsupported netpbm type '" + magic + "'");
  const long w = sc.number(), h = sc.number(), maxval = sc.number();
  require(w > 0 && h > 0 && w <= 1 << 15 && h <= 1 << 15, ErrorCode::kDataError,
          path.string() + ": bad image size");
  require(maxval >= 1 && maxval <= 65535, ErrorCode::kDataError, path.string() + ": bad maxval");
  const int channels = color ? 3 : 1;
  const std::size_t count = static_cast<std::size_t>(w) * h * channels;
  std::vector<double> samples(count);
  if (ascii) {
    for (auto& s : samples) s = static_cast<double>(sc.number());
  } else {
    const int bps = maxval > 255 ? 2 : 1;
    const unsigned char* p = sc.raster(count * bps);
    for (std::size_t i = 0; i < count; ++i)
      samples[i] = bps == 2 ? (p[2 * i] << 8) | p[2 * i + 1] : p[i];
  }
  Plane img(static_cast<int>(w), static_cast<int>(h));
  auto out = img.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = color ? 0.299 * samples[3 * i] + 0.587 * samples[3 * i + 1] +
                                 0.114 * samples[3 * i + 2]
                           : samples[i];
    out[i] = static_cast<float>(std::min(1.0, v / static_cast<double>(maxval)));
  }
  return GrayFrame(std::move(img));
}

void write_pgm16(const std::filesystem::path& path, const Plane& image) {
  std::string buf = "P5\n" + std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n65535\n";
  for (float v : image.data()) {
    const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0f, 1.0f) * 65535.0f));
    buf.push_back(static_cast<char>(q >> 8));
    buf.push_back(static_cast<char>(q & 0xFF));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require(out.good(), ErrorCode::kIo, "short write to " + path.string());
}

std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
  std::error_code ec;
  require(std::filesystem::is_directory(dir, ec), ErrorCode::kIo,
          "frames directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<GrayFrame> read_frame_dir(const std::filesystem::path& dir) {
  std::vector<GrayFrame> frames;
  for (const auto& f : list_frames(dir)) frames.push_back(read_netpbm(f));
  require(!frames.empty(), ErrorCode::kDataError, "no frames in " + dir.string());
  for (const auto& f : frames)
    require(f.width() == frames.front().width() && f.height() == frames.front().height(),
            ErrorCode::kDataError, "frames in " + dir.string() + " differ in size");
  return frames;
}

}  // namespace breathflow
