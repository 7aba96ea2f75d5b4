#include "breathflow/flow_cache.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "breathflow/error.hpp"

namespace breathflow {
namespace {

constexpr char kMagic[4] = {'A', 'F', 'L', 'W'};
constexpr std::size_t kHeaderBytes = 18;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::optional<FlowCacheHeader> parse_header(const unsigned char* p) {
  if (std::memcmp(p, kMagic, 4) != 0) return std::nullopt;
  FlowCacheHeader h;
  h.version = get_u16(p + 4);
  h.width = get_u16(p + 6);
  h.height = get_u16(p + 8);
  h.field_count = get_u32(p + 10);
  h.rate_hz = std::bit_cast<float>(get_u32(p + 14));
  if (h.version != kFlowCacheVersion || h.width == 0 || h.height == 0) return std::nullopt;
  return h;
}

std::uintmax_t expected_size(const FlowCacheHeader& h) {
  return kHeaderBytes +
         static_cast<std::uintmax_t>(h.field_count) * 2 * h.width * h.height * sizeof(float);
}

}  // namespace

void write_flow_cache(const std::filesystem::path& path, const std::vector<FlowField>& fields,
                      double rate_hz) {
  const int w = fields.empty() ? kFlowSide : fields.front().width();
  const int h = fields.empty() ? kFlowSide : fields.front().height();
  std::string buf;
  buf.reserve(kHeaderBytes + fields.size() * 2 * w * h * 4);
  buf.append(kMagic, 4);
  put_u16(buf, kFlowCacheVersion);
  put_u16(buf, static_cast<std::uint16_t>(w));
  put_u16(buf, static_cast<std::uint16_t>(h));
  put_u32(buf, static_cast<std::uint32_t>(fields.size()));
  put_f32(buf, static_cast<float>(rate_hz));
  for (const auto& f : fields) {
    require(f.width() == w && f.height() == h, ErrorCode::kInvalidArgument,
            "flow fields in one cache must share a size");
    for (float x : f.u.data()) put_f32(buf, x);
    for (float x : f.v.data()) put_f32(buf, x);
  }
  // write to a sibling temp file and rename so readers never see a torn cache
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    require(out.good(), ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::optional<FlowCacheHeader> probe_flow_cache(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec || size < kHeaderBytes) return std::nullopt;
  std::ifstream in(path, std::ios::binary);
  unsigned char raw[kHeaderBytes];
  if (!in.read(reinterpret_cast<char*>(raw), kHeaderBytes)) return std::nullopt;
  auto header = parse_header(raw);
  if (!header || expected_size(*header) != size) return std::nullopt;
  return header;
}

std::vector<FlowField> read_flow_cache(const std::filesystem::path& path,
                                       FlowCacheHeader* header_out) {
  const auto header = probe_flow_cache(path);
  require(header.has_value(), ErrorCode::kDataError, "invalid flow cache " + path.string());
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> raw(expected_size(*header));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  require(static_cast<bool>(in), ErrorCode::kIo, "short read from " + path.string());

  std::vector<FlowField> fields;
  fields.reserve(header->field_count);
  const unsigned char* p = raw.data() + kHeaderBytes;
  for (std::uint32_t f = 0; f < header->field_count; ++f) {
    FlowField field(header->width, header->height);
    for (float& x : field.u.data()) {
      x = std::bit_cast<float>(get_u32(p));
      p += 4;
    }
    for (float& x : field.v.data()) {
      x = std::bit_cast<float>(get_u32(p));
      p += 4;
    }
    fields.push_back(std::move(field));
  }
  if (header_out) *header_out = *header;
  return fields;
}

}  // namespace breathflow
