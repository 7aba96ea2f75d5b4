#include "breathflow/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "breathflow/error.hpp"

namespace breathflow {
namespace {

constexpr char kMagic[4] = {'B', 'F', 'C', 'K'};

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_block(std::string& out, const std::string& name, const Tensor<float>& t) {
  put_u16(out, static_cast<std::uint16_t>(name.size()));
  out += name;
  out.push_back(static_cast<char>(t.rank()));
  for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
}

// Bounds-checked little-endian reader.
class Reader {
 public:
  Reader(const std::string& buf, std::string source) : buf_(buf), source_(std::move(source)) {}

  const unsigned char* take(std::size_t n) {
    if (pos_ + n > buf_.size())
      throw Error(ErrorCode::kDataError, source_ + ": truncated checkpoint");
    const auto* p = reinterpret_cast<const unsigned char*>(buf_.data() + pos_);
    pos_ += n;
    return p;
  }
  std::uint8_t u8() { return *take(1); }
  std::uint16_t u16() {
    const auto* p = take(2);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32() {
    const auto* p = take(4);
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  std::string str(std::size_t n) {
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  const std::string& buf_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

nlohmann::json net_config_to_json(const NetConfig& c) {
  return {{"chunk_len", c.chunk_len},       {"in_channels", c.in_channels},
          {"block_channels", c.block_channels}, {"tsm_fraction", c.tsm_fraction},
          {"input_size", c.input_size}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
  NetConfig c;
  try {
    c.chunk_len = j.value("chunk_len", c.chunk_len);
    c.in_channels = j.value("in_channels", c.in_channels);
    c.block_channels = j.value("block_channels", c.block_channels);
    c.tsm_fraction = j.value("tsm_fraction", c.tsm_fraction);
    c.input_size = j.value("input_size", c.input_size);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("net config: ") + e.what());
  }
  c.validate();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const ModelState<float>& state,
                     const nlohmann::json& extra) {
  nlohmann::json meta = extra;
  meta["format_version"] = kCheckpointVersion;
  meta["code_version"] = BREATHFLOW_VERSION;
  meta["net"] = net_config_to_json(state.config);
  meta["step"] = state.step;
  meta["seed"] = state.seed;
  const std::string meta_text = meta.dump();

  const auto names = param_names(state.config);
  std::string buf(kMagic, 4);
  put_u32(buf, kCheckpointVersion);
  put_u32(buf, static_cast<std::uint32_t>(meta_text.size()));
  buf += meta_text;
  const bool moments = !state.adam_m.empty();
  put_u32(buf, static_cast<std::uint32_t>(names.size() * (moments ? 3 : 1) + 2));
  for (std::size_t i = 0; i < names.size(); ++i) put_block(buf, names[i], state.params[i]);
  put_block(buf, "stem.bn.running_mean", state.running_mean);
  put_block(buf, "stem.bn.running_var", state.running_var);
  if (moments) {
    for (std::size_t i = 0; i < names.size(); ++i) put_block(buf, "adam.m." + names[i], state.adam_m[i]);
    for (std::size_t i = 0; i < names.size(); ++i) put_block(buf, "adam.v." + names[i], state.adam_v[i]);
  }

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    require(out.good(), ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorCode::kIo, "cannot rename to " + path.string() + ": " + ec.message());
}

ModelState<float> load_checkpoint(const std::filesystem::path& path, nlohmann::json* metadata) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open checkpoint " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(buf, path.string());
  require(std::memcmp(r.take(4), kMagic, 4) == 0, ErrorCode::kDataError,
          path.string() + ": not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  require(version == kCheckpointVersion, ErrorCode::kDataError,
          path.string() + ": unsupported checkpoint version " + std::to_string(version));
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.str(r.u32()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kDataError, path.string() + ": bad metadata: " + e.what());
  }

  std::map<std::string, Tensor<float>> blocks;
  const std::uint32_t n = r.u32();
  for (std::uint32_t b = 0; b < n; ++b) {
    std::string name = r.str(r.u16());
    std::vector<std::size_t> shape(r.u8());
    for (auto& d : shape) d = r.u32();
    Tensor<float> t(shape);
    for (auto& v : t.values()) v = std::bit_cast<float>(r.u32());
    blocks[name] = std::move(t);
  }
  require(r.done(), ErrorCode::kDataError, path.string() + ": trailing bytes");

  ModelState<float> s;
  s.config = net_config_from_json(meta.at("net"));
  s.step = meta.value("step", std::uint64_t{0});
  s.seed = meta.value("seed", std::uint64_t{0});
  const auto names = param_names(s.config);
  const auto shapes = param_shapes(s.config);
  auto fetch = [&](const std::string& name, const std::vector<std::size_t>& shape) {
    auto it = blocks.find(name);
    require(it != blocks.end(), ErrorCode::kDataError, path.string() + ": missing block " + name);
    require(it->second.shape() == shape, ErrorCode::kDataError,
            path.string() + ": block " + name + " has shape " +
                shape_string(it->second.shape()) + ", expected " + shape_string(shape));
    return it->second;
  };
  for (std::size_t i = 0; i < names.size(); ++i) s.params.push_back(fetch(names[i], shapes[i]));
  const std::vector<std::size_t> c0{static_cast<std::size_t>(s.config.block_channels.front())};
  s.running_mean = fetch("stem.bn.running_mean", c0);
  s.running_var = fetch("stem.bn.running_var", c0);
  if (blocks.count("adam.m." + names.front())) {
    for (std::size_t i = 0; i < names.size(); ++i) s.adam_m.push_back(fetch("adam.m." + names[i], shapes[i]));
    for (std::size_t i = 0; i < names.size(); ++i) s.adam_v.push_back(fetch("adam.v." + names[i], shapes[i]));
  }
  if (metadata) *metadata = std::move(meta);
  return s;
}

}  // namespace breathflow
