#include "lckd/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "lckd/errors.hpp"

namespace lckd {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'L', 'C', 'K', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<char>& buffer() { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<char>& buf, std::size_t end) : buf_(buf), end_(end) {}
  void bytes(void* p, std::size_t n) {
    if (pos_ + n > end_) throw DataError("checkpoint is truncated");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto n = u32();
    if (n > end_ - pos_) throw DataError("checkpoint string length out of range");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  [[nodiscard]] std::size_t remaining() const { return end_ - pos_; }

 private:
  const std::vector<char>& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

json meta_to_json(const CheckpointMeta& m) {
  return {{"model",
           {{"spatial_dims", m.model.spatial_dims},
            {"n_modalities", m.model.n_modalities},
            {"n_tasks", m.model.n_tasks},
            {"base_channels", m.model.base_channels},
            {"depth", m.model.depth},
            {"seed", m.model.seed}}},
          {"iteration", m.iteration},
          {"split_seed", m.split_seed},
          {"validation_fraction", m.validation_fraction}};
}

CheckpointMeta meta_from_json(const json& j) {
  CheckpointMeta m;
  const auto& mj = j.at("model");
  m.model.spatial_dims = mj.at("spatial_dims").get<int>();
  m.model.n_modalities = mj.at("n_modalities").get<int>();
  m.model.n_tasks = mj.at("n_tasks").get<int>();
  m.model.base_channels = mj.at("base_channels").get<int>();
  m.model.depth = mj.at("depth").get<int>();
  m.model.seed = mj.at("seed").get<std::uint64_t>();
  m.iteration = j.at("iteration").get<std::int64_t>();
  m.split_seed = j.at("split_seed").get<std::uint64_t>();
  m.validation_fraction = j.at("validation_fraction").get<double>();
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Architecture& arch,
                     const ModelParams<float>& params, const CheckpointMeta& meta) {
  require(params.tensors.size() == arch.registry().size(), "parameter set does not match architecture");
  require(meta.model == arch.config(), "checkpoint metadata describes a different model");
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    require(params.tensors[i].size() == arch.registry()[i].count,
            "parameter tensor " + arch.registry()[i].name + " has the wrong size");
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.str(meta_to_json(meta).dump());
  w.u32(static_cast<std::uint32_t>(arch.registry().size()));
  for (std::size_t i = 0; i < arch.registry().size(); ++i) {
    const auto& spec = arch.registry()[i];
    w.str(spec.name);
    w.u32(static_cast<std::uint32_t>(spec.shape.size()));
    for (int d : spec.shape) w.u32(static_cast<std::uint32_t>(d));
    w.bytes(params.tensors[i].data(), params.tensors[i].size() * sizeof(float));
  }
  auto& buf = w.buffer();
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
  w.u32(crc);

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write checkpoint " + path.string());
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) throw DataError("write failed for checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("missing checkpoint: " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof kMagic + 12) throw DataError("checkpoint is truncated: " + path.string());
  std::uint32_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 4, 4);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
  if (crc != stored) throw DataError("checkpoint integrity check failed (CRC mismatch): " + path.string());

  Reader r(buf, buf.size() - 4);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw DataError("not a checkpoint file: " + path.string());
  if (const auto v = r.u32(); v != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(v));

  Checkpoint ck;
  try {
    ck.meta = meta_from_json(json::parse(r.str()));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  Architecture arch(ck.meta.model);
  const auto count = r.u32();
  if (count != arch.registry().size()) throw DataError("checkpoint tensor count does not match its model config");
  ck.params = arch.zeros<float>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto& spec = arch.registry()[i];
    if (r.str() != spec.name) throw DataError("checkpoint tensor order does not match the registry");
    const auto rank = r.u32();
    if (rank != spec.shape.size()) throw DataError("checkpoint tensor rank mismatch for " + spec.name);
    for (int d : spec.shape)
      if (r.u32() != static_cast<std::uint32_t>(d)) throw DataError("checkpoint tensor shape mismatch for " + spec.name);
    r.bytes(ck.params.tensors[i].data(), spec.count * sizeof(float));
  }
  if (r.remaining() != 0) throw DataError("trailing bytes in checkpoint");
  return ck;
}

}  // namespace lckd
