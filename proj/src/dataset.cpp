#include "lckd/dataset.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "lckd/errors.hpp"
#include "lckd/rng.hpp"

namespace lckd {

using nlohmann::json;

void DatasetSpec::validate() const {
  require(n_modalities >= 2, "dataset needs at least 2 modalities");
  require(n_modalities <= 20, "dataset supports at most 20 modalities");
  require(n_tasks >= 1, "dataset needs at least 1 task");
  require(spatial_dims == 2 || spatial_dims == 3, "spatial dims must be 2 or 3");
  require(side >= 8, "side length must be at least 8");
  require(n_cases >= 2, "dataset needs at least 2 cases");
}

void InformativenessPlan::validate(int n_modalities, int n_tasks) const {
  require(static_cast<int>(teacher_of_task.size()) == n_tasks,
          "informativeness plan must name a teacher for every task");
  for (int t : teacher_of_task)
    require(t >= 0 && t < n_modalities, "planted teacher modality out of range");
  require(signal_contrast > distractor_contrast && distractor_contrast >= 0,
          "need signal_contrast > distractor_contrast >= 0");
  require(noise_sigma >= 0, "noise_sigma must be non-negative");
}

std::vector<int> InformativenessPlan::task_signs() const {
  std::vector<int> signs(teacher_of_task.size());
  for (std::size_t k = 0; k < teacher_of_task.size(); ++k) {
    const auto rank = std::count(teacher_of_task.begin(), teacher_of_task.begin() + k, teacher_of_task[k]);
    signs[k] = rank % 2 == 0 ? 1 : -1;
  }
  return signs;
}

Tensor<float> Sample::target() const {
  require(!masks.empty(), "sample has no masks");
  Tensor<float> t(static_cast<int>(masks.size()), masks.front().extent);
  for (std::size_t k = 0; k < masks.size(); ++k)
    std::copy(masks[k].data.begin(), masks[k].data.end(), t.channel(static_cast<int>(k)).begin());
  return t;
}

std::string case_name(int index) { return "c" + std::to_string(index); }

namespace {

struct Ellipsoid {
  double cz, cy, cx, rz, ry, rx;
};

template <class F>
void for_each_inside(const Ellipsoid& e, Extent ext, F&& f) {
  for (int z = 0; z < ext.depth; ++z)
    for (int y = 0; y < ext.height; ++y)
      for (int x = 0; x < ext.width; ++x) {
        const double dz = ext.depth == 1 ? 0.0 : (z - e.cz) / e.rz;
        const double dy = (y - e.cy) / e.ry, dx = (x - e.cx) / e.rx;
        if (dz * dz + dy * dy + dx * dx <= 1.0)
          f((static_cast<std::size_t>(z) * ext.height + y) * ext.width + x);
      }
}

}  // namespace

SyntheticCase synthesize_case(const DatasetSpec& spec, const InformativenessPlan& plan, int index) {
  spec.validate();
  plan.validate(spec.n_modalities, spec.n_tasks);
  std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(index)));
  const Extent ext = spec.extent();
  const std::size_t nvox = ext.voxels();

  // owner[v] = task index + 1, or 0 for background.
  std::vector<int> owner(nvox, 0);
  std::uniform_int_distribution<int> count_dist(1, 3);
  std::uniform_real_distribution<double> centre(0.0, spec.side - 1.0);
  std::uniform_real_distribution<double> radius(0.1 * spec.side, 0.3 * spec.side);
  constexpr int kAttempts = 20;
  for (int k = 0; k < spec.n_tasks; ++k) {
    const int count = count_dist(rng);
    for (int r = 0; r < count; ++r) {
      Ellipsoid e{};
      bool clear = false;
      for (int a = 0; a < kAttempts && !clear; ++a) {
        e = {spec.spatial_dims == 3 ? centre(rng) : 0.0, centre(rng), centre(rng),
             radius(rng), radius(rng), radius(rng)};
        clear = true;
        for_each_inside(e, ext, [&](std::size_t v) {
          if (owner[v] != 0 && owner[v] != k + 1) clear = false;
        });
      }
      // A crowded volume falls back to painting only unclaimed voxels.
      for_each_inside(e, ext, [&](std::size_t v) {
        if (owner[v] == 0) owner[v] = k + 1;
      });
    }
  }

  SyntheticCase out;
  out.sample.case_id = case_name(index);
  for (int k = 0; k < spec.n_tasks; ++k) {
    Tensor<float> m(1, ext);
    for (std::size_t v = 0; v < nvox; ++v) m.data[v] = owner[v] == k + 1 ? 1.0f : 0.0f;
    out.sample.masks.push_back(std::move(m));
  }

  const auto signs = plan.task_signs();
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> raw(nvox);
  for (int i = 0; i < spec.n_modalities; ++i) {
    for (std::size_t v = 0; v < nvox; ++v) {
      double value = 0;
      if (owner[v] != 0) {
        const int k = owner[v] - 1;
        const double c = plan.teacher_of_task[k] == i ? plan.signal_contrast : plan.distractor_contrast;
        value = signs[k] * c;
      }
      raw[v] = value + (plan.noise_sigma > 0 ? plan.noise_sigma * noise(rng) : 0.0);
    }
    double mean = 0;
    for (double x : raw) mean += x;
    mean /= static_cast<double>(nvox);
    double var = 0;
    for (double x : raw) var += (x - mean) * (x - mean);
    var /= static_cast<double>(nvox);
    const double sd = std::sqrt(var);
    const double scale = sd > 1e-12 ? sd : 1.0;
    Tensor<float> field(1, ext);
    for (std::size_t v = 0; v < nvox; ++v) field.data[v] = static_cast<float>((raw[v] - mean) / scale);
    out.sample.modalities.push_back(std::move(field));
    out.offset.push_back(mean);
    out.scale.push_back(scale);
  }
  return out;
}

void write_f32(const fs::path& path, std::span<const float> values) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float f : values) {
      auto bits = __builtin_bswap32(std::bit_cast<std::uint32_t>(f));
      os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  if (!os) throw DataError("write failed: " + path.string());
}

std::vector<float> read_f32(const fs::path& path) {
  std::error_code ec;
  const auto bytes = fs::file_size(path, ec);
  if (ec) throw DataError("missing file: " + path.string());
  if (bytes % sizeof(float) != 0) throw DataError("truncated float32 file: " + path.string());
  std::vector<float> values(bytes / sizeof(float));
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path.string());
  is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  if (!is) throw DataError("read failed: " + path.string());
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& f : values) f = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(f)));
  }
  return values;
}

Manifest Manifest::load(const fs::path& dir_or_file) {
  const fs::path file = fs::is_directory(dir_or_file) ? dir_or_file / "manifest.json" : dir_or_file;
  std::ifstream is(file);
  if (!is) throw DataError("missing dataset manifest: " + file.string());
  Manifest m;
  m.root = file.parent_path();
  try {
    const json j = json::parse(is);
    m.n_modalities = j.at("n_modalities").get<int>();
    m.n_tasks = j.at("n_tasks").get<int>();
    m.dims = j.at("dims").get<int>();
    m.side = j.at("side").get<int>();
    m.cases = j.at("cases").get<std::vector<std::string>>();
    m.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + file.string() + ": " + e.what());
  }
  if (m.n_modalities < 1 || m.n_tasks < 1 || (m.dims != 2 && m.dims != 3) || m.side < 1)
    throw DataError("manifest header out of range: " + file.string());
  return m;
}

void Manifest::save() const {
  json j;
  j["format"] = "lckd-dataset-v1";
  j["n_modalities"] = n_modalities;
  j["n_tasks"] = n_tasks;
  j["dims"] = dims;
  j["side"] = side;
  j["seed"] = seed;
  j["encoding"] = "float32 little-endian, C order";
  j["cases"] = cases;
  std::ofstream os(manifest_path());
  if (!os) throw DataError("cannot write manifest: " + manifest_path().string());
  os << j.dump(2) << '\n';
}

void write_case(const Manifest& manifest, const Sample& sample) {
  const fs::path dir = manifest.case_dir(sample.case_id);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < sample.modalities.size(); ++i)
    write_f32(dir / ("mod_" + std::to_string(i + 1) + ".f32"), sample.modalities[i].data);
  for (std::size_t k = 0; k < sample.masks.size(); ++k)
    write_f32(dir / ("mask_" + std::to_string(k + 1) + ".f32"), sample.masks[k].data);
}

Sample load_case(const Manifest& manifest, const std::string& case_id) {
  if (std::find(manifest.cases.begin(), manifest.cases.end(), case_id) == manifest.cases.end())
    throw DataError("case '" + case_id + "' is not listed in the manifest");
  const fs::path dir = manifest.case_dir(case_id);
  const Extent ext = manifest.extent();
  auto read_field = [&](const fs::path& p) {
    auto values = read_f32(p);
    if (values.size() != ext.voxels())
      throw DataError(p.string() + " holds " + std::to_string(values.size()) +
                      " values; manifest shape " + to_string(ext) + " needs " + std::to_string(ext.voxels()));
    Tensor<float> t(1, ext);
    t.data = std::move(values);
    return t;
  };
  Sample s;
  s.case_id = case_id;
  for (int i = 1; i <= manifest.n_modalities; ++i) {
    s.modalities.push_back(read_field(dir / ("mod_" + std::to_string(i) + ".f32")));
    for (float v : s.modalities.back().data)
      if (!std::isfinite(v)) throw DataError("non-finite modality value in case " + case_id);
  }
  for (int k = 1; k <= manifest.n_tasks; ++k) {
    const fs::path p = dir / ("mask_" + std::to_string(k) + ".f32");
    s.masks.push_back(read_field(p));
    for (float v : s.masks.back().data)
      if (v != 0.0f && v != 1.0f) throw DataError("mask value " + std::to_string(v) + " is not binary in " + p.string());
  }
  return s;
}

std::vector<Sample> load_cases(const Manifest& manifest, const std::vector<std::string>& ids) {
  std::vector<Sample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(load_case(manifest, id));
  return out;
}

fs::path generate(const DatasetSpec& spec, const InformativenessPlan& plan, const fs::path& dir) {
  spec.validate();
  plan.validate(spec.n_modalities, spec.n_tasks);
  std::error_code ec;
  fs::create_directories(dir / "cases", ec);
  if (ec) throw DataError("cannot create dataset directory " + dir.string() + ": " + ec.message());

  std::vector<SyntheticCase> cases(spec.n_cases);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < spec.n_cases; ++i) cases[i] = synthesize_case(spec, plan, i);

  Manifest m;
  m.root = dir;
  m.n_modalities = spec.n_modalities;
  m.n_tasks = spec.n_tasks;
  m.dims = spec.spatial_dims;
  m.side = spec.side;
  m.seed = spec.seed;
  for (const auto& c : cases) {
    m.cases.push_back(c.sample.case_id);
    write_case(m, c.sample);
  }
  m.save();
  return m.manifest_path();
}

Split split(const Manifest& manifest, double validation_fraction, std::uint64_t seed) {
  require(validation_fraction > 0 && validation_fraction < 1, "validation fraction must be in (0, 1)");
  const int n = static_cast<int>(manifest.cases.size());
  if (n < 2) throw UsageError("split needs at least 2 cases");
  const int n_val = std::clamp(static_cast<int>(std::lround(validation_fraction * n)), 1, n - 1);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(derive_seed(seed, 0x5b1e));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_val(n, false);
  for (int i = 0; i < n_val; ++i) is_val[order[i]] = true;
  Split s;
  for (int i = 0; i < n; ++i) (is_val[i] ? s.validation : s.train).push_back(manifest.cases[i]);
  return s;
}

std::string fingerprint(const Manifest& manifest) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  auto feed = [&](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw DataError("missing file: " + p.string());
    std::vector<char> buf(1 << 16);
    while (is) {
      is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(is.gcount()));
    }
  };
  feed(manifest.manifest_path());
  for (const auto& id : manifest.cases) {
    const fs::path dir = manifest.case_dir(id);
    for (int i = 1; i <= manifest.n_modalities; ++i) feed(dir / ("mod_" + std::to_string(i) + ".f32"));
    for (int k = 1; k <= manifest.n_tasks; ++k) feed(dir / ("mask_" + std::to_string(k) + ".f32"));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

}  // namespace lckd
