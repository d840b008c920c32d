#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "lckd/checkpoint.hpp"
#include "lckd/errors.hpp"

using namespace lckd;

namespace {

ModelConfig config() {
  ModelConfig c;
  c.spatial_dims = 2;
  c.n_modalities = 3;
  c.n_tasks = 2;
  c.base_channels = 3;
  c.depth = 2;
  c.seed = 77;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary | std::ios::trunc) << bytes;
}

}  // namespace

TEST_CASE("checkpoints round trip bit-exactly") {
  const auto dir = test::scratch("ckpt_rt");
  const Architecture arch(config());
  const auto params = arch.init_params<float>();
  CheckpointMeta meta;
  meta.model = config();
  meta.iteration = 1234;
  meta.split_seed = 9;
  meta.validation_fraction = 0.25;
  save_checkpoint(dir / "a.bin", arch, params, meta);
  CHECK(!std::filesystem::exists(dir / "a.bin.tmp"));
  const auto ck = load_checkpoint(dir / "a.bin");
  CHECK(ck.params == params);
  CHECK(ck.meta.model == config());
  CHECK(ck.meta.iteration == 1234);
  CHECK(ck.meta.split_seed == 9);
  CHECK(ck.meta.validation_fraction == 0.25);
  CHECK(slurp(dir / "a.bin").rfind("LCKDCKPT", 0) == 0);
}

TEST_CASE("damaged checkpoints are rejected") {
  const auto dir = test::scratch("ckpt_bad");
  const Architecture arch(config());
  CheckpointMeta meta;
  meta.model = config();
  save_checkpoint(dir / "a.bin", arch, arch.init_params<float>(), meta);
  const std::string good = slurp(dir / "a.bin");

  SUBCASE("flipped payload byte") {
    std::string bad = good;
    bad[bad.size() / 2] ^= 0x10;
    spit(dir / "a.bin", bad);
    CHECK_THROWS_AS(load_checkpoint(dir / "a.bin"), DataError);
  }
  SUBCASE("truncated") {
    spit(dir / "a.bin", good.substr(0, good.size() - 9));
    CHECK_THROWS_AS(load_checkpoint(dir / "a.bin"), DataError);
  }
  SUBCASE("wrong magic") {
    std::string bad = good;
    bad[0] = 'X';
    spit(dir / "a.bin", bad);
    CHECK_THROWS_AS(load_checkpoint(dir / "a.bin"), DataError);
  }
  SUBCASE("empty file") {
    spit(dir / "a.bin", "");
    CHECK_THROWS_AS(load_checkpoint(dir / "a.bin"), DataError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint(dir / "none.bin"), DataError); }
}

TEST_CASE("parameters must match the architecture when saving") {
  const auto dir = test::scratch("ckpt_mismatch");
  const Architecture arch(config());
  ModelConfig other = config();
  other.base_channels = 4;
  CheckpointMeta meta;
  meta.model = config();
  CHECK_THROWS(save_checkpoint(dir / "a.bin", arch, Architecture(other).init_params<float>(), meta));
}
