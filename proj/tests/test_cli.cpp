#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "commands.hpp"
#include "helpers.hpp"
#include "lckd/checkpoint.hpp"
#include "lckd/election.hpp"
#include "lckd/evaluator.hpp"
#include "lckd/trainer.hpp"

using namespace lckd;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result lckd_cmd(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::vector<std::string> gen_args(const fs::path& out) {
  return {"gen-data", "--out",  out.string(), "--modalities", "3", "--tasks",     "2", "--side",
          "16",       "--cases", "6",          "--seed",       "4", "--teacher", "1=3"};
}

std::string fingerprint_line(const std::string& out) {
  const auto at = out.find("fingerprint ");
  REQUIRE(at != std::string::npos);
  return out.substr(at, out.find('\n', at) - at);
}

const char* kTinyIni =
    "[train]\n"
    "iterations = 6\n"
    "batch_size = 2\n"
    "election_interval = 3\n"
    "checkpoint_interval = 0\n"
    "seed = 9\n"
    "[model]\n"
    "base_channels = 4\n"
    "depth = 2\n";

/// A dataset plus one short training run, shared by the slower cases below.
struct Fixture {
  fs::path root = test::scratch("cli_fixture");
  fs::path data = root / "data";
  fs::path ini = root / "tiny.ini";
  fs::path run = root / "run";
  Fixture() {
    REQUIRE(lckd_cmd(gen_args(data)).code == cli::kOk);
    spit(ini, kTinyIni);
    const auto r = lckd_cmd({"train", "--data", data.string(), "--out", run.string(), "--config", ini.string(),
                             "--alpha", "0.1", "--quiet"});
    INFO(r.err);
    REQUIRE(r.code == cli::kOk);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(lckd_cmd({}).code == cli::kUsage);
  CHECK(lckd_cmd({"no-such-command"}).code == cli::kUsage);
  CHECK(lckd_cmd({"gen-data", "--modalities", "4"}).code == cli::kUsage);  // missing --out
  const auto dir = test::scratch("cli_usage");
  CHECK(lckd_cmd({"gen-data", "--out", (dir / "d").string(), "--teacher", "x"}).code == cli::kUsage);
  CHECK(lckd_cmd({"gen-data", "--out", (dir / "d").string(), "--teacher", "9=1"}).code == cli::kUsage);
  CHECK(lckd_cmd({"gen-data", "--out", (dir / "d").string(), "--modalities", "1"}).code == cli::kUsage);
  CHECK(lckd_cmd({"train", "--data", "nowhere"}).code == cli::kUsage);
}

TEST_CASE("help exits cleanly") {
  const auto r = lckd_cmd({"--help"});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("gen-data") != std::string::npos);
}

TEST_CASE("gen-data is deterministic and refuses to overwrite without --force") {
  const auto dir = test::scratch("cli_gen");
  const auto a = lckd_cmd(gen_args(dir / "a"));
  const auto b = lckd_cmd(gen_args(dir / "b"));
  REQUIRE(a.code == cli::kOk);
  REQUIRE(b.code == cli::kOk);
  CHECK(fingerprint_line(a.out) == fingerprint_line(b.out));

  auto other = gen_args(dir / "c");
  other[10] = "5";  // --seed
  CHECK(fingerprint_line(lckd_cmd(other).out) != fingerprint_line(a.out));

  const std::string before = slurp(dir / "a" / "manifest.json");
  const auto again = lckd_cmd(gen_args(dir / "a"));
  CHECK(again.code == cli::kUsage);
  CHECK(again.err.find("--force") != std::string::npos);
  CHECK(slurp(dir / "a" / "manifest.json") == before);

  auto forced = gen_args(dir / "a");
  forced.push_back("--force");
  CHECK(lckd_cmd(forced).code == cli::kOk);

  const auto m = nlohmann::json::parse(slurp(dir / "a" / "run_manifest.json"));
  CHECK(m["command"] == "gen-data");
  CHECK(m["config"]["teacher_of_task"]["1"] == 3);
  CHECK(m["config"]["teacher_of_task"]["2"] == 2);  // default k mod N, 1-based
  CHECK(m["dataset_fingerprint"] == fingerprint_line(a.out).substr(12));
}

TEST_CASE("train writes one manifest with the resolved configuration") {
  auto& f = fixture();
  int manifests = 0;
  for (const auto& e : fs::directory_iterator(f.run)) manifests += e.path().filename() == "run_manifest.json";
  CHECK(manifests == 1);
  const auto m = nlohmann::json::parse(slurp(f.run / "run_manifest.json"));
  CHECK(m["command"] == "train");
  const TrainConfig resolved = apply_ini_text(m["config"]["ini"].get<std::string>());
  CHECK(resolved.loss.alpha == 0.1);  // override
  CHECK(resolved.iterations == 6);    // file
  CHECK(resolved.momentum == TrainConfig{}.momentum);  // default
  CHECK(m["timings"]["wall_seconds"].get<double>() >= 0);
  for (const char* a : {"config.snapshot", "losses.csv", "elections.log", "ckpt_6.bin", "ckpt_final.bin"})
    CHECK_MESSAGE(fs::exists(f.run / a), a);
}

TEST_CASE("the resolved configuration reproduces the loss trajectory") {
  auto& f = fixture();
  const auto dir = test::scratch("cli_replay");
  const auto r = lckd_cmd({"train", "--data", f.data.string(), "--out", (dir / "run").string(), "--config",
                           (f.run / "config.snapshot").string(), "--quiet"});
  REQUIRE(r.code == cli::kOk);
  CHECK(slurp(dir / "run" / "losses.csv") == slurp(f.run / "losses.csv"));
  CHECK(slurp(dir / "run" / "ckpt_final.bin") == slurp(f.run / "ckpt_final.bin"));

  // Overrides beat the file.
  const auto s = lckd_cmd({"train", "--data", f.data.string(), "--out", (dir / "s").string(), "--config",
                           f.ini.string(), "--iterations", "2", "--teacher-mode", "single", "--quiet"});
  REQUIRE(s.code == cli::kOk);
  const TrainConfig c = apply_ini(dir / "s" / "config.snapshot");
  CHECK(c.iterations == 2);
  CHECK(c.teacher_mode == TeacherMode::single);
  CHECK(c.seed == 9);
}

TEST_CASE("train rejects a non-empty run directory and bad overrides") {
  auto& f = fixture();
  const std::string before = slurp(f.run / "losses.csv");
  CHECK(lckd_cmd({"train", "--data", f.data.string(), "--out", f.run.string(), "--config", f.ini.string()}).code ==
        cli::kUsage);
  CHECK(slurp(f.run / "losses.csv") == before);
  const auto dir = test::scratch("cli_train_bad");
  CHECK(lckd_cmd({"train", "--data", f.data.string(), "--out", (dir / "r").string(), "--p-norm", "3"}).code ==
        cli::kUsage);
  CHECK(lckd_cmd({"train", "--data", f.data.string(), "--out", (dir / "r").string(), "--teacher-mode", "both"})
            .code == cli::kUsage);
  CHECK(lckd_cmd({"train", "--data", (dir / "missing").string(), "--out", (dir / "r").string()}).code ==
        cli::kData);
}

TEST_CASE("evaluate writes rows and the aggregate table") {
  auto& f = fixture();
  const auto dir = test::scratch("cli_eval");
  const auto ck = (f.run / "ckpt_final.bin").string();
  const auto r = lckd_cmd({"evaluate", "--ckpt", ck, "--data", f.data.string(), "--out", (dir / "val").string()});
  INFO(r.err);
  REQUIRE(r.code == cli::kOk);
  const auto rep = EvalReport::read_rows_csv(dir / "val" / "rows.csv");
  CHECK(rep.combinations.size() == 7);
  CHECK(rep.rows.size() == 7 * 2 * 1);  // 20% of 6 cases
  CHECK(fs::exists(dir / "val" / "aggregate.csv"));

  REQUIRE(lckd_cmd({"evaluate", "--ckpt", ck, "--data", f.data.string(), "--split", "all", "--out",
                    (dir / "all").string()})
              .code == cli::kOk);
  CHECK(EvalReport::read_rows_csv(dir / "all" / "rows.csv").rows.size() == 7 * 2 * 6);

  CHECK(lckd_cmd({"evaluate", "--ckpt", ck, "--data", f.data.string(), "--split", "test", "--out",
                  (dir / "x").string()})
            .code == cli::kUsage);
}

TEST_CASE("a corrupt checkpoint is a data error") {
  auto& f = fixture();
  const auto dir = test::scratch("cli_corrupt");
  std::string bytes = slurp(f.run / "ckpt_final.bin");
  bytes[bytes.size() / 2] ^= 0x5a;
  spit(dir / "bad.bin", bytes);
  const auto r = lckd_cmd(
      {"evaluate", "--ckpt", (dir / "bad.bin").string(), "--data", f.data.string(), "--out", (dir / "o").string()});
  CHECK(r.code == cli::kData);
  CHECK_FALSE(fs::exists(dir / "o" / "rows.csv"));
  CHECK(lckd_cmd({"elect", "--ckpt", (dir / "nothing.bin").string(), "--data", f.data.string()}).code == cli::kData);
}

TEST_CASE("a checkpoint trained on other shapes is rejected") {
  auto& f = fixture();
  const auto dir = test::scratch("cli_mismatch");
  auto args = gen_args(dir / "d4");
  args[4] = "4";  // --modalities
  REQUIRE(lckd_cmd(args).code == cli::kOk);
  const auto r = lckd_cmd({"evaluate", "--ckpt", (f.run / "ckpt_final.bin").string(), "--data",
                           (dir / "d4").string(), "--out", (dir / "o").string()});
  CHECK(r.code == cli::kData);
}

TEST_CASE("elect prints a one-based record") {
  auto& f = fixture();
  const auto dir = test::scratch("cli_elect");
  const auto r = lckd_cmd({"elect", "--ckpt", (f.run / "ckpt_final.bin").string(), "--data", f.data.string(),
                           "--mode", "single", "--out", (dir / "e.log").string()});
  REQUIRE(r.code == cli::kOk);
  const auto j = nlohmann::json::parse(r.out);
  REQUIRE(j["unique"].size() == 1);
  CHECK(j["unique"][0].get<int>() >= 1);
  CHECK(j["unique"][0].get<int>() <= 3);
  CHECK(read_election_log(dir / "e.log").size() == 1);
  CHECK(lckd_cmd({"elect", "--ckpt", (f.run / "ckpt_final.bin").string(), "--data", f.data.string(), "--out",
                  (dir / "e.log").string()})
            .code == cli::kUsage);
}

TEST_CASE("compare: identical reports are degenerate, swapped operands negate t") {
  auto& f = fixture();
  const auto dir = test::scratch("cli_compare");
  const auto ck = (f.run / "ckpt_final.bin").string();
  REQUIRE(lckd_cmd({"evaluate", "--ckpt", ck, "--data", f.data.string(), "--split", "all", "--out",
                    (dir / "a").string()})
              .code == cli::kOk);
  const auto same = lckd_cmd({"compare", (dir / "a").string(), (dir / "a").string()});
  CHECK(same.code == cli::kNumerical);
  CHECK(same.out.find("degenerate n=6") != std::string::npos);

  // Hand-built report pair with known differences 1..6 / 100 plus a constant offset on one task.
  auto rep = EvalReport::read_rows_csv(dir / "a" / "rows.csv");
  auto shifted = rep;
  for (std::size_t i = 0; i < shifted.rows.size(); ++i)
    shifted.rows[i].dice = rep.rows[i].dice + 0.01 * static_cast<double>(i % 6 + 1) * (i % 5 == 0 ? 2 : 1);
  shifted.write_rows_csv(dir / "b.csv");
  const auto ab = lckd_cmd({"compare", (dir / "b.csv").string(), (dir / "a").string(), "--combination", "111",
                            "--task", "1"});
  const auto ba = lckd_cmd({"compare", (dir / "a").string(), (dir / "b.csv").string(), "--combination", "111",
                            "--task", "1"});
  REQUIRE(ab.code == cli::kOk);
  REQUIRE(ba.code == cli::kOk);
  const auto t_of = [](const std::string& s) {
    const auto at = s.find("t=");
    REQUIRE(at != std::string::npos);
    return std::stod(s.substr(at + 2));
  };
  CHECK(t_of(ab.out) > 0);
  CHECK(t_of(ab.out) == doctest::Approx(-t_of(ba.out)).epsilon(1e-5));
  CHECK(ab.out.find("n=6") != std::string::npos);

  // Dropping a row breaks alignment.
  auto cut = rep;
  cut.rows.pop_back();
  cut.write_rows_csv(dir / "cut.csv");
  CHECK(lckd_cmd({"compare", (dir / "a").string(), (dir / "cut.csv").string()}).code == cli::kData);
  CHECK(lckd_cmd({"compare", (dir / "a").string(), (dir / "a").string(), "--combination", "000"}).code ==
        cli::kUsage);
}

TEST_CASE("plot writes SVG charts and refuses empty inputs") {
  auto& f = fixture();
  const auto dir = test::scratch("cli_plot");
  const auto ck = (f.run / "ckpt_final.bin").string();
  REQUIRE(lckd_cmd({"evaluate", "--ckpt", ck, "--data", f.data.string(), "--out", (dir / "r").string()}).code ==
          cli::kOk);
  const std::string r = (dir / "r").string();
  const auto alpha = lckd_cmd({"plot", "--kind", "alpha", "--out", (dir / "alpha.svg").string(), "--report",
                               "0=" + r, "--report", "0.1=" + r, "--report", "0.5=" + r, "--report", "1=" + r,
                               "--l2", "0.1=" + r});
  INFO(alpha.err);
  REQUIRE(alpha.code == cli::kOk);
  const std::string svg = slurp(dir / "alpha.svg");
  CHECK(svg.starts_with("<svg"));
  for (const char* tick : {">0<", ">0.1<", ">0.5<", ">1<"}) CHECK_MESSAGE(svg.find(tick) != std::string::npos, tick);
  CHECK(svg.find("<polygon") != std::string::npos);  // star markers

  // Constant single teacher gives one full bar.
  spit(dir / "const.log",
       "{\"iteration\":200,\"mode\":\"single\",\"dice\":[[0.1],[0.2],[0.9]],\"per_task\":[3],\"unique\":[3]}\n"
       "{\"iteration\":400,\"mode\":\"single\",\"dice\":[[0.1],[0.2],[0.9]],\"per_task\":[3],\"unique\":[3]}\n");
  const auto bars = lckd_cmd({"plot", "--kind", "teachers", "--out", (dir / "t.svg").string(), "--log",
                              (dir / "const.log").string()});
  INFO(bars.err);
  REQUIRE(bars.code == cli::kOk);
  const std::string t = slurp(dir / "t.svg");
  CHECK(t.find(">100%<") != std::string::npos);
  CHECK(t.find(">0%<") != std::string::npos);

  REQUIRE(lckd_cmd({"plot", "--kind", "losses", "--out", (dir / "l.svg").string(), "--losses",
                    (f.run / "losses.csv").string()})
              .code == cli::kOk);
  CHECK(lckd_cmd({"plot", "--kind", "losses", "--out", (dir / "l.svg").string(), "--losses",
                  (f.run / "losses.csv").string()})
            .code == cli::kUsage);

  spit(dir / "empty.csv", "");
  spit(dir / "header.csv", "iteration,task_loss,ckd_loss,total_loss\n");
  spit(dir / "nocol.csv", "iteration,task_loss\n1,0.5\n");
  spit(dir / "empty.log", "");
  for (const auto& [args, code] : std::vector<std::pair<std::vector<std::string>, int>>{
           {{"--kind", "losses", "--losses", (dir / "empty.csv").string()}, cli::kData},
           {{"--kind", "losses", "--losses", (dir / "header.csv").string()}, cli::kData},
           {{"--kind", "losses", "--losses", (dir / "nocol.csv").string()}, cli::kData},
           {{"--kind", "teachers", "--log", (dir / "empty.log").string()}, cli::kData},
           {{"--kind", "alpha", "--report", "0=" + (dir / "empty.csv").string()}, cli::kData},
           {{"--kind", "alpha"}, cli::kUsage},
           {{"--kind", "pie", "--losses", (f.run / "losses.csv").string()}, cli::kUsage}}) {
    std::vector<std::string> full{"plot", "--out", (dir / "bad.svg").string()};
    full.insert(full.end(), args.begin(), args.end());
    const auto res = lckd_cmd(full);
    CHECK_MESSAGE(res.code == code, res.err);
    CHECK_FALSE(fs::exists(dir / "bad.svg"));
  }
}
