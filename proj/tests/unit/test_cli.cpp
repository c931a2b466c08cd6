#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fcmf/cli/cli.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using fcmf::cli::run;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> toy_train(const fs::path& data, const fs::path& out) {
  return {"train", "--data", data.string(), "--out", out.string(), "--d", "8", "--heads", "2", "--layers", "1",
          "--max-len", "60", "--epochs", "2", "--seeds", "1,2", "--lr", "1e-3", "--quiet"};
}

}  // namespace

TEST_CASE("usage errors exit with 1", "[cli]") {
  CHECK(call({}).code == 1);
  CHECK(call({"frobnicate"}).code == 1);
  const auto r = call({"synth", "--bogus"});
  CHECK(r.code == 1);
  CHECK(r.err.find("synth") != std::string::npos);
  CHECK(call({"train"}).code == 1);  // --data is required
  CHECK(call({"--help"}).code == 0);
}

TEST_CASE("synth is deterministic and writes a manifest", "[cli][synth]") {
  testutil::TempDir dir("cli_synth");
  const auto a = dir.path() / "a", b = dir.path() / "b";
  REQUIRE(call({"synth", "--seed", "7", "--n", "20", "--implicit-rate", "0.5", "--out", a.string()}).code == 0);
  REQUIRE(call({"synth", "--seed", "7", "--n", "20", "--implicit-rate", "0.5", "--out", b.string()}).code == 0);
  for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl", "recipe.json", "manifest.json"})
    CHECK(fs::exists(a / f));
  CHECK(testutil::same_tree(a, b));
  const auto manifest = nlohmann::json::parse(testutil::slurp(a / "manifest.json"));
  CHECK(manifest["command"] == "synth");
  CHECK(manifest["config"]["implicit_rate"] == 0.5);
  CHECK(manifest.contains("tool_version"));

  // A manifest works as a config file; flags still win.
  const auto c = dir.path() / "c";
  REQUIRE(call({"synth", "--config", (a / "manifest.json").string(), "--out", c.string()}).code == 0);
  CHECK(testutil::same_tree(a, c));
  const auto d = dir.path() / "d";
  REQUIRE(call({"synth", "--config", (a / "manifest.json").string(), "--seed", "8", "--out", d.string()}).code == 0);
  CHECK(testutil::slurp(a / "train.jsonl") != testutil::slurp(d / "train.jsonl"));

  CHECK(call({"synth", "--implicit-rate", "1.5", "--out", (dir.path() / "e").string()}).code == 1);
}

TEST_CASE("FCMF_OUT sets the default output directory", "[cli]") {
  testutil::TempDir dir("cli_env");
  const auto target = dir.path() / "from_env";
  ::setenv("FCMF_OUT", target.string().c_str(), 1);
  const auto r = call({"synth", "--n", "10"});
  ::unsetenv("FCMF_OUT");
  CHECK(r.code == 0);
  CHECK(fs::exists(target / "train.jsonl"));
}

TEST_CASE("gradcheck prints PASS", "[cli][gradcheck]") {
  testutil::TempDir dir("cli_grad");
  const auto r = call({"gradcheck", "--d", "8", "--tol", "1e-4", "--out", dir.path().string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("max relative error") != std::string::npos);
  CHECK(fs::exists(dir.path() / "gradcheck.csv"));
}

TEST_CASE("train, eval, stats, heads-train and agree end to end", "[cli][train]") {
  testutil::TempDir dir("cli_train");
  const auto data = dir.path() / "data";
  REQUIRE(call({"synth", "--n", "30", "--out", data.string()}).code == 0);

  const auto out1 = dir.path() / "run1";
  const auto r = call(toy_train(data, out1));
  INFO(r.err);
  REQUIRE(r.code == 0);
  for (const char* f : {"manifest.json", "summary.json", "seed_1/history.csv", "seed_1/best/manifest.json",
                        "seed_1/best/params.fcmt", "seed_1/best/vocab.txt", "seed_1/last/manifest.json",
                        "seed_1/test_report.csv", "seed_2/history.csv"})
    CHECK(fs::exists(out1 / f));
  CHECK(r.out.find("mean dev macro-F1 over 2 seed(s)") != std::string::npos);

  // Re-running from the written manifest reproduces every artifact.
  const auto out2 = dir.path() / "run2";
  REQUIRE(call({"train", "--data", data.string(), "--config", (out1 / "manifest.json").string(), "--out",
                out2.string(), "--quiet"})
              .code == 0);
  CHECK(testutil::same_tree(out1, out2));

  const auto ev = dir.path() / "eval";
  const auto e = call({"eval", "--checkpoint", (out1 / "seed_1" / "best").string(), "--data",
                       (data / "test.jsonl").string(), "--threads", "2", "--out", ev.string()});
  INFO(e.err);
  CHECK(e.code == 0);
  for (const char* f : {"report.csv", "report.json", "predictions.csv", "manifest.json"}) CHECK(fs::exists(ev / f));
  CHECK(testutil::slurp(ev / "report.csv") == testutil::slurp(out1 / "seed_1" / "test_report.csv"));

  const auto st = dir.path() / "stats";
  CHECK(call({"stats", (data / "train.jsonl").string(), (data / "dev.jsonl").string(), "--out", st.string()}).code == 0);
  CHECK(testutil::slurp(st / "stats.csv").rfind("metric,value\nreviews,", 0) == 0);

  const auto hd = dir.path() / "heads";
  const auto h = call({"heads-train", "--data", data.string(), "--epochs", "20", "--out", hd.string()});
  CHECK(h.code == 0);
  CHECK(fs::exists(hd / "manifest.json"));
  CHECK(fs::exists(hd / "accuracy.csv"));

  const auto ag = dir.path() / "agree";
  const auto a = call({"agree", (data / "dev.jsonl").string(), (data / "dev.jsonl").string(), "--out", ag.string()});
  CHECK(a.code == 0);
  CHECK(a.out.find("round1,1,1,1,") != std::string::npos);
  CHECK(call({"agree", (data / "dev.jsonl").string(), "--out", ag.string()}).code == 1);

  // Validation and runtime failures.
  auto bad = toy_train(data, dir.path() / "bad");
  bad[6] = "7";  // --d 7 with 2 heads
  CHECK(call(bad).code == 1);
  CHECK(call(toy_train(dir.path() / "nowhere", dir.path() / "bad2")).code == 2);
}
