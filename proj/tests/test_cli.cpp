// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "coral8/cli.hpp"
#include "coral8/container.hpp"
#include "coral8/dataio.hpp"
#include "support.hpp"

using namespace coral8;
using coral8::testing::ScratchDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += line.empty() ? 0 : 1;
  return n;
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::trunc);
  out << s;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == kExitUsage);
  const Run bogus = run({"bogus"});
  CHECK(bogus.code == kExitUsage);
  CHECK(bogus.err.find("usage:") != std::string::npos);
  CHECK(run({"synth", "--out", "x"}).code == kExitUsage);
  CHECK(run({"train", "--data", "d", "--out", "o", "--epochs", "many"}).code == kExitUsage);
  CHECK(run({"evaluate", "--config"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("synth writes the requested samples") {
  ScratchDir dir("cli-synth");
  const Run r = run({"synth", "--out", (dir / "d").string(), "--samples", "4", "--images", "3", "--patterns", "4",
                     "--seed", "1"});
  CHECK(r.code == kExitOk);
  CHECK(line_count(dir / "d/train.jsonl") == 4);
  CHECK(line_count(dir / "d/test.jsonl") == 0);
  CHECK(run({"synth", "--out", (dir / "e").string(), "--samples", "4", "--images", "1", "--patterns", "4", "--seed",
             "1"})
            .code == kExitFailure);
}

TEST_CASE("runtime failures exit with 1") {
  ScratchDir dir("cli-fail");
  const Run r = run({"train", "--data", (dir / "nowhere").string(), "--out", (dir / "o").string()});
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK(run({"generate", "--checkpoint", (dir / "none.cr8c").string(), "--data", dir.path().string(), "--out",
             (dir / "g").string()})
            .code == kExitFailure);
}

TEST_CASE("config files") {
  ScratchDir dir("cli-config");
  spit(dir / "good.cfg", "# synthetic data\nout = " + (dir / "d").string() +
                             "\nsamples = 3\nimages = 2\npatterns = 2\n\nseed = 4\n");
  CHECK(run({"synth", "--config", (dir / "good.cfg").string()}).code == kExitOk);
  CHECK(line_count(dir / "d/train.jsonl") == 3);
  // command-line values override the file
  CHECK(run({"synth", "--config=" + (dir / "good.cfg").string(), "--samples", "5"}).code == kExitOk);
  CHECK(line_count(dir / "d/train.jsonl") == 5);

  spit(dir / "unknown.cfg", "colour = blue\n");
  const Run u = run({"synth", "--config", (dir / "unknown.cfg").string()});
  CHECK(u.code == kExitUsage);
  CHECK(u.err.find("colour") != std::string::npos);

  spit(dir / "broken.cfg", "samples 3\n");
  CHECK_THROWS_WITH(read_config_file((dir / "broken.cfg").string()), doctest::Contains("broken.cfg:1"));
  CHECK(run({"synth", "--config", (dir / "broken.cfg").string()}).code == kExitUsage);
  CHECK(run({"synth", "--config", (dir / "absent.cfg").string()}).code != kExitOk);

  spit(dir / "flags.cfg", "no-notes = maybe\n");
  CHECK(run({"train", "--config", (dir / "flags.cfg").string(), "--data", "d", "--out", "o"}).code == kExitUsage);
}

TEST_CASE("end to end: synth, train, generate, evaluate") {
  ScratchDir dir("cli-e2e");
  const std::string data = (dir / "data").string(), model = (dir / "model").string(), gen = (dir / "gen").string();
  REQUIRE(run({"synth", "--out", data, "--samples", "4", "--test", "2", "--images", "2", "--patterns", "2", "--seed",
               "3"})
              .code == kExitOk);
  const Run t = run({"train", "--data", data, "--out", model, "--seed", "1", "--epochs", "2", "--embed", "8",
                     "--hidden", "8", "--attn", "4"});
  REQUIRE(t.code == kExitOk);
  CHECK(line_count(fs::path(model) / "train.log") == 2);
  CHECK(t.out.find("epoch=2") != std::string::npos);
  CHECK(fs::exists(fs::path(model) / "vocab.txt"));

  const Run g = run({"generate", "--checkpoint", model + "/checkpoint.cr8c", "--data", data, "--out", gen,
                     "--dump-attention"});
  REQUIRE(g.code == kExitOk);
  for (const char* id : {"test-0000", "test-0001"}) {
    CHECK(fs::exists(fs::path(gen) / (std::string(id) + ".txt")));
    const Tensor alpha = read_tensor_file(fs::path(gen) / (std::string(id) + ".s0.alpha.cr8t"));
    CHECK(alpha.cols() == 2);
  }
  const Run e = run({"evaluate", "--generated", gen, "--data", data, "--out", (dir / "m.json").string(), "--label",
                     "tiny"});
  REQUIRE(e.code == kExitOk);
  CHECK(e.out.find("| tiny |") != std::string::npos);
  std::ifstream json(dir / "m.json");
  const auto j = nlohmann::json::parse(json);
  CHECK(j["bleu1"].get<double>() >= 0.0);

  // identical generated and reference text scores BLEU-1 of exactly 1
  const std::string same = (dir / "same").string();
  fs::create_directories(same);
  for (const Sample& s : load_manifest(data).test) {
    std::ofstream out(fs::path(same) / (s.id + ".txt"));
    for (const auto& sentence : s.report) out << sentence << '\n';
  }
  REQUIRE(run({"evaluate", "--generated", same, "--data", data, "--out", (dir / "id.json").string()}).code == kExitOk);
  std::ifstream id_json(dir / "id.json");
  CHECK(nlohmann::json::parse(id_json)["bleu1"].get<double>() == 1.0);

  // mismatched vocabulary is a runtime failure
  spit(dir / "tiny.vocab", "NULL\nUNK\nNEWLINE\nEOS\n");
  CHECK(run({"generate", "--checkpoint", model + "/checkpoint.cr8c", "--data", data, "--out", gen, "--vocab",
             (dir / "tiny.vocab").string()})
            .code == kExitFailure);
}
