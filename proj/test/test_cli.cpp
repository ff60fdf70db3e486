#include "doctest.h"

#include <sstream>

#include "../tools/commands.hpp"
#include "storyvis/dataset.hpp"
#include "storyvis/mask.hpp"
#include "storyvis/synthetic.hpp"
#include "test_support.hpp"

using namespace storyvis;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "storyvis");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Synthetic side files plus a corpus whose every frame is the example
// sentence "Pororo says hi and smiles".
Config example_corpus(const fs::path& dir) {
  Config cfg = test::synthetic_small_config();
  cfg.model.layers = 4;
  cli::cmd_synth(cfg, dir / "data");
  FrameRecord f;
  f.caption = "Pororo says hi and smiles";
  f.tree = fixture::kExampleTree;
  f.characters.assign(9, 0);
  f.characters[0] = 1;
  f.annotations.push_back({{0.2, 0.2, 0.6, 0.7}, "red circle", 0});
  StoryRecord s{"pororo", std::vector<FrameRecord>(5, f)};
  save_stories(dir / "data" / "example.jsonl", {s});
  cfg.data.stories = (dir / "data" / "example.jsonl").string();
  cfg.data.embeddings = (dir / "data" / "embeddings.txt").string();
  cfg.data.triples = (dir / "data" / "triples.tsv").string();
  cfg.data.lexicon = (dir / "data" / "lexicon.tsv").string();
  save_config(dir / "example.json", cfg);
  return cfg;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"frobnicate"}).code == cli::kUsage);
  CHECK(run({"synth"}).code == cli::kUsage);
  CHECK(run({"train-demo", "--out", "x", "--steps", "-1"}).code == cli::kUsage);
  const Run help = run({"--help"});
  CHECK(help.code == cli::kOk);
  CHECK(help.out.find("train-demo") != std::string::npos);
}

TEST_CASE("a bad config file exits with 2") {
  test::TempDir dir;
  std::ofstream(dir / "bad.json") << R"({"model": {"d_modle": 3}})";
  const Run r = run({"synth", "--config", (dir / "bad.json").string(), "--out", (dir / "o").string()});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("d_modle") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "o"));
}

TEST_CASE("runtime failures exit with 1") {
  test::TempDir dir;
  const Run r = run({"dump-graph", "--packs", (dir / "none").string(), "--story", "s", "--out", dir.path().string()});
  CHECK(r.code == cli::kFailure);
  CHECK(r.err.rfind("error: ", 0) == 0);
}

TEST_CASE("synth, preprocess and dump commands") {
  test::TempDir dir;
  const Config cfg = example_corpus(dir.path());
  const std::string config = (dir / "example.json").string();
  const std::string packs = (dir / "packs").string();
  CHECK(run({"synth", "--config", config, "--out", (dir / "synth").string()}).code == cli::kOk);
  CHECK(fs::exists(dir / "synth" / "stories.jsonl"));

  const Run pre = run({"preprocess", "--config", config, "--out", packs});
  REQUIRE(pre.code == cli::kOk);
  CHECK(pre.out == "1 stories packed into " + packs + "\n");

  SUBCASE("mask dump reproduces the example grids") {
    const Run r = run({"dump-masks", "--packs", packs, "--story", "pororo", "--frame", "2", "--out",
                       (dir / "masks").string()});
    INFO(r.err);
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out == test::read_bytes(dir / "masks" / "pororo_frame2_masks.txt"));
    CHECK(r.out.find("layer 1\n") == 0);
    std::ifstream is(dir / "masks" / "pororo_frame2_masks.json");
    const nlohmann::json j = nlohmann::json::parse(is);
    CHECK(j["tokens"] == nlohmann::json({"Pororo", "says", "hi", "and", "smiles"}));
    const int slots = j["memory_slots"];
    CHECK(slots == cfg.model.memory_slots);
    const ConstituencyTree tree = parse_bracketed(fixture::kExampleTree);
    const PreparedStory story = read_pack(packs, "pororo");
    const MaskStack& st = story.frames[2].caption.masks;
    REQUIRE(j["layers"].size() == static_cast<std::size_t>(st.num_layers()));
    for (Index l = 0; l < st.num_layers(); ++l) {
      const BoolMatrix want = layer_mask(tree, std::min<Index>(l + 1, 3));
      for (Index a = 0; a < 5; ++a) {
        for (Index b = 0; b < 5; ++b) {
          const bool got = j["layers"][l][a][slots + b] == 1;
          if (l + 1 < st.num_layers()) CHECK(got == want(a, b));
          else CHECK(got);
          CHECK(got == st.layers[l](a, slots + b));
        }
      }
    }
    CHECK(j["layers"][0][1][slots + 2] == 0);
    CHECK(j["layers"][1][1][slots + 2] == 1);
    CHECK(j["layers"][1][1][slots + 4] == 0);
    CHECK(j["layers"][2][1][slots + 4] == 1);
    CHECK(j["layers"][2][0][slots + 1] == 0);
  }

  SUBCASE("mask dump rejects a missing frame") {
    CHECK(run({"dump-masks", "--packs", packs, "--story", "pororo", "--frame", "9", "--out", dir.path().string()})
              .code == cli::kFailure);
  }

  SUBCASE("graph dump writes the Levi graph") {
    const Run r = run({"dump-graph", "--packs", packs, "--story", "pororo", "--out", (dir / "g").string()});
    REQUIRE(r.code == cli::kOk);
    std::ifstream is(dir / "g" / "pororo_graph.json");
    const nlohmann::json j = nlohmann::json::parse(is);
    const PreparedStory story = read_pack(packs, "pororo");
    CHECK(j == story.graph.to_json());
    CHECK(j.at("vertices").size() == static_cast<std::size_t>(story.graph.size()));
  }
}

TEST_CASE("train-demo honours --steps and --seed") {
  test::TempDir dir;
  Config cfg = test::synthetic_small_config();
  save_config(dir / "c.json", cfg);
  const Run r = run({"train-demo", "--config", (dir / "c.json").string(), "--steps", "0", "--seed", "11", "--out",
                     (dir / "o").string()});
  REQUIRE(r.code == cli::kOk);
  CHECK(count_lines(test::read_bytes(dir / "o" / "losses.csv")) == 2);
  CHECK(load_config(dir / "o" / "config.json").seed == 11);
}

TEST_CASE("check lists and runs the property registry") {
  const Run list = run({"check", "--list"});
  CHECK(list.code == cli::kOk);
  CHECK(count_lines(list.out) == check::registry().size());

  const Run some = run({"check", "--only", "example-masks", "mask-invariants"});
  CHECK(some.code == cli::kOk);
  CHECK(count_lines(some.out) == 4);
  CHECK(some.out.find("2/2 properties passed") != std::string::npos);

  CHECK(run({"check", "--only", "no-such-property"}).code == cli::kFailure);
}

TEST_CASE("a corrupted mask rule is caught") {
  const Run r = run({"check", "--only", "mask-oracle", "--corrupt-mask-rule"});
  CHECK(r.code == cli::kFailure);
  CHECK(r.out.find("FAIL") != std::string::npos);
  CHECK(r.out.find("0/1 properties passed") != std::string::npos);
}

TEST_CASE("the full check prints one row per property and passes") {
  const Run r = run({"check"});
  INFO(r.out);
  CHECK(r.code == cli::kOk);
  CHECK(count_lines(r.out) == check::registry().size() + 2);
}
