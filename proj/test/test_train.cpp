#include "doctest.h"

#include <set>
#include <sstream>

#include "../tools/commands.hpp"
#include "storyvis/train.hpp"
#include "test_support.hpp"

using namespace storyvis;
namespace fs = std::filesystem;

namespace {

std::set<std::string> tree_listing(const fs::path& root) {
  std::set<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) out.insert(fs::relative(e.path(), root).string());
  return out;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("seed plan fans out deterministically") {
  const SeedPlan a = seed_plan(5);
  const SeedPlan b = seed_plan(5);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.master == 5);
  CHECK(a.init != a.noise);
  CHECK(a.noise != a.data);
  CHECK(a.init != a.data);
  CHECK(seed_plan(6).init != a.init);
}

TEST_CASE("first Adam step moves each weight by about lr") {
  ParamStore p;
  Matrix w(1, 3);
  w << 1.0, -2.0, 0.5;
  p.add("w", w);
  Adam adam(0.01, 0.5, 0.999);
  Matrix g(1, 3);
  g << 2.0, -0.5, 0.0;
  adam.step(p, {{"w", g}});
  CHECK(p.at("w")(0, 0) == doctest::Approx(1.0 - 0.01).epsilon(1e-9));
  CHECK(p.at("w")(0, 1) == doctest::Approx(-2.0 + 0.01).epsilon(1e-9));
  CHECK(p.at("w")(0, 2) == 0.5);
  adam.set_lr(0.5);
  CHECK(adam.lr() == 0.5);
}

TEST_CASE("mirroring a story twice restores it") {
  Config cfg = fixture::tiny_config();
  Rng rng(91);
  const PreparedStory s = fixture::random_story(cfg, fixture::tiny_vocab(), rng);
  const Index side = cfg.model.image_size;
  const PreparedStory m = mirror_story(s, side);
  const PreparedStory mm = mirror_story(m, side);
  for (std::size_t k = 0; k < s.frames.size(); ++k) {
    CHECK(mm.frames[k].image == s.frames[k].image);
    CHECK(mm.frames[k].target.boxes.isApprox(s.frames[k].target.boxes, 1e-15));
    CHECK(m.frames[k].image.row(0) == s.frames[k].image.row(side - 1));
  }
}

TEST_CASE("zero steps logs only the initial losses") {
  test::TempDir dir;
  Config cfg = test::synthetic_small_config();
  cfg.train.steps = 0;
  const TrainResult r = cli::cmd_train_demo(cfg, dir.path(), nullptr);
  REQUIRE(r.history.size() == 1);
  CHECK(all_finite(r.history[0]));
  CHECK(total_objective(r.history[0]) > 0.0);
  const std::vector<std::string> csv = lines(test::read_bytes(dir / "losses.csv"));
  REQUIRE(csv.size() == 2);
  CHECK(csv[0] == kLossCsvHeader);
  CHECK(csv[1].rfind("0,", 0) == 0);
}

TEST_CASE("training writes only inside its output directory and repeats exactly") {
  test::TempDir dir;
  const Config cfg = test::synthetic_small_config();
  const fs::path cwd = fs::current_path();
  const std::set<std::string> cwd_before = tree_listing(cwd);
  const fs::path run = dir / "run";
  std::ostringstream log;
  const TrainResult r = cli::cmd_train_demo(cfg, run, &log);
  CHECK(r.history.size() == static_cast<std::size_t>(cfg.train.steps));
  CHECK(!log.str().empty());
  fs::rename(run, dir / "first");
  cli::cmd_train_demo(cfg, run, nullptr);
  CHECK(tree_listing(cwd) == cwd_before);
  std::set<std::string> top;
  for (const auto& e : fs::directory_iterator(dir.path())) top.insert(e.path().filename().string());
  CHECK(top == std::set<std::string>{"first", "run"});

  const std::set<std::string> files = tree_listing(run);
  CHECK(files == tree_listing(dir / "first"));
  for (const char* f : {"losses.csv", "checkpoint.bin", "seeds.json", "config.json", "packs/manifest.json"}) {
    CHECK_MESSAGE(files.count(f) == 1, f);
  }
  CHECK(files.count("frames") == 1);
  for (const std::string& f : files) {
    if (fs::is_regular_file(run / f)) CHECK_MESSAGE(test::read_bytes(run / f) == test::read_bytes(dir / "first" / f), f);
  }
}

TEST_CASE("a different seed trains differently") {
  test::TempDir a, b;
  Config cfg = test::synthetic_small_config();
  cfg.train.steps = 1;
  cli::cmd_train_demo(cfg, a.path(), nullptr);
  cfg.seed += 1;
  cli::cmd_train_demo(cfg, b.path(), nullptr);
  CHECK(test::read_bytes(a / "losses.csv") != test::read_bytes(b / "losses.csv"));
}

TEST_CASE("non-finite losses stop training") {
  test::TempDir dir;
  Config cfg = test::synthetic_small_config();
  cfg.train.steps = 6;
  cfg.train.lr_generator = 1e200;
  cfg.train.lr_discriminator = 1e200;
  try {
    cli::cmd_train_demo(cfg, dir.path(), nullptr);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.last_good_step() >= 0);
    CHECK(e.last_good_step() < 6);
  }
}
