// One line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "../tools/commands.hpp"
#include "properties.hpp"
#include "storyvis/train.hpp"
#include "test_support.hpp"

using namespace storyvis;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome properties(const std::vector<std::string>& names, double budget_s) {
  Outcome o{true, ""};
  double total = 0.0;
  for (const std::string& n : names) {
    const check::PropertyResult r = check::run_property(check::find_property(n), {});
    total += r.seconds;
    if (!r.pass) {
      o.pass = false;
      o.detail += n + ": " + r.detail + "; ";
    }
  }
  if (budget_s > 0.0 && total >= budget_s) {
    o.pass = false;
    o.detail += "over the time budget; ";
  }
  o.detail += fmt("%.1fs", total);
  return o;
}

// Every regular file under a, compared byte for byte with its twin under b.
bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::set<std::string> ra, rb;
  for (const auto& e : fs::recursive_directory_iterator(a)) ra.insert(fs::relative(e.path(), a).string());
  for (const auto& e : fs::recursive_directory_iterator(b)) rb.insert(fs::relative(e.path(), b).string());
  if (ra != rb) {
    why = "different file sets";
    return false;
  }
  for (const std::string& f : ra) {
    if (fs::is_regular_file(a / f) && test::read_bytes(a / f) != test::read_bytes(b / f)) {
      why = f + " differs";
      return false;
    }
  }
  why = std::to_string(ra.size()) + " entries identical";
  return true;
}

Config smoke_config() { return load_config(fs::path(STORYVIS_SOURCE_DIR) / "configs" / "smoke.json"); }

Outcome smoke() {
  test::TempDir dir;
  const Config cfg = smoke_config();
  const auto t0 = Clock::now();
  TrainResult r;
  try {
    r = cli::cmd_train_demo(cfg, dir.path(), nullptr);
  } catch (const TrainingError& e) {
    return {false, e.what()};
  }
  const double secs = since(t0);
  const std::size_t n = r.history.size();
  if (n < 10) return {false, "only " + std::to_string(n) + " steps logged"};
  bool finite = true;
  for (const LossBundle& b : r.history) finite = finite && all_finite(b);
  auto mean_total = [&](std::size_t from) {
    double s = 0.0;
    for (std::size_t i = from; i < from + 5; ++i) s += total_objective(r.history[i]);
    return s / 5.0;
  };
  const double first = mean_total(0);
  const double last = mean_total(n - 5);
  const double ratio = last / first;
  Outcome o;
  o.pass = finite && n == static_cast<std::size_t>(cfg.train.steps) && ratio <= 0.8 && secs < 900.0;
  o.detail = std::to_string(n) + " steps, objective " + fmt("%.3f", first) + " -> " + fmt("%.3f", last) +
             " (ratio " + fmt("%.3f", ratio) + "), " + (finite ? "all finite" : "NON-FINITE") + ", " +
             fmt("%.0fs", secs);
  return o;
}

Outcome determinism() {
  test::TempDir dir;
  Config cfg = smoke_config();
  cli::cmd_synth(cfg, dir / "data");
  cfg.data.stories = (dir / "data" / "stories.jsonl").string();
  cfg.data.embeddings = (dir / "data" / "embeddings.txt").string();
  cfg.data.triples = (dir / "data" / "triples.tsv").string();
  cfg.data.lexicon = (dir / "data" / "lexicon.tsv").string();

  // Same output path both times; the manifest records the input paths.
  std::string why_pre, why_train;
  cli::cmd_preprocess(cfg, dir / "packs");
  fs::rename(dir / "packs", dir / "packs.first");
  cli::cmd_preprocess(cfg, dir / "packs");
  const bool pre = same_tree(dir / "packs", dir / "packs.first", why_pre);

  cfg.train.steps = 3;
  cli::cmd_train_demo(cfg, dir / "train", nullptr);
  fs::rename(dir / "train", dir / "train.first");
  cli::cmd_train_demo(cfg, dir / "train", nullptr);
  const bool train = same_tree(dir / "train", dir / "train.first", why_train);
  return {pre && train, "preprocess: " + why_pre + "; train-demo: " + why_train};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"mask-oracle equivalence", [] { return properties({"mask-oracle"}, 10.0); }},
      {"worked-example masks", [] { return properties({"example-masks"}, 0.0); }},
      {"node-embedding oracle", [] { return properties({"node-embedding-oracle"}, 0.0); }},
      {"gradient suite",
       [] {
         return properties(
             {"grad-encode-step", "grad-memory-update", "grad-graph-encode", "grad-generate-frame", "grad-loss-terms"},
             120.0);
       }},
      {"loss closed forms", [] { return properties({"loss-closed-forms"}, 0.0); }},
      {"memoryless reduction", [] { return properties({"martt-reduction"}, 0.0); }},
      {"causality", [] { return properties({"martt-causality"}, 0.0); }},
      {"Levi-graph invariants", [] { return properties({"levi-invariants"}, 0.0); }},
      {"end-to-end smoke training", smoke},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS  " : "FAIL  ") << c.name << "  (" << o.detail << ")\n" << std::flush;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " acceptance criteria passed\n";
  return failed == 0 ? 0 : 1;
}
