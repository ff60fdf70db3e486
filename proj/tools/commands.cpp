#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "storyvis/knowledge_graph.hpp"
#include "storyvis/synthetic.hpp"

namespace storyvis::cli {

namespace fs = std::filesystem;

Config resolve_config(const Overrides& o) {
  Config cfg;
  std::string path = o.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnv); env != nullptr) path = env;
  }
  if (!path.empty()) cfg = load_config(path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.steps) cfg.train.steps = *o.steps;
  cfg.validate();
  return cfg;
}

void cmd_synth(const Config& cfg, const fs::path& out) {
  SyntheticOptions so;
  so.stories = cfg.data.synthetic_stories;
  so.frames = cfg.model.story_length;
  so.image_size = cfg.model.image_size;
  so.d_word = cfg.model.d_word;
  so.seed = derive_seed(cfg.seed, 3);
  write_synthetic_corpus(make_synthetic_corpus(so), out);
}

Corpus cmd_preprocess(const Config& cfg, const fs::path& out) {
  if (cfg.data.stories.empty()) throw std::runtime_error("preprocess: no stories file given");
  Corpus corpus = prepare_corpus(load_sources(cfg), cfg);
  write_corpus(out, corpus, cfg);
  return corpus;
}

MaskDump render_masks(const PreparedStory& story, int frame) {
  if (frame < 0 || frame >= static_cast<int>(story.frames.size())) {
    throw std::runtime_error("story '" + story.story_id + "' has no frame " + std::to_string(frame));
  }
  const PreparedFrame& f = story.frames[static_cast<std::size_t>(frame)];
  const MaskStack& st = f.caption.masks;
  std::vector<std::string> tokens = tokenize(f.text);
  if (static_cast<Index>(tokens.size()) != st.caption_length) {
    tokens.clear();
    for (Index i = 0; i < st.caption_length; ++i) tokens.push_back("w" + std::to_string(i));
  }
  std::vector<std::string> cols;
  for (Index m = 0; m < st.memory_slots; ++m) cols.push_back("m" + std::to_string(m));
  cols.insert(cols.end(), tokens.begin(), tokens.end());
  std::size_t row_w = 0;
  for (const std::string& t : tokens) row_w = std::max(row_w, t.size());

  std::ostringstream os;
  nlohmann::json layers = nlohmann::json::array();
  for (Index l = 0; l < st.num_layers(); ++l) {
    const BoolMatrix& m = st.layers[static_cast<std::size_t>(l)];
    os << "layer " << (l + 1) << '\n' << std::string(row_w, ' ');
    for (const std::string& c : cols) os << ' ' << c;
    os << '\n';
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < m.rows(); ++i) {
      os << std::setw(static_cast<int>(row_w)) << tokens[static_cast<std::size_t>(i)];
      std::vector<int> row;
      for (Index j = 0; j < m.cols(); ++j) {
        const std::string& c = cols[static_cast<std::size_t>(j)];
        os << ' ' << std::setw(static_cast<int>(c.size())) << (m(i, j) ? 1 : 0);
        row.push_back(m(i, j) ? 1 : 0);
      }
      os << '\n';
      rows.push_back(row);
    }
    layers.push_back(rows);
    if (l + 1 < st.num_layers()) os << '\n';
  }
  MaskDump d;
  d.text = os.str();
  d.json = {{"story_id", story.story_id}, {"frame", frame},          {"memory_slots", st.memory_slots},
            {"caption_length", st.caption_length}, {"tokens", tokens}, {"layers", layers}};
  return d;
}

MaskDump cmd_dump_masks(const fs::path& packs, const std::string& story_id, int frame, const fs::path& out) {
  const MaskDump d = render_masks(read_pack(packs, story_id), frame);
  fs::create_directories(out);
  const std::string stem = story_id + "_frame" + std::to_string(frame) + "_masks";
  std::ofstream(out / (stem + ".txt"), std::ios::trunc) << d.text;
  std::ofstream(out / (stem + ".json"), std::ios::trunc) << d.json.dump(2) << '\n';
  return d;
}

nlohmann::json cmd_dump_graph(const fs::path& packs, const std::string& story_id, const fs::path& out) {
  nlohmann::json j = read_pack(packs, story_id).graph.to_json();
  fs::create_directories(out);
  std::ofstream(out / (story_id + "_graph.json"), std::ios::trunc) << j.dump(2) << '\n';
  return j;
}

TrainResult cmd_train_demo(Config cfg, const fs::path& out, std::ostream* log) {
  fs::create_directories(out);
  if (cfg.data.stories.empty()) {
    const fs::path data = out / "data";
    cmd_synth(cfg, data);
    cfg.data.stories = (data / "stories.jsonl").string();
    cfg.data.embeddings = (data / "embeddings.txt").string();
    cfg.data.triples = (data / "triples.tsv").string();
    cfg.data.lexicon = (data / "lexicon.tsv").string();
  }
  cmd_preprocess(cfg, out / "packs");
  const Corpus corpus = read_corpus(out / "packs");
  save_config(out / "config.json", cfg);
  TrainOptions opt;
  opt.out_dir = out;
  opt.log = log;
  return train_demo(corpus, cfg, opt);
}

std::vector<CheckRow> cmd_check(const check::CheckOptions& opt, const std::vector<std::string>& only,
                                std::ostream& os) {
  std::vector<const check::Property*> props;
  if (only.empty()) {
    for (const check::Property& p : check::registry()) props.push_back(&p);
  } else {
    for (const std::string& n : only) props.push_back(&check::find_property(n));
  }
  std::size_t w = 8;
  for (const check::Property* p : props) w = std::max(w, p->name.size());
  os << std::left << std::setw(static_cast<int>(w)) << "property" << "  result    time  detail\n";
  std::vector<CheckRow> rows;
  int passed = 0;
  for (const check::Property* p : props) {
    const check::PropertyResult r = check::run_property(*p, opt);
    char time[16];
    std::snprintf(time, sizeof time, "%6.2fs", r.seconds);
    os << std::left << std::setw(static_cast<int>(w)) << p->name << "  " << (r.pass ? "PASS  " : "FAIL  ") << "  "
       << time << "  " << r.detail << '\n'
       << std::flush;
    passed += r.pass ? 1 : 0;
    rows.push_back({p->name, r});
  }
  os << passed << "/" << rows.size() << " properties passed\n";
  return rows;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"storyvis: syntax-aware story visualisation toolkit"};
  app.require_subcommand(1);

  Overrides ov;
  std::uint64_t seed = 0;
  int steps = 0;
  std::string out_dir;
  auto common = [&](CLI::App* sub, bool with_steps) {
    sub->add_option("--config", ov.config_path, std::string("Config JSON (default: $") + kConfigEnv + ")");
    sub->add_option("--seed", seed, "Master seed");
    if (with_steps) sub->add_option("--steps", steps, "Training steps")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out_dir, "Output directory")->required();
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic shapes corpus");
  common(synth, false);

  CLI::App* pre = app.add_subcommand("preprocess", "Pack a story corpus for training");
  common(pre, false);
  std::string stories, embeddings, triples, lexicon;
  pre->add_option("--stories", stories, "Story JSONL");
  pre->add_option("--embeddings", embeddings, "Word embedding table");
  pre->add_option("--triples", triples, "Triple store TSV");
  pre->add_option("--lexicon", lexicon, "Verb lexicon TSV");

  std::string packs, story_id;
  int frame = 0;
  CLI::App* masks = app.add_subcommand("dump-masks", "Print per-layer attention masks of one caption");
  masks->add_option("--packs", packs, "Packed corpus directory")->required();
  masks->add_option("--story", story_id, "Story id")->required();
  masks->add_option("--frame", frame, "Frame index")->check(CLI::NonNegativeNumber);
  masks->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* graph = app.add_subcommand("dump-graph", "Write the Levi graph of one story as JSON");
  graph->add_option("--packs", packs, "Packed corpus directory")->required();
  graph->add_option("--story", story_id, "Story id")->required();
  graph->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* train = app.add_subcommand("train-demo", "Train on a small corpus and log losses");
  common(train, true);

  CLI::App* chk = app.add_subcommand("check", "Run the invariant and oracle suite");
  chk->add_option("--seed", seed, "Seed for the randomised checks");
  std::vector<std::string> only;
  chk->add_option("--only", only, "Run only these properties");
  bool list = false;
  chk->add_flag("--list", list, "List properties and exit");
  bool corrupt = false;
  chk->add_flag("--corrupt-mask-rule", corrupt)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  auto given = [](CLI::App* sub, const char* name) {
    const CLI::Option* o = sub->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  };
  try {
    CLI::App* sub = app.get_subcommands().front();
    if (given(sub, "--seed")) ov.seed = seed;
    if (sub == train && given(sub, "--steps")) ov.steps = steps;

    if (sub == chk) {
      if (list) {
        for (const check::Property& p : check::registry()) out << p.name << "  " << p.summary << '\n';
        return kOk;
      }
      check::CheckOptions opt;
      if (ov.seed) opt.seed = *ov.seed;
      opt.corrupt_mask_rule = corrupt;
      const std::vector<CheckRow> rows = cmd_check(opt, only, out);
      const bool ok = std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.result.pass; });
      return ok ? kOk : kFailure;
    }
    if (sub == masks) {
      out << cmd_dump_masks(packs, story_id, frame, out_dir).text;
      return kOk;
    }
    if (sub == graph) {
      const nlohmann::json j = cmd_dump_graph(packs, story_id, out_dir);
      out << j.at("vertices").size() << " vertices written to " << (fs::path(out_dir) / (story_id + "_graph.json")).string()
          << '\n';
      return kOk;
    }

    Config cfg = resolve_config(ov);
    if (sub == synth) {
      cmd_synth(cfg, out_dir);
      out << cfg.data.synthetic_stories << " stories written to " << out_dir << '\n';
    } else if (sub == pre) {
      if (!stories.empty()) cfg.data.stories = stories;
      if (!embeddings.empty()) cfg.data.embeddings = embeddings;
      if (!triples.empty()) cfg.data.triples = triples;
      if (!lexicon.empty()) cfg.data.lexicon = lexicon;
      const Corpus c = cmd_preprocess(cfg, out_dir);
      out << c.stories.size() << " stories packed into " << out_dir << '\n';
    } else if (sub == train) {
      const TrainResult r = cmd_train_demo(cfg, out_dir, &err);
      out << r.history.size() << " steps logged to " << (fs::path(out_dir) / "losses.csv").string() << '\n';
    }
    return kOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace storyvis::cli
