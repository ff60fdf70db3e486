#include "storyvis/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "storyvis/image_io.hpp"
#include "storyvis/mask.hpp"

namespace storyvis {

using nlohmann::json;

int Vocabularies::caption_id(const std::string& word) const {
  auto it = std::lower_bound(caption_words.begin() + 1, caption_words.end(), word);
  if (it == caption_words.end() || *it != word) return 0;
  return static_cast<int>(it - caption_words.begin());
}

json Vocabularies::to_json() const { return {{"labels", labels.labels()}, {"caption_words", caption_words}}; }

Vocabularies Vocabularies::from_json(const json& j) {
  Vocabularies v;
  v.labels = LabelVocab(j.at("labels").get<std::vector<std::string>>());
  v.caption_words = j.at("caption_words").get<std::vector<std::string>>();
  if (v.caption_words.empty() || v.caption_words.front() != "<unk>") {
    throw std::runtime_error("vocabulary: caption word 0 must be <unk>");
  }
  return v;
}

Vocabularies build_vocabularies(const std::vector<StoryRecord>& stories) {
  std::set<std::string> labels;
  std::set<std::string> words;
  for (const StoryRecord& s : stories) {
    for (const FrameRecord& f : s.frames) {
      const ConstituencyTree tree = parse_bracketed(f.tree);
      for (const TreeNode& n : tree.nodes()) labels.insert(n.label);
      for (const Annotation& a : f.annotations) {
        for (const std::string& t : tokenize(a.phrase)) words.insert(to_lower(t));
      }
    }
  }
  Vocabularies v;
  v.labels = LabelVocab(std::vector<std::string>(labels.begin(), labels.end()));
  v.caption_words.push_back("<unk>");
  for (const std::string& w : words) {
    if (w != "<unk>") v.caption_words.push_back(w);
  }
  return v;
}

CorpusSources load_sources(const Config& cfg) {
  if (cfg.data.stories.empty()) throw std::runtime_error("no story file configured (data.stories)");
  if (cfg.data.embeddings.empty()) throw std::runtime_error("no embedding file configured (data.embeddings)");
  CorpusSources src;
  const StoryLimits limits{cfg.model.num_characters, cfg.model.densecap_slots};
  src.stories = load_stories(cfg.data.stories, limits);
  src.words = WordTable::load(cfg.data.embeddings);
  if (src.words.dim() != cfg.model.d_word) {
    throw std::runtime_error("embedding file has dimension " + std::to_string(src.words.dim()) +
                             " but model.d_word is " + std::to_string(cfg.model.d_word));
  }
  if (!cfg.data.triples.empty()) src.triples = load_triple_store(cfg.data.triples);
  if (!cfg.data.lexicon.empty()) src.lexicon = Lexicon::load(cfg.data.lexicon);
  src.image_root = std::filesystem::path(cfg.data.stories).parent_path();
  return src;
}

Eigen::RowVectorXd sentence_embedding(const std::string& caption, const WordTable& words) {
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(words.dim());
  int found = 0;
  for (const std::string& tok : tokenize(caption)) {
    if (const auto* v = words.find(tok)) {
      out += *v;
      ++found;
    }
  }
  if (found > 0) out /= static_cast<double>(found);
  return out;
}

PreparedStory prepare_story(const StoryRecord& record, const Vocabularies& vocab, const CorpusSources& src,
                            const Config& cfg) {
  const ModelConfig& m = cfg.model;
  validate_story(record, {m.num_characters, m.densecap_slots});
  PreparedStory out;
  out.story_id = record.story_id;
  out.sentence_embs = Matrix::Zero(static_cast<Index>(record.frames.size()), src.words.dim());
  std::vector<std::string> captions;
  for (std::size_t k = 0; k < record.frames.size(); ++k) {
    const FrameRecord& fr = record.frames[k];
    const std::string fp = "frames[" + std::to_string(k) + "]";
    const ConstituencyTree tree = parse_bracketed(fr.tree);
    if (tree.leaf_count() > m.max_positions) {
      throw StoryError(record.story_id, fp + ".tree",
                       std::to_string(tree.leaf_count()) + " leaves exceed model.max_positions");
    }
    PreparedFrame f;
    f.text = fr.caption;
    const LeafWords lw = lookup_leaf_words(tree, src.words);
    f.caption.words = lw.vectors;
    f.caption.oov = lw.oov;
    f.caption.label_weights = label_average_weights(tree, vocab.labels, m.node_embed_depth);
    f.caption.masks = mask_stack(tree, m.layers, m.memory_slots, m.final_layer_full);

    const Index slots = m.densecap_slots;
    const Index len = m.caption_max_len;
    f.target.count = static_cast<Index>(fr.annotations.size());
    f.target.boxes = Matrix(f.target.count, 4);
    f.target.tokens.assign(static_cast<std::size_t>(slots * len), -1);
    for (Index a = 0; a < f.target.count; ++a) {
      const Annotation& an = fr.annotations[static_cast<std::size_t>(a)];
      for (Index c = 0; c < 4; ++c) f.target.boxes(a, c) = an.box[static_cast<std::size_t>(c)];
      const std::vector<std::string> toks = tokenize(an.phrase);
      for (Index t = 0; t < len && t < static_cast<Index>(toks.size()); ++t) {
        f.target.tokens[static_cast<std::size_t>(a * len + t)] = vocab.caption_id(to_lower(toks[static_cast<std::size_t>(t)]));
      }
    }
    f.characters = Matrix(1, m.num_characters);
    for (int c = 0; c < m.num_characters; ++c) f.characters(0, c) = fr.characters[static_cast<std::size_t>(c)];
    if (fr.image) {
      try {
        f.image = read_ppm(src.image_root / *fr.image, m.image_size);
      } catch (const std::exception& e) {
        throw StoryError(record.story_id, fp + ".image", e.what());
      }
    } else {
      f.image = Matrix::Zero(static_cast<Index>(m.image_size) * m.image_size, 3);
    }
    out.sentence_embs.row(static_cast<Index>(k)) = sentence_embedding(fr.caption, src.words);
    captions.push_back(fr.caption);
    out.frames.push_back(std::move(f));
  }
  const std::vector<Triple> triples = extract_triples(captions, src.triples, src.words, src.lexicon,
                                                      cfg.knowledge.expansion_threshold, cfg.knowledge.max_triples);
  out.graph = to_levi(triples);
  out.vertex_embs = vertex_embeddings(out.graph, src.words);
  return out;
}

Corpus prepare_corpus(const CorpusSources& src, const Config& cfg) {
  Corpus c;
  c.vocab = build_vocabularies(src.stories);
  for (const StoryRecord& s : src.stories) c.stories.push_back(prepare_story(s, c.vocab, src, cfg));
  return c;
}

// ---------------------------------------------------------------------------

namespace {

std::string frame_key(std::size_t k, const std::string& name) { return "frame" + std::to_string(k) + "." + name; }

Matrix bool_to_matrix(const BoolMatrix& b) { return b.cast<double>(); }

const Matrix& need(const TensorArchive& a, const std::string& name) {
  auto it = a.arrays.find(name);
  if (it == a.arrays.end()) throw ArchiveError("pack is missing array '" + name + "'");
  return it->second;
}

}  // namespace

TensorArchive pack_story(const PreparedStory& story) {
  TensorArchive a;
  a.arrays["sentence_embs"] = story.sentence_embs;
  a.arrays["graph.vertex_embs"] = story.vertex_embs;
  json frames = json::array();
  for (std::size_t k = 0; k < story.frames.size(); ++k) {
    const PreparedFrame& f = story.frames[k];
    a.arrays[frame_key(k, "words")] = f.caption.words;
    a.arrays[frame_key(k, "oov")] = f.caption.oov;
    a.arrays[frame_key(k, "label_weights")] = f.caption.label_weights;
    for (std::size_t l = 0; l < f.caption.masks.layers.size(); ++l) {
      a.arrays[frame_key(k, "mask" + std::to_string(l))] = bool_to_matrix(f.caption.masks.layers[l]);
    }
    a.arrays[frame_key(k, "boxes")] = f.target.boxes;
    Matrix tokens(1, static_cast<Index>(f.target.tokens.size()));
    for (std::size_t t = 0; t < f.target.tokens.size(); ++t) tokens(0, static_cast<Index>(t)) = f.target.tokens[t];
    a.arrays[frame_key(k, "phrase_tokens")] = tokens;
    a.arrays[frame_key(k, "characters")] = f.characters;
    a.arrays[frame_key(k, "image")] = f.image;
    frames.push_back({{"caption", f.text},
                      {"layers", f.caption.masks.layers.size()},
                      {"memory_slots", f.caption.masks.memory_slots}});
  }
  a.meta["story_id"] = story.story_id;
  a.meta["frames"] = frames;
  a.meta["graph"] = story.graph.to_json();
  return a;
}

PreparedStory unpack_story(const TensorArchive& a) {
  PreparedStory s;
  s.story_id = a.meta.at("story_id").get<std::string>();
  s.sentence_embs = need(a, "sentence_embs");
  s.vertex_embs = need(a, "graph.vertex_embs");
  s.graph = LeviGraph::from_json(a.meta.at("graph"));
  const json& frames = a.meta.at("frames");
  for (std::size_t k = 0; k < frames.size(); ++k) {
    PreparedFrame f;
    f.text = frames[k].at("caption").get<std::string>();
    f.caption.words = need(a, frame_key(k, "words"));
    f.caption.oov = need(a, frame_key(k, "oov"));
    f.caption.label_weights = need(a, frame_key(k, "label_weights"));
    const auto layers = frames[k].at("layers").get<std::size_t>();
    f.caption.masks.memory_slots = frames[k].at("memory_slots").get<Index>();
    f.caption.masks.caption_length = f.caption.words.rows();
    for (std::size_t l = 0; l < layers; ++l) {
      f.caption.masks.layers.push_back(need(a, frame_key(k, "mask" + std::to_string(l))).array() != 0.0);
    }
    f.target.boxes = need(a, frame_key(k, "boxes"));
    f.target.count = f.target.boxes.rows();
    const Matrix& tokens = need(a, frame_key(k, "phrase_tokens"));
    for (Index t = 0; t < tokens.cols(); ++t) f.target.tokens.push_back(static_cast<int>(tokens(0, t)));
    f.characters = need(a, frame_key(k, "characters"));
    f.image = need(a, frame_key(k, "image"));
    s.frames.push_back(std::move(f));
  }
  return s;
}

json manifest_entry(const PreparedStory& story) {
  json e;
  e["story_id"] = story.story_id;
  e["file"] = "packs/" + story.story_id + ".pack";
  e["frames"] = story.frames.size();
  json lengths = json::array();
  json annotations = json::array();
  for (const PreparedFrame& f : story.frames) {
    lengths.push_back(f.caption.words.rows());
    annotations.push_back(f.target.count);
  }
  e["caption_lengths"] = lengths;
  e["annotations"] = annotations;
  e["vertices"] = story.graph.size();
  e["entities"] = story.graph.entity_rows().size();
  return e;
}

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus, const Config& cfg) {
  std::filesystem::create_directories(dir / "packs");
  json manifest;
  manifest["format"] = "storyvis-pack-1";
  manifest["vocab"] = corpus.vocab.to_json();
  manifest["config"] = config_to_json(cfg);
  manifest["stories"] = json::array();
  for (const PreparedStory& s : corpus.stories) {
    write_archive(dir / "packs" / (s.story_id + ".pack"), pack_story(s));
    manifest["stories"].push_back(manifest_entry(s));
  }
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write manifest in '" + dir.string() + "'");
  os << manifest.dump(2) << '\n';
}

namespace {

json read_manifest(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw std::runtime_error("no manifest.json in '" + dir.string() + "'");
  return json::parse(is);
}

}  // namespace

Corpus read_corpus(const std::filesystem::path& dir) {
  const json manifest = read_manifest(dir);
  Corpus c;
  c.vocab = Vocabularies::from_json(manifest.at("vocab"));
  for (const json& e : manifest.at("stories")) {
    c.stories.push_back(unpack_story(read_archive(dir / e.at("file").get<std::string>())));
  }
  return c;
}

PreparedStory read_pack(const std::filesystem::path& dir, const std::string& story_id) {
  const json manifest = read_manifest(dir);
  for (const json& e : manifest.at("stories")) {
    if (e.at("story_id").get<std::string>() == story_id) {
      return unpack_story(read_archive(dir / e.at("file").get<std::string>()));
    }
  }
  throw std::runtime_error("story '" + story_id + "' is not in the packed corpus at '" + dir.string() + "'");
}

}  // namespace storyvis
