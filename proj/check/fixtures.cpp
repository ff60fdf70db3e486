#include "fixtures.hpp"

#include "oracles.hpp"
#include "storyvis/mask.hpp"
#include "storyvis/model.hpp"

namespace storyvis::fixture {

Config tiny_config() {
  Config c;
  ModelConfig& m = c.model;
  m.d_model = 8;
  m.heads = 2;
  m.layers = 2;
  m.memory_slots = 2;
  m.d_node = 3;
  m.d_word = 5;
  m.ffn_dim = 8;
  m.max_positions = 12;
  m.dropout = 0.0;
  m.graph_layers = 2;
  m.graph_heads = 2;
  m.d_align = 6;
  m.grid = 2;
  m.image_size = 8;
  m.image_hidden = 3;
  m.densecap_slots = 3;
  m.caption_max_len = 3;
  m.num_characters = 4;
  m.story_length = 2;
  m.disc_pool = 2;
  m.disc_features = 4;
  m.disc_hidden = 5;
  return c;
}

Vocabularies tiny_vocab() {
  Vocabularies v;
  v.labels = LabelVocab({"ADJP", "DT", "IN", "JJ", "NN", "NNP", "NP", "PP", "PRP", "S", "SBAR", "VB", "VP"});
  v.caption_words = {"<unk>", "blue", "circle", "red", "square", "tree"};
  return v;
}

Matrix random_matrix(Index rows, Index cols, Rng& rng, double scale) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * (2.0 * uniform01(rng) - 1.0);
  return m;
}

CaptionInputs random_caption(const ModelConfig& cfg, const Vocabularies& vocab, Rng& rng, int max_leaves) {
  oracle::Shape s = oracle::random_shape(rng, max_leaves);
  oracle::relabel(s, rng);
  const ConstituencyTree tree = oracle::to_tree(s);
  CaptionInputs c;
  c.words = random_matrix(tree.leaf_count(), cfg.d_word, rng);
  c.oov = Matrix::Zero(tree.leaf_count(), 1);
  const Index unk = static_cast<Index>(uniform_int(rng, static_cast<std::uint64_t>(tree.leaf_count())));
  c.words.row(unk).setZero();
  c.oov(unk, 0) = 1.0;
  c.label_weights = label_average_weights(tree, vocab.labels, cfg.node_embed_depth);
  c.masks = mask_stack(tree, cfg.layers, cfg.memory_slots, cfg.final_layer_full);
  return c;
}

std::vector<Triple> random_triples(Rng& rng, int count, int phrase_pool, int relation_pool) {
  std::vector<Triple> out;
  for (int i = 0; i < count; ++i) {
    Triple t;
    t.subject = "p" + std::to_string(uniform_int(rng, static_cast<std::uint64_t>(phrase_pool)));
    t.relation = "r" + std::to_string(uniform_int(rng, static_cast<std::uint64_t>(relation_pool)));
    t.object = "p" + std::to_string(uniform_int(rng, static_cast<std::uint64_t>(phrase_pool)));
    out.push_back(t);
  }
  return out;
}

PreparedStory random_story(const Config& cfg, const Vocabularies& vocab, Rng& rng) {
  const ModelConfig& m = cfg.model;
  PreparedStory s;
  s.story_id = "toy";
  const Index side = m.image_size;
  const int vocab_size = static_cast<int>(vocab.caption_words.size());
  for (int k = 0; k < m.story_length; ++k) {
    PreparedFrame f;
    f.text = "frame " + std::to_string(k);
    f.caption = random_caption(m, vocab, rng);
    f.target.count = 1 + static_cast<Index>(uniform_int(rng, static_cast<std::uint64_t>(m.densecap_slots)));
    f.target.boxes = Matrix(f.target.count, 4);
    for (Index a = 0; a < f.target.count; ++a) {
      const double x1 = 0.1 + 0.3 * uniform01(rng), y1 = 0.1 + 0.3 * uniform01(rng);
      f.target.boxes.row(a) << x1, y1, x1 + 0.1 + 0.4 * uniform01(rng), y1 + 0.1 + 0.4 * uniform01(rng);
    }
    f.target.tokens.assign(static_cast<std::size_t>(m.densecap_slots * m.caption_max_len), -1);
    for (Index a = 0; a < f.target.count; ++a) {
      const Index len = 1 + static_cast<Index>(uniform_int(rng, static_cast<std::uint64_t>(m.caption_max_len)));
      for (Index t = 0; t < len; ++t) {
        f.target.tokens[static_cast<std::size_t>(a * m.caption_max_len + t)] =
            static_cast<int>(uniform_int(rng, static_cast<std::uint64_t>(vocab_size)));
      }
    }
    f.characters = Matrix(1, m.num_characters);
    for (int c = 0; c < m.num_characters; ++c) f.characters(0, c) = uniform01(rng) < 0.5 ? 0.0 : 1.0;
    f.image = random_matrix(side * side, 3, rng);
    s.frames.push_back(std::move(f));
  }
  s.sentence_embs = random_matrix(m.story_length, m.d_word, rng);
  s.graph = to_levi(random_triples(rng, 3, 4, 2));
  s.vertex_embs = random_matrix(s.graph.size(), m.d_word, rng);
  return s;
}

ParamStore tiny_model(const Config& cfg, const Vocabularies& vocab, std::uint64_t seed) {
  ParamStore p;
  Rng rng(seed);
  init_model_params(p, cfg.model, vocab, rng);
  // perturb biases and gains off their initial values
  for (auto& [name, m] : p) {
    const bool bias = name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0;
    const bool gain = name.size() > 2 && name.compare(name.size() - 2, 2, ".g") == 0;
    if (bias) m = random_matrix(m.rows(), m.cols(), rng, 0.1);
    if (gain) m = (Matrix::Ones(m.rows(), m.cols()) + random_matrix(m.rows(), m.cols(), rng, 0.1)).eval();
  }
  return p;
}

}  // namespace storyvis::fixture
