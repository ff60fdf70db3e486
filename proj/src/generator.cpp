#include "storyvis/generator.hpp"

#include <cmath>
#include <vector>

namespace storyvis {

void init_generator_params(ParamStore& store, const ModelConfig& cfg, Index caption_vocab, Rng& rng) {
  const Index d = cfg.d_model;
  const Index da = cfg.d_align;
  const Index regions = static_cast<Index>(cfg.grid) * cfg.grid;
  add_dense(store, "gen.cond.mu", static_cast<Index>(cfg.story_length) * cfg.d_word, d, rng);
  add_dense(store, "gen.cond.logvar", static_cast<Index>(cfg.story_length) * cfg.d_word, d, rng);
  store.at("gen.cond.logvar.w") *= 0.1;
  add_dense(store, "gen.fuse.entity", d, da, rng);
  add_dense(store, "gen.fuse.caption", d, da, rng);
  add_dense(store, "gen.stage1.pool", 2 * d, d, rng);
  add_dense(store, "gen.stage1.grid", d, regions * da, rng);
  add_dense(store, "gen.stage2.region", 2 * da, cfg.image_hidden, rng);
  add_dense(store, "gen.stage2.rgb", cfg.image_hidden, 3, rng);
  store.add("gen.densecap.query", random_normal(cfg.densecap_slots, da, 1.0 / std::sqrt(static_cast<double>(da)), rng));
  add_dense(store, "gen.densecap.box", da, 4, rng);
  store.add("gen.densecap.pos", random_normal(cfg.caption_max_len, da, 0.1, rng));
  add_dense(store, "gen.densecap.vocab", da, caption_vocab, rng);
}

Conditioning cond_augment(const Tensor& sentence_embs, const Matrix& noise, const Bound& p, const ModelConfig& cfg) {
  if (sentence_embs.rows() != cfg.story_length) {
    throw TensorError("cond_augment: expected " + std::to_string(cfg.story_length) + " sentence embeddings, got " +
                      std::to_string(sentence_embs.rows()));
  }
  const Tensor flat = reshape(sentence_embs, 1, sentence_embs.size());
  Conditioning c;
  c.mu = dense(p, "gen.cond.mu", flat);
  c.logvar = dense(p, "gen.cond.logvar", flat);
  c.noise = noise;
  c.h0 = reparameterize(c.mu, c.logvar, noise);
  return c;
}

Tensor fuse_tokens(const Tensor& caption, const Tensor& entities, const Bound& p) {
  const Tensor cap = dense(p, "gen.fuse.caption", caption);
  if (entities.rows() == 0) return cap;
  return concat_rows({dense(p, "gen.fuse.entity", entities), cap});
}

Alignment align(const Tensor& regions, const Tensor& tokens) {
  if (regions.cols() != tokens.cols()) {
    throw TensorError("align: region width " + std::to_string(regions.cols()) + " vs token width " +
                      std::to_string(tokens.cols()));
  }
  Alignment a;
  a.beta = softmax_rows(matmul(regions, transpose(tokens)));
  a.context = matmul(a.beta, tokens);
  return a;
}

GeneratedFrame generate_frame(const Tensor& h0, const Tensor& caption, const Tensor& entities, const Bound& p,
                              const ModelConfig& cfg) {
  const Index g = cfg.grid;
  const Index regions = g * g;
  const Index side = cfg.image_size;
  const Index cell = side / g;

  GeneratedFrame f;
  const Tensor pooled = tanh(dense(p, "gen.stage1.pool", concat_cols({mean_rows(caption), h0})));
  f.grid = reshape(dense(p, "gen.stage1.grid", pooled), regions, cfg.d_align);
  f.tokens = fuse_tokens(caption, entities, p);
  f.alignment = align(f.grid, f.tokens);

  const Tensor region_feat = relu(dense(p, "gen.stage2.region", concat_cols({f.grid, f.alignment.context})));
  std::vector<Index> upsample(static_cast<std::size_t>(side * side));
  for (Index y = 0; y < side; ++y) {
    for (Index x = 0; x < side; ++x) upsample[static_cast<std::size_t>(y * side + x)] = (y / cell) * g + x / cell;
  }
  f.image = tanh(dense(p, "gen.stage2.rgb", gather_rows(region_feat, upsample)));
  return f;
}

DenseCapOutput densecap_heads(const Tensor& grid, const Bound& p, const ModelConfig& cfg) {
  const Index k = cfg.densecap_slots;
  const Index len = cfg.caption_max_len;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(grid.cols()));
  const Tensor attn = softmax_rows(scale(matmul(p("gen.densecap.query"), transpose(grid)), inv_sqrt));
  const Tensor slots = matmul(attn, grid);

  const Tensor raw = sigmoid(dense(p, "gen.densecap.box", slots));
  const Tensor a = slice_cols(raw, 0, 1);
  const Tensor b = slice_cols(raw, 1, 1);
  const Tensor c = slice_cols(raw, 2, 1);
  const Tensor d = slice_cols(raw, 3, 1);
  DenseCapOutput out;
  out.boxes = concat_cols({minimum(a, c), minimum(b, d), maximum(a, c), maximum(b, d)});

  std::vector<Index> slot_idx(static_cast<std::size_t>(k * len));
  std::vector<Index> pos_idx(static_cast<std::size_t>(k * len));
  for (Index r = 0; r < k * len; ++r) {
    slot_idx[static_cast<std::size_t>(r)] = r / len;
    pos_idx[static_cast<std::size_t>(r)] = r % len;
  }
  const Tensor hidden = tanh(add(gather_rows(slots, slot_idx), gather_rows(p("gen.densecap.pos"), pos_idx)));
  out.caption_logits = dense(p, "gen.densecap.vocab", hidden);
  return out;
}

}  // namespace storyvis
