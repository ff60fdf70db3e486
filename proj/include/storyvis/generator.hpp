#ifndef STORYVIS_GENERATOR_HPP_
#define STORYVIS_GENERATOR_HPP_

#include "storyvis/config.hpp"
#include "storyvis/layers.hpp"
#include "storyvis/params.hpp"

namespace storyvis {

// Conditioning, word-region alignment and a two-stage toy frame generator.
// Parameters live under "gen.".

struct Conditioning {
  Tensor h0;      // 1 x d
  Tensor mu;      // 1 x d
  Tensor logvar;  // 1 x d
  Matrix noise;   // 1 x d, the frozen epsilon
};

struct Alignment {
  Tensor beta;     // n_regions x n_tokens, rows sum to 1
  Tensor context;  // n_regions x d_a, beta * tokens
};

struct GeneratedFrame {
  Tensor image;   // (H*W) x 3 in [-1, 1], pixel (y, x) at row y*W + x
  Tensor grid;    // g^2 x d_a stage-one region features
  Tensor tokens;  // fused [entities; caption] tokens, n x d_a
  Alignment alignment;
};

struct DenseCapOutput {
  Tensor boxes;           // K x 4 as (x1, y1, x2, y2) with x1 <= x2, y1 <= y2
  Tensor caption_logits;  // (K * max_len) x vocab, row = slot * max_len + position
};

void init_generator_params(ParamStore& store, const ModelConfig& cfg, Index caption_vocab, Rng& rng);

// sentence_embs is T x d_s (one row per frame); the heads read its row-major
// flattening, so T must equal cfg.story_length.
Conditioning cond_augment(const Tensor& sentence_embs, const Matrix& noise, const Bound& p, const ModelConfig& cfg);

// Row-stack of f_entity(entities) then f_caption(caption).
Tensor fuse_tokens(const Tensor& caption, const Tensor& entities, const Bound& p);

// beta = row-softmax(regions * tokens^T); context = beta * tokens.
Alignment align(const Tensor& regions, const Tensor& tokens);

GeneratedFrame generate_frame(const Tensor& h0, const Tensor& caption, const Tensor& entities, const Bound& p,
                              const ModelConfig& cfg);

DenseCapOutput densecap_heads(const Tensor& grid, const Bound& p, const ModelConfig& cfg);

}  // namespace storyvis

#endif  // STORYVIS_GENERATOR_HPP_
