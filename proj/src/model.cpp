#include "storyvis/model.hpp"

namespace storyvis {

void init_model_params(ParamStore& store, const ModelConfig& cfg, const Vocabularies& vocab, Rng& rng) {
  init_martt_params(store, cfg, vocab.labels.size(), rng);
  init_graph_params(store, cfg, rng);
  init_generator_params(store, cfg, static_cast<Index>(vocab.caption_words.size()), rng);
  init_discriminator_params(store, cfg, rng);
}

StoryForward forward_story(const PreparedStory& story, const Bound& p, const ModelConfig& cfg, const Matrix& noise,
                           const ForwardContext& ctx) {
  Tape& tape = p.tape();
  StoryForward f;
  f.cond = cond_augment(tape.constant(story.sentence_embs), noise, p, cfg);

  std::vector<Tensor> leaves;
  std::vector<MaskStack> masks;
  for (const PreparedFrame& fr : story.frames) {
    leaves.push_back(leaf_inputs(p, fr.caption));
    masks.push_back(fr.caption.masks);
  }
  f.encoded = encode_story(leaves, masks, f.cond.h0, p, cfg, ctx);

  if (story.graph.size() > 0) {
    f.entities = graph_encode(story.graph, story.vertex_embs, p, cfg, ctx).entities();
  } else {
    f.entities = tape.constant(Matrix::Zero(0, cfg.d_model));
  }
  for (const Tensor& c : f.encoded) {
    f.frames.push_back(generate_frame(f.cond.h0, c, f.entities, p, cfg));
    f.densecap.push_back(densecap_heads(f.frames.back().grid, p, cfg));
  }
  return f;
}

namespace {

Tensor average(const std::vector<Tensor>& xs) { return mean(concat_cols(std::span<const Tensor>(xs))); }

GanInputs gan_inputs(const PreparedStory& story, const StoryForward& fwd, Tape& tape, bool detach) {
  GanInputs in;
  Matrix labels(story.length(), story.frames.front().characters.cols());
  for (Index k = 0; k < story.length(); ++k) {
    const PreparedFrame& fr = story.frames[static_cast<std::size_t>(k)];
    in.real_images.push_back(tape.constant(fr.image));
    const Tensor& fake = fwd.frames[static_cast<std::size_t>(k)].image;
    in.fake_images.push_back(detach ? tape.constant(fake.value()) : fake);
    labels.row(k) = fr.characters;
  }
  in.sentence_embs = tape.constant(story.sentence_embs);
  in.h0 = detach ? tape.constant(fwd.cond.h0.value()) : fwd.cond.h0;
  in.character_labels = labels;
  return in;
}

}  // namespace

LossTerms<Tensor> generator_losses(const PreparedStory& story, const StoryForward& fwd, const Bound& p,
                                   const Config& cfg) {
  Tape& tape = p.tape();
  LossTerms<Tensor> t;
  t.lambda_bbox = cfg.train.lambda_bbox;
  t.lambda_caption = cfg.train.lambda_caption;
  t.kl = kl_loss(fwd.cond.mu, fwd.cond.logvar);

  const GanLosses gan = gan_losses(gan_inputs(story, fwd, tape, false), p, cfg.model);
  t.img = gan.img;
  t.story = gan.story;

  std::vector<Tensor> bbox;
  std::vector<Tensor> caption;
  std::vector<Tensor> word;
  std::vector<Tensor> grids;
  std::vector<Tensor> tokens;
  for (const GeneratedFrame& g : fwd.frames) {
    grids.push_back(g.grid);
    tokens.push_back(g.tokens);
  }
  for (std::size_t k = 0; k < story.frames.size(); ++k) {
    const DenseCapTarget& target = story.frames[k].target;
    bbox.push_back(bbox_loss_mirror(fwd.densecap[k].boxes, target.boxes));
    caption.push_back(caption_ce(fwd.densecap[k].caption_logits, target.tokens, cfg.model.caption_max_len));
    word.push_back(contrastive_word_loss(grids, tokens, static_cast<Index>(k)));
  }
  t.bbox = average(bbox);
  t.caption = average(caption);
  t.word = average(word);
  return t;
}

Tensor discriminator_loss(const PreparedStory& story, const StoryForward& fwd, const Bound& p, const ModelConfig& cfg) {
  return gan_losses(gan_inputs(story, fwd, p.tape(), true), p, cfg).d_total();
}

}  // namespace storyvis
