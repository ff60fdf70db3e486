#include "storyvis/losses.hpp"

#include <cmath>
#include <map>

#include "storyvis/generator.hpp"

namespace storyvis {

LossBundle values(const LossTerms<Tensor>& t) {
  LossBundle b;
  b.kl = t.kl.item();
  b.img = t.img.item();
  b.story = t.story.item();
  b.bbox = t.bbox.item();
  b.caption = t.caption.item();
  b.word = t.word.item();
  b.lambda_bbox = t.lambda_bbox;
  b.lambda_caption = t.lambda_caption;
  return b;
}

bool all_finite(const LossBundle& b) {
  for (double v : {b.kl, b.img, b.story, b.bbox, b.caption, b.word}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix mirror_boxes(const Matrix& boxes) {
  if (boxes.cols() != 4) throw TensorError("mirror_boxes: expected 4 columns, got " + shape_string(boxes));
  Matrix m(boxes.rows(), 4);
  m.col(0) = 1.0 - boxes.col(2).array();
  m.col(1) = boxes.col(1);
  m.col(2) = 1.0 - boxes.col(0).array();
  m.col(3) = boxes.col(3);
  return m;
}

Tensor kl_loss(const Tensor& mu, const Tensor& logvar) { return gaussian_kl(mu, logvar); }

Tensor word_score(const Tensor& regions, const Tensor& tokens) {
  const Alignment a = align(regions, tokens);
  return logsumexp_rows(transpose(cosine_similarity(regions, a.context)));
}

Tensor contrastive_word_loss(std::span<const Tensor> regions, std::span<const Tensor> tokens, Index k) {
  if (regions.empty()) throw TensorError("contrastive_word_loss: story has no frames");
  if (regions.size() != tokens.size()) throw TensorError("contrastive_word_loss: frame and caption counts differ");
  if (k < 0 || k >= static_cast<Index>(regions.size())) throw TensorError("contrastive_word_loss: frame index out of range");
  std::vector<Tensor> scores;
  for (const Tensor& r : regions) scores.push_back(word_score(r, tokens[static_cast<std::size_t>(k)]));
  const Tensor row = concat_cols(std::span<const Tensor>(scores));
  return sub(logsumexp_rows(row), scores[static_cast<std::size_t>(k)]);
}

Tensor bbox_loss_mirror(const Tensor& pred_boxes, const Matrix& target_boxes) {
  Tape& tape = pred_boxes.tape();
  const Index n = target_boxes.rows();
  if (target_boxes.cols() != 4 || pred_boxes.cols() != 4 || n > pred_boxes.rows()) {
    throw TensorError("bbox_loss_mirror: predictions " + shape_string(pred_boxes.value()) + " vs targets " +
                      shape_string(target_boxes));
  }
  if (n == 0) return tape.constant(Matrix::Zero(1, 1));
  const Tensor pred = slice_rows(pred_boxes, 0, n);
  const Tensor direct = l1_distance(pred, tape.constant(target_boxes));
  const Tensor mirrored = l1_distance(pred, tape.constant(mirror_boxes(target_boxes)));
  return scale(minimum(direct, mirrored), 1.0 / static_cast<double>(n));
}

Tensor caption_ce(const Tensor& caption_logits, std::span<const int> targets, Index max_len) {
  const Index rows = caption_logits.rows();
  if (max_len <= 0 || rows % max_len != 0) {
    throw TensorError("caption_ce: " + std::to_string(rows) + " logit rows is not a multiple of max_len " +
                      std::to_string(max_len));
  }
  const Index slots = rows / max_len;
  std::vector<Scalar> weights(static_cast<std::size_t>(rows), 0.0);
  Index used_slots = 0;
  for (Index s = 0; s < slots; ++s) {
    Index n = 0;
    for (Index t = 0; t < max_len; ++t) n += targets[static_cast<std::size_t>(s * max_len + t)] >= 0 ? 1 : 0;
    if (n == 0) continue;
    ++used_slots;
    for (Index t = 0; t < max_len; ++t) weights[static_cast<std::size_t>(s * max_len + t)] = 1.0 / static_cast<double>(n);
  }
  if (used_slots == 0) return caption_logits.tape().constant(Matrix::Zero(1, 1));
  for (Scalar& w : weights) w /= static_cast<double>(used_slots);
  return token_cross_entropy(caption_logits, targets, weights);
}

// ---------------------------------------------------------------------------

void init_discriminator_params(ParamStore& store, const ModelConfig& cfg, Rng& rng) {
  const Index pooled = static_cast<Index>(cfg.disc_pool) * cfg.disc_pool * 3;
  add_dense(store, "disc.feat", pooled, cfg.disc_features, rng);
  add_dense(store, "disc.img.hidden", cfg.disc_features + cfg.d_word + cfg.d_model, cfg.disc_hidden, rng);
  add_dense(store, "disc.img.out", cfg.disc_hidden, 1, rng);
  add_dense(store, "disc.img.char", cfg.disc_hidden, cfg.num_characters, rng);
  add_dense(store, "disc.story.hidden", static_cast<Index>(cfg.story_length) * cfg.disc_features + cfg.d_word,
            cfg.disc_hidden, rng);
  add_dense(store, "disc.story.out", cfg.disc_hidden, 1, rng);
}

namespace {

const Matrix& pooling_matrix(Index side, Index pool) {
  thread_local std::map<std::pair<Index, Index>, Matrix> cache;
  auto it = cache.find({side, pool});
  if (it != cache.end()) return it->second;
  const Index cell = side / pool;
  Matrix m = Matrix::Zero(pool * pool, side * side);
  const double w = 1.0 / static_cast<double>(cell * cell);
  for (Index y = 0; y < side; ++y) {
    for (Index x = 0; x < side; ++x) m((y / cell) * pool + x / cell, y * side + x) = w;
  }
  return cache.emplace(std::make_pair(side, pool), std::move(m)).first->second;
}

}  // namespace

Tensor frame_features(const Tensor& image, const Bound& p, const ModelConfig& cfg) {
  const Index side = cfg.image_size;
  if (image.rows() != side * side || image.cols() != 3) {
    throw TensorError("frame_features: expected [" + std::to_string(side * side) + ",3] image, got " +
                      shape_string(image.value()));
  }
  const Index pool = cfg.disc_pool;
  const Tensor pooled = matmul(p.tape().constant(pooling_matrix(side, pool)), image);
  return relu(dense(p, "disc.feat", reshape(pooled, 1, pool * pool * 3)));
}

ImageJudgement judge_image(const Tensor& features, const Tensor& sentence_emb, const Tensor& h0, const Bound& p) {
  const Tensor hidden = relu(dense(p, "disc.img.hidden", concat_cols({features, sentence_emb, h0})));
  return {dense(p, "disc.img.out", hidden), dense(p, "disc.img.char", hidden)};
}

Tensor judge_story(std::span<const Tensor> features, const Tensor& story_emb, const Bound& p) {
  std::vector<Tensor> parts(features.begin(), features.end());
  parts.push_back(story_emb);
  const Tensor hidden = relu(dense(p, "disc.story.hidden", concat_cols(std::span<const Tensor>(parts))));
  return dense(p, "disc.story.out", hidden);
}

Tensor neg_log_sigmoid(const Tensor& logits) {
  return softplus(scale(clamp(logits, -kLogitClamp, kLogitClamp), -1.0));
}

Tensor character_bce(const Tensor& logits, const Matrix& labels) {
  if (labels.rows() != logits.rows() || labels.cols() != logits.cols()) {
    throw TensorError("character_bce: logits " + shape_string(logits.value()) + " vs labels " + shape_string(labels));
  }
  Tape& tape = logits.tape();
  const Tensor z = clamp(logits, -kLogitClamp, kLogitClamp);
  // y * softplus(-z) + (1 - y) * softplus(z)
  const Tensor y = tape.constant(labels);
  const Tensor not_y = tape.constant((1.0 - labels.array()).matrix());
  return mean(add(mul(y, softplus(scale(z, -1.0))), mul(not_y, softplus(z))));
}

GanLosses gan_losses(const GanInputs& in, const Bound& p, const ModelConfig& cfg) {
  const std::size_t t = in.real_images.size();
  if (t == 0 || in.fake_images.size() != t || static_cast<std::size_t>(in.sentence_embs.rows()) != t ||
      static_cast<std::size_t>(in.character_labels.rows()) != t) {
    throw TensorError("gan_losses: real, fake, sentence and label counts must agree");
  }
  std::vector<Tensor> real_feat;
  std::vector<Tensor> fake_feat;
  std::vector<Tensor> g_adv;
  std::vector<Tensor> g_chr;
  std::vector<Tensor> d_adv;
  std::vector<Tensor> d_chr;
  for (std::size_t k = 0; k < t; ++k) {
    const Index row = static_cast<Index>(k);
    const Tensor s = slice_rows(in.sentence_embs, row, 1);
    const Matrix labels = in.character_labels.row(row);
    real_feat.push_back(frame_features(in.real_images[k], p, cfg));
    fake_feat.push_back(frame_features(in.fake_images[k], p, cfg));
    const ImageJudgement real = judge_image(real_feat.back(), s, in.h0, p);
    const ImageJudgement fake = judge_image(fake_feat.back(), s, in.h0, p);
    g_adv.push_back(neg_log_sigmoid(fake.logit));
    g_chr.push_back(character_bce(fake.characters, labels));
    d_adv.push_back(add(neg_log_sigmoid(real.logit), neg_log_sigmoid(scale(fake.logit, -1.0))));
    d_chr.push_back(character_bce(real.characters, labels));
  }
  auto average = [](const std::vector<Tensor>& xs) { return mean(concat_cols(std::span<const Tensor>(xs))); };

  const Tensor story_emb = mean_rows(in.sentence_embs);
  const Tensor real_story = judge_story(real_feat, story_emb, p);
  const Tensor fake_story = judge_story(fake_feat, story_emb, p);

  GanLosses out;
  out.chr = average(g_chr);
  out.img = add(average(g_adv), out.chr);
  out.story = neg_log_sigmoid(fake_story);
  out.d_img = add(average(d_adv), average(d_chr));
  out.d_story = add(neg_log_sigmoid(real_story), neg_log_sigmoid(scale(fake_story, -1.0)));
  return out;
}

}  // namespace storyvis
