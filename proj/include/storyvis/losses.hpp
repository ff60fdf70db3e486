#ifndef STORYVIS_LOSSES_HPP_
#define STORYVIS_LOSSES_HPP_

#include <span>
#include <vector>

#include "storyvis/config.hpp"
#include "storyvis/layers.hpp"
#include "storyvis/params.hpp"

namespace storyvis {

// Scalar loss terms of the generator objective. Instantiated with Tensor
// while training and with double for logging.
template <class T>
struct LossTerms {
  T kl{};
  T img{};  // adversarial image term, character term folded in
  T story{};
  T bbox{};
  T caption{};
  T word{};
  double lambda_bbox = 1.0;
  double lambda_caption = 1.0;
};

using LossBundle = LossTerms<double>;

// kl + img + story + lambda_bbox * bbox + lambda_caption * caption + word
template <class T>
T total_objective(const LossTerms<T>& b) {
  return b.kl + b.img + b.story + b.bbox * b.lambda_bbox + b.caption * b.lambda_caption + b.word;
}

LossBundle values(const LossTerms<Tensor>& terms);
bool all_finite(const LossBundle& b);

// Proxy dense-caption annotation for one frame. Slots are in confidence-rank
// order; only the first `count` are annotated.
struct DenseCapTarget {
  Matrix boxes;             // count x 4, (x1, y1, x2, y2) in [0, 1]
  std::vector<int> tokens;  // K * max_len ids, slot-major, -1 = padding
  Index count = 0;
};

// (x1, y1, x2, y2) -> (1 - x2, y1, 1 - x1, y2), row-wise.
Matrix mirror_boxes(const Matrix& boxes);

Tensor kl_loss(const Tensor& mu, const Tensor& logvar);

// regions[m]: g^2 x d_a features of frame m; tokens[k]: fused token matrix
// of caption k. Negatives for caption k are the other frames of the story.
Tensor contrastive_word_loss(std::span<const Tensor> regions, std::span<const Tensor> tokens, Index k);
// S_word(x_m, s_k) = log sum_j exp(cos(h_jm, a_j)), a = align(h_m, tokens_k).context
Tensor word_score(const Tensor& regions, const Tensor& tokens);

// min(sum_slots L1(pred, target), sum_slots L1(pred, mirror(target))) / count
// over the first target.rows() predicted slots.
Tensor bbox_loss_mirror(const Tensor& pred_boxes, const Matrix& target_boxes);

// Mean token cross-entropy per slot over its non-pad positions, averaged
// over slots that have at least one token.
Tensor caption_ce(const Tensor& caption_logits, std::span<const int> targets, Index max_len);

// --- discriminators (parameters under "disc.") -----------------------------

void init_discriminator_params(ParamStore& store, const ModelConfig& cfg, Rng& rng);

// disc_pool x disc_pool mean-pool of an (S*S) x 3 image, flattened, then a
// dense relu layer -> 1 x disc_features.
Tensor frame_features(const Tensor& image, const Bound& p, const ModelConfig& cfg);

struct ImageJudgement {
  Tensor logit;       // 1 x 1 real/fake
  Tensor characters;  // 1 x num_characters
};

ImageJudgement judge_image(const Tensor& features, const Tensor& sentence_emb, const Tensor& h0, const Bound& p);
Tensor judge_story(std::span<const Tensor> features, const Tensor& story_emb, const Bound& p);

inline constexpr double kLogitClamp = 30.0;

// -log sigmoid(z) with z clamped to +-kLogitClamp.
Tensor neg_log_sigmoid(const Tensor& logits);
// Multi-label binary cross-entropy, mean over entries.
Tensor character_bce(const Tensor& logits, const Matrix& labels);

struct GanInputs {
  std::vector<Tensor> real_images;
  std::vector<Tensor> fake_images;
  Tensor sentence_embs;      // T x d_word
  Tensor h0;                 // 1 x d
  Matrix character_labels;   // T x num_characters, multi-hot
};

struct GanLosses {
  // generator side
  Tensor img;   // mean_k -log D_img(fake_k) + char
  Tensor story; // -log D_story(fake story)
  Tensor chr;   // character BCE on fake frames
  // discriminator side
  Tensor d_img;    // mean_k [-log D(real_k) - log(1 - D(fake_k))] + character BCE on real frames
  Tensor d_story;  // -log D(real story) - log(1 - D(fake story))
  Tensor d_total() const { return add(d_img, d_story); }
};

GanLosses gan_losses(const GanInputs& in, const Bound& p, const ModelConfig& cfg);

}  // namespace storyvis

#endif  // STORYVIS_LOSSES_HPP_
