#include "doctest.h"

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "properties.hpp"
#include "storyvis/losses.hpp"
#include "storyvis/model.hpp"

using namespace storyvis;

TEST_CASE("KL closed forms and non-negativity") {
  Tape tape;
  auto c = [&](const Matrix& m) { return tape.constant(m); };
  CHECK(kl_loss(c(Matrix::Zero(1, 3)), c(Matrix::Zero(1, 3))).item() == 0.0);
  CHECK(kl_loss(c(Matrix::Ones(1, 1)), c(Matrix::Zero(1, 1))).item() == 0.5);
  Rng rng(71);
  for (int i = 0; i < 200; ++i) {
    const Matrix mu = fixture::random_matrix(1, 6, rng, 2.0);
    const Matrix lv = fixture::random_matrix(1, 6, rng, 2.0);
    const double v = kl_loss(c(mu), c(lv)).item();
    CHECK(v > 0.0);
    CHECK(v == doctest::Approx(oracle::kl_loop(mu, lv)).epsilon(1e-12));
  }
}

TEST_CASE("contrastive word loss bounds") {
  Rng rng(72);
  Tape tape;
  std::vector<Tensor> regions, tokens;
  for (int k = 0; k < 4; ++k) {
    regions.push_back(tape.constant(fixture::random_matrix(9, 5, rng)));
    tokens.push_back(tape.constant(fixture::random_matrix(3, 5, rng)));
  }
  for (Index k = 0; k < 4; ++k) CHECK(contrastive_word_loss(regions, tokens, k).item() >= 0.0);
  CHECK(contrastive_word_loss(std::span(regions).first(1), std::span(tokens).first(1), 0).item() == 0.0);
  CHECK_THROWS(contrastive_word_loss(std::vector<Tensor>{}, std::vector<Tensor>{}, 0));

  const Matrix h = fixture::random_matrix(9, 5, rng);
  const Matrix m = fixture::random_matrix(3, 5, rng);
  CHECK(word_score(tape.constant(h), tape.constant(m)).item() ==
        doctest::Approx(oracle::word_score_loop(h, m)).epsilon(1e-12));
}

TEST_CASE("bbox loss is zero at the target and at its mirror") {
  Tape tape;
  Matrix target(2, 4);
  target << 0.1, 0.2, 0.4, 0.6, 0.5, 0.1, 0.9, 0.3;
  CHECK(bbox_loss_mirror(tape.constant(target), target).item() == 0.0);
  CHECK(bbox_loss_mirror(tape.constant(mirror_boxes(target)), target).item() == 0.0);
  Matrix m(1, 4);
  m << 0.1, 0.2, 0.4, 0.6;
  Matrix want(1, 4);
  want << 0.6, 0.2, 0.9, 0.6;
  CHECK(mirror_boxes(m).isApprox(want, 1e-15));
}

TEST_CASE("bbox loss is symmetric under mirroring the prediction") {
  Rng rng(73);
  for (int i = 0; i < 100; ++i) {
    Tape tape;
    const Matrix pred = fixture::random_matrix(5, 4, rng);
    const Index n = 1 + static_cast<Index>(uniform_int(rng, 5));
    const Matrix target = fixture::random_matrix(n, 4, rng);
    const double a = bbox_loss_mirror(tape.constant(pred), target).item();
    const double b = bbox_loss_mirror(tape.constant(mirror_boxes(pred)), target).item();
    CHECK(a == doctest::Approx(b).epsilon(1e-14));
    CHECK(a == doctest::Approx(oracle::bbox_mirror_loop(pred.topRows(n), target)).epsilon(1e-12));
  }
}

TEST_CASE("caption cross-entropy") {
  Tape tape;
  const Index len = 2, vocab = 4;
  std::vector<int> ids = {1, 3, 2, -1, -1, -1};
  Matrix sure = Matrix::Constant(3 * len, vocab, -50.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= 0) sure(static_cast<Index>(i), ids[i]) = 50.0;
  }
  CHECK(caption_ce(tape.constant(sure), ids, len).item() < 1e-30);
  CHECK(caption_ce(tape.constant(Matrix::Zero(3 * len, vocab)), ids, len).item() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-14));
  std::vector<int> bad = {4, -1, -1, -1, -1, -1};
  CHECK_THROWS(caption_ce(tape.constant(sure), bad, len));

  Rng rng(74);
  const Matrix logits = fixture::random_matrix(3 * len, vocab, rng, 3.0);
  CHECK(caption_ce(tape.constant(logits), ids, len).item() ==
        doctest::Approx(oracle::caption_ce_loop(logits, ids, len)).epsilon(1e-12));
}

TEST_CASE("total objective arithmetic") {
  CHECK(total_objective(LossBundle{}) == 0.0);
  CHECK(total_objective(LossBundle{1, 1, 1, 1, 1, 1}) == 6.0);
  LossBundle b{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 2.0, 3.0};
  CHECK(total_objective(b) == doctest::Approx(0.1 + 0.2 + 0.3 + 2.0 * 0.4 + 3.0 * 0.5 + 0.6).epsilon(1e-15));
  b.word = std::nan("");
  CHECK_FALSE(all_finite(b));
}

TEST_CASE("an undecided discriminator costs ln 2 per term") {
  const Config cfg = fixture::tiny_config();
  ParamStore params = fixture::tiny_model(cfg, fixture::tiny_vocab(), 75);
  for (const char* n : {"disc.img.out", "disc.img.char", "disc.story.out"}) {
    params.at(std::string(n) + ".w").setZero();
    params.at(std::string(n) + ".b").setZero();
  }
  Rng rng(76);
  Tape tape;
  Bound p(tape, params);
  GanInputs in;
  for (int k = 0; k < cfg.model.story_length; ++k) {
    const Index px = cfg.model.image_size * cfg.model.image_size;
    in.real_images.push_back(tape.constant(fixture::random_matrix(px, 3, rng)));
    in.fake_images.push_back(tape.constant(fixture::random_matrix(px, 3, rng)));
  }
  in.sentence_embs = tape.constant(fixture::random_matrix(cfg.model.story_length, cfg.model.d_word, rng));
  in.h0 = tape.constant(fixture::random_matrix(1, cfg.model.d_model, rng));
  in.character_labels = Matrix::Zero(cfg.model.story_length, cfg.model.num_characters);
  in.character_labels(0, 1) = 1.0;
  const GanLosses g = gan_losses(in, p, cfg.model);
  const double ln2 = std::log(2.0);
  CHECK(g.chr.item() == doctest::Approx(ln2).epsilon(1e-14));
  CHECK(g.img.item() == doctest::Approx(2 * ln2).epsilon(1e-14));
  CHECK(g.story.item() == doctest::Approx(ln2).epsilon(1e-14));
  CHECK(g.d_story.item() == doctest::Approx(2 * ln2).epsilon(1e-14));
  CHECK(g.d_img.item() == doctest::Approx(3 * ln2).epsilon(1e-14));
}

TEST_CASE("the logit clamp bounds the generator loss") {
  Tape tape;
  const double huge = neg_log_sigmoid(tape.constant(Matrix::Constant(1, 1, -1e6))).item();
  CHECK(std::isfinite(huge));
  CHECK(huge == doctest::Approx(kLogitClamp + std::log1p(std::exp(-kLogitClamp))).epsilon(1e-12));
  CHECK(neg_log_sigmoid(tape.constant(Matrix::Constant(1, 1, 1e6))).item() < 1e-12);
}

TEST_CASE("closed forms") {
  const check::PropertyResult r = check::loss_closed_forms({});
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("loop oracles") {
  const check::PropertyResult r = check::loss_loop_oracles({});
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("every loss term against finite differences") {
  const check::PropertyResult r = check::grad_loss_terms({});
  INFO(r.detail);
  CHECK(r.pass);
}
