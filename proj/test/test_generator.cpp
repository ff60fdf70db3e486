#include "doctest.h"

#include "fixtures.hpp"
#include "oracles.hpp"
#include "properties.hpp"
#include "storyvis/grad_check.hpp"
#include "storyvis/model.hpp"

using namespace storyvis;

namespace {

struct Setup {
  Config cfg = fixture::tiny_config();
  Vocabularies vocab = fixture::tiny_vocab();
  ParamStore params;
  Rng rng{61};
  Setup() { params = fixture::tiny_model(cfg, vocab, 62); }
};

}  // namespace

TEST_CASE("conditioning augmentation") {
  Setup s;
  const Matrix embs = fixture::random_matrix(s.cfg.model.story_length, s.cfg.model.d_word, s.rng);
  Tape tape;
  Bound p(tape, s.params);
  const Conditioning zero = cond_augment(tape.constant(embs), Matrix::Zero(1, s.cfg.model.d_model), p, s.cfg.model);
  CHECK(zero.h0.value() == zero.mu.value());
  const Matrix noise = fixture::random_matrix(1, s.cfg.model.d_model, s.rng);
  const Conditioning c = cond_augment(tape.constant(embs), noise, p, s.cfg.model);
  const Matrix want = c.mu.value().array() + (0.5 * c.logvar.value().array()).exp() * noise.array();
  CHECK(c.h0.value().isApprox(want, 1e-14));
  CHECK_THROWS_AS(cond_augment(tape.constant(embs.topRows(1)), noise, p, s.cfg.model), TensorError);

  const Matrix proj = fixture::random_matrix(1, s.cfg.model.d_model, s.rng);
  auto f = [&](Tape& t, const Bound& b) {
    return sum(mul(cond_augment(t.constant(embs), noise, b, s.cfg.model).h0, t.constant(proj)));
  };
  const GradCheckReport rep =
      grad_check(f, s.params, 1e-5, [](const std::string& n) { return n.rfind("gen.cond.", 0) == 0; });
  CHECK(rep.entries_checked == static_cast<Index>(s.params.at("gen.cond.mu.w").size() * 2 + 2 * s.cfg.model.d_model));
  CHECK(rep.max_relative_error < 1e-4);
}

TEST_CASE("fused tokens put entities first") {
  Setup s;
  Tape tape;
  Bound p(tape, s.params);
  const Tensor cap = tape.constant(fixture::random_matrix(5, s.cfg.model.d_model, s.rng));
  const Tensor ent = tape.constant(fixture::random_matrix(4, s.cfg.model.d_model, s.rng));
  CHECK(fuse_tokens(cap, tape.constant(Matrix(0, s.cfg.model.d_model)), p).rows() == 5);
  const Tensor both = fuse_tokens(cap, ent, p);
  CHECK(both.rows() == 9);
  CHECK(both.cols() == s.cfg.model.d_align);
  CHECK(both.value().topRows(4) == dense(p, "gen.fuse.entity", ent).value());
}

TEST_CASE("identity projections pass tokens through") {
  Setup s;
  s.cfg.model.d_align = s.cfg.model.d_model;
  ParamStore params = fixture::tiny_model(s.cfg, s.vocab, 63);
  for (const char* n : {"gen.fuse.entity", "gen.fuse.caption"}) {
    params.at(std::string(n) + ".w") = Matrix::Identity(s.cfg.model.d_model, s.cfg.model.d_model);
    params.at(std::string(n) + ".b").setZero();
  }
  Tape tape;
  Bound p(tape, params);
  const Matrix cap = fixture::random_matrix(3, s.cfg.model.d_model, s.rng);
  const Matrix ent = fixture::random_matrix(2, s.cfg.model.d_model, s.rng);
  Matrix want(5, s.cfg.model.d_model);
  want << ent, cap;
  CHECK(fuse_tokens(tape.constant(cap), tape.constant(ent), p).value() == want);
}

TEST_CASE("alignment special cases") {
  Rng rng(64);
  Tape tape;
  const Matrix h = fixture::random_matrix(6, 4, rng);
  const Matrix one = fixture::random_matrix(1, 4, rng);
  const Alignment a = align(tape.constant(h), tape.constant(one));
  CHECK(a.beta.value() == Matrix::Ones(6, 1));
  for (Index r = 0; r < 6; ++r) CHECK(a.context.value().row(r).isApprox(one.row(0), 1e-15));

  Matrix regions = Matrix::Zero(2, 4);
  regions(0, 0) = 1.0;
  regions(1, 1) = 1.0;
  Matrix tokens = Matrix::Zero(3, 4);
  tokens.col(2).setConstant(1.0);
  const Matrix uniform = align(tape.constant(regions), tape.constant(tokens)).beta.value();
  CHECK(uniform.isApprox(Matrix::Constant(2, 3, 1.0 / 3.0), 1e-15));
  CHECK_THROWS_AS(align(tape.constant(h), tape.constant(Matrix::Zero(2, 3))), TensorError);
}

TEST_CASE("alignment against the loop oracle on a 64 by 9 case") {
  Rng rng(65);
  Tape tape;
  const Matrix h = fixture::random_matrix(64, 12, rng);
  const Matrix m = fixture::random_matrix(9, 12, rng);
  const Alignment a = align(tape.constant(h), tape.constant(m));
  const oracle::AlignLoop want = oracle::align_loop(h, m);
  CHECK((a.beta.value() - want.beta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.context.value() - want.context).cwiseAbs().maxCoeff() < 1e-12);
  for (Index r = 0; r < 64; ++r) CHECK(std::abs(a.beta.value().row(r).sum() - 1.0) < 1e-9);
}

TEST_CASE("uniformly scaling tokens keeps each region's favourite token") {
  Rng rng(66);
  Tape tape;
  const Matrix h = fixture::random_matrix(16, 5, rng);
  const Matrix m = fixture::random_matrix(7, 5, rng);
  const Matrix b1 = align(tape.constant(h), tape.constant(m)).beta.value();
  const Matrix b2 = align(tape.constant(h), tape.constant((3.5 * m).eval())).beta.value();
  for (Index r = 0; r < 16; ++r) {
    Index i1, i2;
    b1.row(r).maxCoeff(&i1);
    b2.row(r).maxCoeff(&i2);
    CHECK(i1 == i2);
  }
}

TEST_CASE("generated frame shapes and range") {
  Config cfg;
  cfg.model.dropout = 0.0;
  const Vocabularies vocab = fixture::tiny_vocab();
  ParamStore params;
  Rng rng(67);
  init_model_params(params, cfg.model, vocab, rng);
  Tape tape;
  Bound p(tape, params);
  const Tensor h0 = tape.constant(fixture::random_matrix(1, cfg.model.d_model, rng));
  const Tensor cap = tape.constant(fixture::random_matrix(5, cfg.model.d_model, rng));
  const Tensor ent = tape.constant(fixture::random_matrix(3, cfg.model.d_model, rng));
  const GeneratedFrame f = generate_frame(h0, cap, ent, p, cfg.model);
  CHECK(f.image.rows() == 64 * 64);
  CHECK(f.image.cols() == 3);
  CHECK(f.image.value().cwiseAbs().maxCoeff() <= 1.0);
  CHECK(f.grid.rows() == 64);
  CHECK(f.grid.cols() == cfg.model.d_align);
  CHECK(f.alignment.beta.cols() == 8);
  const GeneratedFrame again = generate_frame(h0, cap, ent, p, cfg.model);
  CHECK(again.image.value() == f.image.value());

  const DenseCapOutput dc = densecap_heads(f.grid, p, cfg.model);
  CHECK(dc.boxes.rows() == 10);
  CHECK(dc.caption_logits.rows() == 10 * cfg.model.caption_max_len);
  CHECK(dc.caption_logits.cols() == static_cast<Index>(vocab.caption_words.size()));
}

TEST_CASE("zero weights before the output head give a blank frame") {
  Setup s;
  for (auto& [name, value] : s.params) {
    if (name.rfind("gen.stage", 0) == 0) value.setZero();
  }
  Tape tape;
  Bound p(tape, s.params);
  const GeneratedFrame f =
      generate_frame(tape.constant(fixture::random_matrix(1, s.cfg.model.d_model, s.rng)),
                     tape.constant(fixture::random_matrix(3, s.cfg.model.d_model, s.rng)),
                     tape.constant(fixture::random_matrix(2, s.cfg.model.d_model, s.rng)), p, s.cfg.model);
  CHECK(f.image.value().isZero());
}

TEST_CASE("dense-caption boxes are ordered and inside the unit square") {
  Setup s;
  for (int trial = 0; trial < 20; ++trial) {
    const ParamStore params = fixture::tiny_model(s.cfg, s.vocab, 100 + static_cast<std::uint64_t>(trial));
    Tape tape;
    Bound p(tape, params);
    const Tensor grid = tape.constant(fixture::random_matrix(4, s.cfg.model.d_align, s.rng, 3.0));
    const Matrix b = densecap_heads(grid, p, s.cfg.model).boxes.value();
    CHECK(b.minCoeff() >= 0.0);
    CHECK(b.maxCoeff() <= 1.0);
    for (Index r = 0; r < b.rows(); ++r) {
      CHECK(b(r, 0) <= b(r, 2));
      CHECK(b(r, 1) <= b(r, 3));
    }
  }
}

TEST_CASE("image loss gradients reach every generator weight") {
  const check::PropertyResult r = check::grad_generate_frame({});
  INFO(r.detail);
  CHECK(r.pass);
}
