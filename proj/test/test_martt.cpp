#include "doctest.h"

#include "fixtures.hpp"
#include "oracles.hpp"
#include "properties.hpp"
#include "storyvis/martt.hpp"
#include "storyvis/model.hpp"

using namespace storyvis;

namespace {

ParamStore martt_params(const ModelConfig& cfg, std::uint64_t seed) {
  ParamStore p;
  Rng rng(seed);
  init_martt_params(p, cfg, fixture::tiny_vocab().labels.size(), rng);
  return p;
}

}  // namespace

TEST_CASE("initial memory is h0 plus a slot bias") {
  Config cfg = fixture::tiny_config();
  cfg.model.memory_slots = 3;
  ParamStore params = martt_params(cfg.model, 41);
  Rng rng(42);
  Tape tape;
  Bound p(tape, params);
  const Matrix h0 = fixture::random_matrix(1, cfg.model.d_model, rng);
  const MemoryState m = init_memory(tape.constant(h0), p, cfg.model);
  REQUIRE(m.layers.size() == static_cast<std::size_t>(cfg.model.layers));
  for (const Tensor& l : m.layers) {
    CHECK(l.rows() == 3);
    CHECK(l.value().row(0) != l.value().row(1));
    CHECK(l.value().row(1) != l.value().row(2));
  }
  const Matrix bias = params.at("martt.layer0.mem.slot_bias");
  CHECK((m.layers[0].value().row(2) - (h0.row(0) + bias.row(2))).cwiseAbs().maxCoeff() == 0.0);

  for (auto& [name, value] : params) {
    if (name.find("slot_bias") != std::string::npos) value.setZero();
  }
  Tape t2;
  Bound p2(t2, params);
  for (const Tensor& l : init_memory(t2.constant(Matrix::Zero(1, cfg.model.d_model)), p2, cfg.model).layers) {
    CHECK(l.value().isZero());
  }
}

TEST_CASE("memory gate at its extremes") {
  Config cfg = fixture::tiny_config();
  ParamStore params = fixture::tiny_model(cfg, fixture::tiny_vocab(), 43);
  Rng rng(44);
  const Matrix m = fixture::random_matrix(cfg.model.memory_slots, cfg.model.d_model, rng);
  const Matrix h = fixture::random_matrix(4, cfg.model.d_model, rng);
  const std::string pre = "martt.layer0.mem";
  params.at(pre + ".w_mz").setZero();
  params.at(pre + ".w_sz").setZero();

  params.at(pre + ".b_z").setConstant(1000.0);
  {
    Tape tape;
    Bound p(tape, params);
    CHECK(memory_update(tape.constant(m), tape.constant(h), p, pre, cfg.model).value() == m);
  }
  params.at(pre + ".b_z").setConstant(-1000.0);
  {
    Tape tape;
    Bound p(tape, params);
    const Matrix out = memory_update(tape.constant(m), tape.constant(h), p, pre, cfg.model).value();
    // Z = 0 leaves the candidate, which is a tanh output
    CHECK(out.cwiseAbs().maxCoeff() < 1.0);
    params.at(pre + ".b_z").setConstant(0.0);
    Tape t2;
    Bound p2(t2, params);
    const Matrix half = memory_update(t2.constant(m), t2.constant(h), p2, pre, cfg.model).value();
    CHECK(half.isApprox(0.5 * (out + m), 1e-12));
  }
}

TEST_CASE("memory update against the loop oracle") {
  const check::PropertyResult r = check::memory_update_oracle({});
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("a one-token caption only attends to itself") {
  Config cfg = fixture::tiny_config();
  cfg.model.memory_slots = 0;
  cfg.model.layers = 1;
  const ParamStore params = martt_params(cfg.model, 45);
  Rng rng(46);
  const Matrix x = fixture::random_matrix(1, cfg.model.d_word + cfg.model.d_node, rng);
  Tape tape;
  Bound p(tape, params);
  AttentionProbe probe;
  ForwardContext ctx;
  ctx.probe = &probe;
  const MemoryState mem = init_memory(tape.constant(Matrix::Zero(1, cfg.model.d_model)), p, cfg.model);
  const StepResult r = encode_step(tape.constant(x), full_mask_stack(1, 1, 0), mem, p, cfg.model, ctx);
  CHECK(r.encoded.rows() == 1);
  for (const Matrix& w : probe.weights) CHECK(w(0, 0) == 1.0);
  CHECK(r.encoded.value().isApprox(oracle::plain_encoder(params, x, cfg.model), 1e-12));
}

TEST_CASE("worked example: Pororo ignores says in the first layer") {
  Config cfg;
  cfg.model.dropout = 0.0;
  const ParamStore params = martt_params(cfg.model, 47);
  Rng rng(48);
  const ConstituencyTree tree = parse_bracketed(fixture::kExampleTree);
  const MaskStack masks = mask_stack(tree, cfg.model.layers, cfg.model.memory_slots);
  Tape tape;
  Bound p(tape, params);
  AttentionProbe probe;
  ForwardContext ctx;
  ctx.probe = &probe;
  const MemoryState mem = init_memory(tape.constant(fixture::random_matrix(1, cfg.model.d_model, rng)), p, cfg.model);
  encode_step(tape.constant(fixture::random_matrix(5, cfg.model.d_word + cfg.model.d_node, rng)), masks, mem, p,
              cfg.model, ctx);
  const Index says = cfg.model.memory_slots + 1;
  for (int h = 0; h < cfg.model.heads; ++h) {
    CHECK(probe.weights[static_cast<std::size_t>(h)](0, says) == 0.0);
    CHECK(probe.weights[static_cast<std::size_t>(h)](0, cfg.model.memory_slots) > 0.0);
  }
}

TEST_CASE("mask and caption shapes must agree") {
  Config cfg = fixture::tiny_config();
  const ParamStore params = martt_params(cfg.model, 49);
  Rng rng(50);
  Tape tape;
  Bound p(tape, params);
  const MemoryState mem = init_memory(tape.constant(Matrix::Zero(1, cfg.model.d_model)), p, cfg.model);
  const Tensor leaves = tape.constant(fixture::random_matrix(3, cfg.model.d_word + cfg.model.d_node, rng));
  CHECK_THROWS(encode_step(leaves, full_mask_stack(4, cfg.model.layers, cfg.model.memory_slots), mem, p, cfg.model));
  CHECK_THROWS(encode_step(leaves, full_mask_stack(3, cfg.model.layers + 1, cfg.model.memory_slots), mem, p, cfg.model));
  CHECK_THROWS(encode_step(leaves, full_mask_stack(3, cfg.model.layers, cfg.model.memory_slots + 1), mem, p, cfg.model));
}

TEST_CASE("story encoding folds memory across frames") {
  Config cfg = fixture::tiny_config();
  const Vocabularies vocab = fixture::tiny_vocab();
  const ParamStore params = fixture::tiny_model(cfg, vocab, 51);
  Rng rng(52);
  const CaptionInputs cap = fixture::random_caption(cfg.model, vocab, rng);
  const Matrix h0 = fixture::random_matrix(1, cfg.model.d_model, rng);
  Tape tape;
  Bound p(tape, params);
  const Tensor leaves = leaf_inputs(p, cap);
  const std::vector<Tensor> same{leaves, leaves};
  const std::vector<MaskStack> masks{cap.masks, cap.masks};
  const std::vector<Tensor> out = encode_story(same, masks, tape.constant(h0), p, cfg.model);
  REQUIRE(out.size() == 2);
  CHECK(out[0].value() != out[1].value());

  const StepResult one = encode_step(leaves, cap.masks, init_memory(tape.constant(h0), p, cfg.model), p, cfg.model);
  const std::vector<Tensor> single = encode_story(std::span(same).first(1), std::span(masks).first(1),
                                                  tape.constant(h0), p, cfg.model);
  CHECK(single[0].value() == one.encoded.value());
}

TEST_CASE("leaf inputs use the learned unknown-word row") {
  Config cfg = fixture::tiny_config();
  const Vocabularies vocab = fixture::tiny_vocab();
  const ParamStore params = fixture::tiny_model(cfg, vocab, 53);
  Rng rng(54);
  const CaptionInputs cap = fixture::random_caption(cfg.model, vocab, rng);
  Tape tape;
  Bound p(tape, params);
  const Matrix x = leaf_inputs(p, cap).value();
  CHECK(x.cols() == cfg.model.d_word + cfg.model.d_node);
  for (Index i = 0; i < x.rows(); ++i) {
    const Eigen::RowVectorXd word = x.row(i).head(cfg.model.d_word);
    if (cap.oov(i, 0) == 1.0) {
      CHECK(word == params.at("martt.word_unk").row(0));
    } else {
      CHECK(word == cap.words.row(i));
    }
    CHECK(x.row(i).tail(cfg.model.d_node).isApprox(cap.label_weights.row(i) * params.at("martt.labels"), 1e-14));
  }
}

TEST_CASE("gradient reaches every MARTT tensor from the story loss") {
  Config cfg = fixture::tiny_config();
  const Vocabularies vocab = fixture::tiny_vocab();
  const ParamStore params = fixture::tiny_model(cfg, vocab, 55);
  Rng rng(56);
  const PreparedStory story = fixture::random_story(cfg, vocab, rng);
  Tape tape;
  Bound p(tape, params);
  const StoryForward fwd = forward_story(story, p, cfg.model, fixture::random_matrix(1, cfg.model.d_model, rng));
  const auto grads = p.named(tape.backward(total_objective(generator_losses(story, fwd, p, cfg))));
  for (const auto& [name, value] : params) {
    if (name.rfind("martt.", 0) != 0) continue;
    INFO(name);
    REQUIRE(grads.count(name) == 1);
    CHECK(grads.at(name).rows() == value.rows());
    if (name.find(".attn.k.b") == std::string::npos) CHECK(grads.at(name).cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("encode step gradients") {
  const check::PropertyResult r = check::grad_encode_step({});
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("memory update gradients") {
  const check::PropertyResult r = check::grad_memory_update({});
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("no memory and full masks reduce to a plain encoder") {
  const check::PropertyResult r = check::martt_reduction({});
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("later frames never change earlier encodings") {
  const check::PropertyResult r = check::martt_causality({});
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("masked positions get no attention") {
  const check::PropertyResult r = check::attention_masking({});
  INFO(r.detail);
  CHECK(r.pass);
}
