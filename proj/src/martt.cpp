#include "storyvis/martt.hpp"

#include <string>

namespace storyvis {
namespace {

std::string layer_prefix(int l) { return "martt.layer" + std::to_string(l); }

}  // namespace

void init_martt_params(ParamStore& store, const ModelConfig& cfg, Index num_labels, Rng& rng) {
  const Index d = cfg.d_model;
  store.add("martt.labels", random_normal(num_labels, cfg.d_node, 0.1, rng));
  store.add("martt.word_unk", random_normal(1, cfg.d_word, 0.1, rng));
  add_dense(store, "martt.input", cfg.d_word + cfg.d_node, d, rng);
  store.add("martt.pos", random_normal(cfg.max_positions, d, 0.02, rng));
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string pre = layer_prefix(l);
    add_transformer_block(store, pre, d, cfg.ffn_dim, rng);
    add_attention(store, pre + ".mem.attn", d, rng);
    store.add(pre + ".mem.w_mc", glorot_uniform(d, d, rng));
    store.add(pre + ".mem.w_sc", glorot_uniform(d, d, rng));
    store.add(pre + ".mem.b_c", Matrix::Zero(1, d));
    store.add(pre + ".mem.w_mz", glorot_uniform(d, d, rng));
    store.add(pre + ".mem.w_sz", glorot_uniform(d, d, rng));
    store.add(pre + ".mem.b_z", Matrix::Zero(1, d));
    store.add(pre + ".mem.slot_bias", random_normal(cfg.memory_slots, d, 0.1, rng));
  }
}

Tensor leaf_inputs(const Bound& p, const CaptionInputs& caption) {
  Tape& tape = p.tape();
  const Tensor words = add(tape.constant(caption.words), matmul(tape.constant(caption.oov), p("martt.word_unk")));
  const Tensor nodes = matmul(tape.constant(caption.label_weights), p("martt.labels"));
  return concat_cols({words, nodes});
}

MemoryState init_memory(const Tensor& h0, const Bound& p, const ModelConfig& cfg) {
  if (h0.rows() != 1 || h0.cols() != cfg.d_model) {
    throw TensorError("init_memory: h0 must be [1," + std::to_string(cfg.d_model) + "], got " + shape_string(h0.value()));
  }
  MemoryState m;
  for (int l = 0; l < cfg.layers; ++l) m.layers.push_back(add(p(layer_prefix(l) + ".mem.slot_bias"), h0));
  return m;
}

Tensor memory_update(const Tensor& memory, const Tensor& hidden, const Bound& p, const std::string& prefix,
                     const ModelConfig& cfg, AttentionProbe* probe) {
  const Tensor kv = concat_rows({memory, hidden});
  const BoolMatrix all = BoolMatrix::Constant(memory.rows(), kv.rows(), true);
  const Tensor s = multi_head_attention(p, prefix + ".attn", memory, kv, all, cfg.heads, probe);
  const Tensor c = tanh(add(add(matmul(memory, p(prefix + ".w_mc")), matmul(s, p(prefix + ".w_sc"))), p(prefix + ".b_c")));
  const Tensor z = sigmoid(add(add(matmul(memory, p(prefix + ".w_mz")), matmul(s, p(prefix + ".w_sz"))), p(prefix + ".b_z")));
  const Tensor one_minus_z = add_scalar(scale(z, -1.0), 1.0);
  return add(mul(one_minus_z, c), mul(z, memory));
}

StepResult encode_step(const Tensor& leaves, const MaskStack& masks, const MemoryState& memory, const Bound& p,
                       const ModelConfig& cfg, const ForwardContext& ctx) {
  const Index tc = leaves.rows();
  if (masks.caption_length != tc) {
    throw TensorError("encode_step: mask stack covers " + std::to_string(masks.caption_length) + " tokens, caption has " +
                      std::to_string(tc));
  }
  if (masks.num_layers() != cfg.layers || static_cast<Index>(memory.layers.size()) != cfg.layers) {
    throw TensorError("encode_step: expected " + std::to_string(cfg.layers) + " layers of masks and memory");
  }
  if (tc > cfg.max_positions) {
    throw TensorError("encode_step: caption of " + std::to_string(tc) + " tokens exceeds max_positions");
  }
  for (const Tensor& m : memory.layers) {
    if (m.rows() != masks.memory_slots) {
      throw TensorError("encode_step: mask stack has " + std::to_string(masks.memory_slots) +
                        " memory columns, memory has " + std::to_string(m.rows()) + " slots");
    }
  }

  Tensor h = add(dense(p, "martt.input", leaves), slice_rows(p("martt.pos"), 0, tc));
  h = dropout(h, ctx.dropout, ctx.dropout_rng);
  StepResult out;
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string pre = layer_prefix(l);
    const Tensor& mem = memory.layers[static_cast<std::size_t>(l)];
    const Tensor kv = concat_rows({mem, h});
    const Tensor next = transformer_block(p, pre, h, kv, masks.layers[static_cast<std::size_t>(l)], cfg.heads,
                                          cfg.layer_norm_eps, ctx);
    out.memory.layers.push_back(memory_update(mem, h, p, pre + ".mem", cfg));
    h = next;
  }
  out.encoded = h;
  return out;
}

std::vector<Tensor> encode_story(std::span<const Tensor> leaves, std::span<const MaskStack> masks, const Tensor& h0,
                                 const Bound& p, const ModelConfig& cfg, const ForwardContext& ctx) {
  if (leaves.size() != masks.size()) throw TensorError("encode_story: frame and mask counts differ");
  if (leaves.empty()) throw TensorError("encode_story: story has no frames");
  MemoryState memory = init_memory(h0, p, cfg);
  std::vector<Tensor> encoded;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    StepResult step = encode_step(leaves[k], masks[k], memory, p, cfg, ctx);
    encoded.push_back(step.encoded);
    memory = std::move(step.memory);
  }
  return encoded;
}

}  // namespace storyvis
