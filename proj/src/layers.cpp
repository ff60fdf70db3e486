#include "storyvis/layers.hpp"

#include <cmath>

namespace storyvis {

void add_dense(ParamStore& store, const std::string& prefix, Index in, Index out, Rng& rng) {
  store.add(prefix + ".w", glorot_uniform(in, out, rng));
  store.add(prefix + ".b", Matrix::Zero(1, out));
}

Tensor dense(const Bound& p, const std::string& prefix, const Tensor& x) {
  return add(matmul(x, p(prefix + ".w")), p(prefix + ".b"));
}

void add_layer_norm(ParamStore& store, const std::string& prefix, Index dim) {
  store.add(prefix + ".g", Matrix::Ones(1, dim));
  store.add(prefix + ".b", Matrix::Zero(1, dim));
}

Tensor layer_norm(const Bound& p, const std::string& prefix, const Tensor& x, double eps) {
  return layer_norm(x, p(prefix + ".g"), p(prefix + ".b"), eps);
}

void add_attention(ParamStore& store, const std::string& prefix, Index dim, Rng& rng) {
  for (const char* part : {".q", ".k", ".v", ".o"}) add_dense(store, prefix + part, dim, dim, rng);
}

Tensor multi_head_attention(const Bound& p, const std::string& prefix, const Tensor& queries, const Tensor& keys,
                            const BoolMatrix& allowed, int heads, AttentionProbe* probe) {
  const Tensor q = dense(p, prefix + ".q", queries);
  const Tensor k = dense(p, prefix + ".k", keys);
  const Tensor v = dense(p, prefix + ".v", keys);
  const Index dim = q.cols();
  if (heads <= 0 || dim % heads != 0) {
    throw TensorError("multi_head_attention: width " + std::to_string(dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const Index dh = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> ctx;
  ctx.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(q, h * dh, dh);
    const Tensor kh = slice_cols(k, h * dh, dh);
    const Tensor vh = slice_cols(v, h * dh, dh);
    const Tensor probs = masked_softmax(scale(matmul(qh, transpose(kh)), inv_sqrt), allowed);
    if (probe != nullptr) probe->weights.push_back(probs.value());
    ctx.push_back(matmul(probs, vh));
  }
  return dense(p, prefix + ".o", concat_cols(ctx));
}

void add_transformer_block(ParamStore& store, const std::string& prefix, Index dim, Index ffn_dim, Rng& rng) {
  add_attention(store, prefix + ".attn", dim, rng);
  add_layer_norm(store, prefix + ".ln1", dim);
  add_dense(store, prefix + ".ffn1", dim, ffn_dim, rng);
  add_dense(store, prefix + ".ffn2", ffn_dim, dim, rng);
  add_layer_norm(store, prefix + ".ln2", dim);
}

Tensor transformer_block(const Bound& p, const std::string& prefix, const Tensor& x, const Tensor& kv,
                         const BoolMatrix& allowed, int heads, double eps, const ForwardContext& ctx) {
  const Tensor attn = multi_head_attention(p, prefix + ".attn", x, kv, allowed, heads, ctx.probe);
  const Tensor x1 = layer_norm(p, prefix + ".ln1", add(x, dropout(attn, ctx.dropout, ctx.dropout_rng)), eps);
  const Tensor ff = dense(p, prefix + ".ffn2", relu(dense(p, prefix + ".ffn1", x1)));
  return layer_norm(p, prefix + ".ln2", add(x1, dropout(ff, ctx.dropout, ctx.dropout_rng)), eps);
}

}  // namespace storyvis
