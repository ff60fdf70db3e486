#ifndef STORYVIS_LAYERS_HPP_
#define STORYVIS_LAYERS_HPP_

#include <string>
#include <vector>

#include "storyvis/params.hpp"
#include "storyvis/tensor.hpp"

namespace storyvis {

// Attention probabilities captured during a forward pass, one matrix per
// (call, head) in call order.
struct AttentionProbe {
  std::vector<Matrix> weights;
};

struct ForwardContext {
  Rng* dropout_rng = nullptr;  // null = no dropout
  double dropout = 0.0;
  AttentionProbe* probe = nullptr;
};

// Registers <prefix>.w (in x out, Glorot) and <prefix>.b (1 x out, zero).
void add_dense(ParamStore& store, const std::string& prefix, Index in, Index out, Rng& rng);
Tensor dense(const Bound& p, const std::string& prefix, const Tensor& x);

// Registers <prefix>.g (ones) and <prefix>.b (zeros).
void add_layer_norm(ParamStore& store, const std::string& prefix, Index dim);
Tensor layer_norm(const Bound& p, const std::string& prefix, const Tensor& x, double eps);

// Registers <prefix>.{q,k,v,o} dense layers, all dim x dim.
void add_attention(ParamStore& store, const std::string& prefix, Index dim, Rng& rng);

// Scaled dot-product attention with `heads` heads. Row r of `queries`
// attends over the rows of `keys` allowed by allowed.row(r).
Tensor multi_head_attention(const Bound& p, const std::string& prefix, const Tensor& queries, const Tensor& keys,
                            const BoolMatrix& allowed, int heads, AttentionProbe* probe = nullptr);

// Registers attention, ln1, ffn1, ffn2 and ln2 under `prefix`.
void add_transformer_block(ParamStore& store, const std::string& prefix, Index dim, Index ffn_dim, Rng& rng);

// Post-norm block: x1 = LN(x + Attn(x, kv)); out = LN(x1 + FFN(x1)).
Tensor transformer_block(const Bound& p, const std::string& prefix, const Tensor& x, const Tensor& kv,
                         const BoolMatrix& allowed, int heads, double eps, const ForwardContext& ctx);

}  // namespace storyvis

#endif  // STORYVIS_LAYERS_HPP_
