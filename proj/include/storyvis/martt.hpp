#ifndef STORYVIS_MARTT_HPP_
#define STORYVIS_MARTT_HPP_

#include <span>
#include <vector>

#include "storyvis/config.hpp"
#include "storyvis/layers.hpp"
#include "storyvis/mask.hpp"
#include "storyvis/params.hpp"

namespace storyvis {

// Memory-augmented recurrent tree transformer.
//
// Each layer attends from the caption tokens over [memory_l; tokens] under
// that layer's sub-tree mask, and each layer's memory is folded forward with
// a gated update after every frame. Parameters live under "martt.".

// One T_m x d matrix per layer.
struct MemoryState {
  std::vector<Tensor> layers;
};

struct StepResult {
  Tensor encoded;  // T_c x d, top-layer token states
  MemoryState memory;
};

// Inputs for one caption, as stored in a preprocessed pack.
struct CaptionInputs {
  Matrix words;          // T_c x d_word, zero rows for OOV words
  Matrix oov;            // T_c x 1
  Matrix label_weights;  // T_c x n_labels, cumulative-average weights
  MaskStack masks;
};

void init_martt_params(ParamStore& store, const ModelConfig& cfg, Index num_labels, Rng& rng);

// word vector (learned UNK row for OOV) ++ node embedding, per leaf.
Tensor leaf_inputs(const Bound& p, const CaptionInputs& caption);

// Row j of each layer = h0 + slot_bias_l[j].
MemoryState init_memory(const Tensor& h0, const Bound& p, const ModelConfig& cfg);

// S = Attn(M, [M; H]); C = tanh(M Wmc + S Wsc + bc); Z = sigmoid(M Wmz + S Wsz + bz);
// M' = (1 - Z) * C + Z * M.
Tensor memory_update(const Tensor& memory, const Tensor& hidden, const Bound& p, const std::string& prefix,
                     const ModelConfig& cfg, AttentionProbe* probe = nullptr);

StepResult encode_step(const Tensor& leaves, const MaskStack& masks, const MemoryState& memory, const Bound& p,
                       const ModelConfig& cfg, const ForwardContext& ctx = {});

// Sequential fold over frames starting from init_memory(h0).
std::vector<Tensor> encode_story(std::span<const Tensor> leaves, std::span<const MaskStack> masks, const Tensor& h0,
                                 const Bound& p, const ModelConfig& cfg, const ForwardContext& ctx = {});

}  // namespace storyvis

#endif  // STORYVIS_MARTT_HPP_
