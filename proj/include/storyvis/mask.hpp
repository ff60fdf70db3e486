#ifndef STORYVIS_MASK_HPP_
#define STORYVIS_MASK_HPP_

#include <vector>

#include "storyvis/tensor.hpp"
#include "storyvis/tree.hpp"

namespace storyvis {

// Per-layer self-attention visibility for one caption. Each layer is
// T_c x (T_m + T_c); the first T_m columns are memory slots.
struct MaskStack {
  std::vector<BoolMatrix> layers;
  Index memory_slots = 0;
  Index caption_length = 0;

  Index num_layers() const { return static_cast<Index>(layers.size()); }
  BoolMatrix caption_block(Index layer) const {
    return layers.at(static_cast<std::size_t>(layer)).rightCols(caption_length);
  }
};

// Height of the lowest common ancestor of leaves i and j (1 when i == j).
int lca_height(const ConstituencyTree& tree, Index i, Index j);

// Caption block at 1-based layer `layer`: (i, j) visible iff
// lca_height(i, j) <= layer.
BoolMatrix layer_mask(const ConstituencyTree& tree, int layer);

struct MaskRule {
  int num_layers = 4;
  bool final_layer_full = true;
};

// As above, with every pair visible at layer == rule.num_layers when
// rule.final_layer_full is set.
BoolMatrix layer_mask(const ConstituencyTree& tree, int layer, const MaskRule& rule);

MaskStack mask_stack(const ConstituencyTree& tree, int num_layers, Index memory_slots, bool final_layer_full = true);

// All-true stack, for unstructured inputs.
MaskStack full_mask_stack(Index caption_length, int num_layers, Index memory_slots);

}  // namespace storyvis

#endif  // STORYVIS_MASK_HPP_
