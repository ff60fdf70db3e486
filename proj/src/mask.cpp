#include "storyvis/mask.hpp"

#include <stdexcept>
#include <string>

namespace storyvis {

int lca_height(const ConstituencyTree& tree, Index i, Index j) {
  if (i < 0 || j < 0 || i >= tree.leaf_count() || j >= tree.leaf_count()) {
    throw std::out_of_range("lca_height: leaf index out of range");
  }
  const Index lo = std::min(i, j);
  const Index hi = std::max(i, j);
  Index cur = tree.leaf(lo).preterminal;
  while (tree.node(cur).last_leaf < hi) cur = *tree.node(cur).parent;
  return tree.node(cur).height;
}

BoolMatrix layer_mask(const ConstituencyTree& tree, int layer) {
  if (layer < 1) throw std::invalid_argument("layer_mask: layer must be >= 1, got " + std::to_string(layer));
  const Index n = tree.leaf_count();
  BoolMatrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    m(i, i) = true;
    for (Index j = i + 1; j < n; ++j) m(i, j) = m(j, i) = lca_height(tree, i, j) <= layer;
  }
  return m;
}

BoolMatrix layer_mask(const ConstituencyTree& tree, int layer, const MaskRule& rule) {
  if (rule.final_layer_full && layer == rule.num_layers) {
    if (layer < 1) throw std::invalid_argument("layer_mask: layer must be >= 1");
    return BoolMatrix::Constant(tree.leaf_count(), tree.leaf_count(), true);
  }
  return layer_mask(tree, layer);
}

MaskStack mask_stack(const ConstituencyTree& tree, int num_layers, Index memory_slots, bool final_layer_full) {
  if (num_layers < 1) throw std::invalid_argument("mask_stack: need at least one layer");
  if (memory_slots < 0) throw std::invalid_argument("mask_stack: negative memory slot count");
  const Index n = tree.leaf_count();
  const MaskRule rule{num_layers, final_layer_full};
  MaskStack stack{{}, memory_slots, n};
  for (int l = 1; l <= num_layers; ++l) {
    BoolMatrix m(n, memory_slots + n);
    m.leftCols(memory_slots).setConstant(true);
    m.rightCols(n) = layer_mask(tree, l, rule);
    stack.layers.push_back(std::move(m));
  }
  return stack;
}

MaskStack full_mask_stack(Index caption_length, int num_layers, Index memory_slots) {
  MaskStack stack{{}, memory_slots, caption_length};
  for (int l = 0; l < num_layers; ++l) {
    stack.layers.push_back(BoolMatrix::Constant(caption_length, memory_slots + caption_length, true));
  }
  return stack;
}

}  // namespace storyvis
