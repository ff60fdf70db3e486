#ifndef STORYVIS_MODEL_HPP_
#define STORYVIS_MODEL_HPP_

#include <vector>

#include "storyvis/dataset.hpp"
#include "storyvis/generator.hpp"
#include "storyvis/knowledge_graph.hpp"
#include "storyvis/losses.hpp"
#include "storyvis/martt.hpp"

namespace storyvis {

// Registers every parameter: martt.*, graph.*, gen.* and disc.*.
void init_model_params(ParamStore& store, const ModelConfig& cfg, const Vocabularies& vocab, Rng& rng);

struct StoryForward {
  Conditioning cond;
  std::vector<Tensor> encoded;  // c_k, T_c x d per frame
  Tensor entities;              // e_k, shared by all frames of the story
  std::vector<GeneratedFrame> frames;
  std::vector<DenseCapOutput> densecap;
};

// Conditioning from the sentence embeddings, MARTT over the captions, graph
// encoding, then one generated frame and dense-caption prediction per caption.
StoryForward forward_story(const PreparedStory& story, const Bound& p, const ModelConfig& cfg, const Matrix& noise,
                           const ForwardContext& ctx = {});

LossTerms<Tensor> generator_losses(const PreparedStory& story, const StoryForward& fwd, const Bound& p,
                                   const Config& cfg);

// Discriminator objective with generated frames and h0 treated as constants.
Tensor discriminator_loss(const PreparedStory& story, const StoryForward& fwd, const Bound& p, const ModelConfig& cfg);

}  // namespace storyvis

#endif  // STORYVIS_MODEL_HPP_
