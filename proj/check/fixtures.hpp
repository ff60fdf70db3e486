#ifndef STORYVIS_CHECK_FIXTURES_HPP_
#define STORYVIS_CHECK_FIXTURES_HPP_

#include <string>
#include <vector>

#include "storyvis/config.hpp"
#include "storyvis/dataset.hpp"
#include "storyvis/knowledge_graph.hpp"
#include "storyvis/params.hpp"
#include "storyvis/rng.hpp"

namespace storyvis::fixture {

// Small enough for finite differences over every parameter.
Config tiny_config();

inline constexpr const char* kExampleTree =
    "(S (NP (NNP Pororo)) (VP (VP (VBZ says) (UH hi)) (CC and) (VP (VBZ smiles))))";

Vocabularies tiny_vocab();

Matrix random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0);

// Caption inputs for a random tree with 1..max_leaves words.
CaptionInputs random_caption(const ModelConfig& cfg, const Vocabularies& vocab, Rng& rng, int max_leaves = 5);

std::vector<Triple> random_triples(Rng& rng, int count, int phrase_pool = 8, int relation_pool = 4);

// Random story shaped for cfg: cfg.story_length frames, a small Levi graph,
// random images, annotations and character labels.
PreparedStory random_story(const Config& cfg, const Vocabularies& vocab, Rng& rng);

ParamStore tiny_model(const Config& cfg, const Vocabularies& vocab, std::uint64_t seed);

}  // namespace storyvis::fixture

#endif  // STORYVIS_CHECK_FIXTURES_HPP_
