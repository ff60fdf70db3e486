#ifndef STORYVIS_CHECK_ORACLES_HPP_
#define STORYVIS_CHECK_ORACLES_HPP_

// Slow, independent reference implementations. Nothing here calls into the
// code it is meant to check beyond plain data types and parameter lookup.

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "storyvis/config.hpp"
#include "storyvis/knowledge_graph.hpp"
#include "storyvis/params.hpp"
#include "storyvis/rng.hpp"
#include "storyvis/story.hpp"
#include "storyvis/tree.hpp"

namespace storyvis::oracle {

// Tree shape as nested children; a node without children is a preterminal.
struct Shape {
  std::string label = "X";
  std::vector<Shape> children;
};

int leaf_count(const Shape& s);
int shape_height(const Shape& s);
std::string to_bracketed(const Shape& s);  // words are w0, w1, ...
ConstituencyTree to_tree(const Shape& s);

// Every ordered tree over exactly `leaves` preterminals whose internal nodes
// branch at least twice. With `unary`, each of those also appears with any
// subset of its nodes wrapped in a single unary parent.
std::vector<Shape> enumerate_shapes(int leaves, bool unary);

// Random shape with 1..max_leaves preterminals and occasional unary chains.
Shape random_shape(Rng& rng, int max_leaves, double unary_prob = 0.2);

// Labels drawn from a small phrase/tag set, assigned in place.
void relabel(Shape& s, Rng& rng);

// (i, j) visible iff some node of height <= layer covers both leaves.
BoolMatrix brute_force_mask(const Shape& s, int layer);
// Height of the deepest node whose leaf set contains both i and j, found by
// intersecting ancestor sets.
int ancestor_lca_height(const Shape& s, int i, int j);
// Mean of label rows over the leaf's ancestors, preterminal first.
Eigen::RowVectorXd ancestor_walk_embedding(const Shape& s, int leaf,
                                           const std::map<std::string, Eigen::RowVectorXd>& rows,
                                           const Eigen::RowVectorXd& unk);

// ---------------------------------------------------------------------------
// Loop versions of the losses and attention pieces.

double kl_loop(const Matrix& mu, const Matrix& logvar);
struct AlignLoop {
  Matrix beta;
  Matrix context;
};
AlignLoop align_loop(const Matrix& regions, const Matrix& tokens);
double cosine_loop(const Matrix& a, Index ra, const Matrix& b, Index rb);
double word_score_loop(const Matrix& regions, const Matrix& tokens);
double contrastive_loop(const std::vector<Matrix>& regions, const std::vector<Matrix>& tokens, Index k);
double caption_ce_loop(const Matrix& logits, const std::vector<int>& targets, Index max_len);
double bbox_mirror_loop(const Matrix& pred, const Matrix& target);

// Plain matrix helpers used by the network oracles.
Matrix matmul_loop(const Matrix& a, const Matrix& b);
Matrix dense_loop(const ParamStore& p, const std::string& prefix, const Matrix& x);
Matrix layer_norm_loop(const Matrix& x, const Matrix& g, const Matrix& b, double eps);
Matrix attention_loop(const ParamStore& p, const std::string& prefix, const Matrix& queries, const Matrix& keys,
                      const BoolMatrix& allowed, int heads);

Matrix memory_update_loop(const ParamStore& p, const std::string& prefix, const Matrix& memory, const Matrix& hidden,
                          int heads);

// Standard post-norm transformer encoder over the martt.* weights, with no
// memory and full self-attention.
Matrix plain_encoder(const ParamStore& p, const Matrix& leaves, const ModelConfig& cfg);

// ---------------------------------------------------------------------------
// Knowledge graph.

// Full scan of the store with no caching; same inclusion rule as the
// pipeline.
std::vector<Triple> naive_extract(const std::vector<std::string>& captions, const std::vector<Triple>& store,
                                  const WordTable& words, const Lexicon& lexicon, double threshold,
                                  int max_triples);

// Structural violations of a Levi graph built from `triples`; empty when
// the graph is well formed.
std::vector<std::string> levi_violations(const LeviGraph& g, const std::vector<Triple>& triples);

// Manifest entry for one story recomputed from the raw record.
nlohmann::json manifest_entry(const StoryRecord& record, const std::vector<Triple>& store, const WordTable& words,
                              const Lexicon& lexicon, const Config& cfg);

}  // namespace storyvis::oracle

#endif  // STORYVIS_CHECK_ORACLES_HPP_
