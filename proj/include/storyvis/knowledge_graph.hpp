#ifndef STORYVIS_KNOWLEDGE_GRAPH_HPP_
#define STORYVIS_KNOWLEDGE_GRAPH_HPP_

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "storyvis/config.hpp"
#include "storyvis/layers.hpp"
#include "storyvis/tree.hpp"

namespace storyvis {

struct Triple {
  std::string subject;
  std::string relation;
  std::string object;

  bool operator==(const Triple&) const = default;
};

// Local triple store, TSV "subject<TAB>relation<TAB>object".
std::vector<Triple> load_triple_store(const std::filesystem::path& path);
void save_triple_store(const std::filesystem::path& path, const std::vector<Triple>& triples);

// Coarse part-of-speech lookup: "word<TAB>noun|verb" per line. Words absent
// from the lexicon count as verbs when they end in a common verb suffix.
class Lexicon {
 public:
  enum class Tag { kOther, kNoun, kVerb };

  Lexicon() = default;
  static Lexicon load(const std::filesystem::path& path);
  void add(const std::string& word, Tag tag);
  Tag tag(const std::string& word) const;
  bool is_content_word(const std::string& word) const { return tag(word) != Tag::kOther; }
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tag> tags_;
};

std::vector<std::string> tokenize(const std::string& text);

// Triples whose subject or object phrase contains a caption noun/verb, or a
// word whose embedding has cosine > expansion_threshold with one. Store
// order, deduplicated, capped at max_triples (0 = no cap).
std::vector<Triple> extract_triples(const std::vector<std::string>& captions, const std::vector<Triple>& store,
                                    const WordTable& words, const Lexicon& lexicon, double expansion_threshold,
                                    int max_triples = 0);

struct LeviVertex {
  enum class Kind { kEntity, kRelation };
  std::string text;
  Kind kind = Kind::kEntity;

  bool operator==(const LeviVertex&) const = default;
};

// Unlabeled bipartite graph: one entity vertex per distinct phrase, one
// relation vertex per triple, edges subject -> relation -> object.
struct LeviGraph {
  std::vector<LeviVertex> vertices;
  BoolMatrix edges;  // base directed edges, edges(u, v) = u -> v

  Index size() const { return static_cast<Index>(vertices.size()); }
  std::vector<Index> entity_rows() const;
  std::vector<Index> relation_rows() const;
  // edges | edges^T | identity: the neighbourhood each vertex attends over.
  BoolMatrix attention_mask() const;
  nlohmann::json to_json() const;
  static LeviGraph from_json(const nlohmann::json& j);
};

LeviGraph to_levi(const std::vector<Triple>& triples);

// Mean of the word vectors of each vertex's text; zero when no word is known.
Matrix vertex_embeddings(const LeviGraph& graph, const WordTable& words);

struct GraphEncoding {
  Tensor vertices;                // V x d
  std::vector<Index> entity_rows;
  Tensor entities() const;        // rows of `vertices` at entity_rows
};

// Parameters live under "graph.".
void init_graph_params(ParamStore& store, const ModelConfig& cfg, Rng& rng);

// Projection to d, then cfg.graph_layers neighbour-restricted transformer
// blocks with cfg.graph_heads heads.
GraphEncoding graph_encode(const LeviGraph& graph, const Matrix& embeddings, const Bound& p, const ModelConfig& cfg,
                           const ForwardContext& ctx = {});

}  // namespace storyvis

#endif  // STORYVIS_KNOWLEDGE_GRAPH_HPP_
