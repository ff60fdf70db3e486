#ifndef STORYVIS_TREE_HPP_
#define STORYVIS_TREE_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "storyvis/tensor.hpp"

namespace storyvis {

struct TreeNode {
  std::string label;
  std::optional<Index> parent;
  std::vector<Index> children;
  Index first_leaf = 0;
  Index last_leaf = 0;  // inclusive
  int height = 0;
  bool preterminal = false;
};

struct TreeLeaf {
  std::string word;
  Index preterminal = 0;
};

// Constituency tree over an ordered word sequence. Words are not nodes; a
// preterminal (height 1) covers exactly one word, and internal node heights
// are 1 + max(child heights). Node 0 is the root.
class ConstituencyTree {
 public:
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const std::vector<TreeLeaf>& leaves() const { return leaves_; }
  const TreeNode& node(Index i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  const TreeLeaf& leaf(Index i) const { return leaves_.at(static_cast<std::size_t>(i)); }
  Index root() const { return 0; }
  Index leaf_count() const { return static_cast<Index>(leaves_.size()); }
  int height() const { return nodes_.empty() ? 0 : nodes_.front().height; }

  // Ancestor chain of a leaf's preterminal, bottom-up, root included.
  std::vector<Index> ancestor_chain(Index leaf) const;
  std::vector<std::string> words() const;
  std::string to_bracketed() const;

 private:
  friend class TreeBuilder;
  std::vector<TreeNode> nodes_;
  std::vector<TreeLeaf> leaves_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

ConstituencyTree parse_bracketed(std::string_view text);

// Builds a tree from a parent array (-1 for the root) and one word per node
// (empty except at preterminals). Children are ordered by node index.
ConstituencyTree tree_from_parents(const std::vector<Index>& parents, const std::vector<std::string>& labels,
                                   const std::vector<std::string>& preterminal_words);

// Phrase-label vocabulary; row 0 of a label table is the UNK row.
class LabelVocab {
 public:
  LabelVocab() = default;
  explicit LabelVocab(std::vector<std::string> labels);
  Index index(const std::string& label) const;
  Index size() const { return static_cast<Index>(labels_.size()) + 1; }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, Index> index_;
};

// Word vectors in GloVe text layout: "token v1 ... vD" per line. Lookups are
// lowercased; out-of-vocabulary words resolve to nothing and the caller uses
// the UNK row.
class WordTable {
 public:
  WordTable() = default;
  explicit WordTable(Index dim) : dim_(dim) {}
  static WordTable load(const std::filesystem::path& path);

  void insert(const std::string& token, const Eigen::RowVectorXd& vec);
  const Eigen::RowVectorXd* find(std::string_view word) const;
  Index dim() const { return dim_; }
  Index size() const { return static_cast<Index>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  void save(const std::filesystem::path& path) const;

 private:
  Index dim_ = 0;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, Eigen::RowVectorXd> vectors_;
};

std::string to_lower(std::string_view s);

// Mean of the label-table rows along the leaf's ancestor chain, taking at
// most `max_depth` labels from the preterminal upward (0 = whole chain).
Eigen::RowVectorXd node_embedding(const ConstituencyTree& tree, Index leaf, const LabelVocab& vocab,
                                  const Matrix& label_table, int max_depth = 0);

// Row i holds count/len weights over label-table rows for leaf i, so that
// weights * label_table gives every node embedding at once.
Matrix label_average_weights(const ConstituencyTree& tree, const LabelVocab& vocab, int max_depth = 0);

struct LeafWords {
  Matrix vectors;  // T_c x d_word, zero rows for OOV words
  Matrix oov;      // T_c x 1, 1.0 where the word was not found
};

LeafWords lookup_leaf_words(const ConstituencyTree& tree, const WordTable& words);

// word vector (or unk_row) concatenated with the node embedding, per leaf.
Matrix build_leaf_embeddings(const ConstituencyTree& tree, const WordTable& words, const Eigen::RowVectorXd& unk_row,
                             const LabelVocab& vocab, const Matrix& label_table, int max_depth = 0);

}  // namespace storyvis

#endif  // STORYVIS_TREE_HPP_
