#include "storyvis/tree.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>

namespace storyvis {

class TreeBuilder {
 public:
  Index add_node(std::string label, std::optional<Index> parent) {
    TreeNode n;
    n.label = std::move(label);
    n.parent = parent;
    tree_.nodes_.push_back(std::move(n));
    const Index id = static_cast<Index>(tree_.nodes_.size() - 1);
    if (parent) tree_.nodes_[static_cast<std::size_t>(*parent)].children.push_back(id);
    words_.emplace_back();
    return id;
  }

  void set_word(Index node, std::string word) { words_[static_cast<std::size_t>(node)] = std::move(word); }
  bool has_word(Index node) const { return !words_[static_cast<std::size_t>(node)].empty(); }
  bool has_children(Index node) const { return !tree_.nodes_[static_cast<std::size_t>(node)].children.empty(); }

  ConstituencyTree finish() {
    if (tree_.nodes_.empty()) throw std::invalid_argument("tree has no nodes");
    visit(0);
    return std::move(tree_);
  }

 private:
  void visit(Index id) {
    TreeNode& n = tree_.nodes_[static_cast<std::size_t>(id)];
    const std::string& word = words_[static_cast<std::size_t>(id)];
    if (!word.empty()) {
      if (!n.children.empty()) throw std::invalid_argument("node '" + n.label + "' has both children and a word");
      n.preterminal = true;
      n.height = 1;
      n.first_leaf = n.last_leaf = static_cast<Index>(tree_.leaves_.size());
      tree_.leaves_.push_back({word, id});
      return;
    }
    if (n.children.empty()) throw std::invalid_argument("node '" + n.label + "' is empty");
    const std::vector<Index> children = n.children;
    int h = 0;
    for (Index c : children) {
      visit(c);
      h = std::max(h, tree_.nodes_[static_cast<std::size_t>(c)].height);
    }
    TreeNode& self = tree_.nodes_[static_cast<std::size_t>(id)];
    self.height = h + 1;
    self.first_leaf = tree_.nodes_[static_cast<std::size_t>(children.front())].first_leaf;
    self.last_leaf = tree_.nodes_[static_cast<std::size_t>(children.back())].last_leaf;
  }

  ConstituencyTree tree_;
  std::vector<std::string> words_;
};

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_token_char(char c) { return !is_space(c) && c != '(' && c != ')'; }

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ConstituencyTree parse() {
    skip_space();
    if (at_end()) throw ParseError("empty input", pos_);
    if (peek() != '(') throw ParseError("expected '('", pos_);
    parse_node(std::nullopt);
    skip_space();
    if (!at_end()) {
      if (peek() == ')') throw ParseError("unbalanced parentheses: unexpected ')'", pos_);
      throw ParseError("unexpected text after tree", pos_);
    }
    return builder_.finish();
  }

 private:
  Index parse_node(std::optional<Index> parent) {
    ++pos_;  // '('
    std::string label = read_token();
    const Index id = builder_.add_node(std::move(label), parent);
    for (;;) {
      skip_space();
      if (at_end()) throw ParseError("unbalanced parentheses: missing ')'", pos_);
      const char c = peek();
      if (c == ')') {
        if (!builder_.has_word(id) && !builder_.has_children(id)) throw ParseError("empty constituent", pos_);
        ++pos_;
        return id;
      }
      if (c == '(') {
        if (builder_.has_word(id)) throw ParseError("constituent mixes a terminal word with child constituents", pos_);
        parse_node(id);
        continue;
      }
      const std::size_t start = pos_;
      std::string word = read_token();
      if (builder_.has_children(id)) {
        throw ParseError("constituent mixes child constituents with terminal word '" + word + "'", start);
      }
      if (builder_.has_word(id)) throw ParseError("preterminal has more than one word", start);
      builder_.set_word(id, std::move(word));
    }
  }

  std::string read_token() {
    const std::size_t start = pos_;
    while (!at_end() && is_token_char(peek())) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  void skip_space() {
    while (!at_end() && is_space(peek())) ++pos_;
  }
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  std::string_view text_;
  std::size_t pos_ = 0;
  TreeBuilder builder_;
};

}  // namespace

ConstituencyTree parse_bracketed(std::string_view text) { return Parser(text).parse(); }

ConstituencyTree tree_from_parents(const std::vector<Index>& parents, const std::vector<std::string>& labels,
                                   const std::vector<std::string>& preterminal_words) {
  if (parents.empty() || parents[0] != -1) throw std::invalid_argument("tree_from_parents: node 0 must be the root");
  if (labels.size() != parents.size() || preterminal_words.size() != parents.size()) {
    throw std::invalid_argument("tree_from_parents: array sizes differ");
  }
  TreeBuilder b;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    const Index p = parents[i];
    if (i > 0 && (p < 0 || p >= static_cast<Index>(i))) {
      throw std::invalid_argument("tree_from_parents: parent of node " + std::to_string(i) + " must precede it");
    }
    const Index id = b.add_node(labels[i], i == 0 ? std::nullopt : std::optional<Index>(p));
    if (!preterminal_words[i].empty()) b.set_word(id, preterminal_words[i]);
  }
  return b.finish();
}

std::vector<Index> ConstituencyTree::ancestor_chain(Index leaf) const {
  std::vector<Index> chain;
  std::optional<Index> cur = this->leaf(leaf).preterminal;
  while (cur) {
    chain.push_back(*cur);
    cur = node(*cur).parent;
  }
  return chain;
}

std::vector<std::string> ConstituencyTree::words() const {
  std::vector<std::string> out;
  out.reserve(leaves_.size());
  for (const TreeLeaf& l : leaves_) out.push_back(l.word);
  return out;
}

std::string ConstituencyTree::to_bracketed() const {
  std::ostringstream os;
  std::function<void(Index)> emit = [&](Index id) {
    const TreeNode& n = node(id);
    os << '(' << n.label;
    if (n.preterminal) {
      os << ' ' << leaves_[static_cast<std::size_t>(n.first_leaf)].word;
    } else {
      for (Index c : n.children) {
        os << ' ';
        emit(c);
      }
    }
    os << ')';
  };
  if (!nodes_.empty()) emit(root());
  return os.str();
}

// ---------------------------------------------------------------------------

LabelVocab::LabelVocab(std::vector<std::string> labels) : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) index_.emplace(labels_[i], static_cast<Index>(i) + 1);
}

Index LabelVocab::index(const std::string& label) const {
  auto it = index_.find(label);
  return it == index_.end() ? 0 : it->second;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

WordTable WordTable::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open embedding table '" + path.string() + "'");
  WordTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    std::vector<double> values;
    double v = 0.0;
    while (ls >> v) values.push_back(v);
    if (!ls.eof()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed vector entry");
    }
    if (table.dim_ == 0) table.dim_ = static_cast<Index>(values.size());
    if (static_cast<Index>(values.size()) != table.dim_ || values.empty()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(table.dim_) + " values, got " + std::to_string(values.size()));
    }
    table.insert(token, Eigen::Map<Eigen::RowVectorXd>(values.data(), static_cast<Index>(values.size())));
  }
  return table;
}

void WordTable::insert(const std::string& token, const Eigen::RowVectorXd& vec) {
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_) throw std::invalid_argument("word vector for '" + token + "' has wrong dimension");
  const std::string key = to_lower(token);
  if (vectors_.count(key) == 0) tokens_.push_back(key);
  vectors_[key] = vec;
}

const Eigen::RowVectorXd* WordTable::find(std::string_view word) const {
  auto it = vectors_.find(to_lower(word));
  return it == vectors_.end() ? nullptr : &it->second;
}

void WordTable::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write embedding table '" + path.string() + "'");
  os.precision(17);
  for (const std::string& t : tokens_) {
    os << t;
    const Eigen::RowVectorXd& v = vectors_.at(t);
    for (Index i = 0; i < v.size(); ++i) os << ' ' << v(i);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Index> capped_chain(const ConstituencyTree& tree, Index leaf, int max_depth) {
  std::vector<Index> chain = tree.ancestor_chain(leaf);
  if (max_depth > 0 && static_cast<int>(chain.size()) > max_depth) chain.resize(static_cast<std::size_t>(max_depth));
  return chain;
}

}  // namespace

Eigen::RowVectorXd node_embedding(const ConstituencyTree& tree, Index leaf, const LabelVocab& vocab,
                                  const Matrix& label_table, int max_depth) {
  if (leaf < 0 || leaf >= tree.leaf_count()) {
    throw std::out_of_range("node_embedding: leaf " + std::to_string(leaf) + " out of range");
  }
  const std::vector<Index> chain = capped_chain(tree, leaf, max_depth);
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(label_table.cols());
  for (Index n : chain) acc += label_table.row(vocab.index(tree.node(n).label));
  return acc / static_cast<double>(chain.size());
}

Matrix label_average_weights(const ConstituencyTree& tree, const LabelVocab& vocab, int max_depth) {
  Matrix w = Matrix::Zero(tree.leaf_count(), vocab.size());
  for (Index i = 0; i < tree.leaf_count(); ++i) {
    const std::vector<Index> chain = capped_chain(tree, i, max_depth);
    for (Index n : chain) w(i, vocab.index(tree.node(n).label)) += 1.0;
    w.row(i) /= static_cast<double>(chain.size());
  }
  return w;
}

LeafWords lookup_leaf_words(const ConstituencyTree& tree, const WordTable& words) {
  LeafWords out{Matrix::Zero(tree.leaf_count(), words.dim()), Matrix::Zero(tree.leaf_count(), 1)};
  for (Index i = 0; i < tree.leaf_count(); ++i) {
    if (const Eigen::RowVectorXd* v = words.find(tree.leaf(i).word)) {
      out.vectors.row(i) = *v;
    } else {
      out.oov(i, 0) = 1.0;
    }
  }
  return out;
}

Matrix build_leaf_embeddings(const ConstituencyTree& tree, const WordTable& words, const Eigen::RowVectorXd& unk_row,
                             const LabelVocab& vocab, const Matrix& label_table, int max_depth) {
  const Index dw = words.dim();
  if (unk_row.size() != dw) throw std::invalid_argument("build_leaf_embeddings: UNK row has wrong dimension");
  Matrix out(tree.leaf_count(), dw + label_table.cols());
  for (Index i = 0; i < tree.leaf_count(); ++i) {
    const Eigen::RowVectorXd* v = words.find(tree.leaf(i).word);
    out.row(i).head(dw) = v != nullptr ? *v : unk_row;
    out.row(i).tail(label_table.cols()) = node_embedding(tree, i, vocab, label_table, max_depth);
  }
  return out;
}

}  // namespace storyvis
