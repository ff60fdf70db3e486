#include "doctest.h"

#include <fstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "properties.hpp"
#include "storyvis/tree.hpp"

using namespace storyvis;

TEST_CASE("single-word sentence") {
  const ConstituencyTree t = parse_bracketed("(S (NP (NNP Pororo)))");
  REQUIRE(t.leaf_count() == 1);
  CHECK(t.leaf(0).word == "Pororo");
  CHECK(t.height() == 3);
}

TEST_CASE("worked example spans and heights") {
  const ConstituencyTree t = parse_bracketed(fixture::kExampleTree);
  CHECK(t.words() == std::vector<std::string>{"Pororo", "says", "hi", "and", "smiles"});
  CHECK(t.height() == 4);
  int inner = 0, outer = 0;
  for (const TreeNode& n : t.nodes()) {
    if (n.label != "VP") continue;
    if (n.first_leaf == 1 && n.last_leaf == 2) {
      CHECK(n.height == 2);
      ++inner;
    }
    if (n.first_leaf == 1 && n.last_leaf == 4) {
      CHECK(n.height == 3);
      ++outer;
    }
  }
  CHECK(inner == 1);
  CHECK(outer == 1);
}

TEST_CASE("structural invariants hold on random trees") {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    oracle::Shape s = oracle::random_shape(rng, 12);
    oracle::relabel(s, rng);
    const ConstituencyTree t = oracle::to_tree(s);
    int roots = 0;
    for (std::size_t i = 0; i < t.nodes().size(); ++i) {
      const TreeNode& n = t.nodes()[i];
      if (!n.parent) {
        ++roots;
        CHECK(i == 0);
      }
      if (n.children.empty()) {
        CHECK(n.preterminal);
        CHECK(n.height == 1);
        CHECK(n.first_leaf == n.last_leaf);
        continue;
      }
      Index next = n.first_leaf;
      int h = 0;
      for (Index c : n.children) {
        CHECK(t.node(c).parent == static_cast<Index>(i));
        CHECK(t.node(c).first_leaf == next);
        next = t.node(c).last_leaf + 1;
        h = std::max(h, t.node(c).height);
      }
      CHECK(next == n.last_leaf + 1);
      CHECK(n.height == h + 1);
    }
    CHECK(roots == 1);
    for (Index i = 0; i < t.leaf_count(); ++i) {
      const TreeNode& pre = t.node(t.leaf(i).preterminal);
      CHECK(pre.first_leaf == i);
      CHECK(pre.last_leaf == i);
    }
  }
}

TEST_CASE("malformed input reports an offset") {
  try {
    parse_bracketed("((S)");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 3);
  }
  CHECK_THROWS_AS(parse_bracketed("(S (NP (NN dog))"), ParseError);
  CHECK_THROWS_AS(parse_bracketed("(S )"), ParseError);
  CHECK_THROWS_AS(parse_bracketed("(S word (NP (NN dog)))"), ParseError);
  CHECK_THROWS_AS(parse_bracketed(""), ParseError);
}

TEST_CASE("bracketed round trip") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    oracle::Shape s = oracle::random_shape(rng, 10);
    oracle::relabel(s, rng);
    const ConstituencyTree t = oracle::to_tree(s);
    const ConstituencyTree back = parse_bracketed(t.to_bracketed());
    CHECK(back.to_bracketed() == t.to_bracketed());
    REQUIRE(back.nodes().size() == t.nodes().size());
    for (std::size_t i = 0; i < t.nodes().size(); ++i) {
      CHECK(back.nodes()[i].label == t.nodes()[i].label);
      CHECK(back.nodes()[i].children == t.nodes()[i].children);
      CHECK(back.nodes()[i].height == t.nodes()[i].height);
    }
  }
}

TEST_CASE("node embedding averages the preterminal and its phrase") {
  const ConstituencyTree t = parse_bracketed("(NP (NNP Pororo))");
  const LabelVocab vocab({"NNP", "NP"});
  Matrix table = Matrix::Zero(vocab.size(), 2);
  table.row(vocab.index("NNP")) << 1, 0;
  table.row(vocab.index("NP")) << 0, 1;
  const Eigen::RowVectorXd e = node_embedding(t, 0, vocab, table);
  CHECK(e(0) == 0.5);
  CHECK(e(1) == 0.5);
}

TEST_CASE("node embedding depth cap gives the two-level reading") {
  const ConstituencyTree t = parse_bracketed(fixture::kExampleTree);
  const LabelVocab vocab({"CC", "NNP", "NP", "S", "UH", "VBZ", "VP"});
  Rng rng(13);
  const Matrix table = fixture::random_matrix(vocab.size(), 4, rng);
  const Eigen::RowVectorXd two = node_embedding(t, 0, vocab, table, 2);
  const Eigen::RowVectorXd want = 0.5 * (table.row(vocab.index("NNP")) + table.row(vocab.index("NP")));
  CHECK(two.isApprox(want, 1e-15));
  const Eigen::RowVectorXd all = node_embedding(t, 0, vocab, table);
  CHECK(all.isApprox((table.row(vocab.index("NNP")) + table.row(vocab.index("NP")) + table.row(vocab.index("S"))) / 3.0,
                     1e-15));
}

TEST_CASE("unknown labels use row zero and identical chains are unchanged") {
  const ConstituencyTree t = parse_bracketed("(X (X (X (X w))))");
  const LabelVocab vocab({"X"});
  Matrix table(vocab.size(), 3);
  table.row(0) << 9, 9, 9;
  table.row(vocab.index("X")) << 1, 2, 3;
  CHECK(node_embedding(t, 0, vocab, table) == table.row(vocab.index("X")));
  CHECK(vocab.index("NOPE") == 0);
  CHECK(node_embedding(parse_bracketed("(Q (Z w))"), 0, vocab, table) == table.row(0));
}

TEST_CASE("node embedding matches the ancestor-walk oracle") {
  const check::PropertyResult r = check::node_embedding_oracle({});
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("node embedding ignores edits to disjoint subtrees") {
  const LabelVocab vocab({"A", "B", "C", "NP", "S", "VP"});
  Rng rng(14);
  const Matrix table = fixture::random_matrix(vocab.size(), 5, rng);
  const ConstituencyTree a = parse_bracketed("(S (NP (A x) (B y)) (VP (C z) (A w)))");
  const ConstituencyTree b = parse_bracketed("(S (NP (A x) (B y)) (VP (VP (B z) (C q)) (NP (A w))))");
  for (Index leaf : {0, 1}) CHECK(node_embedding(a, leaf, vocab, table) == node_embedding(b, leaf, vocab, table));
}

TEST_CASE("label weights reproduce every node embedding") {
  Rng rng(15);
  const Vocabularies v = fixture::tiny_vocab();
  for (int trial = 0; trial < 50; ++trial) {
    oracle::Shape s = oracle::random_shape(rng, 8);
    oracle::relabel(s, rng);
    const ConstituencyTree t = oracle::to_tree(s);
    const Matrix table = fixture::random_matrix(v.labels.size(), 4, rng);
    const Matrix all = label_average_weights(t, v.labels) * table;
    for (Index i = 0; i < t.leaf_count(); ++i) {
      CHECK(all.row(i).isApprox(node_embedding(t, i, v.labels, table), 1e-12));
    }
  }
}

TEST_CASE("leaf embeddings concatenate word and node vectors") {
  const ConstituencyTree t = parse_bracketed("(S (NP (NNP Pororo)) (VP (VBZ says) (UH hi)))");
  const LabelVocab vocab({"NNP", "NP", "S", "UH", "VBZ", "VP"});
  WordTable words(300);
  Rng rng(16);
  words.insert("pororo", fixture::random_matrix(1, 300, rng).row(0));
  words.insert("says", fixture::random_matrix(1, 300, rng).row(0));
  const Matrix table = fixture::random_matrix(vocab.size(), 50, rng);
  const Eigen::RowVectorXd unk = Eigen::RowVectorXd::Constant(300, 0.25);
  const Matrix e = build_leaf_embeddings(t, words, unk, vocab, table);
  CHECK(e.rows() == 3);
  CHECK(e.cols() == 350);
  CHECK(e.row(0).head(300) == *words.find("Pororo"));
  CHECK(e.row(2).head(300) == unk);
  CHECK(e.row(1).tail(50) == node_embedding(t, 1, vocab, table));
  const LeafWords lw = lookup_leaf_words(t, words);
  CHECK(lw.oov(2, 0) == 1.0);
  CHECK(lw.oov(0, 0) == 0.0);
  CHECK(lw.vectors.row(2).isZero());

  const Matrix zero = build_leaf_embeddings(t, WordTable(300), Eigen::RowVectorXd::Zero(300), vocab,
                                            Matrix::Zero(vocab.size(), 50));
  CHECK(zero.isZero());
}

TEST_CASE("swapping sibling subtrees permutes leaf embeddings") {
  const LabelVocab vocab({"A", "B", "NP", "S", "VP"});
  WordTable words(3);
  Rng rng(17);
  for (const char* w : {"p", "q", "r", "s"}) words.insert(w, fixture::random_matrix(1, 3, rng).row(0));
  const Matrix table = fixture::random_matrix(vocab.size(), 2, rng);
  const Eigen::RowVectorXd unk = Eigen::RowVectorXd::Zero(3);
  const Matrix a =
      build_leaf_embeddings(parse_bracketed("(S (NP (A p) (B q)) (VP (A r) (A s) ))"), words, unk, vocab, table);
  const Matrix b =
      build_leaf_embeddings(parse_bracketed("(S (VP (A r) (A s)) (NP (A p) (B q)))"), words, unk, vocab, table);
  CHECK(a.row(0) == b.row(2));
  CHECK(a.row(1) == b.row(3));
  CHECK(a.row(2) == b.row(0));
  CHECK(a.row(3) == b.row(1));
}

TEST_CASE("word table text round trip and lowercase lookup") {
  WordTable w(2);
  w.insert("car", Eigen::RowVector2d(0.5, -1.0));
  w.insert("door", Eigen::RowVector2d(1e-3, 2.0));
  const auto path = std::filesystem::temp_directory_path() / "storyvis_words.txt";
  w.save(path);
  const WordTable back = WordTable::load(path);
  CHECK(back.dim() == 2);
  CHECK(back.size() == 2);
  REQUIRE(back.find("CAR") != nullptr);
  CHECK(*back.find("Car") == *w.find("car"));
  CHECK(*back.find("door") == *w.find("door"));
  CHECK(back.find("wheel") == nullptr);
  std::filesystem::remove(path);
}

TEST_CASE("tree from a parent array") {
  const ConstituencyTree t = tree_from_parents({-1, 0, 0, 2}, {"S", "NN", "VP", "VB"}, {"", "dog", "", "runs"});
  CHECK(t.to_bracketed() == "(S (NN dog) (VP (VB runs)))");
}
