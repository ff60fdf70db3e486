#include "doctest.h"

#include <algorithm>
#include <fstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "properties.hpp"
#include "storyvis/knowledge_graph.hpp"
#include "storyvis/model.hpp"

using namespace storyvis;

namespace {

struct Pool {
  std::vector<Triple> store;
  WordTable words{4};
  Lexicon lexicon;
};

Pool toy_pool() {
  Pool p;
  p.store = {{"car", "HasA", "door"},     {"car", "UsedFor", "driving"}, {"road", "RelatedTo", "asphalt"},
             {"vehicle", "HasA", "wheel"}, {"house", "HasA", "door"},     {"tree", "AtLocation", "forest"},
             {"car", "HasA", "door"}};
  p.lexicon.add("car", Lexicon::Tag::kNoun);
  p.lexicon.add("tree", Lexicon::Tag::kNoun);
  Rng rng(31);
  for (const char* w : {"car", "door", "driving", "road", "asphalt", "wheel", "house", "forest", "tree", "pororo"}) {
    p.words.insert(w, fixture::random_matrix(1, 4, rng).row(0));
  }
  p.words.insert("vehicle", (*p.words.find("car") + 0.1 * Eigen::RowVector4d(1, -1, 0.5, 0)).eval());
  return p;
}

}  // namespace

TEST_CASE("caption nouns pull in matching triples") {
  const Pool p = toy_pool();
  const auto got = extract_triples({"Pororo drives a car"}, p.store, p.words, p.lexicon, 1.0);
  CHECK(std::find(got.begin(), got.end(), Triple{"car", "HasA", "door"}) != got.end());
  CHECK(std::count(got.begin(), got.end(), Triple{"car", "HasA", "door"}) == 1);
  CHECK(std::find(got.begin(), got.end(), Triple{"house", "HasA", "door"}) == got.end());
}

TEST_CASE("no captions, no triples") {
  const Pool p = toy_pool();
  CHECK(extract_triples({}, p.store, p.words, p.lexicon, 0.6).empty());
}

TEST_CASE("lowering the threshold only grows the set and matches a full scan") {
  const Pool p = toy_pool();
  const std::vector<std::string> caps = {"Pororo drives a car", "the tree is tall"};
  std::vector<Triple> prev;
  for (double th : {1.0, 0.99, 0.9, 0.6, 0.3, 0.0, -1.0}) {
    const auto got = extract_triples(caps, p.store, p.words, p.lexicon, th);
    CHECK(got == oracle::naive_extract(caps, p.store, p.words, p.lexicon, th, 0));
    for (const Triple& t : prev) CHECK(std::find(got.begin(), got.end(), t) != got.end());
    prev = got;
  }
  const auto exact = extract_triples(caps, p.store, p.words, p.lexicon, 1.0);
  const auto near = extract_triples(caps, p.store, p.words, p.lexicon, 0.9);
  CHECK(std::find(exact.begin(), exact.end(), Triple{"vehicle", "HasA", "wheel"}) == exact.end());
  CHECK(std::find(near.begin(), near.end(), Triple{"vehicle", "HasA", "wheel"}) != near.end());
}

TEST_CASE("max_triples keeps the first ones in store order") {
  const Pool p = toy_pool();
  const auto all = extract_triples({"a car near a tree"}, p.store, p.words, p.lexicon, 0.6);
  REQUIRE(all.size() > 2);
  const auto two = extract_triples({"a car near a tree"}, p.store, p.words, p.lexicon, 0.6, 2);
  CHECK(two == std::vector<Triple>(all.begin(), all.begin() + 2));
}

TEST_CASE("lexicon suffix heuristic and file round trip") {
  Lexicon lex;
  lex.add("dog", Lexicon::Tag::kNoun);
  lex.add("run", Lexicon::Tag::kVerb);
  CHECK(lex.tag("Dog") == Lexicon::Tag::kNoun);
  CHECK(lex.tag("jumping") == Lexicon::Tag::kVerb);
  CHECK(lex.tag("played") == Lexicon::Tag::kVerb);
  CHECK(lex.tag("the") == Lexicon::Tag::kOther);
  const auto path = std::filesystem::temp_directory_path() / "storyvis_lexicon.tsv";
  lex.save(path);
  const Lexicon back = Lexicon::load(path);
  CHECK(back.tag("run") == Lexicon::Tag::kVerb);
  CHECK(back.tag("dog") == Lexicon::Tag::kNoun);
  std::filesystem::remove(path);
}

TEST_CASE("triple store round trip and missing file") {
  const Pool p = toy_pool();
  const auto path = std::filesystem::temp_directory_path() / "storyvis_triples.tsv";
  save_triple_store(path, p.store);
  CHECK(load_triple_store(path) == p.store);
  std::filesystem::remove(path);
  CHECK_THROWS(load_triple_store(path));
}

TEST_CASE("single triple Levi graph") {
  const LeviGraph g = to_levi({{"car", "HasA", "door"}});
  REQUIRE(g.size() == 3);
  CHECK(g.edges.count() == 2);
  Index car = -1, rel = -1, door = -1;
  for (Index i = 0; i < 3; ++i) {
    const LeviVertex& v = g.vertices[static_cast<std::size_t>(i)];
    if (v.text == "car") car = i;
    if (v.text == "door") door = i;
    if (v.kind == LeviVertex::Kind::kRelation) rel = i;
  }
  REQUIRE(car >= 0);
  REQUIRE(door >= 0);
  REQUIRE(rel >= 0);
  CHECK(g.edges(car, rel));
  CHECK(g.edges(rel, door));
  const BoolMatrix m = g.attention_mask();
  CHECK(m(rel, car));
  CHECK(m(door, rel));
  CHECK(m.diagonal().all());
  CHECK_FALSE(m(car, door));
}

TEST_CASE("shared subjects are merged") {
  const LeviGraph g = to_levi({{"car", "HasA", "door"}, {"car", "HasA", "wheel"}});
  CHECK(g.size() == 5);
  CHECK(g.entity_rows().size() == 3);
  CHECK(g.relation_rows().size() == 2);
  CHECK(to_levi({}).size() == 0);
}

TEST_CASE("Levi graph JSON round trip") {
  Rng rng(32);
  const LeviGraph g = to_levi(fixture::random_triples(rng, 12));
  const LeviGraph back = LeviGraph::from_json(g.to_json());
  CHECK(back.vertices == g.vertices);
  CHECK(back.edges == g.edges);
}

TEST_CASE("random triple sets pass the structural checker") {
  Rng rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    const auto triples = fixture::random_triples(rng, 20);
    const auto bad = oracle::levi_violations(to_levi(triples), triples);
    CHECK(bad.empty());
  }
}

TEST_CASE("graph encoding basics") {
  const Config cfg = fixture::tiny_config();
  const ParamStore params = fixture::tiny_model(cfg, fixture::tiny_vocab(), 34);
  Rng rng(35);

  SUBCASE("an isolated vertex only sees itself") {
    LeviGraph one;
    one.vertices = {{"car", LeviVertex::Kind::kEntity}};
    one.edges = BoolMatrix::Constant(1, 1, false);
    const Matrix emb = fixture::random_matrix(1, cfg.model.d_word, rng);
    LeviGraph two = one;
    two.vertices.push_back({"door", LeviVertex::Kind::kEntity});
    two.edges = BoolMatrix::Constant(2, 2, false);
    Matrix emb2(2, cfg.model.d_word);
    emb2 << emb, fixture::random_matrix(1, cfg.model.d_word, rng);
    Tape tape;
    Bound p(tape, params);
    const Matrix a = graph_encode(one, emb, p, cfg.model).vertices.value();
    const Matrix b = graph_encode(two, emb2, p, cfg.model).vertices.value();
    CHECK(a.rows() == 1);
    CHECK(a.cols() == cfg.model.d_model);
    CHECK((a.row(0) - b.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("neighbour attention rows sum to one") {
    const LeviGraph g = to_levi(fixture::random_triples(rng, 6));
    Tape tape;
    Bound p(tape, params);
    AttentionProbe probe;
    ForwardContext ctx;
    ctx.probe = &probe;
    const GraphEncoding enc = graph_encode(g, fixture::random_matrix(g.size(), cfg.model.d_word, rng), p, cfg.model, ctx);
    CHECK(probe.weights.size() == static_cast<std::size_t>(cfg.model.graph_layers * cfg.model.graph_heads));
    const BoolMatrix allowed = g.attention_mask();
    for (const Matrix& w : probe.weights) {
      for (Index r = 0; r < w.rows(); ++r) {
        CHECK(std::abs(w.row(r).sum() - 1.0) < 1e-9);
        for (Index c = 0; c < w.cols(); ++c) {
          if (!allowed(r, c)) CHECK(w(r, c) == 0.0);
        }
      }
    }
    CHECK(enc.entities().rows() == static_cast<Index>(g.entity_rows().size()));
    CHECK(enc.entity_rows == g.entity_rows());
  }
}

TEST_CASE("vertex embeddings average known words") {
  WordTable w(2);
  w.insert("red", Eigen::RowVector2d(1, 0));
  w.insert("car", Eigen::RowVector2d(0, 1));
  const LeviGraph g = to_levi({{"red car", "IsA", "zzz"}});
  const Matrix e = vertex_embeddings(g, w);
  for (Index i = 0; i < g.size(); ++i) {
    const std::string& t = g.vertices[static_cast<std::size_t>(i)].text;
    if (t == "red car") CHECK(e.row(i) == Eigen::RowVector2d(0.5, 0.5));
    if (t == "zzz") CHECK(e.row(i).isZero());
  }
}

TEST_CASE("graph encoder gradients") {
  const check::PropertyResult r = check::grad_graph_encode({});
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("Levi invariants, equivariance and isolation") {
  const check::PropertyResult r = check::levi_invariants({});
  INFO(r.detail);
  CHECK(r.pass);
}
