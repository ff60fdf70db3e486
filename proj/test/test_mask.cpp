#include "doctest.h"

#include "fixtures.hpp"
#include "oracles.hpp"
#include "properties.hpp"
#include "storyvis/mask.hpp"

using namespace storyvis;

TEST_CASE("lca heights on the worked example") {
  const ConstituencyTree t = parse_bracketed(fixture::kExampleTree);
  for (Index i = 0; i < 5; ++i) CHECK(lca_height(t, i, i) == 1);
  CHECK(lca_height(t, 1, 2) == 2);
  CHECK(lca_height(t, 1, 4) == 3);
  CHECK(lca_height(t, 0, 1) == 4);
}

TEST_CASE("layer one is the identity for any tree") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const ConstituencyTree t = oracle::to_tree(oracle::random_shape(rng, 12));
    CHECK(layer_mask(t, 1) == BoolMatrix::Identity(t.leaf_count(), t.leaf_count()));
    CHECK(layer_mask(t, t.height()).all());
  }
}

TEST_CASE("worked example: says and hi see each other before Pororo sees says") {
  const ConstituencyTree t = parse_bracketed(fixture::kExampleTree);
  const BoolMatrix l2 = layer_mask(t, 2);
  CHECK(l2(1, 2));
  CHECK(l2(2, 1));
  CHECK_FALSE(l2(0, 1));
  const check::PropertyResult r = check::example_masks({});
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("mask stack shape on the worked example") {
  const MaskStack st = mask_stack(parse_bracketed(fixture::kExampleTree), 4, 3);
  REQUIRE(st.num_layers() == 4);
  for (const BoolMatrix& m : st.layers) {
    CHECK(m.rows() == 5);
    CHECK(m.cols() == 8);
    CHECK(m.leftCols(3).all());
  }
  const MaskStack bare = mask_stack(parse_bracketed(fixture::kExampleTree), 4, 0);
  CHECK(bare.layers.front().cols() == 5);
  CHECK(bare.caption_block(1) == layer_mask(parse_bracketed(fixture::kExampleTree), 2));
}

TEST_CASE("final layer override is configurable") {
  const ConstituencyTree t = parse_bracketed("(A (a x) (B (b y) (C (c z) (D (d u) (E (e v) (f w))))))");
  const BoolMatrix strict = layer_mask(t, 4, MaskRule{4, false});
  const BoolMatrix full = layer_mask(t, 4, MaskRule{4, true});
  CHECK_FALSE(strict(0, 5));
  CHECK(full.all());
  CHECK(layer_mask(t, 3, MaskRule{4, true}) == layer_mask(t, 3));
  CHECK(full_mask_stack(4, 2, 1).layers.back().all());
}

TEST_CASE("layer masks match the brute-force definition") {
  const check::PropertyResult r = check::mask_oracle({});
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("the mask oracle notices a wrong rule") {
  check::CheckOptions opt;
  opt.corrupt_mask_rule = true;
  CHECK_FALSE(check::mask_oracle(opt).pass);
}

TEST_CASE("mask stack invariants on random trees") {
  const check::PropertyResult r = check::mask_invariants({});
  INFO(r.detail);
  CHECK(r.pass);
}
