#include "properties.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "storyvis/grad_check.hpp"
#include "storyvis/mask.hpp"
#include "storyvis/model.hpp"

namespace storyvis::check {
namespace {

PropertyResult verdict(bool pass, std::string detail) {
  PropertyResult r;
  r.pass = pass;
  r.detail = std::move(detail);
  return r;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

bool bits_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

// sum(x * r) for a fixed random r, to turn any tensor into a scalar.
Tensor project(const Tensor& x, const Matrix& r) { return sum(mul(x, x.tape().constant(r))); }

struct GradSummary {
  double worst = 0.0;
  std::vector<std::string> parts;

  void add(const std::string& name, const GradCheckReport& rep) {
    worst = std::max(worst, rep.max_relative_error);
    parts.push_back(name + " " + sci(rep.max_relative_error) + " over " + std::to_string(rep.entries_checked) +
                    (rep.max_relative_error >= kGradTolerance ? " (worst " + rep.worst_entry + ")" : ""));
  }

  PropertyResult result() const {
    std::string d = "max rel err " + sci(worst) + ": ";
    for (std::size_t i = 0; i < parts.size(); ++i) d += (i ? "; " : "") + parts[i];
    return verdict(worst < kGradTolerance, d);
  }
};

bool has_prefix(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

using MaskRuleFn = BoolMatrix (*)(const ConstituencyTree&, int);

BoolMatrix rule_under_test(const ConstituencyTree& t, int l) { return layer_mask(t, l); }
BoolMatrix corrupted_rule(const ConstituencyTree& t, int l) { return layer_mask(t, l + 1); }

}  // namespace

// ---------------------------------------------------------------------------

PropertyResult mask_oracle(const CheckOptions& opt) {
  const MaskRuleFn rule = opt.corrupt_mask_rule ? &corrupted_rule : &rule_under_test;
  long trees = 0;
  long mismatches = 0;
  auto compare = [&](const oracle::Shape& s) {
    const ConstituencyTree tree = oracle::to_tree(s);
    ++trees;
    const int top = oracle::shape_height(s) + 1;
    for (int l = 1; l <= top; ++l) {
      if (rule(tree, l) != oracle::brute_force_mask(s, l)) ++mismatches;
    }
  };
  long exhaustive = 0;
  for (int n = 1; n <= 6; ++n) {
    for (const oracle::Shape& s : oracle::enumerate_shapes(n, true)) compare(s);
  }
  exhaustive = trees;
  Rng rng(derive_seed(opt.seed, 10));
  for (int i = 0; i < 1000; ++i) compare(oracle::random_shape(rng, 12));
  return verdict(mismatches == 0, std::to_string(trees) + " trees (" + std::to_string(exhaustive) +
                                      " enumerated up to 6 leaves, 1000 random up to 12), " +
                                      std::to_string(mismatches) + " mismatching layer masks");
}

PropertyResult example_masks(const CheckOptions&) {
  const ConstituencyTree tree = parse_bracketed(fixture::kExampleTree);
  BoolMatrix l1 = BoolMatrix::Identity(5, 5);
  BoolMatrix l2 = l1;
  l2(1, 2) = l2(2, 1) = true;
  BoolMatrix l3 = l1;
  l3.block(1, 1, 4, 4).setConstant(true);
  const BoolMatrix l4 = BoolMatrix::Constant(5, 5, true);
  std::vector<std::string> bad;
  if (layer_mask(tree, 1) != l1) bad.push_back("layer 1 is not the identity");
  if (layer_mask(tree, 2) != l2) bad.push_back("layer 2 differs (says<->hi only)");
  if (layer_mask(tree, 3) != l3) bad.push_back("layer 3 differs (says hi and smiles block)");
  if (layer_mask(tree, 4) != l4) bad.push_back("layer 4 is not all-visible");
  if (lca_height(tree, 1, 2) != 2 || lca_height(tree, 1, 4) != 3) bad.push_back("lca heights differ");
  const MaskStack st = mask_stack(tree, 4, 3);
  if (st.num_layers() != 4) bad.push_back("stack depth");
  for (const BoolMatrix& m : st.layers) {
    if (m.rows() != 5 || m.cols() != 8 || !m.leftCols(3).all()) bad.push_back("stack layer shape or memory columns");
  }
  std::string d = bad.empty() ? "identity at 1; says<->hi from 2; says..smiles block from 3" : "";
  for (const std::string& b : bad) d += (d.empty() ? "" : "; ") + b;
  return verdict(bad.empty(), d);
}

PropertyResult mask_invariants(const CheckOptions& opt) {
  Rng rng(derive_seed(opt.seed, 11));
  long violations = 0;
  const int layers = 4;
  const Index slots = 3;
  for (int t = 0; t < 1000; ++t) {
    oracle::Shape s = oracle::random_shape(rng, 12);
    oracle::relabel(s, rng);
    const ConstituencyTree tree = oracle::to_tree(s);
    const Index n = tree.leaf_count();
    const MaskStack full = mask_stack(tree, layers, slots, true);
    const MaskStack strict = mask_stack(tree, layers, slots, false);
    for (int l = 0; l < layers; ++l) {
      const BoolMatrix& m = full.layers[static_cast<std::size_t>(l)];
      const BoolMatrix cap = full.caption_block(l);
      if (m.rows() != n || m.cols() != n + slots) ++violations;
      if (!m.leftCols(slots).all()) ++violations;
      if (!cap.diagonal().all()) ++violations;
      if (cap != cap.transpose()) ++violations;
      if (l > 0 && (full.caption_block(l - 1).array() && !cap.array()).any()) ++violations;
      if (strict.caption_block(l) != layer_mask(tree, l + 1)) ++violations;
    }
    if (!full.caption_block(layers - 1).all()) ++violations;
    // shape only: relabelling leaves the masks unchanged
    oracle::Shape other = s;
    oracle::relabel(other, rng);
    if (mask_stack(oracle::to_tree(other), layers, slots, false).layers != strict.layers) ++violations;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (lca_height(tree, i, j) != oracle::ancestor_lca_height(s, static_cast<int>(i), static_cast<int>(j))) {
          ++violations;
        }
      }
    }
  }
  // right-branching chain deeper than the stack
  oracle::Shape chain;
  for (int d = 0; d < 6; ++d) {
    oracle::Shape parent;
    parent.children.push_back(oracle::Shape{});
    parent.children.push_back(chain);
    chain = parent;
  }
  const ConstituencyTree deep = oracle::to_tree(chain);
  const Index last = deep.leaf_count() - 1;
  if (!mask_stack(deep, layers, 0, true).layers.back()(0, last)) ++violations;
  if (mask_stack(deep, layers, 0, false).layers.back()(0, last)) ++violations;
  return verdict(violations == 0, "1000 random trees + deep chain, " + std::to_string(violations) + " violations");
}

PropertyResult node_embedding_oracle(const CheckOptions& opt) {
  Rng rng(derive_seed(opt.seed, 12));
  const Vocabularies vocab = fixture::tiny_vocab();
  const Index dim = 7;
  long leaves = 0;
  long mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const Matrix table = fixture::random_matrix(vocab.labels.size(), dim, rng);
    std::map<std::string, Eigen::RowVectorXd> rows;
    for (const std::string& l : vocab.labels.labels()) rows[l] = table.row(vocab.labels.index(l));
    const Eigen::RowVectorXd unk = table.row(0);
    oracle::Shape s = oracle::random_shape(rng, 12);
    oracle::relabel(s, rng);
    if (t % 4 == 0) s.label = "FRAG";  // not in the vocabulary
    const ConstituencyTree tree = oracle::to_tree(s);
    for (Index i = 0; i < tree.leaf_count(); ++i) {
      ++leaves;
      const Eigen::RowVectorXd got = node_embedding(tree, i, vocab.labels, table);
      const Eigen::RowVectorXd want = oracle::ancestor_walk_embedding(s, static_cast<int>(i), rows, unk);
      if (!(got.array() == want.array()).all()) ++mismatches;
    }
  }
  return verdict(mismatches == 0,
                 "1000 random trees, " + std::to_string(leaves) + " leaves, " + std::to_string(mismatches) +
                     " not bit-identical");
}

// ---------------------------------------------------------------------------

PropertyResult primitive_gradients(const CheckOptions& opt) {
  Rng rng(derive_seed(opt.seed, 13));
  const std::vector<std::string> names = primitive_names();
  double worst = 0.0;
  std::string worst_op;
  const int trials = std::max<int>(100, static_cast<int>(names.size()) * 3);
  for (int trial = 0; trial < trials; ++trial) {
    const std::string& op = names[static_cast<std::size_t>(trial) % names.size()];
    const Index r = 1 + static_cast<Index>(uniform_int(rng, 4));
    const Index c = 2 + static_cast<Index>(uniform_int(rng, 4));
    std::vector<Matrix> params;
    Matrix aux;  // non-differentiable extra input
    Matrix aux2;
    if (op == "matmul") {
      const Index k = 1 + static_cast<Index>(uniform_int(rng, 4));
      params = {fixture::random_matrix(r, k, rng), fixture::random_matrix(k, c, rng)};
    } else if (op == "concat_rows") {
      params = {fixture::random_matrix(r, c, rng), fixture::random_matrix(2, c, rng)};
    } else if (op == "concat_cols") {
      params = {fixture::random_matrix(r, c, rng), fixture::random_matrix(r, 3, rng)};
    } else if (op == "layer_norm") {
      params = {fixture::random_matrix(r, c, rng), fixture::random_matrix(1, c, rng),
                fixture::random_matrix(1, c, rng)};
    } else if (op == "log") {
      params = {(fixture::random_matrix(r, c, rng, 0.5).array() + 1.0).matrix()};
    } else if (op == "masked_softmax") {
      params = {fixture::random_matrix(r, c, rng)};
      aux = Matrix::Zero(r, c);
      for (Index i = 0; i < r; ++i) {
        aux(i, static_cast<Index>(uniform_int(rng, static_cast<std::uint64_t>(c)))) = 1.0;
        for (Index j = 0; j < c; ++j) aux(i, j) = uniform01(rng) < 0.5 ? 1.0 : aux(i, j);
      }
    } else if (op == "token_cross_entropy") {
      params = {fixture::random_matrix(r, c, rng, 2.0)};
      aux = Matrix(r, 1);
      aux2 = Matrix(r, 1);
      for (Index i = 0; i < r; ++i) {
        aux(i, 0) = static_cast<double>(uniform_int(rng, static_cast<std::uint64_t>(c)));
        aux2(i, 0) = uniform01(rng);
      }
    } else if (op == "reparameterize") {
      params = {fixture::random_matrix(1, c, rng), fixture::random_matrix(1, c, rng)};
      aux = fixture::random_matrix(1, c, rng);
    } else if (op == "add" || op == "sub" || op == "mul" || op == "minimum" || op == "maximum" ||
               op == "cosine_similarity" || op == "l1_distance" || op == "gaussian_kl") {
      params = {fixture::random_matrix(r, c, rng), fixture::random_matrix(r, c, rng)};
    } else {
      params = {fixture::random_matrix(r, c, rng)};
    }
    Matrix proj;
    auto f = [&](Tape& tape, std::span<const Tensor> in) {
      std::vector<Tensor> args(in.begin(), in.end());
      if (aux.size() > 0) args.push_back(tape.constant(aux));
      if (aux2.size() > 0) args.push_back(tape.constant(aux2));
      const Tensor out = apply_primitive(op, args);
      if (proj.size() == 0) {
        Rng prng(static_cast<std::uint64_t>(trial) + 1);
        proj = fixture::random_matrix(out.rows(), out.cols(), prng);
      }
      return project(out, proj);
    };
    const GradCheckReport rep = grad_check(f, params);
    if (rep.max_relative_error > worst) {
      worst = rep.max_relative_error;
      worst_op = op;
    }
  }
  return verdict(worst < kGradTolerance, std::to_string(trials) + " random cases over " +
                                             std::to_string(names.size()) + " primitives, max rel err " + sci(worst) +
                                             (worst_op.empty() ? "" : " (" + worst_op + ")"));
}

PropertyResult grad_encode_step(const CheckOptions& opt) {
  const Config cfg = fixture::tiny_config();
  const Vocabularies vocab = fixture::tiny_vocab();
  ParamStore params = fixture::tiny_model(cfg, vocab, derive_seed(opt.seed, 20));
  Rng rng(derive_seed(opt.seed, 21));
  const CaptionInputs caption = fixture::random_caption(cfg.model, vocab, rng);
  const Matrix h0 = fixture::random_matrix(1, cfg.model.d_model, rng);
  const Matrix r_out = fixture::random_matrix(caption.words.rows(), cfg.model.d_model, rng);
  const Matrix r_mem = fixture::random_matrix(cfg.model.memory_slots, cfg.model.d_model, rng);
  auto f = [&](Tape& tape, const Bound& p) {
    const MemoryState mem = init_memory(tape.constant(h0), p, cfg.model);
    const StepResult step = encode_step(leaf_inputs(p, caption), caption.masks, mem, p, cfg.model);
    Tensor loss = project(step.encoded, r_out);
    for (const Tensor& m : step.memory.layers) loss = add(loss, project(m, r_mem));
    return loss;
  };
  GradSummary s;
  s.add("encode_step", grad_check(f, params, 1e-5, [](const std::string& n) { return has_prefix(n, "martt."); }));
  return s.result();
}

PropertyResult grad_memory_update(const CheckOptions& opt) {
  Config cfg = fixture::tiny_config();
  const Vocabularies vocab = fixture::tiny_vocab();
  ParamStore params = fixture::tiny_model(cfg, vocab, derive_seed(opt.seed, 22));
  Rng rng(derive_seed(opt.seed, 23));
  params.add("input.memory", fixture::random_matrix(cfg.model.memory_slots, cfg.model.d_model, rng));
  params.add("input.hidden", fixture::random_matrix(4, cfg.model.d_model, rng));
  const Matrix r = fixture::random_matrix(cfg.model.memory_slots, cfg.model.d_model, rng);
  auto f = [&](Tape&, const Bound& p) {
    return project(memory_update(p("input.memory"), p("input.hidden"), p, "martt.layer0.mem", cfg.model), r);
  };
  GradSummary s;
  s.add("memory_update", grad_check(f, params, 1e-5, [](const std::string& n) {
          return has_prefix(n, "martt.layer0.mem.") || has_prefix(n, "input.");
        }));
  return s.result();
}

PropertyResult grad_graph_encode(const CheckOptions& opt) {
  const Config cfg = fixture::tiny_config();
  const Vocabularies vocab = fixture::tiny_vocab();
  ParamStore params = fixture::tiny_model(cfg, vocab, derive_seed(opt.seed, 24));
  Rng rng(derive_seed(opt.seed, 25));
  const LeviGraph g = to_levi(fixture::random_triples(rng, 4, 5, 3));
  const Matrix emb = fixture::random_matrix(g.size(), cfg.model.d_word, rng);
  const Matrix r = fixture::random_matrix(g.size(), cfg.model.d_model, rng);
  auto f = [&](Tape&, const Bound& p) { return project(graph_encode(g, emb, p, cfg.model).vertices, r); };
  GradSummary s;
  s.add("graph_encode", grad_check(f, params, 1e-5, [](const std::string& n) { return has_prefix(n, "graph."); }));
  return s.result();
}

PropertyResult grad_generate_frame(const CheckOptions& opt) {
  Config cfg = fixture::tiny_config();
  cfg.model.d_model = 12;
  cfg.model.image_size = 16;
  cfg.model.grid = 4;
  cfg.model.disc_pool = 4;
  const Vocabularies vocab = fixture::tiny_vocab();
  ParamStore params = fixture::tiny_model(cfg, vocab, derive_seed(opt.seed, 26));
  Rng rng(derive_seed(opt.seed, 27));
  const PreparedStory story = fixture::random_story(cfg, vocab, rng);
  const Matrix noise = fixture::random_matrix(1, cfg.model.d_model, rng);
  const Matrix target = fixture::random_matrix(cfg.model.image_size * cfg.model.image_size, 3, rng);
  auto f = [&](Tape& tape, const Bound& p) {
    const Conditioning cond = cond_augment(tape.constant(story.sentence_embs), noise, p, cfg.model);
    std::vector<Tensor> leaves;
    std::vector<MaskStack> masks;
    for (const PreparedFrame& fr : story.frames) {
      leaves.push_back(leaf_inputs(p, fr.caption));
      masks.push_back(fr.caption.masks);
    }
    const std::vector<Tensor> enc = encode_story(leaves, masks, cond.h0, p, cfg.model);
    const Tensor ent = graph_encode(story.graph, story.vertex_embs, p, cfg.model).entities();
    const GeneratedFrame frame = generate_frame(cond.h0, enc.back(), ent, p, cfg.model);
    return l1_distance(frame.image, tape.constant(target));
  };
  GradSummary s;
  s.add("generate_frame", grad_check(f, params, 1e-5, [](const std::string& n) { return !has_prefix(n, "disc."); }));
  return s.result();
}

PropertyResult grad_loss_terms(const CheckOptions& opt) {
  const Config cfg = fixture::tiny_config();
  const Vocabularies vocab = fixture::tiny_vocab();
  ParamStore params = fixture::tiny_model(cfg, vocab, derive_seed(opt.seed, 28));
  Rng rng(derive_seed(opt.seed, 29));
  const PreparedStory story = fixture::random_story(cfg, vocab, rng);
  const Matrix noise = fixture::random_matrix(1, cfg.model.d_model, rng);
  const auto generator = [](const std::string& n) { return !has_prefix(n, "disc."); };
  GradSummary s;
  const std::vector<std::pair<std::string, Tensor LossTerms<Tensor>::*>> terms = {
      {"kl", &LossTerms<Tensor>::kl},     {"img", &LossTerms<Tensor>::img},
      {"story", &LossTerms<Tensor>::story}, {"bbox", &LossTerms<Tensor>::bbox},
      {"caption", &LossTerms<Tensor>::caption}, {"word", &LossTerms<Tensor>::word}};
  for (const auto& [name, member] : terms) {
    auto f = [&, member = member](Tape&, const Bound& p) {
      const StoryForward fwd = forward_story(story, p, cfg.model, noise);
      return generator_losses(story, fwd, p, cfg).*member;
    };
    s.add(name, grad_check(f, params, 1e-5, generator));
  }
  auto d = [&](Tape&, const Bound& p) {
    return discriminator_loss(story, forward_story(story, p, cfg.model, noise), p, cfg.model);
  };
  s.add("discriminator", grad_check(d, params, 1e-5, [](const std::string& n) { return has_prefix(n, "disc."); }));
  return s.result();
}

// ---------------------------------------------------------------------------

PropertyResult loss_closed_forms(const CheckOptions& opt) {
  Rng rng(derive_seed(opt.seed, 30));
  std::vector<std::string> bad;
  Tape tape;
  auto c = [&](const Matrix& m) { return tape.constant(m); };

  if (kl_loss(c(Matrix::Zero(1, 8)), c(Matrix::Zero(1, 8))).item() != 0.0) bad.push_back("kl(0,0) != 0");

  const Matrix regions = fixture::random_matrix(16, 6, rng);
  const Matrix tokens = fixture::random_matrix(5, 6, rng);
  const std::vector<Tensor> one_r{c(regions)};
  const std::vector<Tensor> one_t{c(tokens)};
  const double t1 = contrastive_word_loss(one_r, one_t, 0).item();
  if (std::abs(t1) > 1e-10) bad.push_back("contrastive T=1 gives " + sci(t1));
  const std::vector<Tensor> same_r(5, c(regions));
  const std::vector<Tensor> same_t(5, c(tokens));
  for (Index k = 0; k < 5; ++k) {
    const double v = contrastive_word_loss(same_r, same_t, k).item();
    if (std::abs(v - std::log(5.0)) > 1e-10) bad.push_back("contrastive identical frames gives " + sci(v));
  }

  Matrix target = fixture::random_matrix(4, 4, rng, 0.2);
  target.array() += 0.5;
  for (Index r = 0; r < 4; ++r) {
    if (target(r, 0) > target(r, 2)) std::swap(target(r, 0), target(r, 2));
    if (target(r, 1) > target(r, 3)) std::swap(target(r, 1), target(r, 3));
  }
  const double mirrored = bbox_loss_mirror(c(mirror_boxes(target)), target).item();
  const double direct = bbox_loss_mirror(c(target), target).item();
  if (mirrored != 0.0 || direct != 0.0) bad.push_back("bbox loss at target or mirror is not 0");

  const Index vocab = 11;
  const Index max_len = 3;
  std::vector<int> ids(4 * max_len, -1);
  for (std::size_t i = 0; i < ids.size(); i += 2) ids[i] = static_cast<int>(uniform_int(rng, vocab));
  const double ce = caption_ce(c(Matrix::Constant(4 * max_len, vocab, 0.7)), ids, max_len).item();
  if (std::abs(ce - std::log(static_cast<double>(vocab))) > 1e-10) bad.push_back("uniform caption CE gives " + sci(ce));

  LossBundle unit{1, 1, 1, 1, 1, 1};
  if (total_objective(unit) != 6.0) bad.push_back("unit total != 6");

  std::string d = bad.empty() ? "kl(0,0)=0, contrastive 0 at T=1 and ln 5 for identical frames, mirror bbox 0, "
                                "uniform CE = ln V"
                              : "";
  for (const std::string& b : bad) d += (d.empty() ? "" : "; ") + b;
  return verdict(bad.empty(), d);
}

PropertyResult loss_loop_oracles(const CheckOptions& opt) {
  Rng rng(derive_seed(opt.seed, 31));
  double worst = 0.0;
  std::string where;
  auto note = [&](const std::string& what, double err) {
    if (err > worst) {
      worst = err;
      where = what;
    }
  };
  for (int trial = 0; trial < 20; ++trial) {
    Tape tape;
    auto c = [&](const Matrix& m) { return tape.constant(m); };
    const Matrix mu = fixture::random_matrix(1, 7, rng);
    const Matrix lv = fixture::random_matrix(1, 7, rng);
    const double kl_want = oracle::kl_loop(mu, lv);
    note("kl", std::abs(kl_loss(c(mu), c(lv)).item() - kl_want) / std::max(1.0, std::abs(kl_want)));

    const Matrix h = fixture::random_matrix(64, 6, rng);
    const Matrix m = fixture::random_matrix(9, 6, rng);
    const Alignment a = align(c(h), c(m));
    const oracle::AlignLoop al = oracle::align_loop(h, m);
    note("align beta", max_abs_diff(a.beta.value(), al.beta));
    note("align context", max_abs_diff(a.context.value(), al.context));

    std::vector<Matrix> regions, toks;
    std::vector<Tensor> rt, tt;
    for (int k = 0; k < 5; ++k) {
      regions.push_back(fixture::random_matrix(16, 6, rng));
      toks.push_back(fixture::random_matrix(3 + k, 6, rng));
      rt.push_back(c(regions.back()));
      tt.push_back(c(toks.back()));
    }
    for (Index k = 0; k < 5; ++k) {
      note("contrastive", std::abs(contrastive_word_loss(rt, tt, k).item() - oracle::contrastive_loop(regions, toks, k)));
    }

    const Index slots = 4, len = 3, vocab = 9;
    const Matrix logits = fixture::random_matrix(slots * len, vocab, rng, 3.0);
    std::vector<int> ids(static_cast<std::size_t>(slots * len), -1);
    for (Index s = 0; s + 1 < slots; ++s) {
      const Index n = 1 + static_cast<Index>(uniform_int(rng, len));
      for (Index t = 0; t < n; ++t) ids[static_cast<std::size_t>(s * len + t)] = static_cast<int>(uniform_int(rng, vocab));
    }
    note("caption", std::abs(caption_ce(c(logits), ids, len).item() - oracle::caption_ce_loop(logits, ids, len)));

    const Matrix pred = fixture::random_matrix(5, 4, rng);
    const Index n = 1 + static_cast<Index>(uniform_int(rng, 5));
    const Matrix target = fixture::random_matrix(n, 4, rng);
    note("bbox", std::abs(bbox_loss_mirror(c(pred), target).item() - oracle::bbox_mirror_loop(pred.topRows(n), target)));
  }
  return verdict(worst < 1e-10, "20 random cases each for kl, align, contrastive (T=5), caption CE, bbox; max abs err " +
                                    sci(worst) + (where.empty() ? "" : " (" + where + ")"));
}

PropertyResult memory_update_oracle(const CheckOptions& opt) {
  Config cfg = fixture::tiny_config();
  cfg.model.d_model = 12;
  cfg.model.memory_slots = 3;
  const Vocabularies vocab = fixture::tiny_vocab();
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const ParamStore params = fixture::tiny_model(cfg, vocab, derive_seed(opt.seed, 40 + static_cast<std::uint64_t>(trial)));
    Rng rng(derive_seed(opt.seed, 60 + static_cast<std::uint64_t>(trial)));
    const Matrix m = fixture::random_matrix(3, 12, rng);
    const Matrix h = fixture::random_matrix(5, 12, rng);
    Tape tape;
    Bound p(tape, params);
    const Tensor got = memory_update(tape.constant(m), tape.constant(h), p, "martt.layer1.mem", cfg.model);
    worst = std::max(worst, max_abs_diff(got.value(), oracle::memory_update_loop(params, "martt.layer1.mem", m, h, cfg.model.heads)));
  }
  return verdict(worst < 1e-10, "10 random cases (T_m=3, T_c=5, d=12), max abs err " + sci(worst));
}

PropertyResult martt_reduction(const CheckOptions& opt) {
  Config cfg = fixture::tiny_config();
  cfg.model.memory_slots = 0;
  cfg.model.layers = 3;
  const Vocabularies vocab = fixture::tiny_vocab();
  const ParamStore params = fixture::tiny_model(cfg, vocab, derive_seed(opt.seed, 70));
  Rng rng(derive_seed(opt.seed, 71));
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 1 + static_cast<Index>(uniform_int(rng, 8));
    const Matrix x = fixture::random_matrix(n, cfg.model.d_word + cfg.model.d_node, rng);
    Tape tape;
    Bound p(tape, params);
    const MemoryState mem = init_memory(tape.constant(fixture::random_matrix(1, cfg.model.d_model, rng)), p, cfg.model);
    const StepResult step = encode_step(tape.constant(x), full_mask_stack(n, cfg.model.layers, 0), mem, p, cfg.model);
    worst = std::max(worst, max_abs_diff(step.encoded.value(), oracle::plain_encoder(params, x, cfg.model)));
  }
  return verdict(worst < 1e-10, "20 random captions, T_m=0 and all-true masks vs plain encoder, max abs err " + sci(worst));
}

PropertyResult martt_causality(const CheckOptions& opt) {
  Config cfg;
  cfg.model.dropout = 0.0;
  const Vocabularies vocab = fixture::tiny_vocab();
  ParamStore params;
  Rng init(derive_seed(opt.seed, 80));
  init_martt_params(params, cfg.model, vocab.labels.size(), init);
  Rng rng(derive_seed(opt.seed, 81));
  const int frames = 5;
  std::vector<CaptionInputs> captions;
  for (int k = 0; k < frames; ++k) captions.push_back(fixture::random_caption(cfg.model, vocab, rng, 8));
  const Matrix h0 = fixture::random_matrix(1, cfg.model.d_model, rng);

  auto run = [&](const std::vector<CaptionInputs>& caps) {
    Tape tape;
    Bound p(tape, params);
    std::vector<Tensor> leaves;
    std::vector<MaskStack> masks;
    for (const CaptionInputs& c : caps) {
      leaves.push_back(leaf_inputs(p, c));
      masks.push_back(c.masks);
    }
    std::vector<Matrix> out;
    for (const Tensor& t : encode_story(leaves, masks, tape.constant(h0), p, cfg.model)) out.push_back(t.value());
    return out;
  };
  const std::vector<Matrix> base = run(captions);
  int violations = 0;
  for (int k = 0; k < frames; ++k) {
    std::vector<CaptionInputs> edited = captions;
    edited[static_cast<std::size_t>(k)].words.array() += 0.25;
    const std::vector<Matrix> out = run(edited);
    for (int j = 0; j < frames; ++j) {
      const bool same = bits_equal(out[static_cast<std::size_t>(j)], base[static_cast<std::size_t>(j)]);
      if (j < k && !same) ++violations;
      if (j >= k && same) ++violations;
    }
  }
  return verdict(violations == 0, "5-frame story, each frame edited in turn: " + std::to_string(violations) +
                                      " frames broke the bit-identical prefix or failed to change");
}

PropertyResult attention_masking(const CheckOptions& opt) {
  Config cfg = fixture::tiny_config();
  const Vocabularies vocab = fixture::tiny_vocab();
  const ParamStore params = fixture::tiny_model(cfg, vocab, derive_seed(opt.seed, 90));
  Rng rng(derive_seed(opt.seed, 91));
  long violations = 0;
  long matrices = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const CaptionInputs cap = fixture::random_caption(cfg.model, vocab, rng, 10);
    Tape tape;
    Bound p(tape, params);
    AttentionProbe probe;
    ForwardContext ctx;
    ctx.probe = &probe;
    const MemoryState mem = init_memory(tape.constant(fixture::random_matrix(1, cfg.model.d_model, rng)), p, cfg.model);
    encode_step(leaf_inputs(p, cap), cap.masks, mem, p, cfg.model, ctx);
    if (static_cast<int>(probe.weights.size()) != cfg.model.layers * cfg.model.heads) ++violations;
    for (std::size_t i = 0; i < probe.weights.size(); ++i) {
      const Matrix& w = probe.weights[i];
      const BoolMatrix& allowed = cap.masks.layers[i / static_cast<std::size_t>(cfg.model.heads)];
      ++matrices;
      for (Index r = 0; r < w.rows(); ++r) {
        if (std::abs(w.row(r).sum() - 1.0) > 1e-9) ++violations;
        for (Index c = 0; c < w.cols(); ++c) {
          if (!allowed(r, c) && w(r, c) != 0.0) ++violations;
        }
      }
    }
  }
  return verdict(violations == 0, std::to_string(matrices) + " attention matrices, " + std::to_string(violations) +
                                      " non-zero masked weights or unnormalised rows");
}

PropertyResult levi_invariants(const CheckOptions& opt) {
  const Config cfg = fixture::tiny_config();
  const Vocabularies vocab = fixture::tiny_vocab();
  const ParamStore params = fixture::tiny_model(cfg, vocab, derive_seed(opt.seed, 100));
  Rng rng(derive_seed(opt.seed, 101));
  long violations = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int count = 1 + static_cast<int>(uniform_int(rng, 20));
    const int phrases = 2 + static_cast<int>(uniform_int(rng, 11));
    const int relations = 1 + static_cast<int>(uniform_int(rng, 5));
    const std::vector<Triple> triples = fixture::random_triples(rng, count, phrases, relations);
    const LeviGraph g = to_levi(triples);
    violations += static_cast<long>(oracle::levi_violations(g, triples).size());

    std::vector<Index> rows = g.entity_rows();
    const std::vector<Index> rel = g.relation_rows();
    rows.insert(rows.end(), rel.begin(), rel.end());
    std::sort(rows.begin(), rows.end());
    std::vector<Index> all(static_cast<std::size_t>(g.size()));
    std::iota(all.begin(), all.end(), Index{0});
    if (rows != all) ++violations;

    // permutation equivariance
    const Index n = g.size();
    std::vector<Index> perm(all);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[uniform_int(rng, i)]);
    LeviGraph pg;
    pg.vertices.resize(static_cast<std::size_t>(n));
    pg.edges = BoolMatrix::Constant(n, n, false);
    const Matrix emb = fixture::random_matrix(n, cfg.model.d_word, rng);
    Matrix pemb(n, cfg.model.d_word);
    for (Index i = 0; i < n; ++i) {
      pg.vertices[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = g.vertices[static_cast<std::size_t>(i)];
      pemb.row(perm[static_cast<std::size_t>(i)]) = emb.row(i);
      for (Index j = 0; j < n; ++j) {
        pg.edges(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) = g.edges(i, j);
      }
    }
    Tape tape;
    Bound p(tape, params);
    const Matrix base = graph_encode(g, emb, p, cfg.model).vertices.value();
    const Matrix moved = graph_encode(pg, pemb, p, cfg.model).vertices.value();
    for (Index i = 0; i < n; ++i) {
      const double d = (moved.row(perm[static_cast<std::size_t>(i)]) - base.row(i)).cwiseAbs().maxCoeff();
      worst = std::max(worst, d);
      if (d > 1e-10) ++violations;
    }

    // a disconnected extra component leaves the original rows alone
    const LeviGraph extra = to_levi(fixture::random_triples(rng, 2, 3, 2));
    LeviGraph joined = g;
    const Index m = extra.size();
    joined.vertices.insert(joined.vertices.end(), extra.vertices.begin(), extra.vertices.end());
    joined.edges = BoolMatrix::Constant(n + m, n + m, false);
    joined.edges.topLeftCorner(n, n) = g.edges;
    joined.edges.bottomRightCorner(m, m) = extra.edges;
    Matrix jemb(n + m, cfg.model.d_word);
    jemb << emb, fixture::random_matrix(m, cfg.model.d_word, rng);
    const Matrix jout = graph_encode(joined, jemb, p, cfg.model).vertices.value();
    const double dj = max_abs_diff(jout.topRows(n), base);
    worst = std::max(worst, dj);
    if (dj > 1e-10) ++violations;
  }
  return verdict(violations == 0, "500 random triple sets: bipartite/degree/count checks, permutation equivariance and "
                                  "component isolation; " +
                                      std::to_string(violations) + " violations, max encoding drift " + sci(worst));
}

// ---------------------------------------------------------------------------

const std::vector<Property>& registry() {
  static const std::vector<Property> props = {
      {"mask-oracle", "layer masks equal the brute-force subtree definition", mask_oracle},
      {"example-masks", "worked example sentence: visibility by layer", example_masks},
      {"mask-invariants", "diagonal, symmetry, monotonicity, memory columns, lca oracle", mask_invariants},
      {"node-embedding-oracle", "cumulative average equals the ancestor walk bit for bit", node_embedding_oracle},
      {"primitive-gradients", "every primitive against central differences", primitive_gradients},
      {"grad-encode-step", "finite differences through one encode step", grad_encode_step},
      {"grad-memory-update", "finite differences through the memory updater", grad_memory_update},
      {"grad-graph-encode", "finite differences through the graph encoder", grad_graph_encode},
      {"grad-generate-frame", "finite differences from an image L1 loss to every generator weight", grad_generate_frame},
      {"grad-loss-terms", "finite differences for each loss term", grad_loss_terms},
      {"loss-closed-forms", "known values of the losses", loss_closed_forms},
      {"loss-loop-oracles", "losses and alignment against explicit loops", loss_loop_oracles},
      {"memory-update-oracle", "memory updater against an explicit loop", memory_update_oracle},
      {"martt-reduction", "no memory + full masks = plain transformer encoder", martt_reduction},
      {"martt-causality", "editing frame k leaves earlier frames bit-identical", martt_causality},
      {"attention-masking", "masked positions get exactly zero attention", attention_masking},
      {"levi-invariants", "graph structure, permutation equivariance, isolation", levi_invariants},
  };
  return props;
}

const Property& find_property(const std::string& name) {
  for (const Property& p : registry()) {
    if (p.name == name) return p;
  }
  throw std::invalid_argument("unknown property '" + name + "'");
}

PropertyResult run_property(const Property& p, const CheckOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  PropertyResult r;
  try {
    r = p.run(opt);
  } catch (const std::exception& e) {
    r = verdict(false, std::string("threw: ") + e.what());
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace storyvis::check
