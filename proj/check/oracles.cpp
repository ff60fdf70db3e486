#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace storyvis::oracle {

int leaf_count(const Shape& s) {
  if (s.children.empty()) return 1;
  int n = 0;
  for (const Shape& c : s.children) n += leaf_count(c);
  return n;
}

int shape_height(const Shape& s) {
  int h = 0;
  for (const Shape& c : s.children) h = std::max(h, shape_height(c));
  return h + 1;
}

namespace {

void emit(const Shape& s, std::ostringstream& os, int& word) {
  os << '(' << s.label;
  if (s.children.empty()) {
    os << " w" << word++;
  } else {
    for (const Shape& c : s.children) {
      os << ' ';
      emit(c, os, word);
    }
  }
  os << ')';
}

}  // namespace

std::string to_bracketed(const Shape& s) {
  std::ostringstream os;
  int word = 0;
  emit(s, os, word);
  return os.str();
}

ConstituencyTree to_tree(const Shape& s) { return parse_bracketed(to_bracketed(s)); }

namespace {

// compositions of n into k >= 2 positive parts
void compositions(int n, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (n == 0) {
    if (cur.size() >= 2) out.push_back(cur);
    return;
  }
  for (int first = 1; first <= n; ++first) {
    cur.push_back(first);
    compositions(n - first, cur, out);
    cur.pop_back();
  }
}

const std::vector<Shape>& plain_shapes(int n) {
  static std::map<int, std::vector<Shape>> memo;
  auto it = memo.find(n);
  if (it != memo.end()) return it->second;
  std::vector<Shape> out;
  if (n == 1) {
    out.push_back(Shape{});
  } else {
    std::vector<std::vector<int>> comps;
    std::vector<int> cur;
    compositions(n, cur, comps);
    for (const std::vector<int>& parts : comps) {
      std::vector<Shape> partial{Shape{}};
      for (int part : parts) {
        std::vector<Shape> next;
        for (const Shape& base : partial) {
          for (const Shape& child : plain_shapes(part)) {
            Shape s = base;
            s.children.push_back(child);
            next.push_back(std::move(s));
          }
        }
        partial = std::move(next);
      }
      for (Shape& s : partial) out.push_back(std::move(s));
    }
  }
  return memo.emplace(n, std::move(out)).first->second;
}

int node_count(const Shape& s) {
  int n = 1;
  for (const Shape& c : s.children) n += node_count(c);
  return n;
}

Shape wrap(const Shape& s, unsigned mask, int& idx) {
  const bool wrapped = (mask >> idx) & 1u;
  ++idx;
  Shape copy;
  copy.label = s.label;
  for (const Shape& c : s.children) copy.children.push_back(wrap(c, mask, idx));
  if (!wrapped) return copy;
  Shape parent;
  parent.label = "U";
  parent.children.push_back(std::move(copy));
  return parent;
}

}  // namespace

std::vector<Shape> enumerate_shapes(int leaves, bool unary) {
  if (leaves < 1) return {};
  const std::vector<Shape>& plain = plain_shapes(leaves);
  if (!unary) return plain;
  std::vector<Shape> out;
  for (const Shape& s : plain) {
    const int m = node_count(s);
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
      int idx = 0;
      out.push_back(wrap(s, mask, idx));
    }
  }
  return out;
}

namespace {

Shape random_build(Rng& rng, int n, double unary_prob) {
  Shape s;
  if (n > 1) {
    const int max_parts = std::min(n, 4);
    const int k = 2 + static_cast<int>(uniform_int(rng, static_cast<std::uint64_t>(max_parts - 1)));
    // k - 1 distinct cut points in 1..n-1
    std::vector<int> cuts;
    for (int c = 1; c < n; ++c) cuts.push_back(c);
    for (std::size_t i = cuts.size(); i > 1; --i) std::swap(cuts[i - 1], cuts[uniform_int(rng, i)]);
    cuts.resize(static_cast<std::size_t>(k - 1));
    std::sort(cuts.begin(), cuts.end());
    int prev = 0;
    cuts.push_back(n);
    for (int c : cuts) {
      s.children.push_back(random_build(rng, c - prev, unary_prob));
      prev = c;
    }
  }
  while (uniform01(rng) < unary_prob) {
    Shape parent;
    parent.children.push_back(std::move(s));
    s = std::move(parent);
  }
  return s;
}

}  // namespace

Shape random_shape(Rng& rng, int max_leaves, double unary_prob) {
  const int n = 1 + static_cast<int>(uniform_int(rng, static_cast<std::uint64_t>(max_leaves)));
  return random_build(rng, n, unary_prob);
}

void relabel(Shape& s, Rng& rng) {
  static const char* tags[] = {"NN", "VB", "DT", "JJ", "IN", "PRP", "NNP"};
  static const char* phrases[] = {"S", "NP", "VP", "PP", "ADJP", "SBAR"};
  if (s.children.empty()) {
    s.label = tags[uniform_int(rng, 7)];
  } else {
    s.label = phrases[uniform_int(rng, 6)];
  }
  for (Shape& c : s.children) relabel(c, rng);
}

namespace {

struct Span {
  int height;
  int first;
  int last;
  std::vector<std::string> path;  // labels from this node up to the root
};

// Collects every node with its height and leaf range.
int collect(const Shape& s, int& next_leaf, std::vector<Span>& spans, std::vector<std::vector<int>>& leaf_ancestors,
            std::vector<int>& stack) {
  const int id = static_cast<int>(spans.size());
  spans.push_back({0, next_leaf, next_leaf, {}});
  stack.push_back(id);
  int h = 0;
  if (s.children.empty()) {
    leaf_ancestors.push_back(stack);
    ++next_leaf;
  } else {
    for (const Shape& c : s.children) h = std::max(h, collect(c, next_leaf, spans, leaf_ancestors, stack));
  }
  stack.pop_back();
  spans[static_cast<std::size_t>(id)].height = h + 1;
  spans[static_cast<std::size_t>(id)].last = next_leaf - 1;
  return h + 1;
}

}  // namespace

BoolMatrix brute_force_mask(const Shape& s, int layer) {
  std::vector<Span> spans;
  std::vector<std::vector<int>> anc;
  std::vector<int> stack;
  int next = 0;
  collect(s, next, spans, anc, stack);
  BoolMatrix m = BoolMatrix::Constant(next, next, false);
  for (int i = 0; i < next; ++i) {
    for (int j = 0; j < next; ++j) {
      for (const Span& sp : spans) {
        if (sp.height <= layer && sp.first <= i && i <= sp.last && sp.first <= j && j <= sp.last) {
          m(i, j) = true;
          break;
        }
      }
    }
  }
  return m;
}

int ancestor_lca_height(const Shape& s, int i, int j) {
  std::vector<Span> spans;
  std::vector<std::vector<int>> anc;
  std::vector<int> stack;
  int next = 0;
  collect(s, next, spans, anc, stack);
  if (i < 0 || j < 0 || i >= next || j >= next) throw std::out_of_range("ancestor_lca_height: bad leaf");
  const std::set<int> a(anc[static_cast<std::size_t>(i)].begin(), anc[static_cast<std::size_t>(i)].end());
  int best = -1;
  for (int id : anc[static_cast<std::size_t>(j)]) {
    if (a.count(id) == 0) continue;
    const int h = spans[static_cast<std::size_t>(id)].height;
    if (best < 0 || h < best) best = h;
  }
  return best;
}

namespace {

bool label_path(const Shape& s, int& next_leaf, int target, std::vector<std::string>& path) {
  path.push_back(s.label);
  if (s.children.empty()) {
    if (next_leaf++ == target) return true;
  } else {
    for (const Shape& c : s.children) {
      if (label_path(c, next_leaf, target, path)) return true;
    }
  }
  path.pop_back();
  return false;
}

}  // namespace

Eigen::RowVectorXd ancestor_walk_embedding(const Shape& s, int leaf,
                                           const std::map<std::string, Eigen::RowVectorXd>& rows,
                                           const Eigen::RowVectorXd& unk) {
  std::vector<std::string> path;
  int next = 0;
  if (!label_path(s, next, leaf, path)) throw std::out_of_range("ancestor_walk_embedding: bad leaf");
  std::reverse(path.begin(), path.end());
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(unk.size());
  for (const std::string& label : path) {
    auto it = rows.find(label);
    acc += it != rows.end() ? it->second : unk;
  }
  return acc / static_cast<double>(path.size());
}

// ---------------------------------------------------------------------------

double kl_loop(const Matrix& mu, const Matrix& logvar) {
  double s = 0.0;
  for (Index i = 0; i < mu.rows(); ++i) {
    for (Index j = 0; j < mu.cols(); ++j) {
      const double m = mu(i, j);
      const double lv = logvar(i, j);
      s += std::exp(lv) + m * m - 1.0 - lv;
    }
  }
  return 0.5 * s;
}

AlignLoop align_loop(const Matrix& regions, const Matrix& tokens) {
  const Index nr = regions.rows();
  const Index nt = tokens.rows();
  const Index d = regions.cols();
  AlignLoop out{Matrix(nr, nt), Matrix::Zero(nr, d)};
  for (Index j = 0; j < nr; ++j) {
    std::vector<double> s(static_cast<std::size_t>(nt));
    double mx = -INFINITY;
    for (Index i = 0; i < nt; ++i) {
      double dot = 0.0;
      for (Index c = 0; c < d; ++c) dot += regions(j, c) * tokens(i, c);
      s[static_cast<std::size_t>(i)] = dot;
      mx = std::max(mx, dot);
    }
    double z = 0.0;
    for (double v : s) z += std::exp(v - mx);
    for (Index i = 0; i < nt; ++i) out.beta(j, i) = std::exp(s[static_cast<std::size_t>(i)] - mx) / z;
    for (Index i = 0; i < nt; ++i) {
      for (Index c = 0; c < d; ++c) out.context(j, c) += out.beta(j, i) * tokens(i, c);
    }
  }
  return out;
}

double cosine_loop(const Matrix& a, Index ra, const Matrix& b, Index rb) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (Index c = 0; c < a.cols(); ++c) {
    dot += a(ra, c) * b(rb, c);
    na += a(ra, c) * a(ra, c);
    nb += b(rb, c) * b(rb, c);
  }
  return dot / (std::max(std::sqrt(na), 1e-12) * std::max(std::sqrt(nb), 1e-12));
}

namespace {

double log_sum_exp(const std::vector<double>& v) {
  double mx = -INFINITY;
  for (double x : v) mx = std::max(mx, x);
  double z = 0.0;
  for (double x : v) z += std::exp(x - mx);
  return mx + std::log(z);
}

}  // namespace

double word_score_loop(const Matrix& regions, const Matrix& tokens) {
  const AlignLoop a = align_loop(regions, tokens);
  std::vector<double> cos;
  for (Index j = 0; j < regions.rows(); ++j) cos.push_back(cosine_loop(regions, j, a.context, j));
  return log_sum_exp(cos);
}

double contrastive_loop(const std::vector<Matrix>& regions, const std::vector<Matrix>& tokens, Index k) {
  std::vector<double> scores;
  for (const Matrix& r : regions) scores.push_back(word_score_loop(r, tokens[static_cast<std::size_t>(k)]));
  return log_sum_exp(scores) - scores[static_cast<std::size_t>(k)];
}

double caption_ce_loop(const Matrix& logits, const std::vector<int>& targets, Index max_len) {
  const Index slots = logits.rows() / max_len;
  double total = 0.0;
  int used = 0;
  for (Index s = 0; s < slots; ++s) {
    double slot = 0.0;
    int n = 0;
    for (Index t = 0; t < max_len; ++t) {
      const Index r = s * max_len + t;
      const int y = targets[static_cast<std::size_t>(r)];
      if (y < 0) continue;
      if (y >= logits.cols()) throw std::out_of_range("caption_ce_loop: target id out of range");
      std::vector<double> row;
      for (Index v = 0; v < logits.cols(); ++v) row.push_back(logits(r, v));
      slot += log_sum_exp(row) - logits(r, y);
      ++n;
    }
    if (n == 0) continue;
    total += slot / n;
    ++used;
  }
  return used == 0 ? 0.0 : total / used;
}

double bbox_mirror_loop(const Matrix& pred, const Matrix& target) {
  const Index n = target.rows();
  if (n == 0) return 0.0;
  double direct = 0.0;
  double mirrored = 0.0;
  for (Index r = 0; r < n; ++r) {
    const double x1 = target(r, 0), y1 = target(r, 1), x2 = target(r, 2), y2 = target(r, 3);
    const double m[4] = {1.0 - x2, y1, 1.0 - x1, y2};
    for (Index c = 0; c < 4; ++c) {
      direct += std::abs(pred(r, c) - target(r, c));
      mirrored += std::abs(pred(r, c) - m[c]);
    }
  }
  return std::min(direct, mirrored) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

Matrix matmul_loop(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul_loop: inner dimensions differ");
  Matrix c = Matrix::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index k = 0; k < a.cols(); ++k) {
      for (Index j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
    }
  }
  return c;
}

Matrix dense_loop(const ParamStore& p, const std::string& prefix, const Matrix& x) {
  Matrix y = matmul_loop(x, p.at(prefix + ".w"));
  const Matrix& b = p.at(prefix + ".b");
  for (Index i = 0; i < y.rows(); ++i) {
    for (Index j = 0; j < y.cols(); ++j) y(i, j) += b(0, j);
  }
  return y;
}

Matrix layer_norm_loop(const Matrix& x, const Matrix& g, const Matrix& b, double eps) {
  Matrix y(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    double mu = 0.0;
    for (Index j = 0; j < x.cols(); ++j) mu += x(i, j);
    mu /= n;
    double var = 0.0;
    for (Index j = 0; j < x.cols(); ++j) var += (x(i, j) - mu) * (x(i, j) - mu);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (Index j = 0; j < x.cols(); ++j) y(i, j) = (x(i, j) - mu) * inv * g(0, j) + b(0, j);
  }
  return y;
}

Matrix attention_loop(const ParamStore& p, const std::string& prefix, const Matrix& queries, const Matrix& keys,
                      const BoolMatrix& allowed, int heads) {
  const Matrix q = dense_loop(p, prefix + ".q", queries);
  const Matrix k = dense_loop(p, prefix + ".k", keys);
  const Matrix v = dense_loop(p, prefix + ".v", keys);
  const Index dim = q.cols();
  const Index dh = dim / heads;
  Matrix ctx = Matrix::Zero(q.rows(), dim);
  for (int h = 0; h < heads; ++h) {
    for (Index r = 0; r < q.rows(); ++r) {
      std::vector<double> s(static_cast<std::size_t>(k.rows()), -INFINITY);
      double mx = -INFINITY;
      for (Index c = 0; c < k.rows(); ++c) {
        if (!allowed(r, c)) continue;
        double dot = 0.0;
        for (Index e = 0; e < dh; ++e) dot += q(r, h * dh + e) * k(c, h * dh + e);
        s[static_cast<std::size_t>(c)] = dot / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, s[static_cast<std::size_t>(c)]);
      }
      double z = 0.0;
      for (Index c = 0; c < k.rows(); ++c) {
        if (allowed(r, c)) z += std::exp(s[static_cast<std::size_t>(c)] - mx);
      }
      for (Index c = 0; c < k.rows(); ++c) {
        if (!allowed(r, c)) continue;
        const double w = std::exp(s[static_cast<std::size_t>(c)] - mx) / z;
        for (Index e = 0; e < dh; ++e) ctx(r, h * dh + e) += w * v(c, h * dh + e);
      }
    }
  }
  return dense_loop(p, prefix + ".o", ctx);
}

Matrix memory_update_loop(const ParamStore& p, const std::string& prefix, const Matrix& memory, const Matrix& hidden,
                          int heads) {
  Matrix kv(memory.rows() + hidden.rows(), memory.cols());
  kv << memory, hidden;
  const BoolMatrix all = BoolMatrix::Constant(memory.rows(), kv.rows(), true);
  const Matrix s = attention_loop(p, prefix + ".attn", memory, kv, all, heads);
  const Matrix mc = matmul_loop(memory, p.at(prefix + ".w_mc"));
  const Matrix sc = matmul_loop(s, p.at(prefix + ".w_sc"));
  const Matrix mz = matmul_loop(memory, p.at(prefix + ".w_mz"));
  const Matrix sz = matmul_loop(s, p.at(prefix + ".w_sz"));
  const Matrix& bc = p.at(prefix + ".b_c");
  const Matrix& bz = p.at(prefix + ".b_z");
  Matrix out(memory.rows(), memory.cols());
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = 0; j < out.cols(); ++j) {
      const double c = std::tanh(mc(i, j) + sc(i, j) + bc(0, j));
      const double z = 1.0 / (1.0 + std::exp(-(mz(i, j) + sz(i, j) + bz(0, j))));
      out(i, j) = (1.0 - z) * c + z * memory(i, j);
    }
  }
  return out;
}

Matrix plain_encoder(const ParamStore& p, const Matrix& leaves, const ModelConfig& cfg) {
  const Index n = leaves.rows();
  Matrix h = dense_loop(p, "martt.input", leaves);
  const Matrix& pos = p.at("martt.pos");
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < h.cols(); ++j) h(i, j) += pos(i, j);
  }
  const BoolMatrix all = BoolMatrix::Constant(n, n, true);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string pre = "martt.layer" + std::to_string(l);
    const Matrix a = attention_loop(p, pre + ".attn", h, h, all, cfg.heads);
    const Matrix x1 = layer_norm_loop(h + a, p.at(pre + ".ln1.g"), p.at(pre + ".ln1.b"), cfg.layer_norm_eps);
    Matrix f = dense_loop(p, pre + ".ffn1", x1);
    for (Index i = 0; i < f.size(); ++i) f.data()[i] = std::max(0.0, f.data()[i]);
    f = dense_loop(p, pre + ".ffn2", f);
    h = layer_norm_loop(x1 + f, p.at(pre + ".ln2.g"), p.at(pre + ".ln2.b"), cfg.layer_norm_eps);
  }
  return h;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    const bool punct = c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
    if (std::isspace(static_cast<unsigned char>(c)) || punct) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
      if (punct) out.emplace_back(1, c);
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::vector<Triple> naive_extract(const std::vector<std::string>& captions, const std::vector<Triple>& store,
                                  const WordTable& words, const Lexicon& lexicon, double threshold,
                                  int max_triples) {
  std::vector<std::string> keywords;
  for (const std::string& c : captions) {
    for (const std::string& t : split_words(c)) {
      if (lexicon.tag(t) != Lexicon::Tag::kOther) keywords.push_back(lower(t));
    }
  }
  auto related = [&](const std::string& token) {
    for (const std::string& k : keywords) {
      if (k == token) return true;
      const Eigen::RowVectorXd* a = words.find(token);
      const Eigen::RowVectorXd* b = words.find(k);
      if (a == nullptr || b == nullptr) continue;
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (Index i = 0; i < a->size(); ++i) {
        dot += (*a)(i) * (*b)(i);
        na += (*a)(i) * (*a)(i);
        nb += (*b)(i) * (*b)(i);
      }
      if (na > 0.0 && nb > 0.0 && dot / (std::sqrt(na) * std::sqrt(nb)) > threshold) return true;
    }
    return false;
  };
  auto phrase_related = [&](const std::string& phrase) {
    for (const std::string& t : split_words(phrase)) {
      if (related(lower(t))) return true;
    }
    return false;
  };
  std::vector<Triple> out;
  for (const Triple& t : store) {
    if (!phrase_related(t.subject) && !phrase_related(t.object)) continue;
    if (std::find(out.begin(), out.end(), t) != out.end()) continue;
    out.push_back(t);
  }
  if (max_triples > 0 && static_cast<int>(out.size()) > max_triples) out.resize(static_cast<std::size_t>(max_triples));
  return out;
}

std::vector<std::string> levi_violations(const LeviGraph& g, const std::vector<Triple>& triples) {
  std::vector<std::string> bad;
  std::set<std::string> phrases;
  for (const Triple& t : triples) {
    phrases.insert(t.subject);
    phrases.insert(t.object);
  }
  const Index n = g.size();
  std::vector<Index> relations;
  std::set<std::string> entity_texts;
  for (Index v = 0; v < n; ++v) {
    const LeviVertex& vx = g.vertices[static_cast<std::size_t>(v)];
    if (vx.kind == LeviVertex::Kind::kRelation) {
      relations.push_back(v);
    } else if (!entity_texts.insert(vx.text).second) {
      bad.push_back("duplicate entity vertex '" + vx.text + "'");
    } else if (phrases.count(vx.text) == 0) {
      bad.push_back("entity vertex '" + vx.text + "' not in any triple");
    }
  }
  if (entity_texts.size() != phrases.size()) bad.push_back("entity count differs from distinct phrase count");
  if (relations.size() != triples.size()) bad.push_back("relation count differs from triple count");
  if (n != static_cast<Index>(phrases.size() + triples.size())) bad.push_back("vertex count is not entities + triples");
  if (g.edges.rows() != n || g.edges.cols() != n) {
    bad.push_back("edge matrix shape does not match vertex count");
    return bad;
  }
  Index edge_count = 0;
  for (Index u = 0; u < n; ++u) {
    for (Index v = 0; v < n; ++v) {
      if (!g.edges(u, v)) continue;
      ++edge_count;
      if (g.vertices[static_cast<std::size_t>(u)].kind == g.vertices[static_cast<std::size_t>(v)].kind) {
        bad.push_back("edge " + std::to_string(u) + "->" + std::to_string(v) + " joins vertices of the same kind");
      }
    }
  }
  if (edge_count != 2 * static_cast<Index>(triples.size())) bad.push_back("edge count is not twice the triple count");
  for (std::size_t i = 0; i < relations.size() && i < triples.size(); ++i) {
    const Index r = relations[i];
    int in = 0, out = 0;
    bool subject_ok = false, object_ok = false;
    for (Index u = 0; u < n; ++u) {
      const LeviVertex& vx = g.vertices[static_cast<std::size_t>(u)];
      if (g.edges(u, r)) {
        ++in;
        subject_ok = subject_ok || vx.text == triples[i].subject;
      }
      if (g.edges(r, u)) {
        ++out;
        object_ok = object_ok || vx.text == triples[i].object;
      }
    }
    if (in < 1 || out < 1) bad.push_back("relation vertex " + std::to_string(r) + " lacks an in or out edge");
    if (!subject_ok || !object_ok) bad.push_back("relation vertex " + std::to_string(r) + " is not wired to its triple");
    if (g.vertices[static_cast<std::size_t>(r)].text != triples[i].relation) {
      bad.push_back("relation vertex " + std::to_string(r) + " has the wrong label");
    }
  }
  const BoolMatrix att = g.attention_mask();
  for (Index u = 0; u < n; ++u) {
    for (Index v = 0; v < n; ++v) {
      const bool want = g.edges(u, v) || g.edges(v, u) || u == v;
      if (att(u, v) != want) {
        bad.push_back("attention mask differs at " + std::to_string(u) + "," + std::to_string(v));
        return bad;
      }
    }
  }
  return bad;
}

namespace {

// Terminal words of a bracketed tree: bare tokens that are not labels.
int count_tree_words(const std::string& tree) {
  int words = 0;
  bool expect_label = false;
  std::string tok;
  auto flush = [&] {
    if (tok.empty()) return;
    if (expect_label) {
      expect_label = false;
    } else {
      ++words;
    }
    tok.clear();
  };
  for (char c : tree) {
    if (c == '(') {
      flush();
      expect_label = true;
    } else if (c == ')' || std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      tok.push_back(c);
    }
  }
  flush();
  return words;
}

}  // namespace

nlohmann::json manifest_entry(const StoryRecord& record, const std::vector<Triple>& store, const WordTable& words,
                              const Lexicon& lexicon, const Config& cfg) {
  nlohmann::json e;
  e["story_id"] = record.story_id;
  e["file"] = "packs/" + record.story_id + ".pack";
  e["frames"] = record.frames.size();
  nlohmann::json lengths = nlohmann::json::array();
  nlohmann::json annotations = nlohmann::json::array();
  std::vector<std::string> captions;
  for (const FrameRecord& f : record.frames) {
    lengths.push_back(count_tree_words(f.tree));
    annotations.push_back(f.annotations.size());
    captions.push_back(f.caption);
  }
  e["caption_lengths"] = lengths;
  e["annotations"] = annotations;
  const std::vector<Triple> triples =
      naive_extract(captions, store, words, lexicon, cfg.knowledge.expansion_threshold, cfg.knowledge.max_triples);
  std::set<std::string> phrases;
  for (const Triple& t : triples) {
    phrases.insert(t.subject);
    phrases.insert(t.object);
  }
  e["vertices"] = phrases.size() + triples.size();
  e["entities"] = phrases.size();
  return e;
}

}  // namespace storyvis::oracle
