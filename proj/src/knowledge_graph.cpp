#include "storyvis/knowledge_graph.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

namespace storyvis {

std::vector<Triple> load_triple_store(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open triple store '" + path.string() + "'");
  std::vector<Triple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected subject<TAB>relation<TAB>object");
    }
    out.push_back({fields[0], fields[1], fields[2]});
  }
  return out;
}

void save_triple_store(const std::filesystem::path& path, const std::vector<Triple>& triples) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write triple store '" + path.string() + "'");
  for (const Triple& t : triples) os << t.subject << '\t' << t.relation << '\t' << t.object << '\n';
}

// ---------------------------------------------------------------------------

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open lexicon '" + path.string() + "'");
  Lexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word, tag;
    ls >> word >> tag;
    if (tag == "noun") {
      lex.add(word, Tag::kNoun);
    } else if (tag == "verb") {
      lex.add(word, Tag::kVerb);
    } else {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": tag must be 'noun' or 'verb'");
    }
  }
  return lex;
}

void Lexicon::add(const std::string& word, Tag tag) {
  const std::string key = to_lower(word);
  if (tags_.count(key) == 0) order_.push_back(key);
  tags_[key] = tag;
}

Lexicon::Tag Lexicon::tag(const std::string& word) const {
  const std::string key = to_lower(word);
  auto it = tags_.find(key);
  if (it != tags_.end()) return it->second;
  auto ends_with = [&](std::string_view suffix) {
    return key.size() > suffix.size() + 2 && key.compare(key.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with("ing") || ends_with("ed") || ends_with("es")) return Tag::kVerb;
  return Tag::kOther;
}

void Lexicon::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write lexicon '" + path.string() + "'");
  for (const std::string& w : order_) os << w << '\t' << (tags_.at(w) == Tag::kNoun ? "noun" : "verb") << '\n';
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':') {
      flush();
      out.emplace_back(1, c);
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

namespace {

double cosine(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace

std::vector<Triple> extract_triples(const std::vector<std::string>& captions, const std::vector<Triple>& store,
                                    const WordTable& words, const Lexicon& lexicon, double expansion_threshold,
                                    int max_triples) {
  std::set<std::string> keywords;
  for (const std::string& caption : captions) {
    for (const std::string& tok : tokenize(caption)) {
      if (lexicon.is_content_word(tok)) keywords.insert(to_lower(tok));
    }
  }
  std::vector<const Eigen::RowVectorXd*> keyword_vectors;
  for (const std::string& k : keywords) {
    if (const auto* v = words.find(k)) keyword_vectors.push_back(v);
  }

  std::unordered_map<std::string, bool> related;
  auto is_related = [&](const std::string& token) {
    auto it = related.find(token);
    if (it != related.end()) return it->second;
    bool hit = keywords.count(token) != 0;
    if (!hit) {
      if (const auto* v = words.find(token)) {
        for (const auto* kv : keyword_vectors) {
          if (cosine(*v, *kv) > expansion_threshold) {
            hit = true;
            break;
          }
        }
      }
    }
    related.emplace(token, hit);
    return hit;
  };
  auto phrase_matches = [&](const std::string& phrase) {
    for (const std::string& tok : tokenize(phrase)) {
      if (is_related(to_lower(tok))) return true;
    }
    return false;
  };

  std::vector<Triple> out;
  if (keywords.empty()) return out;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const Triple& t : store) {
    if (max_triples > 0 && static_cast<int>(out.size()) >= max_triples) break;
    if (!phrase_matches(t.subject) && !phrase_matches(t.object)) continue;
    if (!seen.emplace(t.subject, t.relation, t.object).second) continue;
    out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------

LeviGraph to_levi(const std::vector<Triple>& triples) {
  LeviGraph g;
  std::map<std::string, Index> entity;
  std::vector<std::pair<Index, Index>> edges;
  auto entity_vertex = [&](const std::string& text) {
    auto it = entity.find(text);
    if (it != entity.end()) return it->second;
    g.vertices.push_back({text, LeviVertex::Kind::kEntity});
    const Index id = g.size() - 1;
    entity.emplace(text, id);
    return id;
  };
  for (const Triple& t : triples) {
    const Index s = entity_vertex(t.subject);
    g.vertices.push_back({t.relation, LeviVertex::Kind::kRelation});
    const Index r = g.size() - 1;
    const Index o = entity_vertex(t.object);
    edges.emplace_back(s, r);
    edges.emplace_back(r, o);
  }
  g.edges = BoolMatrix::Constant(g.size(), g.size(), false);
  for (const auto& [u, v] : edges) g.edges(u, v) = true;
  return g;
}

std::vector<Index> LeviGraph::entity_rows() const {
  std::vector<Index> rows;
  for (Index i = 0; i < size(); ++i) {
    if (vertices[static_cast<std::size_t>(i)].kind == LeviVertex::Kind::kEntity) rows.push_back(i);
  }
  return rows;
}

std::vector<Index> LeviGraph::relation_rows() const {
  std::vector<Index> rows;
  for (Index i = 0; i < size(); ++i) {
    if (vertices[static_cast<std::size_t>(i)].kind == LeviVertex::Kind::kRelation) rows.push_back(i);
  }
  return rows;
}

BoolMatrix LeviGraph::attention_mask() const {
  BoolMatrix m = edges;
  for (Index i = 0; i < size(); ++i) {
    for (Index j = 0; j < size(); ++j) m(i, j) = edges(i, j) || edges(j, i) || i == j;
  }
  return m;
}

nlohmann::json LeviGraph::to_json() const {
  nlohmann::json j;
  j["vertices"] = nlohmann::json::array();
  for (const LeviVertex& v : vertices) {
    j["vertices"].push_back({{"text", v.text}, {"kind", v.kind == LeviVertex::Kind::kEntity ? "entity" : "relation"}});
  }
  j["edges"] = nlohmann::json::array();
  for (Index u = 0; u < size(); ++u) {
    for (Index v = 0; v < size(); ++v) {
      if (edges(u, v)) j["edges"].push_back({u, v});
    }
  }
  return j;
}

LeviGraph LeviGraph::from_json(const nlohmann::json& j) {
  LeviGraph g;
  for (const auto& v : j.at("vertices")) {
    const std::string kind = v.at("kind").get<std::string>();
    if (kind != "entity" && kind != "relation") throw std::runtime_error("graph JSON: bad vertex kind '" + kind + "'");
    g.vertices.push_back({v.at("text").get<std::string>(),
                          kind == "entity" ? LeviVertex::Kind::kEntity : LeviVertex::Kind::kRelation});
  }
  g.edges = BoolMatrix::Constant(g.size(), g.size(), false);
  for (const auto& e : j.at("edges")) {
    const Index u = e.at(0).get<Index>();
    const Index v = e.at(1).get<Index>();
    if (u < 0 || v < 0 || u >= g.size() || v >= g.size()) throw std::runtime_error("graph JSON: edge out of range");
    g.edges(u, v) = true;
  }
  return g;
}

Matrix vertex_embeddings(const LeviGraph& graph, const WordTable& words) {
  Matrix out = Matrix::Zero(graph.size(), words.dim());
  for (Index i = 0; i < graph.size(); ++i) {
    int found = 0;
    for (const std::string& tok : tokenize(graph.vertices[static_cast<std::size_t>(i)].text)) {
      if (const auto* v = words.find(tok)) {
        out.row(i) += *v;
        ++found;
      }
    }
    if (found > 0) out.row(i) /= static_cast<double>(found);
  }
  return out;
}

Tensor GraphEncoding::entities() const { return gather_rows(vertices, entity_rows); }

void init_graph_params(ParamStore& store, const ModelConfig& cfg, Rng& rng) {
  add_dense(store, "graph.input", cfg.d_word, cfg.d_model, rng);
  for (int l = 0; l < cfg.graph_layers; ++l) {
    add_transformer_block(store, "graph.block" + std::to_string(l), cfg.d_model, cfg.ffn_dim, rng);
  }
}

GraphEncoding graph_encode(const LeviGraph& graph, const Matrix& embeddings, const Bound& p, const ModelConfig& cfg,
                           const ForwardContext& ctx) {
  if (embeddings.rows() != graph.size()) {
    throw TensorError("graph_encode: " + std::to_string(embeddings.rows()) + " embeddings for " +
                      std::to_string(graph.size()) + " vertices");
  }
  const BoolMatrix mask = graph.attention_mask();
  Tensor h = dense(p, "graph.input", p.tape().constant(embeddings));
  for (int l = 0; l < cfg.graph_layers; ++l) {
    h = transformer_block(p, "graph.block" + std::to_string(l), h, h, mask, cfg.graph_heads, cfg.layer_norm_eps, ctx);
  }
  return {h, graph.entity_rows()};
}

}  // namespace storyvis
