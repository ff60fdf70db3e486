#include "storyvis/config.hpp"

#include <fstream>
#include <set>

namespace storyvis {
namespace {

template <class V>
void visit(ModelConfig& m, V&& v) {
  v("d_model", m.d_model);
  v("heads", m.heads);
  v("layers", m.layers);
  v("memory_slots", m.memory_slots);
  v("d_node", m.d_node);
  v("d_word", m.d_word);
  v("ffn_dim", m.ffn_dim);
  v("max_positions", m.max_positions);
  v("dropout", m.dropout);
  v("layer_norm_eps", m.layer_norm_eps);
  v("final_layer_full", m.final_layer_full);
  v("node_embed_depth", m.node_embed_depth);
  v("graph_layers", m.graph_layers);
  v("graph_heads", m.graph_heads);
  v("d_align", m.d_align);
  v("grid", m.grid);
  v("image_size", m.image_size);
  v("image_hidden", m.image_hidden);
  v("densecap_slots", m.densecap_slots);
  v("caption_max_len", m.caption_max_len);
  v("num_characters", m.num_characters);
  v("story_length", m.story_length);
  v("disc_pool", m.disc_pool);
  v("disc_features", m.disc_features);
  v("disc_hidden", m.disc_hidden);
}

template <class V>
void visit(KnowledgeConfig& k, V&& v) {
  v("expansion_threshold", k.expansion_threshold);
  v("max_triples", k.max_triples);
}

template <class V>
void visit(TrainConfig& t, V&& v) {
  v("lambda_bbox", t.lambda_bbox);
  v("lambda_caption", t.lambda_caption);
  v("lr_generator", t.lr_generator);
  v("lr_discriminator", t.lr_discriminator);
  v("beta1", t.beta1);
  v("beta2", t.beta2);
  v("lr_decay_every", t.lr_decay_every);
  v("lr_decay_factor", t.lr_decay_factor);
  v("image_batch_size", t.image_batch_size);
  v("story_batch_size", t.story_batch_size);
  v("steps", t.steps);
  v("mirror_augment", t.mirror_augment);
}

template <class V>
void visit(DataConfig& d, V&& v) {
  v("stories", d.stories);
  v("embeddings", d.embeddings);
  v("triples", d.triples);
  v("lexicon", d.lexicon);
  v("synthetic_stories", d.synthetic_stories);
}

template <class Section>
void read_section(const nlohmann::json& j, const std::string& name, Section& section) {
  if (!j.is_object()) throw ConfigError("config section '" + name + "' must be an object");
  std::set<std::string> known;
  visit(section, [&](const char* key, auto& field) {
    known.insert(key);
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
      field = it->template get<std::decay_t<decltype(field)>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + name + "." + key + "' has the wrong type");
    }
  });
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0) throw ConfigError("unknown config key '" + name + "." + key + "'");
  }
}

template <class Section>
nlohmann::json write_section(const Section& section) {
  nlohmann::json j = nlohmann::json::object();
  Section copy = section;
  visit(copy, [&](const char* key, auto& field) { j[key] = field; });
  return j;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid config: " + what);
}

}  // namespace

void Config::validate() const {
  const ModelConfig& m = model;
  require(m.d_model > 0 && m.heads > 0 && m.d_model % m.heads == 0, "model.d_model must be a positive multiple of model.heads");
  require(m.d_model % m.graph_heads == 0 && m.graph_heads > 0, "model.d_model must be a multiple of model.graph_heads");
  require(m.layers >= 1, "model.layers must be >= 1");
  require(m.memory_slots >= 0, "model.memory_slots must be >= 0");
  require(m.d_node > 0 && m.d_word > 0 && m.ffn_dim > 0, "embedding and feed-forward sizes must be positive");
  require(m.max_positions > 0, "model.max_positions must be positive");
  require(m.dropout >= 0.0 && m.dropout < 1.0, "model.dropout must be in [0, 1)");
  require(m.layer_norm_eps > 0.0, "model.layer_norm_eps must be positive");
  require(m.node_embed_depth >= 0, "model.node_embed_depth must be >= 0");
  require(m.graph_layers >= 0, "model.graph_layers must be >= 0");
  require(m.d_align > 0 && m.grid > 0 && m.image_hidden > 0, "generator sizes must be positive");
  require(m.image_size > 0 && m.image_size % m.grid == 0, "model.image_size must be a multiple of model.grid");
  require(m.disc_pool > 0 && m.image_size % m.disc_pool == 0, "model.image_size must be a multiple of model.disc_pool");
  require(m.densecap_slots > 0 && m.caption_max_len > 0, "dense-caption sizes must be positive");
  require(m.num_characters > 0 && m.story_length > 0, "model.num_characters and model.story_length must be positive");
  require(m.disc_features > 0 && m.disc_hidden > 0, "discriminator sizes must be positive");
  require(knowledge.expansion_threshold >= -1.0 && knowledge.expansion_threshold <= 1.0,
          "knowledge.expansion_threshold must be a cosine in [-1, 1]");
  require(knowledge.max_triples >= 0, "knowledge.max_triples must be >= 0");
  require(train.lambda_bbox >= 0.0 && train.lambda_caption >= 0.0, "loss weights must be >= 0");
  require(train.lr_generator > 0.0 && train.lr_discriminator > 0.0, "learning rates must be positive");
  require(train.beta1 >= 0.0 && train.beta1 < 1.0 && train.beta2 >= 0.0 && train.beta2 < 1.0, "Adam betas must be in [0, 1)");
  require(train.lr_decay_every >= 0 && train.lr_decay_factor > 0.0, "learning-rate decay settings are invalid");
  require(train.image_batch_size > 0 && train.story_batch_size > 0, "batch sizes must be positive");
  require(train.steps >= 0, "train.steps must be >= 0");
  require(data.synthetic_stories > 0, "data.synthetic_stories must be positive");
}

Config config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  Config c;
  for (const auto& [key, value] : j.items()) {
    if (key == "model") {
      read_section(value, key, c.model);
    } else if (key == "knowledge") {
      read_section(value, key, c.knowledge);
    } else if (key == "train") {
      read_section(value, key, c.train);
    } else if (key == "data") {
      read_section(value, key, c.data);
    } else if (key == "seed") {
      if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
        throw ConfigError("config key 'seed' must be a non-negative integer");
      }
      c.seed = value.get<std::uint64_t>();
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

nlohmann::json config_to_json(const Config& c) {
  nlohmann::json j;
  j["model"] = write_section(c.model);
  j["knowledge"] = write_section(c.knowledge);
  j["train"] = write_section(c.train);
  j["data"] = write_section(c.data);
  j["seed"] = c.seed;
  return j;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const Config& c) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ConfigError("cannot write config '" + path.string() + "'");
  os << config_to_json(c).dump(2) << '\n';
}

}  // namespace storyvis
