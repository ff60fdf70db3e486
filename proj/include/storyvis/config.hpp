#ifndef STORYVIS_CONFIG_HPP_
#define STORYVIS_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace storyvis {

struct ModelConfig {
  int d_model = 192;
  int heads = 6;
  int layers = 4;
  int memory_slots = 3;
  int d_node = 50;
  int d_word = 300;
  int ffn_dim = 768;
  int max_positions = 64;
  double dropout = 0.1;
  double layer_norm_eps = 1e-12;
  bool final_layer_full = true;
  int node_embed_depth = 0;  // 0 = whole ancestor chain
  int graph_layers = 2;
  int graph_heads = 6;
  int d_align = 192;
  int grid = 8;
  int image_size = 64;
  int image_hidden = 16;
  int densecap_slots = 10;
  int caption_max_len = 6;
  int num_characters = 9;
  int story_length = 5;
  int disc_pool = 8;
  int disc_features = 64;
  int disc_hidden = 128;

  bool operator==(const ModelConfig&) const = default;
};

struct KnowledgeConfig {
  double expansion_threshold = 0.6;
  int max_triples = 32;

  bool operator==(const KnowledgeConfig&) const = default;
};

struct TrainConfig {
  double lambda_bbox = 1.0;
  double lambda_caption = 1.0;
  double lr_generator = 2e-4;
  double lr_discriminator = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int lr_decay_every = 0;  // steps; 0 disables decay
  double lr_decay_factor = 0.5;
  int image_batch_size = 8;
  int story_batch_size = 4;
  int steps = 200;
  bool mirror_augment = false;

  bool operator==(const TrainConfig&) const = default;
};

struct DataConfig {
  std::string stories;     // JSONL; empty = generate synthetic stories
  std::string embeddings;
  std::string triples;
  std::string lexicon;
  int synthetic_stories = 50;

  bool operator==(const DataConfig&) const = default;
};

struct Config {
  ModelConfig model;
  KnowledgeConfig knowledge;
  TrainConfig train;
  DataConfig data;
  std::uint64_t seed = 1234;

  bool operator==(const Config&) const = default;

  // Throws ConfigError on any inconsistent value.
  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing keys keep their defaults; unknown keys are rejected.
Config config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const Config& c);
Config load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const Config& c);

// Environment variable naming the default config file for the CLI.
inline constexpr const char* kConfigEnvVar = "STORYVIS_CONFIG";

}  // namespace storyvis

#endif  // STORYVIS_CONFIG_HPP_
