#ifndef STORYVIS_DATASET_HPP_
#define STORYVIS_DATASET_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "storyvis/archive.hpp"
#include "storyvis/config.hpp"
#include "storyvis/knowledge_graph.hpp"
#include "storyvis/losses.hpp"
#include "storyvis/martt.hpp"
#include "storyvis/story.hpp"

namespace storyvis {

// Corpus-wide vocabularies. Tree labels and dense-caption phrase words are
// collected in sorted order; caption word 0 is "<unk>".
struct Vocabularies {
  LabelVocab labels;
  std::vector<std::string> caption_words;

  int caption_id(const std::string& word) const;
  nlohmann::json to_json() const;
  static Vocabularies from_json(const nlohmann::json& j);
};

Vocabularies build_vocabularies(const std::vector<StoryRecord>& stories);

struct PreparedFrame {
  std::string text;
  CaptionInputs caption;
  DenseCapTarget target;
  Matrix characters;  // 1 x num_characters
  Matrix image;       // (S*S) x 3; a flat mid-grey frame when the record has no image
};

// Everything the model consumes for one story, as stored in its pack.
struct PreparedStory {
  std::string story_id;
  std::vector<PreparedFrame> frames;
  Matrix sentence_embs;  // T x d_word, mean word vector per caption
  LeviGraph graph;       // built from all captions of the story
  Matrix vertex_embs;    // V x d_word

  Index length() const { return static_cast<Index>(frames.size()); }
};

struct CorpusSources {
  std::vector<StoryRecord> stories;
  WordTable words;
  std::vector<Triple> triples;
  Lexicon lexicon;
  std::filesystem::path image_root;  // base for relative image paths
};

// Loads the files named in cfg.data (stories, embeddings, triples, lexicon).
CorpusSources load_sources(const Config& cfg);

// Mean of the known word vectors of a caption (zero if none are known).
Eigen::RowVectorXd sentence_embedding(const std::string& caption, const WordTable& words);

PreparedStory prepare_story(const StoryRecord& record, const Vocabularies& vocab, const CorpusSources& src,
                            const Config& cfg);

struct Corpus {
  Vocabularies vocab;
  std::vector<PreparedStory> stories;
};

Corpus prepare_corpus(const CorpusSources& src, const Config& cfg);

TensorArchive pack_story(const PreparedStory& story);
PreparedStory unpack_story(const TensorArchive& archive);

// Manifest entry for one story, derived from its prepared form.
nlohmann::json manifest_entry(const PreparedStory& story);

// Writes <dir>/packs/<story_id>.pack and <dir>/manifest.json.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus, const Config& cfg);
Corpus read_corpus(const std::filesystem::path& dir);
PreparedStory read_pack(const std::filesystem::path& dir, const std::string& story_id);

}  // namespace storyvis

#endif  // STORYVIS_DATASET_HPP_
