#ifndef STORYVIS_SYNTHETIC_HPP_
#define STORYVIS_SYNTHETIC_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "storyvis/knowledge_graph.hpp"
#include "storyvis/story.hpp"
#include "storyvis/tree.hpp"

namespace storyvis {

// Miniature story corpus: coloured shapes on plain backgrounds with
// templated captions and hand-written parse trees. The nine characters are
// the 3 colours x 3 shapes; character c is colour c % 3, shape c / 3.
struct SyntheticCorpus {
  std::vector<StoryRecord> stories;
  std::map<std::string, Matrix> images;  // image path -> (S*S) x 3
  WordTable words;
  std::vector<Triple> triples;
  Lexicon lexicon;
};

struct SyntheticOptions {
  int stories = 50;
  int frames = 5;
  Index image_size = 64;
  Index d_word = 300;
  std::uint64_t seed = 1;
};

std::string character_name(int c);  // e.g. "red circle"

SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& opt);

// Writes stories.jsonl, embeddings.txt, triples.tsv, lexicon.tsv and the
// images/ directory under dir.
void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace storyvis

#endif  // STORYVIS_SYNTHETIC_HPP_
