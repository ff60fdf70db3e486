#ifndef STORYVIS_STORY_HPP_
#define STORYVIS_STORY_HPP_

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace storyvis {

// Story corpus records, one JSON object per line:
//
//   {"story_id": "s0001",
//    "frames": [{"caption": "the red circle jumps",
//                "tree": "(S (NP (DT the) (JJ red) (NN circle)) (VP (VBZ jumps)))",
//                "annotations": [{"box": [x1, y1, x2, y2], "phrase": "red circle", "rank": 0}, ...],
//                "characters": [0, 1, 0, 0, 0, 0, 0, 0, 0],
//                "image": "images/s0001_0.ppm"}, ...]}
//
// "image" is optional and resolved relative to the JSONL file.

struct Annotation {
  std::array<double, 4> box{};
  std::string phrase;
  int rank = 0;
};

struct FrameRecord {
  std::string caption;
  std::string tree;
  std::vector<Annotation> annotations;
  std::vector<int> characters;
  std::optional<std::string> image;
};

struct StoryRecord {
  std::string story_id;
  std::vector<FrameRecord> frames;
};

// Schema or content violation. what() reads "story <id>: <path>: <message>".
class StoryError : public std::runtime_error {
 public:
  StoryError(const std::string& story_id, const std::string& path, const std::string& message)
      : std::runtime_error("story " + (story_id.empty() ? std::string("?") : story_id) + ": " + path + ": " + message),
        story_id_(story_id),
        path_(path) {}
  const std::string& story_id() const { return story_id_; }
  const std::string& path() const { return path_; }

 private:
  std::string story_id_;
  std::string path_;
};

struct StoryLimits {
  int num_characters = 9;
  int max_slots = 10;
};

StoryRecord story_from_json(const nlohmann::json& j, const StoryLimits& limits);
nlohmann::json story_to_json(const StoryRecord& s);

// Checks boxes, ranks, character vectors, tree syntax and that the tree's
// words match the caption tokens.
void validate_story(const StoryRecord& s, const StoryLimits& limits);

std::vector<StoryRecord> load_stories(const std::filesystem::path& path, const StoryLimits& limits);
void save_stories(const std::filesystem::path& path, const std::vector<StoryRecord>& stories);

}  // namespace storyvis

#endif  // STORYVIS_STORY_HPP_
