#include "storyvis/story.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "storyvis/knowledge_graph.hpp"
#include "storyvis/tree.hpp"

namespace storyvis {
namespace {

using nlohmann::json;

const json& field(const json& obj, const char* key, const std::string& id, const std::string& path) {
  if (!obj.is_object()) throw StoryError(id, path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw StoryError(id, path + "." + key, "missing");
  return *it;
}

std::string as_string(const json& v, const std::string& id, const std::string& path) {
  if (!v.is_string()) throw StoryError(id, path, "expected a string");
  return v.get<std::string>();
}

double as_number(const json& v, const std::string& id, const std::string& path) {
  if (!v.is_number()) throw StoryError(id, path, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& id, const std::string& path) {
  if (!v.is_number_integer()) throw StoryError(id, path, "expected an integer");
  return v.get<int>();
}

const json& as_array(const json& v, const std::string& id, const std::string& path) {
  if (!v.is_array()) throw StoryError(id, path, "expected an array");
  return v;
}

}  // namespace

StoryRecord story_from_json(const json& j, const StoryLimits& limits) {
  StoryRecord s;
  if (!j.is_object()) throw StoryError("", "$", "expected an object");
  s.story_id = as_string(field(j, "story_id", "", "$"), "", "$.story_id");
  const std::string& id = s.story_id;
  const json& frames = as_array(field(j, "frames", id, "$"), id, "$.frames");
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const std::string fp = "frames[" + std::to_string(k) + "]";
    const json& f = frames[k];
    FrameRecord fr;
    fr.caption = as_string(field(f, "caption", id, fp), id, fp + ".caption");
    fr.tree = as_string(field(f, "tree", id, fp), id, fp + ".tree");
    const json& anns = as_array(field(f, "annotations", id, fp), id, fp + ".annotations");
    for (std::size_t a = 0; a < anns.size(); ++a) {
      const std::string ap = fp + ".annotations[" + std::to_string(a) + "]";
      Annotation an;
      const json& box = as_array(field(anns[a], "box", id, ap), id, ap + ".box");
      if (box.size() != 4) throw StoryError(id, ap + ".box", "expected 4 coordinates");
      for (std::size_t c = 0; c < 4; ++c) an.box[c] = as_number(box[c], id, ap + ".box[" + std::to_string(c) + "]");
      an.phrase = as_string(field(anns[a], "phrase", id, ap), id, ap + ".phrase");
      an.rank = as_int(field(anns[a], "rank", id, ap), id, ap + ".rank");
      fr.annotations.push_back(std::move(an));
    }
    const json& chars = as_array(field(f, "characters", id, fp), id, fp + ".characters");
    for (std::size_t c = 0; c < chars.size(); ++c) {
      fr.characters.push_back(as_int(chars[c], id, fp + ".characters[" + std::to_string(c) + "]"));
    }
    if (auto it = f.find("image"); it != f.end() && !it->is_null()) fr.image = as_string(*it, id, fp + ".image");
    for (const auto& [key, value] : f.items()) {
      static const std::set<std::string> known = {"caption", "tree", "annotations", "characters", "image"};
      if (known.count(key) == 0) throw StoryError(id, fp + "." + key, "unknown field");
    }
    s.frames.push_back(std::move(fr));
  }
  validate_story(s, limits);
  return s;
}

json story_to_json(const StoryRecord& s) {
  json j;
  j["story_id"] = s.story_id;
  j["frames"] = json::array();
  for (const FrameRecord& f : s.frames) {
    json fj;
    fj["caption"] = f.caption;
    fj["tree"] = f.tree;
    fj["annotations"] = json::array();
    for (const Annotation& a : f.annotations) {
      fj["annotations"].push_back({{"box", a.box}, {"phrase", a.phrase}, {"rank", a.rank}});
    }
    fj["characters"] = f.characters;
    if (f.image) fj["image"] = *f.image;
    j["frames"].push_back(std::move(fj));
  }
  return j;
}

void validate_story(const StoryRecord& s, const StoryLimits& limits) {
  const std::string& id = s.story_id;
  if (id.empty()) throw StoryError(id, "$.story_id", "must not be empty");
  if (s.frames.empty()) throw StoryError(id, "$.frames", "story needs at least one frame");
  for (std::size_t k = 0; k < s.frames.size(); ++k) {
    const FrameRecord& f = s.frames[k];
    const std::string fp = "frames[" + std::to_string(k) + "]";
    ConstituencyTree tree;
    try {
      tree = parse_bracketed(f.tree);
    } catch (const ParseError& e) {
      throw StoryError(id, fp + ".tree", e.what());
    }
    std::vector<std::string> caption_tokens;
    for (const std::string& t : tokenize(f.caption)) caption_tokens.push_back(to_lower(t));
    std::vector<std::string> tree_words;
    for (const std::string& w : tree.words()) tree_words.push_back(to_lower(w));
    if (caption_tokens != tree_words) {
      std::string detail;
      for (std::size_t i = 0; i < std::max(caption_tokens.size(), tree_words.size()); ++i) {
        const std::string a = i < caption_tokens.size() ? caption_tokens[i] : "<none>";
        const std::string b = i < tree_words.size() ? tree_words[i] : "<none>";
        if (a != b) {
          detail = "token " + std::to_string(i) + " is '" + a + "' in the caption but '" + b + "' in the tree";
          break;
        }
      }
      throw StoryError(id, fp, "tree words do not match caption tokens (" + detail + ")");
    }
    if (static_cast<int>(f.characters.size()) != limits.num_characters) {
      throw StoryError(id, fp + ".characters",
                       "expected " + std::to_string(limits.num_characters) + " entries, got " +
                           std::to_string(f.characters.size()));
    }
    for (std::size_t c = 0; c < f.characters.size(); ++c) {
      if (f.characters[c] != 0 && f.characters[c] != 1) {
        throw StoryError(id, fp + ".characters[" + std::to_string(c) + "]", "must be 0 or 1");
      }
    }
    if (static_cast<int>(f.annotations.size()) > limits.max_slots) {
      throw StoryError(id, fp + ".annotations",
                       std::to_string(f.annotations.size()) + " slots exceed the limit of " +
                           std::to_string(limits.max_slots));
    }
    for (std::size_t a = 0; a < f.annotations.size(); ++a) {
      const Annotation& an = f.annotations[a];
      const std::string ap = fp + ".annotations[" + std::to_string(a) + "]";
      for (double v : an.box) {
        if (!(v >= 0.0 && v <= 1.0)) throw StoryError(id, ap + ".box", "coordinates must lie in [0, 1]");
      }
      if (!(an.box[0] < an.box[2] && an.box[1] < an.box[3])) {
        throw StoryError(id, ap + ".box", "expected x1 < x2 and y1 < y2");
      }
      if (a > 0 && an.rank <= f.annotations[a - 1].rank) {
        throw StoryError(id, ap + ".rank", "slots must be in increasing confidence-rank order");
      }
      if (tokenize(an.phrase).empty()) throw StoryError(id, ap + ".phrase", "must not be empty");
    }
  }
}

std::vector<StoryRecord> load_stories(const std::filesystem::path& path, const StoryLimits& limits) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open story file '" + path.string() + "'");
  std::vector<StoryRecord> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw StoryError("", "line " + std::to_string(line_no), std::string("invalid JSON: ") + e.what());
    }
    StoryRecord s = story_from_json(j, limits);
    if (!ids.insert(s.story_id).second) throw StoryError(s.story_id, "$.story_id", "duplicate story id");
    out.push_back(std::move(s));
  }
  return out;
}

void save_stories(const std::filesystem::path& path, const std::vector<StoryRecord>& stories) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write story file '" + path.string() + "'");
  for (const StoryRecord& s : stories) os << story_to_json(s).dump() << '\n';
}

}  // namespace storyvis
