#ifndef STORYVIS_TEST_SUPPORT_HPP_
#define STORYVIS_TEST_SUPPORT_HPP_

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <unistd.h>

#include "fixtures.hpp"
#include "storyvis/config.hpp"

namespace storyvis::test {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("storyvis_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Small model that still fits the synthetic corpus (9 characters, 5 frames).
inline Config synthetic_small_config() {
  Config c = fixture::tiny_config();
  c.model.num_characters = 9;
  c.model.story_length = 5;
  c.model.max_positions = 24;
  c.model.caption_max_len = 4;
  c.model.densecap_slots = 4;
  c.data.synthetic_stories = 4;
  c.train.steps = 3;
  c.train.image_batch_size = 2;
  c.train.story_batch_size = 1;
  return c;
}

}  // namespace storyvis::test

#endif  // STORYVIS_TEST_SUPPORT_HPP_
