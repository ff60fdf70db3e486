#ifndef STORYVIS_TOOLS_COMMANDS_HPP_
#define STORYVIS_TOOLS_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "properties.hpp"
#include "storyvis/config.hpp"
#include "storyvis/dataset.hpp"
#include "storyvis/train.hpp"

namespace storyvis::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

// Default config path when --config is not given.
inline constexpr const char* kConfigEnv = "STORYVIS_CONFIG";

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
};

// Defaults, then the config file (flag or env var), then flag overrides.
Config resolve_config(const Overrides& o);

void cmd_synth(const Config& cfg, const std::filesystem::path& out);

// Packs the corpus named by cfg.data into out (manifest.json + one pack per story).
Corpus cmd_preprocess(const Config& cfg, const std::filesystem::path& out);

struct MaskDump {
  std::string text;
  nlohmann::json json;
};
MaskDump render_masks(const PreparedStory& story, int frame);
MaskDump cmd_dump_masks(const std::filesystem::path& packs, const std::string& story_id, int frame,
                        const std::filesystem::path& out);

nlohmann::json cmd_dump_graph(const std::filesystem::path& packs, const std::string& story_id,
                              const std::filesystem::path& out);

// Synthesises data under out/data when cfg.data.stories is empty, packs it
// under out/packs and trains from the packs into out.
TrainResult cmd_train_demo(Config cfg, const std::filesystem::path& out, std::ostream* log);

struct CheckRow {
  std::string name;
  check::PropertyResult result;
};
// Runs the named properties (all when empty) and prints a table.
std::vector<CheckRow> cmd_check(const check::CheckOptions& opt, const std::vector<std::string>& only,
                                std::ostream& os);

// Whole command line; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace storyvis::cli

#endif  // STORYVIS_TOOLS_COMMANDS_HPP_
