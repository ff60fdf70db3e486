#ifndef STORYVIS_TRAIN_HPP_
#define STORYVIS_TRAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "storyvis/dataset.hpp"
#include "storyvis/losses.hpp"
#include "storyvis/params.hpp"

namespace storyvis {

// One master seed fans out to independent streams.
struct SeedPlan {
  std::uint64_t master = 0;
  std::uint64_t init = 0;
  std::uint64_t noise = 0;
  std::uint64_t data = 0;

  nlohmann::json to_json() const;
};

SeedPlan seed_plan(std::uint64_t master);

class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps = 1e-8) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  // Updates every parameter that has a gradient entry.
  void step(ParamStore& params, const std::map<std::string, Matrix>& grads);
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
  std::map<std::string, Matrix> m_;
  std::map<std::string, Matrix> v_;
};

// Horizontally mirrored copy: images flipped, boxes mirrored. Captions are
// left untouched.
PreparedStory mirror_story(const PreparedStory& story, Index image_size);

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int last_good_step)
      : std::runtime_error(what), last_good_step_(last_good_step) {}
  int last_good_step() const { return last_good_step_; }

 private:
  int last_good_step_;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // losses.csv, checkpoint.bin, seeds.json, frames/
  bool write_frames = true;
  std::ostream* log = nullptr;
};

struct TrainResult {
  std::vector<LossBundle> history;  // one row per step, as written to losses.csv
  ParamStore params;
};

inline constexpr const char* kLossCsvHeader = "step,kl,img,story,bbox,caption,word,total";

// Per step: one discriminator update on a story batch, then two generator
// updates (image batch, then story batch). The logged row is the generator
// objective of the first generator update, before it is applied. With
// cfg.train.steps == 0 a single row of initial losses is logged.
// Throws TrainingError when a loss becomes non-finite.
TrainResult train_demo(const Corpus& corpus, const Config& cfg, const TrainOptions& opt);

}  // namespace storyvis

#endif  // STORYVIS_TRAIN_HPP_
