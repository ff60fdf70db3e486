#include "storyvis/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "storyvis/image_io.hpp"
#include "storyvis/model.hpp"
#include "storyvis/rng.hpp"

namespace storyvis {

nlohmann::json SeedPlan::to_json() const {
  return {{"master", master}, {"init", init}, {"noise", noise}, {"data", data}};
}

SeedPlan seed_plan(std::uint64_t master) {
  return {master, derive_seed(master, 0), derive_seed(master, 1), derive_seed(master, 2)};
}

void Adam::step(ParamStore& params, const std::map<std::string, Matrix>& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [name, g] : grads) {
    Matrix& w = params.at(name);
    auto [mit, fresh] = m_.try_emplace(name, Matrix::Zero(w.rows(), w.cols()));
    Matrix& m = mit->second;
    Matrix& v = v_.try_emplace(name, Matrix::Zero(w.rows(), w.cols())).first->second;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    w.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

PreparedStory mirror_story(const PreparedStory& story, Index image_size) {
  PreparedStory out = story;
  const Index s = image_size;
  for (PreparedFrame& f : out.frames) {
    Matrix flipped(f.image.rows(), 3);
    for (Index y = 0; y < s; ++y) {
      for (Index x = 0; x < s; ++x) flipped.row(y * s + x) = f.image.row(y * s + (s - 1 - x));
    }
    f.image = std::move(flipped);
    f.target.boxes = mirror_boxes(f.target.boxes);
  }
  return out;
}

namespace {

bool is_disc(const std::string& name) { return name.rfind("disc.", 0) == 0; }

Matrix draw_noise(Rng& rng, Index d) {
  Matrix n(1, d);
  for (Index i = 0; i < d; ++i) n(0, i) = standard_normal(rng);
  return n;
}

// Endless shuffled pass over story indices.
class Sampler {
 public:
  Sampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) { reshuffle(); }

  std::vector<std::size_t> next(int count) {
    std::vector<std::size_t> out;
    for (int i = 0; i < count; ++i) {
      if (cursor_ == order_.size()) reshuffle();
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[uniform_int(rng_, i)]);
    cursor_ = 0;
  }

  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  Rng rng_;
};

void accumulate(std::map<std::string, Matrix>& into, std::map<std::string, Matrix>&& g, double w, bool disc) {
  for (auto& [name, grad] : g) {
    if (is_disc(name) != disc) continue;
    auto it = into.find(name);
    if (it == into.end()) {
      grad *= w;
      into.emplace(name, std::move(grad));
    } else {
      it->second += w * grad;
    }
  }
}

struct Trainer {
  const Corpus& corpus;
  const Config& cfg;
  ParamStore params;
  Rng noise_rng;
  Rng mirror_rng;
  Sampler sampler;
  Adam gen_opt;
  Adam disc_opt;

  Trainer(const Corpus& c, const Config& conf, const SeedPlan& seeds)
      : corpus(c),
        cfg(conf),
        noise_rng(seeds.noise),
        mirror_rng(derive_seed(seeds.data, 1)),
        sampler(c.stories.size(), seeds.data),
        gen_opt(conf.train.lr_generator, conf.train.beta1, conf.train.beta2),
        disc_opt(conf.train.lr_discriminator, conf.train.beta1, conf.train.beta2) {
    Rng init_rng(seeds.init);
    init_model_params(params, cfg.model, corpus.vocab, init_rng);
  }

  PreparedStory pick(std::size_t i) {
    const PreparedStory& s = corpus.stories[i];
    if (cfg.train.mirror_augment && uniform01(mirror_rng) < 0.5) return mirror_story(s, cfg.model.image_size);
    return s;
  }

  ForwardContext context() { return {&noise_rng, cfg.model.dropout, nullptr}; }

  // Mean generator losses over the batch; applies the update when `apply`.
  LossBundle generator_update(const std::vector<std::size_t>& batch, bool apply) {
    std::map<std::string, Matrix> grads;
    LossBundle mean_terms;
    mean_terms.lambda_bbox = cfg.train.lambda_bbox;
    mean_terms.lambda_caption = cfg.train.lambda_caption;
    const double w = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i : batch) {
      const PreparedStory story = pick(i);
      Tape tape;
      Bound p(tape, params);
      const Matrix noise = draw_noise(noise_rng, cfg.model.d_model);
      const StoryForward fwd = forward_story(story, p, cfg.model, noise, context());
      const LossTerms<Tensor> terms = generator_losses(story, fwd, p, cfg);
      const LossBundle v = values(terms);
      mean_terms.kl += w * v.kl;
      mean_terms.img += w * v.img;
      mean_terms.story += w * v.story;
      mean_terms.bbox += w * v.bbox;
      mean_terms.caption += w * v.caption;
      mean_terms.word += w * v.word;
      if (apply && all_finite(v)) accumulate(grads, p.named(tape.backward(total_objective(terms))), w, false);
    }
    if (apply && all_finite(mean_terms)) gen_opt.step(params, grads);
    return mean_terms;
  }

  double discriminator_update(const std::vector<std::size_t>& batch) {
    std::map<std::string, Matrix> grads;
    double total = 0.0;
    const double w = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i : batch) {
      const PreparedStory story = pick(i);
      Tape tape;
      Bound p(tape, params);
      const Matrix noise = draw_noise(noise_rng, cfg.model.d_model);
      const StoryForward fwd = forward_story(story, p, cfg.model, noise, context());
      const Tensor loss = discriminator_loss(story, fwd, p, cfg.model);
      total += w * loss.item();
      if (std::isfinite(loss.item())) accumulate(grads, p.named(tape.backward(loss)), w, true);
    }
    if (std::isfinite(total)) disc_opt.step(params, grads);
    return total;
  }
};

std::string csv_row(int step, const LossBundle& b) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", step, b.kl, b.img, b.story, b.bbox,
                b.caption, b.word, total_objective(b));
  return buf;
}

}  // namespace

TrainResult train_demo(const Corpus& corpus, const Config& cfg, const TrainOptions& opt) {
  cfg.validate();
  if (corpus.stories.empty()) throw std::runtime_error("train_demo: corpus has no stories");
  std::filesystem::create_directories(opt.out_dir);
  const SeedPlan seeds = seed_plan(cfg.seed);
  {
    std::ofstream os(opt.out_dir / "seeds.json", std::ios::trunc);
    os << seeds.to_json().dump(2) << '\n';
  }
  std::ofstream csv(opt.out_dir / "losses.csv", std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write losses.csv in '" + opt.out_dir.string() + "'");
  csv << kLossCsvHeader << '\n';

  Trainer trainer(corpus, cfg, seeds);
  TrainResult result;
  const int steps = cfg.train.steps;
  auto record = [&](int step, const LossBundle& b) {
    csv << csv_row(step, b) << '\n';
    csv.flush();
    if (!all_finite(b) || !std::isfinite(total_objective(b))) {
      throw TrainingError("non-finite generator loss at step " + std::to_string(step) + "; last good step " +
                              std::to_string(step - 1),
                          step - 1);
    }
    result.history.push_back(b);
    if (opt.log != nullptr && (step % 10 == 0 || step == steps - 1)) {
      *opt.log << "step " << step << "  total " << total_objective(b) << '\n';
    }
  };

  if (steps == 0) {
    record(0, trainer.generator_update(trainer.sampler.next(cfg.train.image_batch_size), false));
  }
  for (int step = 0; step < steps; ++step) {
    if (cfg.train.lr_decay_every > 0 && step > 0 && step % cfg.train.lr_decay_every == 0) {
      trainer.gen_opt.set_lr(trainer.gen_opt.lr() * cfg.train.lr_decay_factor);
      trainer.disc_opt.set_lr(trainer.disc_opt.lr() * cfg.train.lr_decay_factor);
    }
    const double d = trainer.discriminator_update(trainer.sampler.next(cfg.train.story_batch_size));
    if (!std::isfinite(d)) {
      throw TrainingError("non-finite discriminator loss at step " + std::to_string(step) + "; last good step " +
                              std::to_string(step - 1),
                          step - 1);
    }
    record(step, trainer.generator_update(trainer.sampler.next(cfg.train.image_batch_size), true));
    trainer.generator_update(trainer.sampler.next(cfg.train.story_batch_size), true);
  }

  trainer.params.save(opt.out_dir / "checkpoint.bin");
  if (opt.write_frames) {
    std::filesystem::create_directories(opt.out_dir / "frames");
    const PreparedStory& story = corpus.stories.front();
    Tape tape;
    Bound p(tape, trainer.params);
    const StoryForward fwd = forward_story(story, p, cfg.model, Matrix::Zero(1, cfg.model.d_model));
    for (std::size_t k = 0; k < fwd.frames.size(); ++k) {
      write_ppm(opt.out_dir / "frames" / (story.story_id + "_" + std::to_string(k) + ".ppm"),
                fwd.frames[k].image.value(), cfg.model.image_size, cfg.model.image_size);
    }
  }
  result.params = std::move(trainer.params);
  return result;
}

}  // namespace storyvis
