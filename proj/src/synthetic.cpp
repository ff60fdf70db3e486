#include "storyvis/synthetic.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include "storyvis/image_io.hpp"
#include "storyvis/rng.hpp"

namespace storyvis {
namespace {

constexpr std::array<const char*, 3> kColours = {"red", "green", "blue"};
constexpr std::array<const char*, 3> kShapes = {"circle", "square", "triangle"};

const std::array<std::array<double, 3>, 3> kRgb = {{{0.9, -0.8, -0.8}, {-0.8, 0.7, -0.8}, {-0.8, -0.8, 0.9}}};
constexpr std::array<double, 3> kTreeRgb = {0.2, -0.1, -0.6};

struct Placed {
  int character = -1;  // -1 = the background tree
  std::array<Index, 4> px{};  // x1, y1, x2, y2 in pixels, half-open
};

std::string np_tree(const std::string& det, int c) {
  return "(NP (DT " + det + ") (JJ " + kColours[static_cast<std::size_t>(c % 3)] + ") (NN " +
         kShapes[static_cast<std::size_t>(c / 3)] + "))";
}

void paint(Matrix& img, Index side, const Placed& p) {
  const auto [x1, y1, x2, y2] = p.px;
  const std::array<double, 3>& rgb = p.character < 0 ? kTreeRgb : kRgb[static_cast<std::size_t>(p.character % 3)];
  const int shape = p.character < 0 ? 1 : p.character / 3;
  const double cx = 0.5 * static_cast<double>(x1 + x2 - 1);
  const double cy = 0.5 * static_cast<double>(y1 + y2 - 1);
  const double rx = 0.5 * static_cast<double>(x2 - x1);
  const double ry = 0.5 * static_cast<double>(y2 - y1);
  for (Index y = y1; y < y2; ++y) {
    for (Index x = x1; x < x2; ++x) {
      bool inside = true;
      if (shape == 0) {
        const double dx = (static_cast<double>(x) - cx) / rx;
        const double dy = (static_cast<double>(y) - cy) / ry;
        inside = dx * dx + dy * dy <= 1.0;
      } else if (shape == 2) {
        const double t = static_cast<double>(y - y1 + 1) / static_cast<double>(y2 - y1);
        inside = std::abs(static_cast<double>(x) - cx) <= rx * t;
      }
      if (inside) {
        for (Index c = 0; c < 3; ++c) img(y * side + x, c) = rgb[static_cast<std::size_t>(c)];
      }
    }
  }
}

Index rand_between(Rng& rng, Index lo, Index hi) {  // inclusive
  return lo + static_cast<Index>(uniform_int(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

Placed place(Rng& rng, int character, Index side, Index x_lo, Index x_hi) {
  const Index w = rand_between(rng, side / 5, side / 3);
  const Index h = rand_between(rng, side / 5, side / 3);
  const Index x1 = rand_between(rng, x_lo, std::max(x_lo, x_hi - w));
  const Index y1 = rand_between(rng, side / 8, side - h - side / 8);
  return {character, {x1, y1, x1 + w, y1 + h}};
}

void add_word_group(WordTable& table, const std::vector<std::string>& words, Index dim, Rng& rng) {
  auto unit = [&] {
    Eigen::RowVectorXd v(dim);
    for (Index i = 0; i < dim; ++i) v(i) = standard_normal(rng);
    return Eigen::RowVectorXd(v / v.norm());
  };
  const Eigen::RowVectorXd group = unit();
  for (const std::string& w : words) {
    Eigen::RowVectorXd v = 0.85 * group + 0.53 * unit();
    table.insert(w, v / v.norm());
  }
}

}  // namespace

std::string character_name(int c) {
  return std::string(kColours[static_cast<std::size_t>(c % 3)]) + " " + kShapes[static_cast<std::size_t>(c / 3)];
}

SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& opt) {
  Rng rng(opt.seed);
  SyntheticCorpus corpus;
  const Index side = opt.image_size;

  corpus.words = WordTable(opt.d_word);
  Rng emb_rng(derive_seed(opt.seed, 7));
  for (const std::vector<std::string>& group : std::vector<std::vector<std::string>>{
           {"red", "green", "blue", "crimson", "color"},
           {"circle", "square", "triangle", "ball", "box", "pyramid", "shape", "round", "corner"},
           {"jumps", "meets", "sits", "says", "smiles", "runs"},
           {"tree", "leaf", "branch"},
           {"car", "door", "wheel"}}) {
    add_word_group(corpus.words, group, opt.d_word, emb_rng);
  }
  for (const char* w : {"the", "a", "is", "left", "of", "and", "hi", "near"}) {
    add_word_group(corpus.words, {w}, opt.d_word, emb_rng);
  }

  corpus.triples = {
      {"circle", "IsA", "shape"},     {"circle", "RelatedTo", "round"}, {"ball", "IsA", "round"},
      {"square", "HasA", "corner"},   {"triangle", "HasA", "corner"},   {"box", "RelatedTo", "square"},
      {"pyramid", "RelatedTo", "triangle"}, {"tree", "HasA", "leaf"},   {"tree", "HasA", "branch"},
      {"car", "HasA", "door"},        {"car", "HasA", "wheel"},         {"red", "IsA", "color"},
      {"crimson", "RelatedTo", "red"}, {"person", "CapableOf", "runs"}, {"dog", "CapableOf", "sits"},
      {"friend", "CapableOf", "smiles"}};

  for (const char* n : {"circle", "square", "triangle", "tree", "ball", "box", "pyramid", "car", "door", "leaf",
                        "wheel", "shape", "corner", "branch"}) {
    corpus.lexicon.add(n, Lexicon::Tag::kNoun);
  }
  for (const char* v : {"jumps", "meets", "sits", "says", "smiles", "runs"}) corpus.lexicon.add(v, Lexicon::Tag::kVerb);

  for (int s = 0; s < opt.stories; ++s) {
    StoryRecord story;
    char id[16];
    std::snprintf(id, sizeof id, "s%04d", s);
    story.story_id = id;
    std::array<int, 9> perm{};
    for (int c = 0; c < 9; ++c) perm[static_cast<std::size_t>(c)] = c;
    for (int c = 8; c > 0; --c) std::swap(perm[static_cast<std::size_t>(c)], perm[uniform_int(rng, static_cast<std::uint64_t>(c + 1))]);
    const int cast_size = 2 + static_cast<int>(uniform_int(rng, 2));
    const double background = 0.5 + 0.4 * uniform01(rng);

    for (int k = 0; k < opt.frames; ++k) {
      FrameRecord frame;
      const int a = perm[uniform_int(rng, static_cast<std::uint64_t>(cast_size))];
      int b = perm[uniform_int(rng, static_cast<std::uint64_t>(cast_size))];
      while (b == a) b = perm[uniform_int(rng, static_cast<std::uint64_t>(cast_size))];
      const std::string ca = character_name(a);
      const std::string cb = character_name(b);
      std::vector<Placed> placed;
      switch (uniform_int(rng, 5)) {
        case 0:
          frame.caption = "the " + ca + " jumps";
          frame.tree = "(S " + np_tree("the", a) + " (VP (VBZ jumps)))";
          placed.push_back(place(rng, a, side, side / 8, side - side / 8));
          break;
        case 1:
          frame.caption = "the " + ca + " is left of the " + cb;
          frame.tree = "(S " + np_tree("the", a) + " (VP (VBZ is) (ADJP (JJ left) (PP (IN of) " + np_tree("the", b) +
                       "))))";
          placed.push_back(place(rng, a, side, 0, side / 2));
          placed.push_back(place(rng, b, side, side / 2, side));
          break;
        case 2:
          frame.caption = "the " + ca + " meets the " + cb;
          frame.tree = "(S " + np_tree("the", a) + " (VP (VBZ meets) " + np_tree("the", b) + "))";
          placed.push_back(place(rng, a, side, 0, side / 2));
          placed.push_back(place(rng, b, side, side / 2, side));
          break;
        case 3:
          frame.caption = "the " + ca + " sits near a tree";
          frame.tree = "(S " + np_tree("the", a) + " (VP (VBZ sits) (PP (IN near) (NP (DT a) (NN tree)))))";
          placed.push_back(place(rng, a, side, 0, side / 2));
          placed.push_back(place(rng, -1, side, side / 2 + side / 8, side));
          break;
        default:
          frame.caption = "the " + ca + " says hi and smiles";
          frame.tree = "(S " + np_tree("the", a) +
                       " (VP (VP (VBZ says) (UH hi)) (CC and) (VP (VBZ smiles))))";
          placed.push_back(place(rng, a, side, side / 8, side - side / 8));
          break;
      }

      Matrix img = Matrix::Constant(side * side, 3, background);
      frame.characters.assign(9, 0);
      int rank = 0;
      for (const Placed& p : placed) {
        paint(img, side, p);
        Annotation an;
        for (std::size_t c = 0; c < 4; ++c) an.box[c] = static_cast<double>(p.px[c]) / static_cast<double>(side);
        an.phrase = p.character < 0 ? "tree" : character_name(p.character);
        an.rank = rank++;
        frame.annotations.push_back(an);
        if (p.character >= 0) frame.characters[static_cast<std::size_t>(p.character)] = 1;
      }
      const std::string path = "images/" + story.story_id + "_" + std::to_string(k) + ".ppm";
      frame.image = path;
      corpus.images.emplace(path, std::move(img));
      story.frames.push_back(std::move(frame));
    }
    corpus.stories.push_back(std::move(story));
  }
  return corpus;
}

void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  save_stories(dir / "stories.jsonl", corpus.stories);
  corpus.words.save(dir / "embeddings.txt");
  save_triple_store(dir / "triples.tsv", corpus.triples);
  corpus.lexicon.save(dir / "lexicon.tsv");
  for (const auto& [path, img] : corpus.images) {
    const Index side = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(img.rows()))));
    write_ppm(dir / path, img, side, side);
  }
}

}  // namespace storyvis
