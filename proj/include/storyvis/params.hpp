#ifndef STORYVIS_PARAMS_HPP_
#define STORYVIS_PARAMS_HPP_

#include <filesystem>
#include <map>
#include <string>

#include "storyvis/rng.hpp"
#include "storyvis/tensor.hpp"

namespace storyvis {

// Named parameter matrices. Iteration order is the lexicographic name order,
// which is also the checkpoint order.
class ParamStore {
 public:
  Matrix& add(const std::string& name, Matrix init);
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t count() const { return params_.size(); }
  Index total_size() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void save(const std::filesystem::path& path) const;
  static ParamStore load(const std::filesystem::path& path);

 private:
  std::map<std::string, Matrix> params_;
};

// Tape view of a ParamStore. Parameters become leaves on first access and
// reference the store's storage directly.
class Bound {
 public:
  Bound(Tape& tape, const ParamStore& store) : tape_(&tape), store_(&store) {}

  Tensor operator()(const std::string& name) const;
  Tape& tape() const { return *tape_; }
  const ParamStore& store() const { return *store_; }

  // Gradients by parameter name for every bound parameter that received one.
  std::map<std::string, Matrix> named(const GradientMap& grads) const;
  std::map<std::string, Matrix> named(GradientMap&& grads) const;

 private:
  Tape* tape_;
  const ParamStore* store_;
  mutable std::map<std::string, Tensor> bound_;
};

Matrix glorot_uniform(Index rows, Index cols, Rng& rng);
Matrix random_normal(Index rows, Index cols, double stddev, Rng& rng);

}  // namespace storyvis

#endif  // STORYVIS_PARAMS_HPP_
