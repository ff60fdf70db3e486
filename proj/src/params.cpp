#include "storyvis/params.hpp"

#include <cmath>

#include "storyvis/archive.hpp"

namespace storyvis {

Matrix& ParamStore::add(const std::string& name, Matrix init) {
  auto [it, inserted] = params_.emplace(name, std::move(init));
  if (!inserted) throw TensorError("parameter '" + name + "' registered twice");
  return it->second;
}

Matrix& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw TensorError("unknown parameter '" + name + "'");
  return it->second;
}

const Matrix& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw TensorError("unknown parameter '" + name + "'");
  return it->second;
}

Index ParamStore::total_size() const {
  Index n = 0;
  for (const auto& [name, m] : params_) n += m.size();
  return n;
}

void ParamStore::save(const std::filesystem::path& path) const {
  TensorArchive archive;
  archive.arrays = params_;
  archive.meta["kind"] = "checkpoint";
  write_archive(path, archive);
}

ParamStore ParamStore::load(const std::filesystem::path& path) {
  TensorArchive archive = read_archive(path);
  ParamStore store;
  store.params_ = std::move(archive.arrays);
  return store;
}

Tensor Bound::operator()(const std::string& name) const {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Tensor t = tape_->parameter(store_->at(name));
  bound_.emplace(name, t);
  return t;
}

std::map<std::string, Matrix> Bound::named(GradientMap&& grads) const {
  std::map<std::string, Matrix> out;
  for (const auto& [name, t] : bound_) {
    auto it = grads.find(t.id());
    if (it != grads.end()) out.emplace(name, std::move(it->second));
  }
  return out;
}

std::map<std::string, Matrix> Bound::named(const GradientMap& grads) const {
  std::map<std::string, Matrix> out;
  for (const auto& [name, t] : bound_) {
    auto it = grads.find(t.id());
    if (it != grads.end()) out.emplace(name, it->second);
  }
  return out;
}

Matrix glorot_uniform(Index rows, Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
  return m;
}

Matrix random_normal(Index rows, Index cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * standard_normal(rng);
  return m;
}

}  // namespace storyvis
