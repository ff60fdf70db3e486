#include "storyvis/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace storyvis {
namespace {

struct Entry {
  std::string name;
  Matrix* values;
  const Matrix* analytic;
};

double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), kGradCheckFloor});
}

template <class Eval>
GradCheckReport compare(const std::vector<Entry>& entries, const Eval& eval, double eps) {
  GradCheckReport report;
  for (const Entry& e : entries) {
    for (Index i = 0; i < e.values->size(); ++i) {
      double& x = e.values->data()[i];
      const double saved = x;
      x = saved + eps;
      const double up = eval();
      x = saved - eps;
      const double down = eval();
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = e.analytic->data()[i];
      const double err = relative_error(analytic, numeric);
      ++report.entries_checked;
      if (err > report.max_relative_error || report.worst_entry.empty()) {
        report.max_relative_error = err;
        report.worst_entry = e.name + "[" + std::to_string(i) + "]";
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

void require_deterministic(double first, double second) {
  if (!(first == second || (std::isnan(first) && std::isnan(second)))) {
    throw TensorError("grad_check: function is not deterministic (" + std::to_string(first) + " vs " +
                      std::to_string(second) + "); freeze sampling noise with a fixed seed");
  }
}

}  // namespace

GradCheckReport grad_check(const LeafFunction& f, std::vector<Matrix>& params, double eps) {
  if (eps <= 0.0) throw TensorError("grad_check: eps must be positive");
  auto eval = [&]() {
    Tape tape;
    std::vector<Tensor> leaves;
    for (const Matrix& p : params) leaves.push_back(tape.parameter(p));
    return f(tape, leaves).item();
  };

  Tape tape;
  std::vector<Tensor> leaves;
  for (const Matrix& p : params) leaves.push_back(tape.parameter(p));
  const Tensor loss = f(tape, leaves);
  const double base = loss.item();
  require_deterministic(base, eval());
  const GradientMap grads = tape.backward(loss);

  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto it = grads.find(leaves[i].id());
    analytic.push_back(it != grads.end() ? it->second : Matrix::Zero(params[i].rows(), params[i].cols()));
  }
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < params.size(); ++i) {
    entries.push_back({"param" + std::to_string(i), &params[i], &analytic[i]});
  }
  return compare(entries, eval, eps);
}

GradCheckReport grad_check(const ParamFunction& f, ParamStore& params, double eps,
                           const std::function<bool(const std::string&)>& select) {
  if (eps <= 0.0) throw TensorError("grad_check: eps must be positive");
  auto eval = [&]() {
    Tape tape;
    Bound bound(tape, params);
    return f(tape, bound).item();
  };

  Tape tape;
  Bound bound(tape, params);
  const Tensor loss = f(tape, bound);
  const double base = loss.item();
  require_deterministic(base, eval());
  const std::map<std::string, Matrix> named = bound.named(tape.backward(loss));

  std::map<std::string, Matrix> analytic;
  std::vector<Entry> entries;
  for (auto& [name, m] : params) {
    if (select && !select(name)) continue;
    auto it = named.find(name);
    analytic.emplace(name, it != named.end() ? it->second : Matrix::Zero(m.rows(), m.cols()));
  }
  for (auto& [name, m] : params) {
    auto it = analytic.find(name);
    if (it != analytic.end()) entries.push_back({name, &m, &it->second});
  }
  return compare(entries, eval, eps);
}

}  // namespace storyvis
