#ifndef STORYVIS_GRAD_CHECK_HPP_
#define STORYVIS_GRAD_CHECK_HPP_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "storyvis/params.hpp"
#include "storyvis/tensor.hpp"

namespace storyvis {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_entry;  // "<param>[<flat index>]"
  double analytic = 0.0;
  double numeric = 0.0;
  Index entries_checked = 0;
};

// Function of a list of leaves returning a 1 x 1 tensor.
using LeafFunction = std::function<Tensor(Tape&, std::span<const Tensor>)>;
// Function of a bound parameter store returning a 1 x 1 tensor.
using ParamFunction = std::function<Tensor(Tape&, const Bound&)>;

// Gradients smaller than this are effectively compared absolutely.
inline constexpr double kGradCheckFloor = 1e-3;

// Compares reverse-mode gradients with central differences. The relative
// error per entry is |a - n| / max(|a|, |n|, kGradCheckFloor). The function is
// evaluated twice at the base point first; differing results mean sampling
// noise was not frozen and raise TensorError.
GradCheckReport grad_check(const LeafFunction& f, std::vector<Matrix>& params, double eps = 1e-5);

// Same check over every entry of a parameter store, optionally restricted to
// names accepted by `select`.
GradCheckReport grad_check(const ParamFunction& f, ParamStore& params, double eps = 1e-5,
                           const std::function<bool(const std::string&)>& select = {});

}  // namespace storyvis

#endif  // STORYVIS_GRAD_CHECK_HPP_
