#ifndef STORYVIS_TENSOR_HPP_
#define STORYVIS_TENSOR_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "storyvis/rng.hpp"

namespace storyvis {

using Scalar = double;
using Index = Eigen::Index;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using NodeId = std::int64_t;
using Shape = std::vector<Index>;

class TensorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Tape;

// Handle to a node of a Tape. Every tensor is two-dimensional (rows x cols);
// vectors are 1 x n and scalars 1 x 1. Data is row-major, so the flat layout
// matches the shape.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Shape shape() const { return {rows(), cols()}; }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Index size() const { return value().size(); }
  bool is_scalar() const { return rows() == 1 && cols() == 1; }
  Scalar item() const;
  bool requires_grad() const;
  NodeId id() const { return id_; }
  Tape& tape() const;
  bool valid() const { return tape_ != nullptr && id_ >= 0; }

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = -1;
};

// Parameter gradients keyed by leaf node id.
using GradientMap = std::map<NodeId, Matrix>;

class GradAccumulator {
 public:
  explicit GradAccumulator(std::size_t n) : grads_(n), has_(n, false) {}

  bool wants(const Tensor& t) const { return t.requires_grad(); }

  template <class Derived>
  void add(const Tensor& t, const Eigen::MatrixBase<Derived>& g) {
    const auto i = static_cast<std::size_t>(t.id());
    if (!has_[i]) {
      grads_[i].noalias() = g;
      has_[i] = true;
    } else {
      grads_[i].noalias() += g;
    }
  }

  template <class Derived>
  void add(const Tensor& t, const Eigen::ArrayBase<Derived>& g) {
    add(t, g.matrix());
  }

  bool has(NodeId id) const { return has_[static_cast<std::size_t>(id)]; }
  const Matrix& grad(NodeId id) const { return grads_[static_cast<std::size_t>(id)]; }
  Matrix take(NodeId id) { return std::move(grads_[static_cast<std::size_t>(id)]); }

 private:
  std::vector<Matrix> grads_;
  std::vector<bool> has_;
};

// Computation record for reverse-mode differentiation. Single owner; tensors
// hold a pointer to their tape, so a tape is neither copyable nor movable.
class Tape {
 public:
  using BackwardFn = std::function<void(const Matrix& grad_out, GradAccumulator& acc)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Matrix value);
  Tensor variable(Matrix value);
  // Leaf that reads from caller-owned storage; the storage must outlive the
  // tape and stay unmodified while the tape is in use.
  Tensor parameter(const Matrix& external);

  Tensor record(std::string_view op, Matrix value, std::vector<Tensor> inputs,
                BackwardFn backward);

  // Reverse-mode pass from a 1 x 1 loss. Returns an entry for every
  // requires_grad leaf the loss depends on.
  GradientMap backward(const Tensor& loss) const;

  const Matrix& value(NodeId id) const;
  bool requires_grad(NodeId id) const;
  std::string_view op(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* external = nullptr;
    bool requires_grad = false;
    bool leaf = true;
    std::string op;
    std::vector<Tensor> inputs;
    BackwardFn backward;
  };

  const Node& node(NodeId id) const;

  std::deque<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Primitives. Binary elementwise ops accept equal shapes, a 1 x cols row
// broadcast, or a 1 x 1 scalar broadcast on either side.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar s);
Tensor add_scalar(const Tensor& a, Scalar s);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::initializer_list<Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
Tensor slice_rows(const Tensor& a, Index start, Index count);
Tensor slice_cols(const Tensor& a, Index start, Index count);
Tensor gather_rows(const Tensor& a, std::span<const Index> rows);
Tensor reshape(const Tensor& a, Index rows, Index cols);

Tensor mean_rows(const Tensor& a);  // mean-pool over rows -> 1 x cols
Tensor sum(const Tensor& a);        // -> 1 x 1
Tensor mean(const Tensor& a);       // -> 1 x 1

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor clamp(const Tensor& a, Scalar lo, Scalar hi);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

// Normalizes each row; gamma and beta are 1 x cols.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps);
// Row softmax restricted to allowed entries; masked entries are exactly 0.
Tensor masked_softmax(const Tensor& x, const BoolMatrix& allowed);
Tensor softmax_rows(const Tensor& x);
Tensor logsumexp_rows(const Tensor& x);                       // -> rows x 1
Tensor cosine_similarity(const Tensor& a, const Tensor& b);   // per row -> rows x 1
Tensor l1_distance(const Tensor& a, const Tensor& b);         // sum of abs differences -> 1 x 1
// Sum over rows of weight[r] * -log softmax(logits[r])[target[r]]; rows
// with a negative target are skipped.
Tensor token_cross_entropy(const Tensor& logits, std::span<const int> targets,
                           std::span<const Scalar> row_weights);
// KL(N(mu, diag(exp(logvar))) || N(0, I)) summed over entries -> 1 x 1.
Tensor gaussian_kl(const Tensor& mu, const Tensor& logvar);
// mu + exp(0.5 * logvar) * noise with the noise held fixed.
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Matrix& noise);
// Inverted dropout. Identity when rate is 0 or rng is null.
Tensor dropout(const Tensor& a, Scalar rate, Rng* rng);

// Dispatch by name. Non-differentiable arguments are passed as tensors:
// masked_softmax takes a 0/1 mask, token_cross_entropy takes target ids
// (rows x 1, negative = pad) and optional row weights, reparameterize takes
// the noise as its third input.
Tensor apply_primitive(std::string_view op_name, std::span<const Tensor> inputs);
std::vector<std::string> primitive_names();

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator-(const Tensor& a) { return scale(a, -1.0); }
inline Tensor operator*(Scalar s, const Tensor& a) { return scale(a, s); }
inline Tensor operator*(const Tensor& a, Scalar s) { return scale(a, s); }

std::string shape_string(const Matrix& m);

}  // namespace storyvis

#endif  // STORYVIS_TENSOR_HPP_
