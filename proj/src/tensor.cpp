#include "storyvis/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace storyvis {

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << '[' << m.rows() << ',' << m.cols() << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor / Tape

const Matrix& Tensor::value() const {
  if (!valid()) throw TensorError("use of an unbound tensor");
  return tape_->value(id_);
}

Scalar Tensor::item() const {
  const Matrix& v = value();
  if (v.size() != 1) throw TensorError("item: tensor of shape " + shape_string(v) + " is not a scalar");
  return v(0, 0);
}

bool Tensor::requires_grad() const { return valid() && tape_->requires_grad(id_); }

Tape& Tensor::tape() const {
  if (!valid()) throw TensorError("use of an unbound tensor");
  return *tape_;
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) throw TensorError("node id out of range");
  return nodes_[static_cast<std::size_t>(id)];
}

const Matrix& Tape::value(NodeId id) const {
  const Node& n = node(id);
  return n.external != nullptr ? *n.external : n.owned;
}

bool Tape::requires_grad(NodeId id) const { return node(id).requires_grad; }

std::string_view Tape::op(NodeId id) const { return node(id).op; }

Tensor Tape::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return {this, static_cast<NodeId>(nodes_.size() - 1)};
}

Tensor Tape::variable(Matrix value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  n.op = "variable";
  nodes_.push_back(std::move(n));
  return {this, static_cast<NodeId>(nodes_.size() - 1)};
}

Tensor Tape::parameter(const Matrix& external) {
  Node n;
  n.external = &external;
  n.requires_grad = true;
  n.op = "parameter";
  nodes_.push_back(std::move(n));
  return {this, static_cast<NodeId>(nodes_.size() - 1)};
}

Tensor Tape::record(std::string_view op, Matrix value, std::vector<Tensor> inputs,
                    BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  n.op = std::string(op);
  n.leaf = false;
  for (const Tensor& in : inputs) {
    if (&in.tape() != this) throw TensorError(std::string(op) + ": inputs come from different tapes");
    n.requires_grad = n.requires_grad || in.requires_grad();
  }
  if (n.requires_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<NodeId>(nodes_.size() - 1)};
}

GradientMap Tape::backward(const Tensor& loss) const {
  if (&loss.tape() != this) throw TensorError("backward: loss belongs to another tape");
  const Matrix& lv = loss.value();
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw TensorError("backward: loss must be scalar, got shape " + shape_string(lv));
  }
  GradientMap out;
  if (!loss.requires_grad()) return out;

  GradAccumulator acc(nodes_.size());
  acc.add(loss, Matrix::Ones(1, 1));
  for (NodeId id = loss.id(); id >= 0; --id) {
    if (!acc.has(id)) continue;
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.leaf) {
      if (n.requires_grad) out.emplace(id, acc.take(id));
      continue;
    }
    if (n.backward) n.backward(acc.grad(id), acc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

enum class Bcast { kSame, kRow, kScalar };

struct BinaryShape {
  Index rows = 0;
  Index cols = 0;
  Bcast a = Bcast::kSame;
  Bcast b = Bcast::kSame;
};

[[noreturn]] void shape_error(std::string_view op, const Matrix& a, const Matrix& b) {
  throw TensorError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

BinaryShape binary_shape(std::string_view op, const Matrix& a, const Matrix& b) {
  BinaryShape s{a.rows(), a.cols()};
  if (a.rows() == b.rows() && a.cols() == b.cols()) return s;
  if (b.size() == 1) {
    s.b = Bcast::kScalar;
  } else if (b.rows() == 1 && b.cols() == a.cols()) {
    s.b = Bcast::kRow;
  } else if (a.size() == 1) {
    s = {b.rows(), b.cols(), Bcast::kScalar, Bcast::kSame};
  } else if (a.rows() == 1 && a.cols() == b.cols()) {
    s = {b.rows(), b.cols(), Bcast::kRow, Bcast::kSame};
  } else {
    shape_error(op, a, b);
  }
  return s;
}

Matrix expand(const Matrix& m, Bcast kind, Index rows, Index cols) {
  switch (kind) {
    case Bcast::kSame:
      return m;
    case Bcast::kRow:
      return m.replicate(rows, 1);
    case Bcast::kScalar:
      return Matrix::Constant(rows, cols, m(0, 0));
  }
  return m;
}

Matrix reduce(const Matrix& g, Bcast kind) {
  switch (kind) {
    case Bcast::kSame:
      return g;
    case Bcast::kRow:
      return g.colwise().sum();
    case Bcast::kScalar:
      return Matrix::Constant(1, 1, g.sum());
  }
  return g;
}

template <class F>
Matrix unary_map(const Matrix& x, F f) {
  return x.unaryExpr(f);
}

void require_same_shape(std::string_view op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise arithmetic

Tensor add(const Tensor& a, const Tensor& b) {
  const BinaryShape s = binary_shape("add", a.value(), b.value());
  Matrix out = expand(a.value(), s.a, s.rows, s.cols) + expand(b.value(), s.b, s.rows, s.cols);
  return a.tape().record("add", std::move(out), {a, b}, [a, b, s](const Matrix& g, GradAccumulator& acc) {
    if (acc.wants(a)) acc.add(a, reduce(g, s.a));
    if (acc.wants(b)) acc.add(b, reduce(g, s.b));
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const BinaryShape s = binary_shape("sub", a.value(), b.value());
  Matrix out = expand(a.value(), s.a, s.rows, s.cols) - expand(b.value(), s.b, s.rows, s.cols);
  return a.tape().record("sub", std::move(out), {a, b}, [a, b, s](const Matrix& g, GradAccumulator& acc) {
    if (acc.wants(a)) acc.add(a, reduce(g, s.a));
    if (acc.wants(b)) acc.add(b, reduce(-g, s.b));
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const BinaryShape s = binary_shape("mul", a.value(), b.value());
  Matrix ea = expand(a.value(), s.a, s.rows, s.cols);
  Matrix eb = expand(b.value(), s.b, s.rows, s.cols);
  Matrix out = ea.cwiseProduct(eb);
  return a.tape().record("mul", std::move(out), {a, b},
                         [a, b, s, ea = std::move(ea), eb = std::move(eb)](const Matrix& g, GradAccumulator& acc) {
                           if (acc.wants(a)) acc.add(a, reduce(g.cwiseProduct(eb), s.a));
                           if (acc.wants(b)) acc.add(b, reduce(g.cwiseProduct(ea), s.b));
                         });
}

Tensor scale(const Tensor& a, Scalar k) {
  return a.tape().record("scale", a.value() * k, {a}, [a, k](const Matrix& g, GradAccumulator& acc) {
    acc.add(a, g * k);
  });
}

Tensor add_scalar(const Tensor& a, Scalar k) {
  Matrix out = a.value().array() + k;
  return a.tape().record("add_scalar", std::move(out), {a},
                         [a](const Matrix& g, GradAccumulator& acc) { acc.add(a, g); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  Matrix out = av * bv;
  return a.tape().record("matmul", std::move(out), {a, b}, [a, b](const Matrix& g, GradAccumulator& acc) {
    if (acc.wants(a)) acc.add(a, g * b.value().transpose());
    if (acc.wants(b)) {
      if (a.rows() == 1) {
        acc.add(b, a.value().row(0).transpose() * g.row(0));  // outer product
      } else {
        acc.add(b, a.value().transpose() * g);
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  Matrix out = a.value().transpose();
  return a.tape().record("transpose", std::move(out), {a}, [a](const Matrix& g, GradAccumulator& acc) {
    acc.add(a, g.transpose());
  });
}

// ---------------------------------------------------------------------------
// Structural

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw TensorError("concat_rows: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", parts.front().value(), p.value());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index r = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(r);
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(
      "concat_rows", std::move(out), inputs, [inputs, offsets](const Matrix& g, GradAccumulator& acc) {
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          if (acc.wants(inputs[i])) acc.add(inputs[i], g.middleRows(offsets[i], inputs[i].rows()));
        }
      });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw TensorError("concat_cols: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index c = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(c);
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(
      "concat_cols", std::move(out), inputs, [inputs, offsets](const Matrix& g, GradAccumulator& acc) {
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          if (acc.wants(inputs[i])) acc.add(inputs[i], g.middleCols(offsets[i], inputs[i].cols()));
        }
      });
}

Tensor concat_rows(std::initializer_list<Tensor> parts) {
  return concat_rows(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice_rows(const Tensor& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw TensorError("slice_rows: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                      ") outside " + shape_string(a.value()));
  }
  Matrix out = a.value().middleRows(start, count);
  return a.tape().record("slice_rows", std::move(out), {a}, [a, start, count](const Matrix& g, GradAccumulator& acc) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleRows(start, count) = g;
    acc.add(a, full);
  });
}

Tensor slice_cols(const Tensor& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw TensorError("slice_cols: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                      ") outside " + shape_string(a.value()));
  }
  Matrix out = a.value().middleCols(start, count);
  return a.tape().record("slice_cols", std::move(out), {a}, [a, start, count](const Matrix& g, GradAccumulator& acc) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleCols(start, count) = g;
    acc.add(a, full);
  });
}

Tensor gather_rows(const Tensor& a, std::span<const Index> rows) {
  const Matrix& av = a.value();
  Matrix out(static_cast<Index>(rows.size()), av.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= av.rows()) {
      throw TensorError("gather_rows: row " + std::to_string(rows[i]) + " outside " + shape_string(av));
    }
    out.row(static_cast<Index>(i)) = av.row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return a.tape().record("gather_rows", std::move(out), {a}, [a, idx](const Matrix& g, GradAccumulator& acc) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) full.row(idx[i]) += g.row(static_cast<Index>(i));
    acc.add(a, full);
  });
}

Tensor reshape(const Tensor& a, Index rows, Index cols) {
  const Matrix& av = a.value();
  if (rows * cols != av.size()) {
    throw TensorError("reshape: cannot view " + shape_string(av) + " as [" + std::to_string(rows) + ',' +
                      std::to_string(cols) + ']');
  }
  Matrix out = Eigen::Map<const Matrix>(av.data(), rows, cols);
  const Index r0 = av.rows();
  const Index c0 = av.cols();
  return a.tape().record("reshape", std::move(out), {a}, [a, r0, c0](const Matrix& g, GradAccumulator& acc) {
    acc.add(a, Eigen::Map<const Matrix>(g.data(), r0, c0));
  });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor mean_rows(const Tensor& a) {
  const Matrix& av = a.value();
  if (av.rows() == 0) throw TensorError("mean_rows: no rows to pool");
  Matrix out = av.colwise().mean();
  const Index n = av.rows();
  return a.tape().record("mean_rows", std::move(out), {a}, [a, n](const Matrix& g, GradAccumulator& acc) {
    acc.add(a, g.replicate(n, 1) / static_cast<Scalar>(n));
  });
}

Tensor sum(const Tensor& a) {
  Matrix out = Matrix::Constant(1, 1, a.value().sum());
  return a.tape().record("sum", std::move(out), {a}, [a](const Matrix& g, GradAccumulator& acc) {
    acc.add(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  const Index n = a.size();
  if (n == 0) throw TensorError("mean: empty tensor");
  Matrix out = Matrix::Constant(1, 1, a.value().mean());
  return a.tape().record("mean", std::move(out), {a}, [a, n](const Matrix& g, GradAccumulator& acc) {
    acc.add(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / static_cast<Scalar>(n)));
  });
}

// ---------------------------------------------------------------------------
// Nonlinearities

Tensor tanh(const Tensor& a) {
  Matrix out = a.value().array().tanh();
  Matrix y = out;
  return a.tape().record("tanh", std::move(out), {a}, [a, y = std::move(y)](const Matrix& g, GradAccumulator& acc) {
    acc.add(a, g.array() * (1.0 - y.array().square()));
  });
}

Tensor sigmoid(const Tensor& a) {
  Matrix out = unary_map(a.value(), [](Scalar x) { return 1.0 / (1.0 + std::exp(-x)); });
  Matrix y = out;
  return a.tape().record("sigmoid", std::move(out), {a}, [a, y = std::move(y)](const Matrix& g, GradAccumulator& acc) {
    acc.add(a, g.array() * y.array() * (1.0 - y.array()));
  });
}

Tensor relu(const Tensor& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape().record("relu", std::move(out), {a}, [a](const Matrix& g, GradAccumulator& acc) {
    acc.add(a, (a.value().array() > 0.0).select(g.array(), 0.0));
  });
}

Tensor exp(const Tensor& a) {
  Matrix out = a.value().array().exp();
  Matrix y = out;
  return a.tape().record("exp", std::move(out), {a}, [a, y = std::move(y)](const Matrix& g, GradAccumulator& acc) {
    acc.add(a, g.cwiseProduct(y));
  });
}

Tensor log(const Tensor& a) {
  if ((a.value().array() <= 0.0).any()) throw TensorError("log: non-positive input");
  Matrix out = a.value().array().log();
  return a.tape().record("log", std::move(out), {a}, [a](const Matrix& g, GradAccumulator& acc) {
    acc.add(a, g.cwiseQuotient(a.value()));
  });
}

Tensor softplus(const Tensor& a) {
  Matrix out = unary_map(a.value(), [](Scalar x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  });
  return a.tape().record("softplus", std::move(out), {a}, [a](const Matrix& g, GradAccumulator& acc) {
    Matrix s = unary_map(a.value(), [](Scalar x) { return 1.0 / (1.0 + std::exp(-x)); });
    acc.add(a, g.cwiseProduct(s));
  });
}

Tensor clamp(const Tensor& a, Scalar lo, Scalar hi) {
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape().record("clamp", std::move(out), {a}, [a, lo, hi](const Matrix& g, GradAccumulator& acc) {
    const auto& x = a.value().array();
    acc.add(a, (x >= lo && x <= hi).select(g.array(), 0.0));
  });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  require_same_shape("minimum", a.value(), b.value());
  Matrix out = a.value().cwiseMin(b.value());
  return a.tape().record("minimum", std::move(out), {a, b}, [a, b](const Matrix& g, GradAccumulator& acc) {
    const auto pick_a = (a.value().array() <= b.value().array());
    if (acc.wants(a)) acc.add(a, pick_a.select(g.array(), 0.0));
    if (acc.wants(b)) acc.add(b, pick_a.select(Matrix::Zero(g.rows(), g.cols()).array(), g.array()));
  });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  require_same_shape("maximum", a.value(), b.value());
  Matrix out = a.value().cwiseMax(b.value());
  return a.tape().record("maximum", std::move(out), {a, b}, [a, b](const Matrix& g, GradAccumulator& acc) {
    const auto pick_a = (a.value().array() >= b.value().array());
    if (acc.wants(a)) acc.add(a, pick_a.select(g.array(), 0.0));
    if (acc.wants(b)) acc.add(b, pick_a.select(Matrix::Zero(g.rows(), g.cols()).array(), g.array()));
  });
}

// ---------------------------------------------------------------------------
// Normalization and attention helpers

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps) {
  const Matrix& xv = x.value();
  const Index n = xv.cols();
  if (gamma.rows() != 1 || gamma.cols() != n) shape_error("layer_norm", xv, gamma.value());
  if (beta.rows() != 1 || beta.cols() != n) shape_error("layer_norm", xv, beta.value());
  Matrix xhat(xv.rows(), n);
  Eigen::VectorXd inv_std(xv.rows());
  for (Index r = 0; r < xv.rows(); ++r) {
    const Scalar mu = xv.row(r).mean();
    const Scalar var = (xv.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  return x.tape().record(
      "layer_norm", std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), n](const Matrix& g, GradAccumulator& acc) {
        if (acc.wants(x)) {
          Matrix dxhat = g.array().rowwise() * gamma.value().row(0).array();
          Matrix dx(g.rows(), n);
          for (Index r = 0; r < g.rows(); ++r) {
            const Scalar m1 = dxhat.row(r).mean();
            const Scalar m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
            dx.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
          }
          acc.add(x, dx);
        }
        if (acc.wants(gamma)) acc.add(gamma, g.cwiseProduct(xhat).colwise().sum());
        if (acc.wants(beta)) acc.add(beta, g.colwise().sum());
      });
}

namespace {

Matrix softmax_backward(const Matrix& y, const Matrix& g) {
  Matrix dx(y.rows(), y.cols());
  for (Index r = 0; r < y.rows(); ++r) {
    const Scalar dot = y.row(r).dot(g.row(r));
    dx.row(r) = y.row(r).array() * (g.row(r).array() - dot);
  }
  return dx;
}

}  // namespace

Tensor masked_softmax(const Tensor& x, const BoolMatrix& allowed) {
  const Matrix& xv = x.value();
  if (allowed.rows() != xv.rows() || allowed.cols() != xv.cols()) {
    throw TensorError("masked_softmax: mask shape [" + std::to_string(allowed.rows()) + ',' +
                      std::to_string(allowed.cols()) + "] vs input " + shape_string(xv));
  }
  Matrix y = Matrix::Zero(xv.rows(), xv.cols());
  for (Index r = 0; r < xv.rows(); ++r) {
    if (!allowed.row(r).any()) {
      throw TensorError("masked_softmax: row " + std::to_string(r) + " has no allowed entry");
    }
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (Index c = 0; c < xv.cols(); ++c) {
      if (allowed(r, c)) mx = std::max(mx, xv(r, c));
    }
    Scalar z = 0.0;
    for (Index c = 0; c < xv.cols(); ++c) {
      if (allowed(r, c)) {
        y(r, c) = std::exp(xv(r, c) - mx);
        z += y(r, c);
      }
    }
    y.row(r) /= z;
  }
  Matrix yc = y;
  return x.tape().record("masked_softmax", std::move(y), {x}, [x, yc = std::move(yc)](const Matrix& g, GradAccumulator& acc) {
    acc.add(x, softmax_backward(yc, g));
  });
}

Tensor softmax_rows(const Tensor& x) {
  return masked_softmax(x, BoolMatrix::Constant(x.rows(), x.cols(), true));
}

Tensor logsumexp_rows(const Tensor& x) {
  const Matrix& xv = x.value();
  if (xv.cols() == 0) throw TensorError("logsumexp_rows: empty rows");
  Matrix out(xv.rows(), 1);
  Matrix soft(xv.rows(), xv.cols());
  for (Index r = 0; r < xv.rows(); ++r) {
    const Scalar mx = xv.row(r).maxCoeff();
    soft.row(r) = (xv.row(r).array() - mx).exp();
    const Scalar z = soft.row(r).sum();
    out(r, 0) = mx + std::log(z);
    soft.row(r) /= z;
  }
  return x.tape().record("logsumexp_rows", std::move(out), {x},
                         [x, soft = std::move(soft)](const Matrix& g, GradAccumulator& acc) {
                           acc.add(x, soft.array().colwise() * g.col(0).array());
                         });
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  require_same_shape("cosine_similarity", a.value(), b.value());
  constexpr Scalar kMinNorm = 1e-12;
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Index n = av.rows();
  Eigen::VectorXd na(n), nb(n), cs(n);
  Matrix out(n, 1);
  for (Index r = 0; r < n; ++r) {
    na(r) = std::max(av.row(r).norm(), kMinNorm);
    nb(r) = std::max(bv.row(r).norm(), kMinNorm);
    cs(r) = av.row(r).dot(bv.row(r)) / (na(r) * nb(r));
    out(r, 0) = cs(r);
  }
  return a.tape().record("cosine_similarity", std::move(out), {a, b},
                         [a, b, na, nb, cs](const Matrix& g, GradAccumulator& acc) {
                           const Matrix& av = a.value();
                           const Matrix& bv = b.value();
                           if (acc.wants(a)) {
                             Matrix da(av.rows(), av.cols());
                             for (Index r = 0; r < av.rows(); ++r) {
                               da.row(r) = g(r, 0) * (bv.row(r) / (na(r) * nb(r)) - cs(r) * av.row(r) / (na(r) * na(r)));
                             }
                             acc.add(a, da);
                           }
                           if (acc.wants(b)) {
                             Matrix db(bv.rows(), bv.cols());
                             for (Index r = 0; r < bv.rows(); ++r) {
                               db.row(r) = g(r, 0) * (av.row(r) / (na(r) * nb(r)) - cs(r) * bv.row(r) / (nb(r) * nb(r)));
                             }
                             acc.add(b, db);
                           }
                         });
}

Tensor l1_distance(const Tensor& a, const Tensor& b) {
  require_same_shape("l1_distance", a.value(), b.value());
  Matrix diff = a.value() - b.value();
  Matrix out = Matrix::Constant(1, 1, diff.cwiseAbs().sum());
  Matrix sign = diff.unaryExpr([](Scalar v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
  return a.tape().record("l1_distance", std::move(out), {a, b},
                         [a, b, sign = std::move(sign)](const Matrix& g, GradAccumulator& acc) {
                           if (acc.wants(a)) acc.add(a, sign * g(0, 0));
                           if (acc.wants(b)) acc.add(b, sign * -g(0, 0));
                         });
}

Tensor token_cross_entropy(const Tensor& logits, std::span<const int> targets,
                           std::span<const Scalar> row_weights) {
  const Matrix& lv = logits.value();
  if (static_cast<Index>(targets.size()) != lv.rows()) {
    throw TensorError("token_cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                      shape_string(lv));
  }
  if (!row_weights.empty() && row_weights.size() != targets.size()) {
    throw TensorError("token_cross_entropy: weight count does not match target count");
  }
  Matrix soft = Matrix::Zero(lv.rows(), lv.cols());
  std::vector<int> tgt(targets.begin(), targets.end());
  std::vector<Scalar> w(targets.size(), 1.0);
  if (!row_weights.empty()) w.assign(row_weights.begin(), row_weights.end());
  Scalar total = 0.0;
  for (Index r = 0; r < lv.rows(); ++r) {
    const int t = tgt[static_cast<std::size_t>(r)];
    if (t < 0) continue;
    if (t >= lv.cols()) {
      throw TensorError("token_cross_entropy: target id " + std::to_string(t) + " >= vocab " +
                        std::to_string(lv.cols()));
    }
    const Scalar mx = lv.row(r).maxCoeff();
    soft.row(r) = (lv.row(r).array() - mx).exp();
    const Scalar z = soft.row(r).sum();
    soft.row(r) /= z;
    total += w[static_cast<std::size_t>(r)] * (mx + std::log(z) - lv(r, t));
  }
  return logits.tape().record(
      "token_cross_entropy", Matrix::Constant(1, 1, total), {logits},
      [logits, soft = std::move(soft), tgt = std::move(tgt), w = std::move(w)](const Matrix& g, GradAccumulator& acc) {
        Matrix d = soft;
        for (Index r = 0; r < d.rows(); ++r) {
          const int t = tgt[static_cast<std::size_t>(r)];
          if (t < 0) continue;
          d(r, t) -= 1.0;
          d.row(r) *= w[static_cast<std::size_t>(r)];
        }
        acc.add(logits, d * g(0, 0));
      });
}

Tensor gaussian_kl(const Tensor& mu, const Tensor& logvar) {
  require_same_shape("gaussian_kl", mu.value(), logvar.value());
  const auto m = mu.value().array();
  const auto lv = logvar.value().array();
  const Scalar kl = 0.5 * (lv.exp() + m.square() - 1.0 - lv).sum();
  return mu.tape().record("gaussian_kl", Matrix::Constant(1, 1, kl), {mu, logvar},
                          [mu, logvar](const Matrix& g, GradAccumulator& acc) {
                            if (acc.wants(mu)) acc.add(mu, mu.value() * g(0, 0));
                            if (acc.wants(logvar)) {
                              acc.add(logvar, 0.5 * g(0, 0) * (logvar.value().array().exp() - 1.0).matrix());
                            }
                          });
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Matrix& noise) {
  require_same_shape("reparameterize", mu.value(), logvar.value());
  require_same_shape("reparameterize", mu.value(), noise);
  Matrix sd = (0.5 * logvar.value().array()).exp();
  Matrix out = mu.value() + sd.cwiseProduct(noise);
  return mu.tape().record("reparameterize", std::move(out), {mu, logvar},
                          [mu, logvar, sd = std::move(sd), noise](const Matrix& g, GradAccumulator& acc) {
                            if (acc.wants(mu)) acc.add(mu, g);
                            if (acc.wants(logvar)) acc.add(logvar, 0.5 * g.cwiseProduct(sd).cwiseProduct(noise));
                          });
}

Tensor dropout(const Tensor& a, Scalar rate, Rng* rng) {
  if (rate <= 0.0 || rng == nullptr) return a;
  if (rate >= 1.0) throw TensorError("dropout: rate must be < 1");
  Matrix keep(a.rows(), a.cols());
  for (Index i = 0; i < keep.size(); ++i) keep.data()[i] = uniform01(*rng) >= rate ? 1.0 / (1.0 - rate) : 0.0;
  Matrix out = a.value().cwiseProduct(keep);
  return a.tape().record("dropout", std::move(out), {a}, [a, keep = std::move(keep)](const Matrix& g, GradAccumulator& acc) {
    acc.add(a, g.cwiseProduct(keep));
  });
}

// ---------------------------------------------------------------------------
// Name dispatch

namespace {

using Dispatch = std::function<Tensor(std::span<const Tensor>)>;

void expect_arity(std::string_view op, std::span<const Tensor> in, std::size_t lo, std::size_t hi) {
  if (in.size() < lo || in.size() > hi) {
    throw TensorError(std::string(op) + ": expected " + std::to_string(lo) +
                      (lo == hi ? "" : "-" + std::to_string(hi)) + " inputs, got " + std::to_string(in.size()));
  }
}

const std::map<std::string, Dispatch, std::less<>>& dispatch_table() {
  static const std::map<std::string, Dispatch, std::less<>> table = [] {
    std::map<std::string, Dispatch, std::less<>> t;
    auto unary = [&t](const std::string& name, Tensor (*f)(const Tensor&)) {
      t[name] = [name, f](std::span<const Tensor> in) {
        expect_arity(name, in, 1, 1);
        return f(in[0]);
      };
    };
    auto binary = [&t](const std::string& name, Tensor (*f)(const Tensor&, const Tensor&)) {
      t[name] = [name, f](std::span<const Tensor> in) {
        expect_arity(name, in, 2, 2);
        return f(in[0], in[1]);
      };
    };
    binary("add", &add);
    binary("sub", &sub);
    binary("mul", &mul);
    binary("matmul", &matmul);
    binary("cosine_similarity", &cosine_similarity);
    binary("l1_distance", &l1_distance);
    binary("gaussian_kl", &gaussian_kl);
    binary("minimum", &minimum);
    binary("maximum", &maximum);
    unary("transpose", &transpose);
    unary("mean_rows", &mean_rows);
    unary("sum", &sum);
    unary("mean", &mean);
    unary("tanh", &tanh);
    unary("sigmoid", &sigmoid);
    unary("relu", &relu);
    unary("exp", &exp);
    unary("log", &log);
    unary("softplus", &softplus);
    unary("logsumexp_rows", &logsumexp_rows);
    unary("softmax_rows", &softmax_rows);
    t["concat_rows"] = [](std::span<const Tensor> in) { return concat_rows(in); };
    t["concat_cols"] = [](std::span<const Tensor> in) { return concat_cols(in); };
    t["layer_norm"] = [](std::span<const Tensor> in) {
      expect_arity("layer_norm", in, 3, 3);
      return layer_norm(in[0], in[1], in[2], 1e-12);
    };
    t["masked_softmax"] = [](std::span<const Tensor> in) {
      expect_arity("masked_softmax", in, 2, 2);
      const BoolMatrix mask = in[1].value().array() != 0.0;
      return masked_softmax(in[0], mask);
    };
    t["token_cross_entropy"] = [](std::span<const Tensor> in) {
      expect_arity("token_cross_entropy", in, 2, 3);
      const Matrix& ids = in[1].value();
      std::vector<int> targets(static_cast<std::size_t>(ids.size()));
      for (Index i = 0; i < ids.size(); ++i) targets[static_cast<std::size_t>(i)] = static_cast<int>(ids.data()[i]);
      std::vector<Scalar> weights;
      if (in.size() == 3) weights.assign(in[2].value().data(), in[2].value().data() + in[2].size());
      return token_cross_entropy(in[0], targets, weights);
    };
    t["reparameterize"] = [](std::span<const Tensor> in) {
      expect_arity("reparameterize", in, 3, 3);
      return reparameterize(in[0], in[1], in[2].value());
    };
    return t;
  }();
  return table;
}

}  // namespace

Tensor apply_primitive(std::string_view op_name, std::span<const Tensor> inputs) {
  const auto& table = dispatch_table();
  auto it = table.find(op_name);
  if (it == table.end()) throw TensorError("unknown primitive '" + std::string(op_name) + "'");
  if (inputs.empty()) throw TensorError(std::string(op_name) + ": no inputs");
  return it->second(inputs);
}

std::vector<std::string> primitive_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : dispatch_table()) names.push_back(name);
  return names;
}

}  // namespace storyvis
