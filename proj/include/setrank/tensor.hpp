// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace setrank {

using Scalar = double;
using Index = Eigen::Index;
using Shape = std::vector<Index>;

using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
using MatrixRM =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<MatrixRM>;
using ConstMatMap = Eigen::Map<const MatrixRM>;

Index numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense float64 tensor with reverse-mode gradient tracking.
///
/// A Tensor is a value-semantic handle onto a graph node. Nodes created by
/// the free functions below remember their parents and a backward closure;
/// backward(loss) replays the closures in reverse topological order. Values
/// are treated as immutable once a node has been consumed by a downstream
/// op; only leaves (parameters) are mutated, between steps, through
/// values_mut().
class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar v, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<Scalar> values,
                          bool requires_grad = false);
  static Tensor from_array(Shape shape, const ArrayX& values,
                           bool requires_grad = false);
  static Tensor scalar(Scalar v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  Index rank() const;
  Index size() const;

  // Rank <= 2 views: a scalar maps to 1x1, a rank-1 tensor to 1xN.
  Index rows() const;
  Index cols() const;
  ConstMatMap matrix() const;

  const ArrayX& values() const;
  ArrayX& values_mut();
  Scalar value() const;  // scalar tensors only
  Scalar at(Index flat) const;

  bool requires_grad() const;
  void set_requires_grad(bool v);
  bool has_grad() const;
  const ArrayX& grad() const;  // throws when no gradient has been accumulated
  void zero_grad();
  void accumulate_grad(const ArrayX& g);

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  struct Node;
  Node* node() const { return node_.get(); }

private:
  std::shared_ptr<Node> node_;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  friend Tensor make_op(Shape shape, ArrayX value, std::vector<Tensor> parents,
                        std::function<void(const Tensor&)> backward);
  friend void backward(const Tensor& loss);
};

struct Tensor::Node {
  Shape shape;
  ArrayX value;
  ArrayX grad;  // zero-sized until the first accumulation
  bool requires_grad = false;
  std::vector<Tensor> parents;
  // Called with the finished node; reads its grad and pushes contributions
  // into the parents via accumulate_grad.
  std::function<void(const Tensor&)> backward;
};

/// Creates a graph node. When gradient tracking is globally disabled or no
/// parent requires a gradient, parents and closure are dropped so the graph
/// stays forward-only.
Tensor make_op(Shape shape, ArrayX value, std::vector<Tensor> parents,
               std::function<void(const Tensor&)> backward);

/// For backward closures of custom ops: adds g into the parent's gradient
/// buffer if (and only if) the parent tracks gradients.
void accumulate_to(const Tensor& parent, const ArrayX& g);

/// Gradient tracking switch, RAII style. Inference paths wrap themselves in
/// a NoGradGuard so no backward closures are built.
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool prev_;
};

bool grad_enabled();

/// Populates .grad on every requires_grad tensor reachable from loss.
/// loss must be scalar; repeated calls accumulate.
void backward(const Tensor& loss);

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, Scalar c);
Tensor mul_scalar(const Tensor& a, Scalar c);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor gelu(const Tensor& a);  // tanh approximation

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, Scalar c) { return mul_scalar(a, c); }
inline Tensor operator*(Scalar c, const Tensor& a) { return mul_scalar(a, c); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---- reductions ----
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// ---- rank-2 linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor slice_rows(const Tensor& a, Index start, Index count);
Tensor slice_cols(const Tensor& a, Index start, Index count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
// Adds a rank-1 bias across every row of a rank-2 tensor.
Tensor add_rowwise(const Tensor& a, const Tensor& bias);
// Gathers rows of a rank-2 table; backward scatter-adds.
Tensor gather_rows(const Tensor& table, const std::vector<Index>& ids);
// Stacks single-element tensors into a rank-1 tensor.
Tensor stack_scalars(std::span<const Tensor> parts);

// ---- normalization and attention ----

/// Softmax along `axis`, computed with max subtraction. Throws
/// std::domain_error on non-finite input.
Tensor stable_softmax(const Tensor& x, int axis);

/// Softmax over the columns of a rank-2 tensor where mask entries equal to
/// zero are excluded: they receive exactly zero weight and zero gradient.
/// mask must have the same shape as x and is not differentiated through.
Tensor masked_softmax(const Tensor& x, const Tensor& mask);

/// Scaled dot-product attention: softmax(Q K^T / sqrt(head_dim)) V, with a
/// boolean (0/1) mask over the score matrix. Masked positions get zero
/// attention weight; every output row is a convex combination of unmasked
/// rows of V.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 const Tensor& mask, Index head_dim);

/// Row-wise layer normalization of a rank-2 tensor with learned scale and
/// offset (rank-1, length = cols).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Scalar eps = 1e-5);

}  // namespace setrank
