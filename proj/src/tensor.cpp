// SPDX-License-Identifier: Apache-2.0
#include "setrank/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace setrank {

namespace {

thread_local bool g_grad_enabled = true;

void check(bool cond, const std::string& msg) {
  if (!cond) {
    throw std::invalid_argument(msg);
  }
}

void check_rank2(const Tensor& t, const char* op) {
  check(t.defined() && t.rank() == 2,
        std::string(op) + ": expected a rank-2 tensor, got shape " +
            (t.defined() ? shape_to_string(t.shape()) : "<undefined>"));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  check(a.defined() && b.defined() && a.shape() == b.shape(),
        std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
            " vs " + shape_to_string(b.shape()));
}

void accum(const Tensor& parent, const ArrayX& g) { accumulate_to(parent, g); }

ConstMatMap as_matrix(const Tensor& t) { return t.matrix(); }

}  // namespace

void accumulate_to(const Tensor& parent, const ArrayX& g) {
  if (parent.requires_grad()) {
    const_cast<Tensor&>(parent).accumulate_grad(g);
  }
}

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = ArrayX::Zero(numel(n->shape));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::full(Shape shape, Scalar v, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = ArrayX::Constant(numel(n->shape), v);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from_data(Shape shape, std::vector<Scalar> values,
                         bool requires_grad) {
  check(numel(shape) == static_cast<Index>(values.size()),
        "Tensor::from_data: shape " + shape_to_string(shape) +
            " does not match " + std::to_string(values.size()) + " values");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = Eigen::Map<const ArrayX>(values.data(),
                                      static_cast<Index>(values.size()));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from_array(Shape shape, const ArrayX& values,
                          bool requires_grad) {
  check(numel(shape) == values.size(),
        "Tensor::from_array: shape/value size mismatch");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = values;
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(Scalar v, bool requires_grad) {
  return full({}, v, requires_grad);
}

const Shape& Tensor::shape() const {
  check(defined(), "Tensor: undefined");
  return node_->shape;
}

Index Tensor::rank() const { return static_cast<Index>(shape().size()); }

Index Tensor::size() const { return numel(shape()); }

Index Tensor::rows() const {
  const Shape& s = shape();
  check(s.size() <= 2, "Tensor::rows: rank > 2");
  if (s.size() == 2) return s[0];
  return 1;
}

Index Tensor::cols() const {
  const Shape& s = shape();
  check(s.size() <= 2, "Tensor::cols: rank > 2");
  if (s.size() == 2) return s[1];
  if (s.size() == 1) return s[0];
  return 1;
}

ConstMatMap Tensor::matrix() const {
  return ConstMatMap(values().data(), rows(), cols());
}

const ArrayX& Tensor::values() const {
  check(defined(), "Tensor: undefined");
  return node_->value;
}

ArrayX& Tensor::values_mut() {
  check(defined(), "Tensor: undefined");
  return node_->value;
}

Scalar Tensor::value() const {
  check(size() == 1, "Tensor::value: tensor is not a scalar, shape " +
                         shape_to_string(shape()));
  return node_->value[0];
}

Scalar Tensor::at(Index flat) const {
  check(defined() && flat >= 0 && flat < size(), "Tensor::at: out of range");
  return node_->value[flat];
}

bool Tensor::requires_grad() const {
  return defined() && node_->requires_grad;
}

void Tensor::set_requires_grad(bool v) {
  check(defined(), "Tensor: undefined");
  node_->requires_grad = v;
}

bool Tensor::has_grad() const { return defined() && node_->grad.size() > 0; }

const ArrayX& Tensor::grad() const {
  check(defined(), "Tensor: undefined");
  if (node_->grad.size() == 0) {
    throw std::invalid_argument("Tensor::grad: no gradient accumulated");
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  check(defined(), "Tensor: undefined");
  node_->grad.resize(0);
}

void Tensor::accumulate_grad(const ArrayX& g) {
  check(defined(), "Tensor: undefined");
  check(g.size() == size(), "accumulate_grad: size mismatch");
  if (node_->grad.size() == 0) {
    node_->grad = g;
  } else {
    node_->grad += g;
  }
}

Tensor make_op(Shape shape, ArrayX value, std::vector<Tensor> parents,
               std::function<void(const Tensor&)> backward) {
  auto n = std::make_shared<Tensor::Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const Tensor& p : parents) {
      if (p.requires_grad()) {
        needs_grad = true;
        break;
      }
    }
  }
  n->requires_grad = needs_grad;
  if (needs_grad) {
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

void backward(const Tensor& loss) {
  check(loss.defined(), "backward: undefined loss");
  if (loss.size() != 1) {
    throw std::invalid_argument(
        "backward: loss must be a scalar, got shape " +
        shape_to_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    return;  // nothing in the graph tracks gradients
  }

  // Post-order DFS; the reversed order is topological (consumers first).
  std::vector<Tensor> order;
  std::unordered_set<const Tensor::Node*> visited;
  struct Frame {
    Tensor t;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss, 0});
  visited.insert(loss.node());
  while (!stack.empty()) {
    Frame& f = stack.back();
    const auto& parents = f.t.node()->parents;
    if (f.next_parent < parents.size()) {
      const Tensor& p = parents[f.next_parent++];
      if (p.requires_grad() && !visited.count(p.node())) {
        visited.insert(p.node());
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.t);
      stack.pop_back();
    }
  }

  const_cast<Tensor&>(loss).accumulate_grad(ArrayX::Ones(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Tensor& t = *it;
    if (t.node()->backward && t.has_grad()) {
      t.node()->backward(t);
    }
  }
}

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  return make_op(a.shape(), a.values() + b.values(), {a, b},
                 [a, b](const Tensor& self) {
                   accum(a, self.grad());
                   accum(b, self.grad());
                 });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  return make_op(a.shape(), a.values() - b.values(), {a, b},
                 [a, b](const Tensor& self) {
                   accum(a, self.grad());
                   accum(b, ArrayX(-self.grad()));
                 });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  return make_op(a.shape(), a.values() * b.values(), {a, b},
                 [a, b](const Tensor& self) {
                   accum(a, ArrayX(self.grad() * b.values()));
                   accum(b, ArrayX(self.grad() * a.values()));
                 });
}

Tensor neg(const Tensor& a) {
  return make_op(a.shape(), ArrayX(-a.values()), {a},
                 [a](const Tensor& self) { accum(a, ArrayX(-self.grad())); });
}

Tensor add_scalar(const Tensor& a, Scalar c) {
  return make_op(a.shape(), ArrayX(a.values() + c), {a},
                 [a](const Tensor& self) { accum(a, self.grad()); });
}

Tensor mul_scalar(const Tensor& a, Scalar c) {
  return make_op(a.shape(), ArrayX(a.values() * c), {a},
                 [a, c](const Tensor& self) {
                   accum(a, ArrayX(self.grad() * c));
                 });
}

Tensor exp(const Tensor& a) {
  return make_op(a.shape(), ArrayX(a.values().exp()), {a},
                 [a](const Tensor& self) {
                   accum(a, ArrayX(self.grad() * self.values()));
                 });
}

Tensor log(const Tensor& a) {
  return make_op(a.shape(), ArrayX(a.values().log()), {a},
                 [a](const Tensor& self) {
                   accum(a, ArrayX(self.grad() / a.values()));
                 });
}

Tensor tanh(const Tensor& a) {
  return make_op(a.shape(), ArrayX(a.values().tanh()), {a},
                 [a](const Tensor& self) {
                   accum(a, ArrayX(self.grad() *
                                   (1.0 - self.values().square())));
                 });
}

Tensor sigmoid(const Tensor& a) {
  ArrayX s = 1.0 / (1.0 + (-a.values()).exp());
  return make_op(a.shape(), std::move(s), {a}, [a](const Tensor& self) {
    const ArrayX& s = self.values();
    accum(a, ArrayX(self.grad() * s * (1.0 - s)));
  });
}

Tensor gelu(const Tensor& a) {
  static const Scalar kC0 = std::sqrt(2.0 / M_PI);
  static const Scalar kC1 = 0.044715;
  const ArrayX& x = a.values();
  ArrayX u = kC0 * (x + kC1 * x.cube());
  ArrayX t = u.tanh();
  ArrayX y = 0.5 * x * (1.0 + t);
  return make_op(a.shape(), std::move(y), {a}, [a, t](const Tensor& self) {
    const ArrayX& x = a.values();
    ArrayX du = kC0 * (1.0 + 3.0 * kC1 * x.square());
    ArrayX dydx = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t.square()) * du;
    accum(a, ArrayX(self.grad() * dydx));
  });
}

// ---- reductions ----

Tensor sum(const Tensor& a) {
  ArrayX v(1);
  v[0] = a.values().sum();
  return make_op({}, std::move(v), {a}, [a](const Tensor& self) {
    accum(a, ArrayX(ArrayX::Constant(a.size(), self.grad()[0])));
  });
}

Tensor mean(const Tensor& a) {
  check(a.size() > 0, "mean: empty tensor");
  ArrayX v(1);
  v[0] = a.values().mean();
  const Scalar inv_n = 1.0 / static_cast<Scalar>(a.size());
  return make_op({}, std::move(v), {a}, [a, inv_n](const Tensor& self) {
    accum(a, ArrayX(ArrayX::Constant(a.size(), self.grad()[0] * inv_n)));
  });
}

// ---- rank-2 linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank2(a, "matmul");
  check_rank2(b, "matmul");
  check(a.cols() == b.rows(),
        "matmul: inner dimensions do not conform, " +
            shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()));
  const Index r = a.rows(), c = b.cols();
  ArrayX out(r * c);
  MatMap(out.data(), r, c) = as_matrix(a) * as_matrix(b);
  return make_op({r, c}, std::move(out), {a, b}, [a, b](const Tensor& self) {
    ConstMatMap g(self.grad().data(), self.rows(), self.cols());
    if (a.requires_grad()) {
      ArrayX da(a.size());
      MatMap(da.data(), a.rows(), a.cols()) = g * as_matrix(b).transpose();
      accum(a, da);
    }
    if (b.requires_grad()) {
      ArrayX db(b.size());
      MatMap(db.data(), b.rows(), b.cols()) = as_matrix(a).transpose() * g;
      accum(b, db);
    }
  });
}

Tensor transpose(const Tensor& a) {
  check_rank2(a, "transpose");
  const Index r = a.rows(), c = a.cols();
  ArrayX out(r * c);
  MatMap(out.data(), c, r) = as_matrix(a).transpose();
  return make_op({c, r}, std::move(out), {a}, [a](const Tensor& self) {
    ArrayX da(a.size());
    MatMap(da.data(), a.rows(), a.cols()) =
        ConstMatMap(self.grad().data(), self.rows(), self.cols()).transpose();
    accum(a, da);
  });
}

Tensor slice_rows(const Tensor& a, Index start, Index count) {
  check_rank2(a, "slice_rows");
  check(start >= 0 && count >= 0 && start + count <= a.rows(),
        "slice_rows: range out of bounds");
  const Index c = a.cols();
  ArrayX out(count * c);
  MatMap(out.data(), count, c) = as_matrix(a).middleRows(start, count);
  return make_op({count, c}, std::move(out), {a},
                 [a, start, count](const Tensor& self) {
                   ArrayX da = ArrayX::Zero(a.size());
                   MatMap(da.data(), a.rows(), a.cols())
                       .middleRows(start, count) =
                       ConstMatMap(self.grad().data(), count, a.cols());
                   accum(a, da);
                 });
}

Tensor slice_cols(const Tensor& a, Index start, Index count) {
  check_rank2(a, "slice_cols");
  check(start >= 0 && count >= 0 && start + count <= a.cols(),
        "slice_cols: range out of bounds");
  const Index r = a.rows();
  ArrayX out(r * count);
  MatMap(out.data(), r, count) = as_matrix(a).middleCols(start, count);
  return make_op({r, count}, std::move(out), {a},
                 [a, start, count](const Tensor& self) {
                   ArrayX da = ArrayX::Zero(a.size());
                   MatMap(da.data(), a.rows(), a.cols())
                       .middleCols(start, count) =
                       ConstMatMap(self.grad().data(), a.rows(), count);
                   accum(a, da);
                 });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  check(!parts.empty(), "concat_rows: no parts");
  const Index c = parts[0].cols();
  Index total = 0;
  for (const Tensor& p : parts) {
    check_rank2(p, "concat_rows");
    check(p.cols() == c, "concat_rows: column counts differ");
    total += p.rows();
  }
  ArrayX out(total * c);
  MatMap m(out.data(), total, c);
  Index at = 0;
  for (const Tensor& p : parts) {
    m.middleRows(at, p.rows()) = as_matrix(p);
    at += p.rows();
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_op({total, c}, std::move(out), parents,
                 [parents](const Tensor& self) {
                   ConstMatMap g(self.grad().data(), self.rows(), self.cols());
                   Index at = 0;
                   for (const Tensor& p : parents) {
                     if (p.requires_grad()) {
                       ArrayX dp(p.size());
                       MatMap(dp.data(), p.rows(), p.cols()) =
                           g.middleRows(at, p.rows());
                       accum(p, dp);
                     }
                     at += p.rows();
                   }
                 });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  check(!parts.empty(), "concat_cols: no parts");
  const Index r = parts[0].rows();
  Index total = 0;
  for (const Tensor& p : parts) {
    check_rank2(p, "concat_cols");
    check(p.rows() == r, "concat_cols: row counts differ");
    total += p.cols();
  }
  ArrayX out(r * total);
  MatMap m(out.data(), r, total);
  Index at = 0;
  for (const Tensor& p : parts) {
    m.middleCols(at, p.cols()) = as_matrix(p);
    at += p.cols();
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_op({r, total}, std::move(out), parents,
                 [parents](const Tensor& self) {
                   ConstMatMap g(self.grad().data(), self.rows(), self.cols());
                   Index at = 0;
                   for (const Tensor& p : parents) {
                     if (p.requires_grad()) {
                       ArrayX dp(p.size());
                       MatMap(dp.data(), p.rows(), p.cols()) =
                           g.middleCols(at, p.cols());
                       accum(p, dp);
                     }
                     at += p.cols();
                   }
                 });
}

Tensor add_rowwise(const Tensor& a, const Tensor& bias) {
  check_rank2(a, "add_rowwise");
  check(bias.defined() && bias.rank() == 1 && bias.size() == a.cols(),
        "add_rowwise: bias length must equal column count");
  ArrayX out(a.size());
  MatMap m(out.data(), a.rows(), a.cols());
  m = as_matrix(a);
  m.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.values().data(),
                                                      bias.size());
  return make_op(a.shape(), std::move(out), {a, bias},
                 [a, bias](const Tensor& self) {
                   accum(a, self.grad());
                   if (bias.requires_grad()) {
                     ConstMatMap g(self.grad().data(), a.rows(), a.cols());
                     ArrayX db(bias.size());
                     Eigen::Map<Eigen::RowVectorXd>(db.data(), db.size()) =
                         g.colwise().sum();
                     accum(bias, db);
                   }
                 });
}

Tensor gather_rows(const Tensor& table, const std::vector<Index>& ids) {
  check_rank2(table, "gather_rows");
  const Index c = table.cols();
  for (Index id : ids) {
    check(id >= 0 && id < table.rows(), "gather_rows: row id out of range");
  }
  const Index n = static_cast<Index>(ids.size());
  ArrayX out(n * c);
  MatMap m(out.data(), n, c);
  for (Index i = 0; i < n; ++i) {
    m.row(i) = as_matrix(table).row(ids[static_cast<std::size_t>(i)]);
  }
  return make_op({n, c}, std::move(out), {table},
                 [table, ids](const Tensor& self) {
                   ArrayX dt = ArrayX::Zero(table.size());
                   MatMap dm(dt.data(), table.rows(), table.cols());
                   ConstMatMap g(self.grad().data(), self.rows(), self.cols());
                   for (Index i = 0; i < self.rows(); ++i) {
                     dm.row(ids[static_cast<std::size_t>(i)]) += g.row(i);
                   }
                   accum(table, dt);
                 });
}

Tensor stack_scalars(std::span<const Tensor> parts) {
  check(!parts.empty(), "stack_scalars: no parts");
  const Index n = static_cast<Index>(parts.size());
  ArrayX out(n);
  for (Index i = 0; i < n; ++i) {
    check(parts[static_cast<std::size_t>(i)].size() == 1,
          "stack_scalars: every part must have a single element");
    out[i] = parts[static_cast<std::size_t>(i)].values()[0];
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_op({n}, std::move(out), parents, [parents](const Tensor& self) {
    for (Index i = 0; i < static_cast<Index>(parents.size()); ++i) {
      const Tensor& p = parents[static_cast<std::size_t>(i)];
      if (p.requires_grad()) {
        accum(p, ArrayX(ArrayX::Constant(1, self.grad()[i])));
      }
    }
  });
}

// ---- normalization and attention ----

namespace {

struct AxisLayout {
  Index outer, n, inner;
};

AxisLayout axis_layout(const Shape& shape, int axis) {
  AxisLayout l{1, shape[static_cast<std::size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) l.outer *= shape[static_cast<std::size_t>(i)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size();
       ++i) {
    l.inner *= shape[i];
  }
  return l;
}

}  // namespace

Tensor stable_softmax(const Tensor& x, int axis) {
  check(x.defined() && x.rank() >= 1, "stable_softmax: rank must be >= 1");
  check(axis >= 0 && axis < x.rank(),
        "stable_softmax: axis " + std::to_string(axis) +
            " invalid for shape " + shape_to_string(x.shape()));
  if (!x.values().allFinite()) {
    throw std::domain_error("stable_softmax: non-finite input");
  }
  const AxisLayout l = axis_layout(x.shape(), axis);
  ArrayX out(x.size());
  const ArrayX& v = x.values();
  for (Index o = 0; o < l.outer; ++o) {
    for (Index in = 0; in < l.inner; ++in) {
      const Index base = o * l.n * l.inner + in;
      Scalar m = v[base];
      for (Index t = 1; t < l.n; ++t) m = std::max(m, v[base + t * l.inner]);
      Scalar denom = 0;
      for (Index t = 0; t < l.n; ++t) {
        const Scalar e = std::exp(v[base + t * l.inner] - m);
        out[base + t * l.inner] = e;
        denom += e;
      }
      for (Index t = 0; t < l.n; ++t) out[base + t * l.inner] /= denom;
    }
  }
  return make_op(x.shape(), std::move(out), {x}, [x, l](const Tensor& self) {
    const ArrayX& p = self.values();
    const ArrayX& g = self.grad();
    ArrayX dx(x.size());
    for (Index o = 0; o < l.outer; ++o) {
      for (Index in = 0; in < l.inner; ++in) {
        const Index base = o * l.n * l.inner + in;
        Scalar dot = 0;
        for (Index t = 0; t < l.n; ++t) {
          const Index at = base + t * l.inner;
          dot += p[at] * g[at];
        }
        for (Index t = 0; t < l.n; ++t) {
          const Index at = base + t * l.inner;
          dx[at] = p[at] * (g[at] - dot);
        }
      }
    }
    accum(x, dx);
  });
}

Tensor masked_softmax(const Tensor& x, const Tensor& mask) {
  check_rank2(x, "masked_softmax");
  check_same_shape(x, mask, "masked_softmax");
  if (!x.values().allFinite()) {
    throw std::domain_error("masked_softmax: non-finite input");
  }
  const Index r = x.rows(), c = x.cols();
  ArrayX out(x.size());
  const ArrayX& v = x.values();
  const ArrayX& mk = mask.values();
  for (Index i = 0; i < r; ++i) {
    const Index base = i * c;
    Scalar m = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < c; ++j) {
      if (mk[base + j] != 0.0) m = std::max(m, v[base + j]);
    }
    check(std::isfinite(m), "masked_softmax: row " + std::to_string(i) +
                                " has no unmasked entries");
    Scalar denom = 0;
    for (Index j = 0; j < c; ++j) {
      Scalar e = 0;
      if (mk[base + j] != 0.0) {
        e = std::exp(v[base + j] - m);
        denom += e;
      }
      out[base + j] = e;
    }
    for (Index j = 0; j < c; ++j) out[base + j] /= denom;
  }
  return make_op(x.shape(), std::move(out), {x, mask},
                 [x, r, c](const Tensor& self) {
                   const ArrayX& p = self.values();
                   const ArrayX& g = self.grad();
                   ArrayX dx(x.size());
                   for (Index i = 0; i < r; ++i) {
                     const Index base = i * c;
                     Scalar dot = 0;
                     for (Index j = 0; j < c; ++j) {
                       dot += p[base + j] * g[base + j];
                     }
                     for (Index j = 0; j < c; ++j) {
                       dx[base + j] = p[base + j] * (g[base + j] - dot);
                     }
                   }
                   accum(x, dx);
                 });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 const Tensor& mask, Index head_dim) {
  check_rank2(q, "attention");
  check_rank2(k, "attention");
  check_rank2(v, "attention");
  check(head_dim > 0, "attention: head_dim must be positive");
  check(q.cols() == k.cols(), "attention: Q and K widths differ");
  check(k.rows() == v.rows(), "attention: K and V row counts differ");
  check(mask.defined() && mask.rank() == 2 && mask.rows() == q.rows() &&
            mask.cols() == k.rows(),
        "attention: mask must match the score matrix shape");
  Tensor scores =
      mul_scalar(matmul(q, transpose(k)),
                 1.0 / std::sqrt(static_cast<Scalar>(head_dim)));
  return matmul(masked_softmax(scores, mask), v);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Scalar eps) {
  check_rank2(x, "layer_norm");
  check(gamma.defined() && gamma.rank() == 1 && gamma.size() == x.cols(),
        "layer_norm: gamma length must equal column count");
  check(beta.defined() && beta.rank() == 1 && beta.size() == x.cols(),
        "layer_norm: beta length must equal column count");
  const Index r = x.rows(), c = x.cols();
  ArrayX out(x.size());
  ArrayX xhat(x.size());
  ArrayX inv_sigma(r);
  const ArrayX& v = x.values();
  for (Index i = 0; i < r; ++i) {
    const Index base = i * c;
    Scalar mu = 0;
    for (Index j = 0; j < c; ++j) mu += v[base + j];
    mu /= static_cast<Scalar>(c);
    Scalar var = 0;
    for (Index j = 0; j < c; ++j) {
      const Scalar d = v[base + j] - mu;
      var += d * d;
    }
    var /= static_cast<Scalar>(c);
    const Scalar is = 1.0 / std::sqrt(var + eps);
    inv_sigma[i] = is;
    for (Index j = 0; j < c; ++j) {
      const Scalar xh = (v[base + j] - mu) * is;
      xhat[base + j] = xh;
      out[base + j] = gamma.values()[j] * xh + beta.values()[j];
    }
  }
  return make_op(
      x.shape(), std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_sigma, r, c](const Tensor& self) {
        const ArrayX& g = self.grad();
        if (gamma.requires_grad()) {
          ArrayX dg = ArrayX::Zero(c);
          for (Index i = 0; i < r; ++i) {
            for (Index j = 0; j < c; ++j) {
              dg[j] += g[i * c + j] * xhat[i * c + j];
            }
          }
          accum(gamma, dg);
        }
        if (beta.requires_grad()) {
          ArrayX db = ArrayX::Zero(c);
          for (Index i = 0; i < r; ++i) {
            for (Index j = 0; j < c; ++j) db[j] += g[i * c + j];
          }
          accum(beta, db);
        }
        if (x.requires_grad()) {
          ArrayX dx(x.size());
          for (Index i = 0; i < r; ++i) {
            const Index base = i * c;
            Scalar mean_gh = 0, mean_gh_xhat = 0;
            for (Index j = 0; j < c; ++j) {
              const Scalar gh = g[base + j] * gamma.values()[j];
              mean_gh += gh;
              mean_gh_xhat += gh * xhat[base + j];
            }
            mean_gh /= static_cast<Scalar>(c);
            mean_gh_xhat /= static_cast<Scalar>(c);
            for (Index j = 0; j < c; ++j) {
              const Scalar gh = g[base + j] * gamma.values()[j];
              dx[base + j] = inv_sigma[i] *
                             (gh - mean_gh - xhat[base + j] * mean_gh_xhat);
            }
          }
          accum(x, dx);
        }
      });
}

}  // namespace setrank
