#include "pcdgan/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <unordered_set>

#include "pcdgan/error.hpp"

namespace pcdgan::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

thread_local bool g_grad_enabled = true;

void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

// Index map for a broadcast operand: identity, scalar, or row-vector.
enum class Bcast { kSame, kScalar, kRow };

std::size_t bmap(Bcast kind, std::size_t i, std::size_t cols) {
  switch (kind) {
    case Bcast::kSame:
      return i;
    case Bcast::kScalar:
      return 0;
    case Bcast::kRow:
      return i % cols;
  }
  return i;
}

bool is_row_of(const Shape& row, const Shape& mat) {
  if (mat.size() != 2) return false;
  if (row.size() == 1) return row[0] == mat[1];
  if (row.size() == 2) return row[0] == 1 && row[1] == mat[1];
  return false;
}

struct Broadcast {
  Shape out;
  Bcast a = Bcast::kSame;
  Bcast b = Bcast::kSame;
  std::size_t cols = 1;
};

Broadcast resolve(const std::string& op, const Shape& sa, const Shape& sb) {
  Broadcast r;
  if (sa == sb) {
    r.out = sa;
  } else if (numel(sb) == 1) {
    r.out = sa;
    r.b = Bcast::kScalar;
  } else if (numel(sa) == 1) {
    r.out = sb;
    r.a = Bcast::kScalar;
  } else if (is_row_of(sb, sa)) {
    r.out = sa;
    r.b = Bcast::kRow;
  } else if (is_row_of(sa, sb)) {
    r.out = sb;
    r.a = Bcast::kRow;
  } else {
    throw ContractViolation(
        fmt::format("{}: shapes {} and {} are not conformable", op, shape_str(sa), shape_str(sb)));
  }
  if (r.out.size() == 2) r.cols = r.out[1];
  return r;
}

// Elementwise unary op: forward f(x), backward df(x, y) * g.
template <typename F, typename DF>
Tensor unary(const std::string& op, const Tensor& a, F f, DF df) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return make_op(op, a.shape(), std::move(out), {a}, [df](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      pa.grad[i] += self.grad[i] * df(pa.value[i], self.value[i]);
    }
  });
}

// Elementwise binary op with batch broadcast. dfa/dfb give partials.
template <typename F, typename DFA, typename DFB>
Tensor binary(const std::string& op, const Tensor& a, const Tensor& b, F f, DFA dfa, DFB dfb) {
  const Broadcast bc = resolve(op, a.shape(), b.shape());
  const std::size_t n = numel(bc.out);
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = f(av[bmap(bc.a, i, bc.cols)], bv[bmap(bc.b, i, bc.cols)]);
  }
  return make_op(op, bc.out, std::move(out), {a, b}, [bc, dfa, dfb](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const std::size_t ia = bmap(bc.a, i, bc.cols);
      const std::size_t ib = bmap(bc.b, i, bc.cols);
      const double g = self.grad[i];
      if (pa.requires_grad) pa.grad[ia] += g * dfa(pa.value[ia], pb.value[ib]);
      if (pb.requires_grad) pb.grad[ib] += g * dfb(pa.value[ia], pb.value[ib]);
    }
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  return fmt::format("[{}]", fmt::join(shape, ","));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor make_leaf(Shape shape, std::vector<double> values, bool requires_grad, std::string op) {
  require(numel(shape) == values.size(),
          fmt::format("tensor: shape {} holds {} values, got {}", shape_str(shape), numel(shape),
                      values.size()));
  require(shape.size() <= 2, "tensor: rank above 2 is not supported");
  auto node = std::make_shared<Node>();
  node->grad.assign(values.size(), 0.0);
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->op = std::move(op);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor make_op(std::string op, Shape shape, std::vector<double> values,
               const std::vector<Tensor>& parents, BackwardFn backward) {
  bool any_grad = false;
  for (const auto& p : parents) {
    require(p.defined(), op + ": undefined operand");
    for (double v : p.values()) {
      if (!std::isfinite(v)) throw NumericError(op, "non-finite input");
    }
    any_grad = any_grad || p.requires_grad();
  }
  const bool track = any_grad && g_grad_enabled;
  Tensor out = make_leaf(std::move(shape), std::move(values), track, std::move(op));
  if (track) {
    out.node_->parents.reserve(parents.size());
    for (const auto& p : parents) out.node_->parents.push_back(p.node_);
    out.node_->backward = std::move(backward);
  }
  return out;
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return make_leaf(std::move(shape), std::move(values), false);
}
Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return make_leaf(std::move(shape), std::move(values), true);
}
Tensor Tensor::scalar(double value, bool requires_grad) {
  return make_leaf({}, {value}, requires_grad);
}
Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = numel(shape);
  return make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}
Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = numel(shape);
  return make_leaf(std::move(shape), std::vector<double>(n, value), false);
}
Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return make_leaf({n}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->value.size(); }
std::size_t Tensor::rows() const { return shape().empty() ? 1 : shape()[0]; }
std::size_t Tensor::cols() const { return shape().size() == 2 ? shape()[1] : 1; }
std::span<const double> Tensor::values() const { return node_->value; }
std::span<double> Tensor::mutable_values() { return node_->value; }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->grad; }
bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return !node_->backward; }
const std::string& Tensor::op() const { return node_->op; }

double Tensor::item() const {
  require(size() == 1, fmt::format("item: tensor of shape {} is not a scalar", shape_str(shape())));
  return node_->value[0];
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

Tensor Tensor::detach() const { return make_leaf(shape(), node_->value, false, "detach"); }

void backward(const Tensor& root) {
  require(root.defined() && root.size() == 1,
          "backward: root must hold exactly one element, got shape " +
              (root.defined() ? shape_str(root.shape()) : std::string("<undefined>")));
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node_ptr().get(), 0);
  visited.insert(root.node_ptr().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are per-pass; only leaves accumulate across calls.
  for (Node* n : order) {
    if (n->backward) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  Node& r = *root.node_ptr();
  r.grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.shape()[1] == b.shape()[0],
          fmt::format("matmul: shapes {} and {} are not conformable", shape_str(a.shape()),
                      shape_str(b.shape())));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n);
  Map(out.data(), m, n).noalias() =
      ConstMap(a.values().data(), m, k) * ConstMap(b.values().data(), k, n);
  return make_op("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    ConstMap g(self.grad.data(), m, n);
    if (pa.requires_grad) {
      Map(pa.grad.data(), m, k).noalias() += g * ConstMap(pb.value.data(), k, n).transpose();
    }
    if (pb.requires_grad) {
      Map(pb.grad.data(), k, n).noalias() += ConstMap(pa.value.data(), m, k).transpose() * g;
    }
  });
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, "transpose: expects a matrix, got " + shape_str(a.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m * n);
  Map(out.data(), n, m) = ConstMap(a.values().data(), m, n).transpose();
  return make_op("transpose", {n, m}, std::move(out), {a}, [m, n](Node& self) {
    Node& pa = *self.parents[0];
    Map(pa.grad.data(), m, n) += ConstMap(self.grad.data(), n, m).transpose();
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(numel(shape) == a.size(), fmt::format("reshape: cannot view {} as {}",
                                                shape_str(a.shape()), shape_str(shape)));
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_op("reshape", std::move(shape), std::move(out), {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(
      "add_scalar", a, [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) {
  return unary(
      "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(
      "log", a, [](double x) { return std::log(std::max(x, kLogFloor)); },
      [](double x, double) { return x >= kLogFloor ? 1.0 / x : 0.0; });
}

Tensor square(const Tensor& a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor abs(const Tensor& a) {
  return unary(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      "leaky_relu", a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  require(lo <= hi, "clamp: lo > hi");
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_op("sum", {}, {s}, {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    const double g = self.grad[0];
    for (double& x : pa.grad) x += g;
  });
}

Tensor mean(const Tensor& a) {
  require(a.size() > 0, "mean: empty tensor");
  const double inv = 1.0 / static_cast<double>(a.size());
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_op("mean", {}, {s * inv}, {a}, [inv](Node& self) {
    Node& pa = *self.parents[0];
    const double g = self.grad[0] * inv;
    for (double& x : pa.grad) x += g;
  });
}

Tensor sum_rows(const Tensor& a) {
  require(a.rank() == 2, "sum_rows: expects a matrix, got " + shape_str(a.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m, 0.0);
  auto av = a.values();
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[r] += av[r * n + c];
  }
  return make_op("sum_rows", {m}, std::move(out), {a}, [n](Node& self) {
    Node& pa = *self.parents[0];
    for (std::size_t r = 0; r < self.grad.size(); ++r) {
      for (std::size_t c = 0; c < n; ++c) pa.grad[r * n + c] += self.grad[r];
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: no operands");
  const std::size_t m = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.rank() == 1 || p.rank() == 2, "concat_cols: operand must be 1-D or 2-D");
    require(p.rows() == m, fmt::format("concat_cols: row count {} does not match {}", p.rows(), m));
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pv = parts[k].values();
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < widths[k]; ++c) out[r * total + offset + c] = pv[r * widths[k] + c];
    }
    offset += widths[k];
  }
  return make_op("concat_cols", {m, total}, std::move(out), parts, [m, total, widths](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = *self.parents[k];
      if (p.requires_grad) {
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t c = 0; c < widths[k]; ++c) {
            p.grad[r * widths[k] + c] += self.grad[r * total + off + c];
          }
        }
      }
      off += widths[k];
    }
  });
}

}  // namespace pcdgan::ad
