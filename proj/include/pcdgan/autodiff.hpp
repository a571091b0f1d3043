#pragma once

// Reverse-mode automatic differentiation over small dense row-major tensors.
//
// A Tensor is a shared handle onto a graph node. Operations build new nodes
// that remember their parents and a backward rule; backward() walks the graph
// in reverse topological order and accumulates gradients into every ancestor
// that requires them. Tensors are rank 0, 1 or 2. The only broadcasting is a
// row vector (or scalar) applied across the batch dimension.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pcdgan::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using BackwardFn = std::function<void(Node& self)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::string op;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  // 1-D tensor from values.
  static Tensor vector(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  // Leading dimension (1 for scalars).
  std::size_t rows() const;
  // Trailing dimension of a matrix, 1 otherwise.
  std::size_t cols() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  std::span<const double> grad() const;
  std::span<double> mutable_grad();

  double item() const;
  double operator[](std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }

  bool requires_grad() const;
  bool is_leaf() const;
  const std::string& op() const;
  void zero_grad();
  // Same values, no history, no gradient.
  Tensor detach() const;

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend Tensor make_op(std::string, Shape, std::vector<double>, const std::vector<Tensor>&,
                        BackwardFn);
  friend Tensor make_leaf(Shape, std::vector<double>, bool, std::string);

  std::shared_ptr<Node> node_;
};

// Builds an op result. The backward rule is dropped (and parents are not
// retained) when gradients are disabled or no parent requires them. Every
// parent value is checked for finiteness; a non-finite entry raises a
// NumericError tagged with `op`.
Tensor make_op(std::string op, Shape shape, std::vector<double> values,
               const std::vector<Tensor>& parents, BackwardFn backward);
Tensor make_leaf(Shape shape, std::vector<double> values, bool requires_grad,
                 std::string op = "leaf");

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

void backward(const Tensor& root);

// Smallest value ever passed to log().
inline constexpr double kLogFloor = 1e-12;

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// b may match a, be a row vector ([n] or [1,n]) against an [m,n] matrix, or
// hold a single element.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor neg(const Tensor& a);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// [m,n] -> [m]
Tensor sum_rows(const Tensor& a);
// Concatenation along the feature axis. 1-D inputs of length m count as [m,1].
Tensor concat_cols(const std::vector<Tensor>& parts);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

}  // namespace pcdgan::ad
