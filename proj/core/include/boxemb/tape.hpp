#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "boxemb/array.hpp"

namespace boxemb {

class Tape;

// Primitive operations recorded on the tape. Binary elementwise primitives
// operate on equal shapes; the public builders insert BroadcastTo nodes to
// canonicalize, so every VJP stays shape-local.
enum class Prim : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Neg,
  Exp,
  Log,
  Log1p,
  Sigmoid,
  Tanh,
  Softplus,
  LogSoftplus,
  Max2,
  Min2,
  Relu,
  SumAxis,
  MaxAxis,
  MinAxis,
  MeanAxis,
  LogSumExp2,
  LogSumExpAxis,
  Log1mExp,
  Scale,
  BroadcastTo,
  Reshape,
  IndexSelect,
};

const char* prim_name(Prim p);
std::optional<Prim> prim_from_name(std::string_view name);

struct PrimAttrs {
  double scalar = 0.0;                // Scale
  int axis = 0;                       // reductions, IndexSelect
  Shape shape;                        // BroadcastTo, Reshape
  std::vector<std::int64_t> indices;  // IndexSelect
};

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Array& value() const;
  const Shape& shape() const;
  double item() const;  // scalar value; throws if numel != 1
  bool requires_grad() const;
  // Gradient accumulated by Tape::backward. Zero before the first backward.
  const Array& grad() const;
};

// Reverse-mode tape over dense double arrays. Graphs are built define-by-run
// and discarded after the step; nodes are immutable once created except for
// grad accumulation inside backward().
class Tape {
 public:
  Var leaf(Array value, bool requires_grad = false);
  Var constant(double v) { return leaf(Array::scalar(v)); }

  // String-keyed entry point. Unknown names and incompatible shapes are
  // rejected with std::invalid_argument.
  Var apply_primitive(std::string_view name, std::span<const Var> inputs,
                      const PrimAttrs& attrs = {});

  // Reverse sweep from a scalar-shaped root. Accumulates d(root)/d(node)
  // into .grad of every node on a requires_grad path, in a fixed
  // reverse-creation order. Calling backward twice on the same root without
  // resetting doubles the accumulated grads.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  const Array& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Array& grad(int id) const;
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

 private:
  struct Node {
    Array value;
    Array grad;  // allocated when requires_grad
    Prim prim = Prim::Leaf;
    int a = -1, b = -1;
    PrimAttrs attrs;
    bool requires_grad = false;
  };

  Var emit(Prim p, int a, int b, Array value, PrimAttrs attrs);
  Var binary(Prim p, Var a, Var b);
  Var unary(Prim p, Var a);
  Var reduce(Prim p, Var a, int axis);

  std::vector<Node> nodes_;

  friend Var scale(Var, double);
  friend Var broadcast_to(Var, const Shape&);
  friend Var reshape(Var, const Shape&);
  friend Var index_select(Var, int, std::span<const std::int64_t>);
  friend Var detail_binary(Prim, Var, Var);
  friend Var detail_unary(Prim, Var);
  friend Var detail_reduce(Prim, Var, int);
};

// Typed graph builders.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var exp(Var a);
Var log(Var a);
Var log1p(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var softplus(Var a);
Var log_softplus(Var a);
Var max2(Var a, Var b);
Var min2(Var a, Var b);
Var relu(Var a);
Var logsumexp2(Var a, Var b);
Var log1mexp(Var a);
Var sum_axis(Var a, int axis);
Var max_axis(Var a, int axis);
Var min_axis(Var a, int axis);
Var mean_axis(Var a, int axis);
Var logsumexp_axis(Var a, int axis);
Var scale(Var a, double c);
Var broadcast_to(Var a, const Shape& target);
Var reshape(Var a, const Shape& target);
Var index_select(Var a, int axis, std::span<const std::int64_t> indices);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

// Scalar kernels shared by the forward evaluators. All four are finite for
// any finite argument in their domain.
double stable_softplus(double x);    // max(x,0) + log1p(exp(-|x|))
double stable_sigmoid(double x);
double stable_logsumexp2(double a, double b);  // max + log1p(exp(-|a-b|))
double stable_log1mexp(double x);    // log(1 - e^x) for x < 0, two-branch
double stable_log_softplus(double x);

// Central-difference gradient check. `build` reconstructs the scalar loss on
// a fresh tape from leaves initialized at `point`; the result is the max of
// |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|) over every coordinate. A
// non-finite value anywhere is reported as max_rel_err = inf with the
// location in `note`.
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string note;
};
GradCheckReport grad_check(const std::function<Var(Tape&, std::span<const Var>)>& build,
                           std::span<const Array> point, double step);

}  // namespace boxemb
