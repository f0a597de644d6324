#include "boxemb/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace boxemb {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_logsumexp2(double a, double b) {
  const double m = std::max(a, b);
  if (!std::isfinite(m)) return m;  // both -inf, or an inf dominates
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double stable_log1mexp(double x) {
  // log(1 - e^x), x < 0. Branch at -ln 2 per Maechler.
  if (x >= 0.0) return x == 0.0 ? -kInf : std::numeric_limits<double>::quiet_NaN();
  if (x > -0.6931471805599453) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

double stable_log_softplus(double x) {
  // Fused log(softplus(x)): softplus underflows to 0 near x ~ -745, so the
  // naive composition loses the x < -30 tail where log(softplus(x)) ~ x.
  if (x < -30.0) return x;
  if (x > 30.0) return std::log(x);
  return std::log(stable_softplus(x));
}

static double d_log_softplus(double x) {
  if (x < -30.0) return 1.0;
  if (x > 30.0) return 1.0 / x;
  return stable_sigmoid(x) / stable_softplus(x);
}

const char* prim_name(Prim p) {
  switch (p) {
    case Prim::Leaf: return "leaf";
    case Prim::Add: return "add";
    case Prim::Sub: return "sub";
    case Prim::Mul: return "mul";
    case Prim::Neg: return "neg";
    case Prim::Exp: return "exp";
    case Prim::Log: return "log";
    case Prim::Log1p: return "log1p";
    case Prim::Sigmoid: return "sigmoid";
    case Prim::Tanh: return "tanh";
    case Prim::Softplus: return "softplus";
    case Prim::LogSoftplus: return "log_softplus";
    case Prim::Max2: return "max2";
    case Prim::Min2: return "min2";
    case Prim::Relu: return "relu";
    case Prim::SumAxis: return "sum_axis";
    case Prim::MaxAxis: return "max_axis";
    case Prim::MinAxis: return "min_axis";
    case Prim::MeanAxis: return "mean_axis";
    case Prim::LogSumExp2: return "logsumexp2";
    case Prim::LogSumExpAxis: return "logsumexp_axis";
    case Prim::Log1mExp: return "log1mexp";
    case Prim::Scale: return "scale";
    case Prim::BroadcastTo: return "broadcast_to";
    case Prim::Reshape: return "reshape";
    case Prim::IndexSelect: return "index_select";
  }
  return "?";
}

std::optional<Prim> prim_from_name(std::string_view name) {
  static const std::pair<std::string_view, Prim> table[] = {
      {"add", Prim::Add},
      {"sub", Prim::Sub},
      {"mul", Prim::Mul},
      {"neg", Prim::Neg},
      {"exp", Prim::Exp},
      {"log", Prim::Log},
      {"log1p", Prim::Log1p},
      {"sigmoid", Prim::Sigmoid},
      {"tanh", Prim::Tanh},
      {"softplus", Prim::Softplus},
      {"log_softplus", Prim::LogSoftplus},
      {"max2", Prim::Max2},
      {"min2", Prim::Min2},
      {"relu", Prim::Relu},
      {"sum_axis", Prim::SumAxis},
      {"max_axis", Prim::MaxAxis},
      {"min_axis", Prim::MinAxis},
      {"mean_axis", Prim::MeanAxis},
      {"logsumexp2", Prim::LogSumExp2},
      {"logsumexp_axis", Prim::LogSumExpAxis},
      {"log1mexp", Prim::Log1mExp},
      {"scale", Prim::Scale},
      {"broadcast_to", Prim::BroadcastTo},
      {"reshape", Prim::Reshape},
      {"index_select", Prim::IndexSelect},
  };
  for (const auto& [n, p] : table)
    if (n == name) return p;
  return std::nullopt;
}

const Array& Var::value() const { return tape->value(id); }
const Shape& Var::shape() const { return tape->value(id).shape; }
bool Var::requires_grad() const { return tape->requires_grad(id); }
const Array& Var::grad() const { return tape->grad(id); }

double Var::item() const {
  const Array& v = value();
  if (v.numel() != 1)
    throw std::invalid_argument("item() on non-scalar of shape " + v.shape.str());
  return v[0];
}

const Array& Tape::grad(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad)
    throw std::logic_error("grad requested for a node that does not require grad");
  return n.grad;
}

Var Tape::leaf(Array value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.prim = Prim::Leaf;
  n.requires_grad = requires_grad;
  if (requires_grad) n.grad = Array(n.value.shape, 0.0);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::emit(Prim p, int a, int b, Array value, PrimAttrs attrs) {
  Node n;
  n.value = std::move(value);
  n.prim = p;
  n.a = a;
  n.b = b;
  n.attrs = std::move(attrs);
  n.requires_grad = (a >= 0 && nodes_[static_cast<std::size_t>(a)].requires_grad) ||
                    (b >= 0 && nodes_[static_cast<std::size_t>(b)].requires_grad);
  if (n.requires_grad) n.grad = Array(n.value.shape, 0.0);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

namespace {

struct AxisSplit {
  std::int64_t outer = 1, k = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, int axis) {
  AxisSplit r;
  for (int i = 0; i < axis; ++i) r.outer *= s[i];
  r.k = s[axis];
  for (int i = axis + 1; i < s.rank(); ++i) r.inner *= s[i];
  return r;
}

Shape drop_axis(const Shape& s, int axis) {
  Shape out = s;
  out.dims.erase(out.dims.begin() + axis);
  return out;
}

void check_axis(const Shape& s, int axis, const char* what) {
  if (axis < 0 || axis >= s.rank())
    throw std::invalid_argument(std::string(what) + ": axis " + std::to_string(axis) +
                                " out of range for shape " + s.str());
}

}  // namespace

Var Tape::unary(Prim p, Var x) {
  const Array& in = nodes_[static_cast<std::size_t>(x.id)].value;
  Array out(in.shape);
  const std::int64_t n = in.numel();
  switch (p) {
    case Prim::Neg:
      for (std::int64_t i = 0; i < n; ++i) out[i] = -in[i];
      break;
    case Prim::Exp:
      for (std::int64_t i = 0; i < n; ++i) out[i] = std::exp(in[i]);
      break;
    case Prim::Log:
      for (std::int64_t i = 0; i < n; ++i) out[i] = std::log(in[i]);
      break;
    case Prim::Log1p:
      for (std::int64_t i = 0; i < n; ++i) out[i] = std::log1p(in[i]);
      break;
    case Prim::Sigmoid:
      for (std::int64_t i = 0; i < n; ++i) out[i] = stable_sigmoid(in[i]);
      break;
    case Prim::Tanh:
      for (std::int64_t i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
      break;
    case Prim::Softplus:
      for (std::int64_t i = 0; i < n; ++i) out[i] = stable_softplus(in[i]);
      break;
    case Prim::LogSoftplus:
      for (std::int64_t i = 0; i < n; ++i) out[i] = stable_log_softplus(in[i]);
      break;
    case Prim::Relu:
      for (std::int64_t i = 0; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
    case Prim::Log1mExp:
      for (std::int64_t i = 0; i < n; ++i) out[i] = stable_log1mexp(in[i]);
      break;
    default:
      throw std::logic_error("unary: bad prim");
  }
  return emit(p, x.id, -1, std::move(out), {});
}

Var Tape::binary(Prim p, Var a, Var b) {
  if (a.tape != this || b.tape != this)
    throw std::invalid_argument("operands belong to different tapes");
  const Shape bs = broadcast_shapes(a.shape(), b.shape());
  Var ca = a.shape() == bs ? a : boxemb::broadcast_to(a, bs);
  Var cb = b.shape() == bs ? b : boxemb::broadcast_to(b, bs);
  const Array& va = nodes_[static_cast<std::size_t>(ca.id)].value;
  const Array& vb = nodes_[static_cast<std::size_t>(cb.id)].value;
  Array out(bs);
  const std::int64_t n = out.numel();
  switch (p) {
    case Prim::Add:
      for (std::int64_t i = 0; i < n; ++i) out[i] = va[i] + vb[i];
      break;
    case Prim::Sub:
      for (std::int64_t i = 0; i < n; ++i) out[i] = va[i] - vb[i];
      break;
    case Prim::Mul:
      for (std::int64_t i = 0; i < n; ++i) out[i] = va[i] * vb[i];
      break;
    case Prim::Max2:
      for (std::int64_t i = 0; i < n; ++i) out[i] = va[i] > vb[i] ? va[i] : vb[i];
      break;
    case Prim::Min2:
      for (std::int64_t i = 0; i < n; ++i) out[i] = va[i] < vb[i] ? va[i] : vb[i];
      break;
    case Prim::LogSumExp2:
      for (std::int64_t i = 0; i < n; ++i) out[i] = stable_logsumexp2(va[i], vb[i]);
      break;
    default:
      throw std::logic_error("binary: bad prim");
  }
  return emit(p, ca.id, cb.id, std::move(out), {});
}

Var Tape::reduce(Prim p, Var x, int axis) {
  const Array& in = nodes_[static_cast<std::size_t>(x.id)].value;
  check_axis(in.shape, axis, prim_name(p));
  const AxisSplit sp = split_axis(in.shape, axis);
  if (sp.k == 0 && p != Prim::SumAxis)
    throw std::invalid_argument(std::string(prim_name(p)) + ": reduction over empty axis " +
                                std::to_string(axis));
  Array out(drop_axis(in.shape, axis));
  for (std::int64_t o = 0; o < sp.outer; ++o)
    for (std::int64_t i = 0; i < sp.inner; ++i) {
      const auto at = [&](std::int64_t j) { return in[(o * sp.k + j) * sp.inner + i]; };
      double r;
      switch (p) {
        case Prim::SumAxis:
        case Prim::MeanAxis: {
          r = 0.0;
          for (std::int64_t j = 0; j < sp.k; ++j) r += at(j);
          if (p == Prim::MeanAxis) r /= static_cast<double>(sp.k);
          break;
        }
        case Prim::MaxAxis: {
          r = at(0);
          for (std::int64_t j = 1; j < sp.k; ++j) r = std::max(r, at(j));
          break;
        }
        case Prim::MinAxis: {
          r = at(0);
          for (std::int64_t j = 1; j < sp.k; ++j) r = std::min(r, at(j));
          break;
        }
        case Prim::LogSumExpAxis: {
          double m = at(0);
          for (std::int64_t j = 1; j < sp.k; ++j) m = std::max(m, at(j));
          if (!std::isfinite(m)) {
            r = m;
          } else {
            double s = 0.0;
            for (std::int64_t j = 0; j < sp.k; ++j) s += std::exp(at(j) - m);
            r = m + std::log(s);
          }
          break;
        }
        default:
          throw std::logic_error("reduce: bad prim");
      }
      out[o * sp.inner + i] = r;
    }
  PrimAttrs attrs;
  attrs.axis = axis;
  return emit(p, x.id, -1, std::move(out), std::move(attrs));
}

Var scale(Var a, double c) {
  Tape& t = *a.tape;
  const Array& in = a.value();
  Array out(in.shape);
  for (std::int64_t i = 0; i < in.numel(); ++i) out[i] = in[i] * c;
  PrimAttrs attrs;
  attrs.scalar = c;
  return t.emit(Prim::Scale, a.id, -1, std::move(out), std::move(attrs));
}

Var broadcast_to(Var a, const Shape& target) {
  Tape& t = *a.tape;
  Array out = broadcast_to(a.value(), target);
  PrimAttrs attrs;
  attrs.shape = target;
  return t.emit(Prim::BroadcastTo, a.id, -1, std::move(out), std::move(attrs));
}

Var reshape(Var a, const Shape& target) {
  Tape& t = *a.tape;
  const Array& in = a.value();
  if (in.shape.numel() != target.numel())
    throw std::invalid_argument("reshape: element count mismatch between " + in.shape.str() +
                                " and " + target.str());
  Array out(target, in.data);
  PrimAttrs attrs;
  attrs.shape = target;
  return t.emit(Prim::Reshape, a.id, -1, std::move(out), std::move(attrs));
}

Var index_select(Var a, int axis, std::span<const std::int64_t> indices) {
  Tape& t = *a.tape;
  const Array& in = a.value();
  check_axis(in.shape, axis, "index_select");
  const AxisSplit sp = split_axis(in.shape, axis);
  for (auto ix : indices)
    if (ix < 0 || ix >= sp.k)
      throw std::invalid_argument("index_select: index " + std::to_string(ix) +
                                  " out of range for axis of size " + std::to_string(sp.k));
  Shape os = in.shape;
  os.dims[static_cast<std::size_t>(axis)] = static_cast<std::int64_t>(indices.size());
  Array out(os);
  const std::int64_t m = static_cast<std::int64_t>(indices.size());
  for (std::int64_t o = 0; o < sp.outer; ++o)
    for (std::int64_t j = 0; j < m; ++j)
      for (std::int64_t i = 0; i < sp.inner; ++i)
        out[(o * m + j) * sp.inner + i] = in[(o * sp.k + indices[static_cast<std::size_t>(j)]) * sp.inner + i];
  PrimAttrs attrs;
  attrs.axis = axis;
  attrs.indices.assign(indices.begin(), indices.end());
  return t.emit(Prim::IndexSelect, a.id, -1, std::move(out), std::move(attrs));
}

Var detail_binary(Prim p, Var a, Var b) { return a.tape->binary(p, a, b); }
Var detail_unary(Prim p, Var a) { return a.tape->unary(p, a); }
Var detail_reduce(Prim p, Var a, int axis) { return a.tape->reduce(p, a, axis); }

Var add(Var a, Var b) { return detail_binary(Prim::Add, a, b); }
Var sub(Var a, Var b) { return detail_binary(Prim::Sub, a, b); }
Var mul(Var a, Var b) { return detail_binary(Prim::Mul, a, b); }
Var max2(Var a, Var b) { return detail_binary(Prim::Max2, a, b); }
Var min2(Var a, Var b) { return detail_binary(Prim::Min2, a, b); }
Var logsumexp2(Var a, Var b) { return detail_binary(Prim::LogSumExp2, a, b); }
Var neg(Var a) { return detail_unary(Prim::Neg, a); }
Var exp(Var a) { return detail_unary(Prim::Exp, a); }
Var log(Var a) { return detail_unary(Prim::Log, a); }
Var log1p(Var a) { return detail_unary(Prim::Log1p, a); }
Var sigmoid(Var a) { return detail_unary(Prim::Sigmoid, a); }
Var tanh(Var a) { return detail_unary(Prim::Tanh, a); }
Var softplus(Var a) { return detail_unary(Prim::Softplus, a); }
Var log_softplus(Var a) { return detail_unary(Prim::LogSoftplus, a); }
Var relu(Var a) { return detail_unary(Prim::Relu, a); }
Var log1mexp(Var a) { return detail_unary(Prim::Log1mExp, a); }
Var sum_axis(Var a, int axis) { return detail_reduce(Prim::SumAxis, a, axis); }
Var max_axis(Var a, int axis) { return detail_reduce(Prim::MaxAxis, a, axis); }
Var min_axis(Var a, int axis) { return detail_reduce(Prim::MinAxis, a, axis); }
Var mean_axis(Var a, int axis) { return detail_reduce(Prim::MeanAxis, a, axis); }
Var logsumexp_axis(Var a, int axis) { return detail_reduce(Prim::LogSumExpAxis, a, axis); }

Var Tape::apply_primitive(std::string_view name, std::span<const Var> inputs,
                          const PrimAttrs& attrs) {
  const auto p = prim_from_name(name);
  if (!p) throw std::invalid_argument("unknown primitive id: " + std::string(name));
  const auto need = [&](std::size_t k) {
    if (inputs.size() != k)
      throw std::invalid_argument(std::string(name) + ": expected " + std::to_string(k) +
                                  " inputs, got " + std::to_string(inputs.size()));
  };
  switch (*p) {
    case Prim::Add:
    case Prim::Sub:
    case Prim::Mul:
    case Prim::Max2:
    case Prim::Min2:
    case Prim::LogSumExp2:
      need(2);
      return binary(*p, inputs[0], inputs[1]);
    case Prim::Neg:
    case Prim::Exp:
    case Prim::Log:
    case Prim::Log1p:
    case Prim::Sigmoid:
    case Prim::Tanh:
    case Prim::Softplus:
    case Prim::LogSoftplus:
    case Prim::Relu:
    case Prim::Log1mExp:
      need(1);
      return unary(*p, inputs[0]);
    case Prim::SumAxis:
    case Prim::MaxAxis:
    case Prim::MinAxis:
    case Prim::MeanAxis:
    case Prim::LogSumExpAxis:
      need(1);
      return reduce(*p, inputs[0], attrs.axis);
    case Prim::Scale:
      need(1);
      return boxemb::scale(inputs[0], attrs.scalar);
    case Prim::BroadcastTo:
      need(1);
      return boxemb::broadcast_to(inputs[0], attrs.shape);
    case Prim::Reshape:
      need(1);
      return boxemb::reshape(inputs[0], attrs.shape);
    case Prim::IndexSelect:
      need(1);
      return boxemb::index_select(inputs[0], attrs.axis, attrs.indices);
    case Prim::Leaf:
      break;
  }
  throw std::invalid_argument("unknown primitive id: " + std::string(name));
}

namespace {
// g * d with the convention that a zero adjoint contributes zero even where
// the local derivative is infinite (e.g. log at 0 under a dead branch).
inline double vjp_term(double g, double d) { return g == 0.0 ? 0.0 : g * d; }
}  // namespace

void Tape::backward(Var root) {
  if (root.tape != this) throw std::invalid_argument("backward: root from another tape");
  const Node& rn = nodes_[static_cast<std::size_t>(root.id)];
  if (rn.value.numel() != 1)
    throw std::invalid_argument("backward: root must be scalar-shaped, got " +
                                rn.value.shape.str());
  const int rid = root.id;
  std::vector<Array> bar(static_cast<std::size_t>(rid) + 1);
  std::vector<char> touched(static_cast<std::size_t>(rid) + 1, 0);
  bar[static_cast<std::size_t>(rid)] = Array(rn.value.shape, 1.0);
  touched[static_cast<std::size_t>(rid)] = 1;

  const auto touch = [&](int pid) -> Array& {
    auto& slot = bar[static_cast<std::size_t>(pid)];
    if (!touched[static_cast<std::size_t>(pid)]) {
      slot = Array(nodes_[static_cast<std::size_t>(pid)].value.shape, 0.0);
      touched[static_cast<std::size_t>(pid)] = 1;
    }
    return slot;
  };

  for (int id = rid; id >= 0; --id) {
    if (!touched[static_cast<std::size_t>(id)]) continue;
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) continue;
    const Array& g = bar[static_cast<std::size_t>(id)];
    for (std::int64_t i = 0; i < g.numel(); ++i) n.grad[i] += g[i];
    if (n.prim == Prim::Leaf) continue;

    const bool need_a = n.a >= 0 && nodes_[static_cast<std::size_t>(n.a)].requires_grad;
    const bool need_b = n.b >= 0 && nodes_[static_cast<std::size_t>(n.b)].requires_grad;
    if (!need_a && !need_b) continue;
    const Array& va = nodes_[static_cast<std::size_t>(n.a)].value;

    switch (n.prim) {
      case Prim::Add: {
        if (need_a) {
          Array& ba = touch(n.a);
          for (std::int64_t i = 0; i < g.numel(); ++i) ba[i] += g[i];
        }
        if (need_b) {
          Array& bb = touch(n.b);
          for (std::int64_t i = 0; i < g.numel(); ++i) bb[i] += g[i];
        }
        break;
      }
      case Prim::Sub: {
        if (need_a) {
          Array& ba = touch(n.a);
          for (std::int64_t i = 0; i < g.numel(); ++i) ba[i] += g[i];
        }
        if (need_b) {
          Array& bb = touch(n.b);
          for (std::int64_t i = 0; i < g.numel(); ++i) bb[i] -= g[i];
        }
        break;
      }
      case Prim::Mul: {
        const Array& vb = nodes_[static_cast<std::size_t>(n.b)].value;
        if (need_a) {
          Array& ba = touch(n.a);
          for (std::int64_t i = 0; i < g.numel(); ++i) ba[i] += vjp_term(g[i], vb[i]);
        }
        if (need_b) {
          Array& bb = touch(n.b);
          for (std::int64_t i = 0; i < g.numel(); ++i) bb[i] += vjp_term(g[i], va[i]);
        }
        break;
      }
      case Prim::Max2:
      case Prim::Min2: {
        // Ties split 0.5/0.5 so hard intersection stays commutative under
        // differentiation.
        const Array& vb = nodes_[static_cast<std::size_t>(n.b)].value;
        const bool is_max = n.prim == Prim::Max2;
        for (std::int64_t i = 0; i < g.numel(); ++i) {
          double wa;
          if (va[i] == vb[i])
            wa = 0.5;
          else if ((va[i] > vb[i]) == is_max)
            wa = 1.0;
          else
            wa = 0.0;
          if (need_a) touch(n.a)[i] += vjp_term(g[i], wa);
          if (need_b) touch(n.b)[i] += vjp_term(g[i], 1.0 - wa);
        }
        break;
      }
      case Prim::LogSumExp2: {
        const Array& vb = nodes_[static_cast<std::size_t>(n.b)].value;
        for (std::int64_t i = 0; i < g.numel(); ++i) {
          const double wa = stable_sigmoid(va[i] - vb[i]);
          if (need_a) touch(n.a)[i] += vjp_term(g[i], wa);
          if (need_b) touch(n.b)[i] += vjp_term(g[i], 1.0 - wa);
        }
        break;
      }
      case Prim::Neg: {
        Array& ba = touch(n.a);
        for (std::int64_t i = 0; i < g.numel(); ++i) ba[i] -= g[i];
        break;
      }
      case Prim::Exp: {
        Array& ba = touch(n.a);
        for (std::int64_t i = 0; i < g.numel(); ++i) ba[i] += vjp_term(g[i], n.value[i]);
        break;
      }
      case Prim::Log: {
        // d/dx log x = 1/x for x > 0; defined as 0 at x <= 0 so degenerate
        // (zero-volume) boxes contribute no gradient.
        Array& ba = touch(n.a);
        for (std::int64_t i = 0; i < g.numel(); ++i)
          ba[i] += va[i] > 0.0 ? vjp_term(g[i], 1.0 / va[i]) : 0.0;
        break;
      }
      case Prim::Log1p: {
        Array& ba = touch(n.a);
        for (std::int64_t i = 0; i < g.numel(); ++i)
          ba[i] += va[i] > -1.0 ? vjp_term(g[i], 1.0 / (1.0 + va[i])) : 0.0;
        break;
      }
      case Prim::Sigmoid: {
        Array& ba = touch(n.a);
        for (std::int64_t i = 0; i < g.numel(); ++i)
          ba[i] += vjp_term(g[i], n.value[i] * (1.0 - n.value[i]));
        break;
      }
      case Prim::Tanh: {
        Array& ba = touch(n.a);
        for (std::int64_t i = 0; i < g.numel(); ++i)
          ba[i] += vjp_term(g[i], 1.0 - n.value[i] * n.value[i]);
        break;
      }
      case Prim::Softplus: {
        Array& ba = touch(n.a);
        for (std::int64_t i = 0; i < g.numel(); ++i)
          ba[i] += vjp_term(g[i], stable_sigmoid(va[i]));
        break;
      }
      case Prim::LogSoftplus: {
        Array& ba = touch(n.a);
        for (std::int64_t i = 0; i < g.numel(); ++i)
          ba[i] += vjp_term(g[i], d_log_softplus(va[i]));
        break;
      }
      case Prim::Relu: {
        // Derivative at exactly 0 is 0.
        Array& ba = touch(n.a);
        for (std::int64_t i = 0; i < g.numel(); ++i)
          ba[i] += va[i] > 0.0 ? g[i] : 0.0;
        break;
      }
      case Prim::Log1mExp: {
        Array& ba = touch(n.a);
        for (std::int64_t i = 0; i < g.numel(); ++i)
          ba[i] += vjp_term(g[i], -1.0 / std::expm1(-va[i]));
        break;
      }
      case Prim::Scale: {
        Array& ba = touch(n.a);
        for (std::int64_t i = 0; i < g.numel(); ++i) ba[i] += vjp_term(g[i], n.attrs.scalar);
        break;
      }
      case Prim::SumAxis:
      case Prim::MeanAxis: {
        const AxisSplit sp = split_axis(va.shape, n.attrs.axis);
        const double w = n.prim == Prim::SumAxis ? 1.0 : 1.0 / static_cast<double>(sp.k);
        Array& ba = touch(n.a);
        for (std::int64_t o = 0; o < sp.outer; ++o)
          for (std::int64_t j = 0; j < sp.k; ++j)
            for (std::int64_t i = 0; i < sp.inner; ++i)
              ba[(o * sp.k + j) * sp.inner + i] += vjp_term(g[o * sp.inner + i], w);
        break;
      }
      case Prim::MaxAxis:
      case Prim::MinAxis: {
        // Ties along the axis split the adjoint equally.
        const AxisSplit sp = split_axis(va.shape, n.attrs.axis);
        Array& ba = touch(n.a);
        for (std::int64_t o = 0; o < sp.outer; ++o)
          for (std::int64_t i = 0; i < sp.inner; ++i) {
            const double y = n.value[o * sp.inner + i];
            std::int64_t ties = 0;
            for (std::int64_t j = 0; j < sp.k; ++j)
              if (va[(o * sp.k + j) * sp.inner + i] == y) ++ties;
            const double w = 1.0 / static_cast<double>(ties);
            for (std::int64_t j = 0; j < sp.k; ++j)
              if (va[(o * sp.k + j) * sp.inner + i] == y)
                ba[(o * sp.k + j) * sp.inner + i] += vjp_term(g[o * sp.inner + i], w);
          }
        break;
      }
      case Prim::LogSumExpAxis: {
        const AxisSplit sp = split_axis(va.shape, n.attrs.axis);
        Array& ba = touch(n.a);
        for (std::int64_t o = 0; o < sp.outer; ++o)
          for (std::int64_t i = 0; i < sp.inner; ++i) {
            const double y = n.value[o * sp.inner + i];
            if (!std::isfinite(y)) continue;
            for (std::int64_t j = 0; j < sp.k; ++j) {
              const double w = std::exp(va[(o * sp.k + j) * sp.inner + i] - y);
              ba[(o * sp.k + j) * sp.inner + i] += vjp_term(g[o * sp.inner + i], w);
            }
          }
        break;
      }
      case Prim::BroadcastTo: {
        Array& ba = touch(n.a);
        Array red = reduce_to(g, va.shape);
        for (std::int64_t i = 0; i < red.numel(); ++i) ba[i] += red[i];
        break;
      }
      case Prim::Reshape: {
        Array& ba = touch(n.a);
        for (std::int64_t i = 0; i < g.numel(); ++i) ba[i] += g[i];
        break;
      }
      case Prim::IndexSelect: {
        const AxisSplit sp = split_axis(va.shape, n.attrs.axis);
        const std::int64_t m = static_cast<std::int64_t>(n.attrs.indices.size());
        Array& ba = touch(n.a);
        for (std::int64_t o = 0; o < sp.outer; ++o)
          for (std::int64_t j = 0; j < m; ++j)
            for (std::int64_t i = 0; i < sp.inner; ++i)
              ba[(o * sp.k + n.attrs.indices[static_cast<std::size_t>(j)]) * sp.inner + i] +=
                  g[(o * m + j) * sp.inner + i];
        break;
      }
      case Prim::Leaf:
        break;
    }
  }
}

GradCheckReport grad_check(const std::function<Var(Tape&, std::span<const Var>)>& build,
                           std::span<const Array> point, double step) {
  if (step <= 0.0) throw std::invalid_argument("grad_check: step must be positive");

  const auto eval = [&](const std::vector<Array>& pt) {
    Tape t;
    std::vector<Var> leaves;
    leaves.reserve(pt.size());
    for (const auto& a : pt) leaves.push_back(t.leaf(a, false));
    return build(t, leaves).item();
  };

  // AD pass.
  Tape t;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const auto& a : point) leaves.push_back(t.leaf(a, true));
  Var root = build(t, leaves);
  const double f0 = root.item();
  if (!std::isfinite(f0)) return {kInf, "non-finite value at the base point"};
  t.backward(root);

  std::vector<Array> pt(point.begin(), point.end());
  GradCheckReport rep;
  for (std::size_t k = 0; k < pt.size(); ++k) {
    const Array& g_ad = leaves[k].grad();
    for (std::int64_t i = 0; i < pt[k].numel(); ++i) {
      const double saved = pt[k][i];
      pt[k][i] = saved + step;
      const double fp = eval(pt);
      pt[k][i] = saved - step;
      const double fm = eval(pt);
      pt[k][i] = saved;
      const double fd = (fp - fm) / (2.0 * step);
      const double ga = g_ad[i];
      if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(ga))
        return {kInf, "non-finite value at input " + std::to_string(k) + ", coordinate " +
                          std::to_string(i)};
      const double rel = std::abs(ga - fd) / std::max(1e-8, std::abs(ga) + std::abs(fd));
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.note = "input " + std::to_string(k) + ", coordinate " + std::to_string(i) +
                   ": ad=" + std::to_string(ga) + " fd=" + std::to_string(fd);
      }
    }
  }
  return rep;
}

}  // namespace boxemb
