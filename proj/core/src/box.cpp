#include "boxemb/box.hpp"

#include <numeric>
#include <stdexcept>

namespace boxemb {

const char* to_string(ParamKind k) {
  switch (k) {
    case ParamKind::Raw: return "raw";
    case ParamKind::MinDelta: return "min_delta";
    case ParamKind::Sigmoid: return "sigmoid";
    case ParamKind::Tanh: return "tanh";
  }
  return "?";
}

std::optional<ParamKind> param_kind_from(std::string_view name) {
  if (name == "raw") return ParamKind::Raw;
  if (name == "min_delta") return ParamKind::MinDelta;
  if (name == "sigmoid") return ParamKind::Sigmoid;
  if (name == "tanh") return ParamKind::Tanh;
  return std::nullopt;
}

Shape Box::box_shape() const {
  Shape s = z.shape();
  if (s.rank() == 0) throw std::logic_error("box coordinates must have a coordinate axis");
  s.dims.pop_back();
  return s;
}

std::int64_t Box::dim() const {
  const Shape& s = z.shape();
  return s[s.rank() - 1];
}

Box make_box(Var z, Var Z) {
  if (z.shape() != Z.shape())
    throw std::invalid_argument("box: z shape " + z.shape().str() + " != Z shape " +
                                Z.shape().str());
  if (z.shape().rank() == 0)
    throw std::invalid_argument("box: coordinates must have at least the coordinate axis");
  return Box{z, Z};
}

Box realize(ParamKind kind, Var theta) {
  const Shape& s = theta.shape();
  if (s.rank() == 0)
    throw std::invalid_argument("realize: theta must have a trailing parameter axis");
  const std::int64_t two_n = s[s.rank() - 1];
  if (two_n % 2 != 0)
    throw std::invalid_argument("realize: trailing dimension " + std::to_string(two_n) +
                                " is odd; need 2n parameters per box");
  const std::int64_t n = two_n / 2;
  std::vector<std::int64_t> lo(static_cast<std::size_t>(n)), hi(static_cast<std::size_t>(n));
  std::iota(lo.begin(), lo.end(), 0);
  std::iota(hi.begin(), hi.end(), n);
  const int last = s.rank() - 1;
  Var th1 = index_select(theta, last, lo);
  Var th2 = index_select(theta, last, hi);

  Tape& t = *theta.tape;
  switch (kind) {
    case ParamKind::Raw:
      return make_box(th1, th2);
    case ParamKind::MinDelta:
      return make_box(th1, add(th1, softplus(th2)));
    case ParamKind::Sigmoid: {
      Var z = sigmoid(th1);
      Var one = t.constant(1.0);
      return make_box(z, add(z, mul(sub(one, z), sigmoid(th2))));
    }
    case ParamKind::Tanh: {
      Var z = scale(add(tanh(th1), t.constant(1.0)), 0.5);
      Var one = t.constant(1.0);
      return make_box(z, add(z, scale(mul(sub(one, z), tanh(th2)), 0.5)));
    }
  }
  throw std::logic_error("realize: bad kind");
}

Var center(const Box& box) { return scale(add(box.z, box.Z), 0.5); }

Box box_reshape(const Box& box, const Shape& target_box_shape) {
  const Shape bs = box.box_shape();
  if (bs.numel() != target_box_shape.numel())
    throw std::invalid_argument("box_reshape: element count mismatch between box_shape " +
                                bs.str() + " and target " + target_box_shape.str());
  Shape full = target_box_shape;
  full.dims.push_back(box.dim());
  return Box{reshape(box.z, full), reshape(box.Z, full)};
}

Box box_broadcast(const Box& box, const Shape& target_box_shape) {
  const Shape bs = box.box_shape();
  if (!broadcastable_to(bs, target_box_shape)) {
    // name the first conflicting trailing axis
    int conflict = 0;
    for (int i = 0; i < bs.rank(); ++i) {
      const std::int64_t df = bs[bs.rank() - 1 - i];
      const std::int64_t dt = i < target_box_shape.rank()
                                  ? target_box_shape[target_box_shape.rank() - 1 - i]
                                  : -1;
      if (df != dt && df != 1) {
        conflict = i;
        break;
      }
    }
    throw std::invalid_argument("box_broadcast: box_shape " + bs.str() +
                                " incompatible with target " + target_box_shape.str() +
                                " at trailing axis " + std::to_string(conflict));
  }
  Shape full = target_box_shape;
  full.dims.push_back(box.dim());
  return Box{broadcast_to(box.z, full), broadcast_to(box.Z, full)};
}

bool all_sides_nonnegative(const Box& box) {
  const Array& z = box.z.value();
  const Array& Z = box.Z.value();
  for (std::int64_t i = 0; i < z.numel(); ++i)
    if (Z[i] < z[i]) return false;
  return true;
}

}  // namespace boxemb
