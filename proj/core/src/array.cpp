#include "boxemb/array.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace boxemb {

std::int64_t Shape::numel() const {
  std::int64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ", ";
    os << dims[i];
  }
  os << ')';
  return os.str();
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const int ra = a.rank(), rb = b.rank();
  const int r = ra > rb ? ra : rb;
  Shape out;
  out.dims.resize(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    const std::int64_t da = i < ra ? a[ra - 1 - i] : 1;
    const std::int64_t db = i < rb ? b[rb - 1 - i] : 1;
    std::int64_t d;
    if (da == db || db == 1)
      d = da;
    else if (da == 1)
      d = db;
    else
      throw std::invalid_argument("broadcast: shapes " + a.str() + " and " + b.str() +
                                  " conflict at trailing axis " + std::to_string(i));
    out.dims[static_cast<std::size_t>(r - 1 - i)] = d;
  }
  return out;
}

bool broadcastable_to(const Shape& from, const Shape& to) {
  if (from.rank() > to.rank()) return false;
  for (int i = 0; i < from.rank(); ++i) {
    const std::int64_t df = from[from.rank() - 1 - i];
    const std::int64_t dt = to[to.rank() - 1 - i];
    if (df != dt && df != 1) return false;
  }
  return true;
}

Array::Array(Shape s, double fill) : shape(std::move(s)) {
  for (auto d : shape.dims)
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape.str());
  data.assign(static_cast<std::size_t>(shape.numel()), fill);
}

Array::Array(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (static_cast<std::int64_t>(data.size()) != shape.numel())
    throw std::invalid_argument("array data size " + std::to_string(data.size()) +
                                " does not match shape " + shape.str());
}

Array Array::scalar(double v) {
  Array a;
  a.data.assign(1, v);
  return a;
}

bool Array::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

// Source strides aligned to the target's trailing axes, 0 where expanded.
static std::vector<std::int64_t> aligned_strides(const Shape& src, const Shape& dst) {
  const int R = dst.rank(), r = src.rank();
  std::vector<std::int64_t> stride(static_cast<std::size_t>(R), 0);
  std::int64_t s = 1;
  for (int i = r - 1; i >= 0; --i) {
    stride[static_cast<std::size_t>(R - r + i)] = src[i] == 1 ? 0 : s;
    s *= src[i];
  }
  return stride;
}

Array broadcast_to(const Array& a, const Shape& target) {
  if (!broadcastable_to(a.shape, target))
    throw std::invalid_argument("cannot broadcast " + a.shape.str() + " to " + target.str());
  Array out(target);
  if (out.numel() == 0) return out;
  const int R = target.rank();
  const auto stride = aligned_strides(a.shape, target);
  std::vector<std::int64_t> coord(static_cast<std::size_t>(R), 0);
  std::int64_t src = 0;
  for (std::int64_t o = 0; o < out.numel(); ++o) {
    out[o] = a[src];
    for (int ax = R - 1; ax >= 0; --ax) {
      ++coord[static_cast<std::size_t>(ax)];
      src += stride[static_cast<std::size_t>(ax)];
      if (coord[static_cast<std::size_t>(ax)] < target[ax]) break;
      src -= stride[static_cast<std::size_t>(ax)] * target[ax];
      coord[static_cast<std::size_t>(ax)] = 0;
    }
  }
  return out;
}

Array reduce_to(const Array& g, const Shape& source) {
  if (!broadcastable_to(source, g.shape))
    throw std::invalid_argument("cannot reduce " + g.shape.str() + " to " + source.str());
  Array out(source);
  if (g.numel() == 0) return out;
  const int R = g.shape.rank();
  const auto stride = aligned_strides(source, g.shape);
  std::vector<std::int64_t> coord(static_cast<std::size_t>(R), 0);
  std::int64_t dst = 0;
  for (std::int64_t o = 0; o < g.numel(); ++o) {
    out[dst] += g[o];
    for (int ax = R - 1; ax >= 0; --ax) {
      ++coord[static_cast<std::size_t>(ax)];
      dst += stride[static_cast<std::size_t>(ax)];
      if (coord[static_cast<std::size_t>(ax)] < g.shape[ax]) break;
      dst -= stride[static_cast<std::size_t>(ax)] * g.shape[ax];
      coord[static_cast<std::size_t>(ax)] = 0;
    }
  }
  return out;
}

}  // namespace boxemb
