#pragma once

#include <vector>

#include "boxemb/shape.hpp"

namespace boxemb {

// Dense row-major array of doubles. Plain value type; all math lives in the
// tape primitives.
struct Array {
  Shape shape;
  std::vector<double> data;

  Array() = default;
  explicit Array(Shape s, double fill = 0.0);
  Array(Shape s, std::vector<double> d);
  static Array scalar(double v);

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  double& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }
  bool empty() const { return data.empty() && shape.rank() == 0; }

  bool all_finite() const;
};

// Expand to `target` under trailing-dimension broadcasting.
Array broadcast_to(const Array& a, const Shape& target);

// Sum an array of shape `g.shape` back down to `source` (the adjoint of
// broadcast_to).
Array reduce_to(const Array& g, const Shape& source);

}  // namespace boxemb
