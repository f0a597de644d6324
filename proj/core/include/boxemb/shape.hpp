#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace boxemb {

// Extents of a dense row-major array. An empty dims list is a scalar.
struct Shape {
  std::vector<std::int64_t> dims;

  Shape() = default;
  Shape(std::initializer_list<std::int64_t> d) : dims(d) {}
  explicit Shape(std::vector<std::int64_t> d) : dims(std::move(d)) {}

  std::int64_t numel() const;
  int rank() const { return static_cast<int>(dims.size()); }
  std::int64_t operator[](int i) const { return dims[static_cast<std::size_t>(i)]; }
  bool operator==(const Shape&) const = default;

  std::string str() const;  // e.g. "(2, 3)"
};

// Result shape under trailing-dimension broadcasting; throws
// std::invalid_argument naming the first conflicting axis.
Shape broadcast_shapes(const Shape& a, const Shape& b);

// True if `from` can be expanded to `to` (each trailing-aligned dim equal,
// or the source dim is 1 or missing).
bool broadcastable_to(const Shape& from, const Shape& to);

}  // namespace boxemb
