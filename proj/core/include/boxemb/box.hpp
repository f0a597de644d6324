#pragma once

#include <optional>

#include "boxemb/tape.hpp"

namespace boxemb {

// How a parameter vector theta in R^{2n} maps to box coordinates. Raw splits
// theta in half; MinDelta guarantees nonnegative sides; Sigmoid and Tanh keep
// boxes inside the unit hypercube.
enum class ParamKind { Raw, MinDelta, Sigmoid, Tanh };

const char* to_string(ParamKind k);
std::optional<ParamKind> param_kind_from(std::string_view name);

// A tensor of axis-aligned boxes: per-dimension min (z) and max (Z)
// coordinates, stored with the coordinate axis last. box_shape excludes
// the coordinate axis. Immutable value; safe to share.
struct Box {
  Var z, Z;

  Shape box_shape() const;
  std::int64_t dim() const;  // coordinate dimension n
};

Box make_box(Var z, Var Z);

// Split theta (..., 2n) into halves and map through `kind`. Differentiable
// with respect to theta. Rejects an odd trailing dimension.
Box realize(ParamKind kind, Var theta);

// (z + Z) / 2.
Var center(const Box& box);

// Reshape the box_shape, coordinate axis untouched.
Box box_reshape(const Box& box, const Shape& target_box_shape);

// Expand the box_shape under trailing-dimension broadcasting.
Box box_broadcast(const Box& box, const Shape& target_box_shape);

// Z >= z in every dimension. Raw and Tanh boxes may legitimately fail this;
// MinDelta and Sigmoid satisfy it by construction.
bool all_sides_nonnegative(const Box& box);

}  // namespace boxemb
