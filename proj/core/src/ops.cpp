#include "boxemb/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace boxemb {

const char* to_string(IntersectionKind k) {
  return k == IntersectionKind::Hard ? "hard" : "gumbel";
}

const char* to_string(VolumeKind k) {
  switch (k) {
    case VolumeKind::Hard: return "hard";
    case VolumeKind::Soft: return "soft";
    case VolumeKind::BesselApprox: return "bessel_approx";
  }
  return "?";
}

const char* to_string(RegularizerKind k) {
  switch (k) {
    case RegularizerKind::None: return "none";
    case RegularizerKind::L2Side: return "l2_side";
    case RegularizerKind::VolumeThreshold: return "volume_threshold";
  }
  return "?";
}

std::optional<IntersectionKind> intersection_kind_from(std::string_view name) {
  if (name == "hard") return IntersectionKind::Hard;
  if (name == "gumbel") return IntersectionKind::Gumbel;
  return std::nullopt;
}

std::optional<VolumeKind> volume_kind_from(std::string_view name) {
  if (name == "hard") return VolumeKind::Hard;
  if (name == "soft") return VolumeKind::Soft;
  if (name == "bessel_approx") return VolumeKind::BesselApprox;
  return std::nullopt;
}

std::optional<RegularizerKind> regularizer_kind_from(std::string_view name) {
  if (name == "none") return RegularizerKind::None;
  if (name == "l2_side") return RegularizerKind::L2Side;
  if (name == "volume_threshold") return RegularizerKind::VolumeThreshold;
  return std::nullopt;
}

void OpsConfig::validate() const {
  if (!(beta > 0.0))
    throw std::invalid_argument("intersection temperature beta must be positive");
  if (!(temperature > 0.0))
    throw std::invalid_argument("volume temperature must be positive");
}

Box intersect(IntersectionKind kind, const Box& a, const Box& b, double beta) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("intersect: coordinate dimensions differ: " +
                                std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  switch (kind) {
    case IntersectionKind::Hard:
      return make_box(max2(a.z, b.z), min2(a.Z, b.Z));
    case IntersectionKind::Gumbel: {
      if (!(beta > 0.0))
        throw std::invalid_argument("gumbel intersection requires beta > 0");
      const double ib = 1.0 / beta;
      Var z = scale(logsumexp2(scale(a.z, ib), scale(b.z, ib)), beta);
      Var Z = scale(logsumexp2(scale(a.Z, -ib), scale(b.Z, -ib)), -beta);
      return make_box(z, Z);
    }
  }
  throw std::logic_error("intersect: bad kind");
}

Var log_volume(VolumeKind kind, const Box& box, double temperature, double beta) {
  Var sides = sub(box.Z, box.z);
  const int last = sides.shape().rank() - 1;
  const auto n = static_cast<double>(box.dim());
  Tape& t = *sides.tape;
  switch (kind) {
    case VolumeKind::Hard:
      return sum_axis(log(relu(sides)), last);
    case VolumeKind::Soft: {
      if (!(temperature > 0.0))
        throw std::invalid_argument("soft volume requires temperature > 0");
      Var per_dim = log_softplus(scale(sides, 1.0 / temperature));
      return add(sum_axis(per_dim, last), t.constant(n * std::log(temperature)));
    }
    case VolumeKind::BesselApprox: {
      if (!(temperature > 0.0))
        throw std::invalid_argument("bessel volume requires temperature > 0");
      if (!(beta > 0.0))
        throw std::invalid_argument("bessel volume requires beta > 0");
      Var shifted = sub(sides, t.constant(2.0 * kEulerGamma * beta));
      Var per_dim = log_softplus(scale(shifted, 1.0 / temperature));
      return add(sum_axis(per_dim, last), t.constant(n * std::log(temperature)));
    }
  }
  throw std::logic_error("log_volume: bad kind");
}

Box intersect(const OpsConfig& cfg, const Box& a, const Box& b) {
  return intersect(cfg.intersection, a, b, cfg.beta);
}

Var log_volume(const OpsConfig& cfg, const Box& box) {
  return log_volume(cfg.volume, box, cfg.temperature, cfg.beta);
}

Var log_containment_prob(const Box& head, const Box& tail, const OpsConfig& cfg) {
  cfg.validate();
  Box inter = intersect(cfg, head, tail);
  Var raw = sub(log_volume(cfg, inter), log_volume(cfg, tail));
  // min(x, 0) as -relu(-x): identity (value and gradient) wherever the
  // quotient is already a probability, zero gradient where it is clamped.
  return neg(relu(neg(raw)));
}

Box pool(PoolKind kind, const Box& box, int axis) {
  const Shape bs = box.box_shape();
  if (axis < 0 || axis >= bs.rank())
    throw std::invalid_argument("pool: axis " + std::to_string(axis) +
                                " out of range for box_shape " + bs.str());
  switch (kind) {
    case PoolKind::HardIntersection:
      return make_box(max_axis(box.z, axis), min_axis(box.Z, axis));
    case PoolKind::Mean:
      return make_box(mean_axis(box.z, axis), mean_axis(box.Z, axis));
  }
  throw std::logic_error("pool: bad kind");
}

// Flatten the box_shape and average, giving one scalar per box tensor.
static Var mean_over_boxes(Var per_box) {
  Tape& t = *per_box.tape;
  const std::int64_t count = per_box.shape().numel();
  if (count == 0) return t.constant(0.0);
  Var flat = reshape(per_box, Shape{count});
  return mean_axis(flat, 0);
}

Var regularize(const RegularizerConfig& reg, const Box& box, const OpsConfig& ops) {
  if (reg.weight < 0.0)
    throw std::invalid_argument("regularizer weight must be nonnegative");
  Tape& t = *box.z.tape;
  switch (reg.kind) {
    case RegularizerKind::None:
      return t.constant(0.0);
    case RegularizerKind::L2Side: {
      Var sides = sub(box.Z, box.z);
      Var s = reg.log_scale ? log_softplus(sides) : sides;
      Var per_box = sum_axis(mul(s, s), s.shape().rank() - 1);
      return scale(mean_over_boxes(per_box), reg.weight);
    }
    case RegularizerKind::VolumeThreshold: {
      Var lv = log_volume(ops, box);
      Var hinge = relu(sub(lv, t.constant(reg.threshold)));
      return scale(mean_over_boxes(hinge), reg.weight);
    }
  }
  throw std::logic_error("regularize: bad kind");
}

}  // namespace boxemb
