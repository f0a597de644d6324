#pragma once

#include "boxemb/box.hpp"

namespace boxemb {

inline constexpr double kEulerGamma = 0.57721566490153286;

enum class IntersectionKind { Hard, Gumbel };
enum class VolumeKind { Hard, Soft, BesselApprox };
enum class PoolKind { HardIntersection, Mean };
enum class RegularizerKind { None, L2Side, VolumeThreshold };

const char* to_string(IntersectionKind k);
const char* to_string(VolumeKind k);
const char* to_string(RegularizerKind k);
std::optional<IntersectionKind> intersection_kind_from(std::string_view name);
std::optional<VolumeKind> volume_kind_from(std::string_view name);
std::optional<RegularizerKind> regularizer_kind_from(std::string_view name);

// Geometry hyperparameters. beta is the Gumbel intersection temperature and
// also enters the BesselApprox volume; temperature smooths the volume.
struct OpsConfig {
  IntersectionKind intersection = IntersectionKind::Hard;
  double beta = 1.0;
  VolumeKind volume = VolumeKind::Soft;
  double temperature = 1.0;

  void validate() const;
};

// Hard: coordinate-wise max of mins / min of maxes (the exact set
// intersection). Gumbel: temperature-beta logsumexp smoothing of both.
// Box shapes broadcast; coordinate dimensions must match.
Box intersect(IntersectionKind kind, const Box& a, const Box& b, double beta);

// Natural-log volume, one scalar per box (shape = box_shape). Hard returns
// -inf for degenerate or disjoint boxes and defines their gradient as 0.
Var log_volume(VolumeKind kind, const Box& box, double temperature, double beta);

// Convenience variants driven by an OpsConfig.
Box intersect(const OpsConfig& cfg, const Box& a, const Box& b);
Var log_volume(const OpsConfig& cfg, const Box& box);

// log P(head -> tail) = log vol(head ∩ tail) - log vol(tail), clamped to
// <= 0. With a hard intersection the clamp never fires; with Gumbel +
// BesselApprox it can, and the clamped region carries zero gradient.
Var log_containment_prob(const Box& head, const Box& tail, const OpsConfig& cfg);

// Reduce one box_shape axis by intersection or by coordinate-wise mean.
Box pool(PoolKind kind, const Box& box, int axis);

struct RegularizerConfig {
  RegularizerKind kind = RegularizerKind::L2Side;
  double weight = 1e-3;
  double threshold = 0.0;  // VolumeThreshold: hinge on log-volume above tau
  bool log_scale = true;   // L2Side: square log-softplus sides instead of raw sides
};

// Mean penalty over all boxes in the tensor, scaled by weight. L2Side
// penalizes squared side lengths (raw or soft-log); VolumeThreshold hinges
// the configured log-volume above the threshold.
Var regularize(const RegularizerConfig& reg, const Box& box, const OpsConfig& ops);

}  // namespace boxemb
