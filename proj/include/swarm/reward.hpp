#ifndef SWARM_REWARD_HPP
#define SWARM_REWARD_HPP

#include <concepts>
#include <string>

#include "swarm/error.hpp"

namespace swarm {

/// Proximity reward f(d) on [0, d_v):
///   -c_collide                     for d <= d_collide,
///   rising linearly from 0 to c_near on (d_collide, d_peak],
///   falling linearly to 0 at d_v   on (d_peak, d_v),
/// with d_peak = (d_collide + d_v) / 2 and d_collide = 2 * agent radius.
struct RewardShape {
  float c_collide{1.0f};
  float c_near{0.5f};
  float d_collide{0.5f};

  void validate(float d_v) const {
    if (!(c_collide > 0.0f)) throw ConfigError("reward.c_collide", "must be > 0");
    if (!(c_near > 0.0f)) throw ConfigError("reward.c_near", "must be > 0");
    if (!(d_collide > 0.0f) || !(d_collide < d_v)) throw ConfigError("reward.d_collide", "must lie in (0, d_v)");
  }

  template <std::floating_point Real = float>
  Real peak(Real d_v) const {
    return (static_cast<Real>(d_collide) + d_v) / Real(2);
  }
};

template <std::floating_point Real>
Real flock_reward_f(Real d, const RewardShape& shape, Real d_v) {
  if (!(d >= Real(0)) || !(d < d_v))
    throw DomainError("flock_reward_f: distance " + std::to_string(d) + " outside [0, " + std::to_string(d_v) + ")");
  const Real d_collide = shape.d_collide;
  if (d <= d_collide) return -static_cast<Real>(shape.c_collide);
  const Real d_peak = shape.peak(d_v);
  const Real c_near = shape.c_near;
  if (d <= d_peak) return c_near * (d - d_collide) / (d_peak - d_collide);
  return c_near * (d_v - d) / (d_v - d_peak);
}

}  // namespace swarm

#endif  // SWARM_REWARD_HPP
