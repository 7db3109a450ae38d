#ifndef SWARM_GEOMETRY_HPP
#define SWARM_GEOMETRY_HPP

#include <cmath>
#include <concepts>
#include <numbers>

#include "swarm/error.hpp"

namespace swarm {

template <std::floating_point Real>
struct BasicVec2 {
  Real x{0};
  Real y{0};

  friend constexpr BasicVec2 operator+(BasicVec2 a, BasicVec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr BasicVec2 operator-(BasicVec2 a, BasicVec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr BasicVec2 operator*(Real s, BasicVec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(BasicVec2, BasicVec2) = default;

  constexpr Real dot(BasicVec2 o) const { return x * o.x + y * o.y; }
  constexpr Real norm2() const { return x * x + y * y; }
  Real norm() const { return std::sqrt(norm2()); }
};

using Vec2 = BasicVec2<float>;

template <std::floating_point Real>
constexpr Real two_pi_v = static_cast<Real>(2.0 * std::numbers::pi);

/// Maps an angle into [0, 2pi).
template <std::floating_point Real>
Real normalize_angle(Real a) {
  constexpr Real tau = two_pi_v<Real>;
  a = std::fmod(a, tau);
  if (a < Real(0)) a += tau;
  if (a >= tau) a = Real(0);
  return a;
}

enum class Topology { torus };

/// Rectangular world [0, width) x [0, height) whose opposite edges are identified.
template <std::floating_point Real>
struct BasicWorldSpec {
  Real width{100};
  Real height{100};
  Topology topology{Topology::torus};

  void validate() const {
    if (!(width > Real(0)) || !std::isfinite(width)) throw ConfigError("world.width", "must be > 0");
    if (!(height > Real(0)) || !std::isfinite(height)) throw ConfigError("world.height", "must be > 0");
  }

  bool contains(BasicVec2<Real> p) const {
    return p.x >= Real(0) && p.x < width && p.y >= Real(0) && p.y < height;
  }

  static Real wrap_coord(Real v, Real extent) {
    v = std::fmod(v, extent);
    if (v < Real(0)) v += extent;
    if (v >= extent) v = Real(0);
    return v;
  }

  BasicVec2<Real> wrap(BasicVec2<Real> p) const { return {wrap_coord(p.x, width), wrap_coord(p.y, height)}; }
};

using WorldSpec = BasicWorldSpec<float>;

/// Shortest vector d with a + d == b modulo the world extent (minimal image).
template <std::floating_point Real>
BasicVec2<Real> torus_displacement(BasicVec2<Real> a, BasicVec2<Real> b, const BasicWorldSpec<Real>& world) {
  auto axis = [](Real d, Real extent) {
    const Real half = extent / Real(2);
    if (d > half) return d - extent;
    if (d < -half) return d + extent;
    return d;
  };
  return {axis(b.x - a.x, world.width), axis(b.y - a.y, world.height)};
}

}  // namespace swarm

#endif  // SWARM_GEOMETRY_HPP
