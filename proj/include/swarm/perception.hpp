#ifndef SWARM_PERCEPTION_HPP
#define SWARM_PERCEPTION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "swarm/agent_store.hpp"
#include "swarm/error.hpp"
#include "swarm/geometry.hpp"
#include "swarm/parallel.hpp"
#include "swarm/spatial_grid.hpp"

namespace swarm {

/// Sector view model: `v` rays spread over a field of view of `fov`
/// radians centred on the heading, seeing neighbour discs of radius `d_r`
/// up to range `d_v`, split into `channels` colour channels.
struct ViewConfig {
  int v{128};
  float fov{250.0f * std::numbers::pi_v<float> / 180.0f};
  float d_v{10.0f};
  int channels{1};
  float d_r{0.25f};

  void validate() const {
    if (v <= 0) throw ConfigError("view.v", "sector count must be > 0");
    if (!(fov > 0.0f) || fov > two_pi_v<float>) throw ConfigError("view.fov", "must lie in (0, 2pi]");
    if (!(d_v > 0.0f) || !std::isfinite(d_v)) throw ConfigError("view.d_v", "must be > 0");
    if (channels < 1) throw ConfigError("view.channels", "must be >= 1");
    if (!(d_r > 0.0f) || !std::isfinite(d_r)) throw ConfigError("view.d_r", "must be > 0");
  }

  /// Centre-to-centre range beyond which no disc can be hit within d_v.
  float query_radius() const { return d_v + d_r; }
  std::size_t row_size() const { return static_cast<std::size_t>(channels) * static_cast<std::size_t>(v); }
};

/// n x channels x v normalised distances; 1 means nothing seen in range.
class ViewBuffer {
 public:
  ViewBuffer() = default;
  ViewBuffer(std::size_t n, int channels, int v)
      : n_(n), channels_(channels), v_(v), values_(n * channels * static_cast<std::size_t>(v), 1.0f) {}

  std::size_t agents() const { return n_; }
  int channels() const { return channels_; }
  int sectors() const { return v_; }

  float operator()(std::size_t i, int c, int k) const { return values_[offset(i, c, k)]; }
  float& operator()(std::size_t i, int c, int k) { return values_[offset(i, c, k)]; }

  /// The channels x v block of agent i, channel-major.
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values_).subspan(i * row_size(), row_size());
  }
  std::span<float> row(std::size_t i) { return std::span<float>(values_).subspan(i * row_size(), row_size()); }
  std::span<const float> values() const { return values_; }

  friend bool operator==(const ViewBuffer&, const ViewBuffer&) = default;

 private:
  std::size_t row_size() const { return static_cast<std::size_t>(channels_) * static_cast<std::size_t>(v_); }
  std::size_t offset(std::size_t i, int c, int k) const {
    return i * row_size() + static_cast<std::size_t>(c) * v_ + static_cast<std::size_t>(k);
  }

  std::size_t n_{0};
  int channels_{1};
  int v_{1};
  std::vector<float> values_;
};

/// Angle of sector ray k: heading - fov/2 + (k + 0.5) * fov / v.
inline float sector_angle(float heading, const ViewConfig& cfg, int k) {
  return heading - cfg.fov / 2.0f + (static_cast<float>(k) + 0.5f) * cfg.fov / static_cast<float>(cfg.v);
}

/// Unit vectors of the v sector-centre rays, left to right.
inline void sector_directions(float heading, const ViewConfig& cfg, std::span<Vec2> out) {
  for (int k = 0; k < cfg.v; ++k) {
    const float a = sector_angle(heading, cfg, k);
    out[static_cast<std::size_t>(k)] = {std::cos(a), std::sin(a)};
  }
}

inline std::vector<Vec2> sector_directions(float heading, const ViewConfig& cfg) {
  std::vector<Vec2> out(static_cast<std::size_t>(cfg.v));
  sector_directions(heading, cfg, out);
  return out;
}

/// Smallest t >= 0 with |origin + t dir - center| = radius; 0 when the
/// origin is inside the disc, nullopt when the ray misses.
template <std::floating_point Real>
std::optional<Real> ray_disc_distance(BasicVec2<Real> origin, BasicVec2<Real> dir, BasicVec2<Real> center,
                                      Real radius) {
  const BasicVec2<Real> oc = center - origin;
  const Real c = oc.norm2() - radius * radius;
  if (c <= Real(0)) return Real(0);
  const Real b = oc.dot(dir);
  if (b <= Real(0)) return std::nullopt;
  const Real disc = b * b - c;
  if (disc < Real(0)) return std::nullopt;
  // c / (b + sqrt) is the near root b - sqrt(disc) without cancellation.
  return c / (b + std::sqrt(disc));
}

namespace detail {

/// Casts the rays whose angle can reach the disc at `disp` and lowers
/// `best` accordingly. Rays that cannot intersect are skipped; every ray
/// tested goes through ray_disc_distance, so the result equals casting all
/// v rays.
inline void cast_against_disc(Vec2 disp, float distance, float heading, const ViewConfig& cfg,
                              std::span<const Vec2> dirs, std::span<float> best) {
  const Vec2 origin{0.0f, 0.0f};
  if (distance <= cfg.d_r) {
    for (int k = 0; k < cfg.v; ++k)
      if (auto t = ray_disc_distance(origin, dirs[k], disp, cfg.d_r)) best[k] = std::min(best[k], *t);
    return;
  }
  constexpr float tau = two_pi_v<float>;
  const float step = cfg.fov / static_cast<float>(cfg.v);
  const float half_width = std::asin(std::min(1.0f, cfg.d_r / distance)) + 1e-3f;
  const float rel = normalize_angle(std::atan2(disp.y, disp.x) - (heading - cfg.fov / 2.0f));
  for (const float shift : {-tau, 0.0f, tau}) {
    const float centre = rel + shift;
    const int lo = std::max(0, static_cast<int>(std::floor((centre - half_width) / step - 0.5f)) - 1);
    const int hi = std::min(cfg.v - 1, static_cast<int>(std::ceil((centre + half_width) / step - 0.5f)) + 1);
    for (int k = lo; k <= hi; ++k)
      if (auto t = ray_disc_distance(origin, dirs[k], disp, cfg.d_r)) best[k] = std::min(best[k], *t);
  }
}

}  // namespace detail

/// Fills `out` with every agent's sector view. `channel_of[tag]` maps a type
/// tag to its channel; tags outside the table or mapped to a negative
/// channel are invisible. The grid must have cell_size >= d_v + d_r.
inline void compute_views(const AgentStore& store, const SpatialGrid& grid, const ViewConfig& cfg,
                          std::span<const int> channel_of, ViewBuffer& out, int workers = 1) {
  cfg.validate();
  if (grid.cell_size() < cfg.query_radius())
    throw ConfigError("cell_size", "grid cell size must be >= d_v + d_r for perception");
  const std::size_t n = store.size();
  if (out.agents() != n || out.channels() != cfg.channels || out.sectors() != cfg.v)
    out = ViewBuffer(n, cfg.channels, cfg.v);
  const auto types = store.types();
  const auto heading = store.heading();
  const auto v = static_cast<std::size_t>(cfg.v);

  parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<Neighbor> nbrs;
    std::vector<Vec2> dirs(v);
    std::vector<float> best(cfg.row_size());
    for (std::size_t i = begin; i < end; ++i) {
      sector_directions(heading[i], cfg, dirs);
      std::fill(best.begin(), best.end(), cfg.d_v);
      gather_neighbors(grid, store, i, cfg.query_radius(), nbrs);
      for (const auto& nb : nbrs) {
        const std::uint8_t tag = types[nb.j];
        const int c = tag < channel_of.size() ? channel_of[tag] : -1;
        if (c < 0 || c >= cfg.channels) continue;
        detail::cast_against_disc(nb.disp, nb.distance, heading[i], cfg, dirs,
                                  std::span<float>(best).subspan(static_cast<std::size_t>(c) * v, v));
      }
      auto row = out.row(i);
      for (std::size_t k = 0; k < row.size(); ++k) row[k] = std::min(best[k], cfg.d_v) / cfg.d_v;
    }
  });
}

inline ViewBuffer compute_views(const AgentStore& store, const SpatialGrid& grid, const ViewConfig& cfg,
                                std::span<const int> channel_of, int workers = 1) {
  ViewBuffer out(store.size(), cfg.channels, cfg.v);
  compute_views(store, grid, cfg, channel_of, out, workers);
  return out;
}

}  // namespace swarm

#endif  // SWARM_PERCEPTION_HPP
