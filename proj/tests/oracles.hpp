// Brute-force reference implementations shared by unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "swarm/agent_store.hpp"
#include "swarm/geometry.hpp"
#include "swarm/perception.hpp"
#include "swarm/ppo.hpp"

namespace oracle {

/// Minimum over the 9 periodic images of b.
template <class Real>
swarm::BasicVec2<Real> nine_image(swarm::BasicVec2<Real> a, swarm::BasicVec2<Real> b,
                                  const swarm::BasicWorldSpec<Real>& w) {
  swarm::BasicVec2<Real> best{};
  Real best_d = std::numeric_limits<Real>::infinity();
  for (int ox = -1; ox <= 1; ++ox)
    for (int oy = -1; oy <= 1; ++oy) {
      const swarm::BasicVec2<Real> d{b.x + Real(ox) * w.width - a.x, b.y + Real(oy) * w.height - a.y};
      if (d.norm() < best_d) {
        best_d = d.norm();
        best = d;
      }
    }
  return best;
}

/// All-pairs neighbour scan, ascending j.
inline std::vector<std::pair<std::uint32_t, float>> neighbors(const swarm::AgentStore& s, std::size_t i, float r) {
  std::vector<std::pair<std::uint32_t, float>> out;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (j == i) continue;
    const float d = swarm::torus_displacement(s.position(i), s.position(j), s.world()).norm();
    if (d < r) out.emplace_back(static_cast<std::uint32_t>(j), d);
  }
  return out;
}

/// Every ray of every agent against every other disc.
inline std::vector<float> views(const swarm::AgentStore& s, const swarm::ViewConfig& cfg,
                                const std::vector<int>& channel_of) {
  const std::size_t n = s.size();
  const auto v = static_cast<std::size_t>(cfg.v);
  std::vector<float> out(n * cfg.row_size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto dirs = swarm::sector_directions(s.heading()[i], cfg);
    for (int c = 0; c < cfg.channels; ++c)
      for (std::size_t k = 0; k < v; ++k) {
        float best = cfg.d_v;
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          const auto tag = s.types()[j];
          if (tag >= channel_of.size() || channel_of[tag] != c) continue;
          const auto disp = swarm::torus_displacement(s.position(i), s.position(j), s.world());
          if (auto t = swarm::ray_disc_distance(swarm::Vec2{0, 0}, dirs[k], disp, cfg.d_r)) best = std::min(best, *t);
        }
        out[i * cfg.row_size() + static_cast<std::size_t>(c) * v + k] = std::min(best, cfg.d_v) / cfg.d_v;
      }
  }
  return out;
}

/// Bisection root of |o + t dir - c| - r on [0, t_max] (first crossing found
/// by coarse scanning). Double precision.
inline std::optional<double> bisection_ray(double ox, double oy, double dx, double dy, double cx, double cy, double r,
                                           double t_max) {
  auto g = [&](double t) { return std::hypot(ox + t * dx - cx, oy + t * dy - cy) - r; };
  if (g(0) <= 0) return 0.0;
  const int scan = 20000;
  double prev = 0;
  for (int s = 1; s <= scan; ++s) {
    const double t = t_max * s / scan;
    if (g(t) <= 0) {
      double lo = prev, hi = t;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) > 0 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    prev = t;
  }
  return std::nullopt;
}

/// Direct truncated sum: A_k = sum_l (gamma lambda)^l delta_{k+l}.
template <class Scalar>
void gae_direct(const swarm::BasicTrajectoryBuffer<Scalar>& buf, double gamma, double lambda, std::vector<double>& adv) {
  adv.assign(buf.samples(), 0.0);
  for (std::size_t a = 0; a < buf.n; ++a)
    for (std::size_t k = 0; k < buf.t; ++k) {
      double sum = 0;
      for (std::size_t l = k; l < buf.t; ++l) {
        const double delta = static_cast<double>(buf.rewards(buf.index(a, l))) +
                             gamma * static_cast<double>(buf.values(buf.index(a, l + 1))) -
                             static_cast<double>(buf.values(buf.index(a, l)));
        sum += std::pow(gamma * lambda, static_cast<double>(l - k)) * delta;
      }
      adv[static_cast<std::size_t>(buf.index(a, k))] = sum;
    }
}

/// Scalar bounded-confidence reference: same edge order, same arithmetic.
struct OpinionReference {
  std::vector<double> opinion;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // sorted (src, dst)
  std::vector<double> weights;
  double threshold;
  double strength;

  void step() {
    std::vector<double> next = opinion;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto [i, j] = edges[e];
      if (std::abs(opinion[i] - opinion[j]) < threshold) {
        const double w = strength * weights[e];
        next[i] = (1.0 - w) * next[i] + w * opinion[j];
      }
    }
    opinion = next;
  }

  double spread() const {
    const auto [lo, hi] = std::minmax_element(opinion.begin(), opinion.end());
    return *hi - *lo;
  }
};

/// Central finite-difference check of the PPO loss gradient on a random
/// double-precision problem. Returns the largest per-parameter relative
/// error |g - fd| / max(|g|, |fd|, floor).
inline double ppo_gradient_check(std::uint64_t seed, int obs_dim = 5, int hidden = 8, int batch = 16, double h = 1e-5,
                                 double floor = 1e-6) {
  using P = swarm::ActorCritic<double>;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  P pol(obs_dim, 2, hidden);
  const double ls[2] = {std::log(0.4), std::log(0.7)};
  pol.initialize(rng, std::span<const double>(ls), 0.5);
  // nonzero biases so every block carries signal
  for (Eigen::Index k = 0; k < pol.parameters().size(); ++k)
    if (pol.parameters()(k) == 0.0) pol.parameters()(k) = 0.1 * normal(rng);
  swarm::Minibatch<double> mb;
  mb.observations = P::Matrix::NullaryExpr(obs_dim, batch, [&] { return normal(rng); });
  mb.actions = P::Matrix::NullaryExpr(2, batch, [&] { return normal(rng); });
  mb.advantages = P::Vector::NullaryExpr(batch, [&] { return normal(rng); });
  mb.returns = P::Vector::NullaryExpr(batch, [&] { return normal(rng); });
  // old log probs around the current ones so both clip branches occur
  typename P::Activations act;
  pol.forward(mb.observations, act);
  mb.old_log_probs.resize(batch);
  const typename P::Vector lstd = pol.log_std();
  for (int b = 0; b < batch; ++b) {
    const double a[2] = {mb.actions(0, b), mb.actions(1, b)};
    const double m[2] = {act.mean(0, b), act.mean(1, b)};
    const double l[2] = {lstd(0), lstd(1)};
    mb.old_log_probs(b) = swarm::gaussian_log_prob<double>(a, m, l) + u(rng);
  }
  const swarm::LossCoefficients coef{0.2, 0.5, 0.01};
  const auto r = swarm::ppo_loss(pol, mb, coef, 1, 5);
  double worst = 0;
  for (Eigen::Index k = 0; k < pol.parameters().size(); ++k) {
    const double keep = pol.parameters()(k);
    pol.parameters()(k) = keep + h;
    const double up = swarm::ppo_loss(pol, mb, coef).loss;
    pol.parameters()(k) = keep - h;
    const double down = swarm::ppo_loss(pol, mb, coef).loss;
    pol.parameters()(k) = keep;
    const double fd = (up - down) / (2 * h);
    const double g = r.grad(k);
    worst = std::max(worst, std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), floor}));
  }
  return worst;
}

/// Uniformly random agents in the world.
inline swarm::AgentStore random_store(std::size_t n, swarm::WorldSpec world, std::mt19937_64& rng,
                                      int types = 1) {
  swarm::AgentStore s(n, world);
  std::uniform_real_distribution<float> ux(0.0f, world.width), uy(0.0f, world.height),
      uh(0.0f, swarm::two_pi_v<float>);
  std::uniform_int_distribution<int> ut(0, types - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const float x = ux(rng), y = uy(rng), h = uh(rng);
    s.set_agent(i, {x, y}, h, 0.0f);
    s.set_type(i, static_cast<std::uint8_t>(ut(rng)));
  }
  return s;
}

}  // namespace oracle
