#ifndef SWARM_MLP_HPP
#define SWARM_MLP_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "swarm/error.hpp"

namespace swarm {

/// Actor-critic pair of tanh MLPs with a state-independent log std.
///   actor : obs -> H -> H -> action mean (linear output)
///   critic: obs -> H -> H -> value
/// All parameters live in one flat vector; blocks() names the views into
/// it. Inputs are column-major with one sample per column.
template <class Scalar>
class ActorCritic {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  static constexpr Scalar kLogStdMin = Scalar(-5);
  static constexpr Scalar kLogStdMax = Scalar(2);

  struct Block {
    std::string name;
    int rows;
    int cols;
    std::size_t offset;
    std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  };

  /// Intermediate values of one forward pass, reused by backward().
  struct Activations {
    Matrix a1, a2, mean;
    Matrix c1, c2;
    RowVector value;
  };

  ActorCritic() = default;

  ActorCritic(int obs_dim, int action_dim, int hidden = 64)
      : obs_dim_(obs_dim), action_dim_(action_dim), hidden_(hidden) {
    if (obs_dim <= 0 || action_dim <= 0 || hidden <= 0) throw ConfigError("policy", "dimensions must be positive");
    std::size_t off = 0;
    auto add = [&](std::string name, int r, int c) {
      blocks_.push_back({std::move(name), r, c, off});
      off += static_cast<std::size_t>(r) * static_cast<std::size_t>(c);
    };
    add("actor.w1", hidden, obs_dim);
    add("actor.b1", hidden, 1);
    add("actor.w2", hidden, hidden);
    add("actor.b2", hidden, 1);
    add("actor.w3", action_dim, hidden);
    add("actor.b3", action_dim, 1);
    add("log_std", action_dim, 1);
    add("critic.w1", hidden, obs_dim);
    add("critic.b1", hidden, 1);
    add("critic.w2", hidden, hidden);
    add("critic.b2", hidden, 1);
    add("critic.w3", 1, hidden);
    add("critic.b3", 1, 1);
    params_ = Vector::Zero(static_cast<Eigen::Index>(off));
  }

  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return action_dim_; }
  int hidden() const { return hidden_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  const std::vector<Block>& blocks() const { return blocks_; }

  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }

  const Block& block(std::string_view name) const {
    for (const auto& b : blocks_)
      if (b.name == name) return b;
    throw ConfigError("policy", "no parameter block '" + std::string(name) + "'");
  }

  MatrixMap view(Vector& flat, std::size_t k) const {
    const Block& b = blocks_[k];
    return MatrixMap(flat.data() + b.offset, b.rows, b.cols);
  }
  ConstMatrixMap view(const Vector& flat, std::size_t k) const {
    const Block& b = blocks_[k];
    return ConstMatrixMap(flat.data() + b.offset, b.rows, b.cols);
  }

  Vector log_std() const { return view(params_, kLogStd).col(0); }

  /// Orthogonal initialisation: gain sqrt(2) on hidden layers, `actor_gain`
  /// on the action head, 1 on the value head; zero biases.
  template <class Rng>
  void initialize(Rng& rng, std::span<const Scalar> log_std_init, Scalar actor_gain = Scalar(0.01)) {
    params_.setZero();
    const Scalar hidden_gain = std::sqrt(Scalar(2));
    orthogonal(view(params_, kActorW1), hidden_gain, rng);
    orthogonal(view(params_, kActorW2), hidden_gain, rng);
    orthogonal(view(params_, kActorW3), actor_gain, rng);
    orthogonal(view(params_, kCriticW1), hidden_gain, rng);
    orthogonal(view(params_, kCriticW2), hidden_gain, rng);
    orthogonal(view(params_, kCriticW3), Scalar(1), rng);
    auto ls = view(params_, kLogStd);
    for (int d = 0; d < action_dim_; ++d)
      ls(d, 0) = std::clamp(log_std_init[static_cast<std::size_t>(d)], kLogStdMin, kLogStdMax);
  }

  void clamp_log_std() {
    auto ls = view(params_, kLogStd);
    ls = ls.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  }

  /// obs is obs_dim x batch.
  void forward(const Eigen::Ref<const Matrix>& obs, Activations& act) const {
    if (obs.rows() != obs_dim_) throw ContractError("policy forward: observation width mismatch");
    if (!obs.allFinite()) throw ContractError("policy forward: non-finite observation");
    layer(view(params_, kActorW1), view(params_, kActorB1), obs, act.a1);
    layer(view(params_, kActorW2), view(params_, kActorB2), act.a1, act.a2);
    act.mean.noalias() = view(params_, kActorW3) * act.a2;
    act.mean.colwise() += view(params_, kActorB3).col(0);
    layer(view(params_, kCriticW1), view(params_, kCriticB1), obs, act.c1);
    layer(view(params_, kCriticW2), view(params_, kCriticB2), act.c1, act.c2);
    act.value.noalias() = view(params_, kCriticW3) * act.c2;
    act.value.array() += view(params_, kCriticB3)(0, 0);
  }

  /// Accumulates into `grad` the parameter gradient given upstream
  /// gradients w.r.t. the action mean (action_dim x batch), the value
  /// (1 x batch) and log_std.
  void backward(const Eigen::Ref<const Matrix>& obs, const Activations& act, const Matrix& d_mean,
                const RowVector& d_value, const Vector& d_log_std, Vector& grad) const {
    // actor
    view(grad, kActorW3).noalias() += d_mean * act.a2.transpose();
    view(grad, kActorB3).col(0) += d_mean.rowwise().sum();
    Matrix dz2 = (view(params_, kActorW3).transpose() * d_mean).cwiseProduct(tanh_prime(act.a2));
    view(grad, kActorW2).noalias() += dz2 * act.a1.transpose();
    view(grad, kActorB2).col(0) += dz2.rowwise().sum();
    Matrix dz1 = (view(params_, kActorW2).transpose() * dz2).cwiseProduct(tanh_prime(act.a1));
    view(grad, kActorW1).noalias() += dz1 * obs.transpose();
    view(grad, kActorB1).col(0) += dz1.rowwise().sum();
    view(grad, kLogStd).col(0) += d_log_std;
    // critic
    view(grad, kCriticW3).noalias() += d_value * act.c2.transpose();
    view(grad, kCriticB3)(0, 0) += d_value.sum();
    Matrix dc2 = (view(params_, kCriticW3).transpose() * d_value).cwiseProduct(tanh_prime(act.c2));
    view(grad, kCriticW2).noalias() += dc2 * act.c1.transpose();
    view(grad, kCriticB2).col(0) += dc2.rowwise().sum();
    Matrix dc1 = (view(params_, kCriticW2).transpose() * dc2).cwiseProduct(tanh_prime(act.c1));
    view(grad, kCriticW1).noalias() += dc1 * obs.transpose();
    view(grad, kCriticB1).col(0) += dc1.rowwise().sum();
  }

  enum BlockIndex : std::size_t {
    kActorW1,
    kActorB1,
    kActorW2,
    kActorB2,
    kActorW3,
    kActorB3,
    kLogStd,
    kCriticW1,
    kCriticB1,
    kCriticW2,
    kCriticB2,
    kCriticW3,
    kCriticB3,
  };

 private:
  template <class W, class B, class In>
  static void layer(const W& w, const B& b, const In& in, Matrix& out) {
    out.noalias() = w * in;
    out.colwise() += b.col(0);
    out = out.array().tanh().matrix();
  }

  static Matrix tanh_prime(const Matrix& a) { return (Scalar(1) - a.array().square()).matrix(); }

  template <class Rng>
  static void orthogonal(MatrixMap w, Scalar gain, Rng& rng) {
    const Eigen::Index r = w.rows();
    const Eigen::Index c = w.cols();
    const Eigen::Index big = std::max(r, c);
    const Eigen::Index small = std::min(r, c);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd g(big, small);
    for (Eigen::Index j = 0; j < small; ++j)
      for (Eigen::Index i = 0; i < big; ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
    const Eigen::MatrixXd rmat = qr.matrixQR().topRows(small).template triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < small; ++j)
      if (rmat(j, j) < 0) q.col(j) *= -1.0;
    if (r >= c)
      w = (gain * q).template cast<Scalar>();
    else
      w = (gain * q.transpose()).template cast<Scalar>();
  }

  int obs_dim_{0};
  int action_dim_{0};
  int hidden_{0};
  std::vector<Block> blocks_;
  Vector params_;
};

}  // namespace swarm

#endif  // SWARM_MLP_HPP
