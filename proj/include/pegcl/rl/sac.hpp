#pragma once

// Soft actor-critic with twin critics, polyak-averaged targets, a
// tanh-squashed Gaussian policy and a learned temperature.
//
// Gradients are derived by hand. compute_gradients() and losses() take the
// Gaussian noise as an argument so that both are deterministic functions of
// the parameters; the finite-difference tests rely on that.

#include "pegcl/common.hpp"
#include "pegcl/rl/mlp.hpp"
#include "pegcl/rl/replay_buffer.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pegcl::rl {

struct SacHyperParams {
  double gamma = 0.99;
  double tau = 0.005;
  int batch_size = 128;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double alpha_lr = 3e-4;
  double target_entropy = -24.0;
  double initial_alpha = 0.2;
  std::vector<int> hidden = {64, 64};
  double log_std_min = -5.0;
  double log_std_max = 2.0;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
    if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
    if (!(initial_alpha > 0.0)) throw std::invalid_argument("initial alpha must be positive");
    if (!(log_std_min < log_std_max)) throw std::invalid_argument("log-std range is empty");
  }
};

struct SacLosses {
  double critic1 = 0.0;
  double critic2 = 0.0;
  double actor = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double mean_q = 0.0;
  double mean_log_prob = 0.0;

  bool finite() const {
    return std::isfinite(critic1) && std::isfinite(critic2) && std::isfinite(actor) && std::isfinite(alpha_loss);
  }
};

/// Standard-normal draws for the current (actor/alpha) and next (target) actions.
template <typename T>
struct PolicyNoise {
  Matrix<T> current;
  Matrix<T> next;
};

template <typename T>
struct SacGradients {
  Vector<T> critic1;
  Vector<T> critic2;
  Vector<T> actor;
  T log_alpha = T(0);
  Vector<T> td_errors;  // Q1 - y, used for priorities
  SacLosses losses;
};

template <typename T>
struct ActionSample {
  Vector<T> action;
  std::optional<T> log_prob;  // empty in deterministic mode
};

template <typename T>
T softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

/// log(1 - tanh(u)^2), stable for large |u|.
template <typename T>
T log_one_minus_tanh_sq(T u) {
  return T(2) * (T(std::log(2.0)) - u - softplus(T(-2) * u));
}

template <typename T>
class SacAgent {
 public:
  struct PolicyPass {
    Matrix<T> mean;
    Matrix<T> raw_log_std;
    Matrix<T> log_std;
    Matrix<T> std;
    Matrix<T> pre_tanh;  // u
    Matrix<T> action;    // tanh(u)
    Vector<T> log_prob;
    typename Mlp<T>::Cache cache;
  };

  SacAgent() = default;

  SacAgent(int obs_dim, int act_dim, SacHyperParams hp, std::uint64_t seed)
      : hp_(std::move(hp)), obs_dim_(obs_dim), act_dim_(act_dim) {
    hp_.validate();
    Rng rng(seed);
    std::vector<int> actor_sizes{obs_dim};
    std::vector<int> critic_sizes{obs_dim + act_dim};
    for (int h : hp_.hidden) {
      actor_sizes.push_back(h);
      critic_sizes.push_back(h);
    }
    actor_sizes.push_back(2 * act_dim);
    critic_sizes.push_back(1);
    actor_ = Mlp<T>(actor_sizes);
    actor_.initialize(rng, 0.1);
    for (int i = 0; i < 2; ++i) {
      critics_[i] = Mlp<T>(critic_sizes);
      critics_[i].initialize(rng);
      targets_[i] = critics_[i];
      critic_opt_[i] = Adam<T>(critics_[i].parameter_count(), hp_.critic_lr);
    }
    actor_opt_ = Adam<T>(actor_.parameter_count(), hp_.actor_lr);
    log_alpha_ = Vector<T>::Constant(1, static_cast<T>(std::log(hp_.initial_alpha)));
    alpha_opt_ = Adam<T>(1, hp_.alpha_lr);
  }

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  const SacHyperParams& hyper() const { return hp_; }

  Mlp<T>& actor() { return actor_; }
  const Mlp<T>& actor() const { return actor_; }
  Mlp<T>& critic(int i) { return critics_[i]; }
  const Mlp<T>& critic(int i) const { return critics_[i]; }
  Mlp<T>& target(int i) { return targets_[i]; }
  const Mlp<T>& target(int i) const { return targets_[i]; }
  Vector<T>& log_alpha_param() { return log_alpha_; }
  T log_alpha() const { return log_alpha_[0]; }
  T alpha() const { return std::exp(log_alpha_[0]); }
  Adam<T>& actor_optimizer() { return actor_opt_; }
  Adam<T>& critic_optimizer(int i) { return critic_opt_[i]; }
  Adam<T>& alpha_optimizer() { return alpha_opt_; }
  long update_count() const { return updates_; }
  void set_update_count(long n) { updates_ = n; }

  PolicyPass policy_forward(const Matrix<T>& obs, const Matrix<T>& noise, bool keep_cache) const {
    PolicyPass p;
    const Matrix<T> out = actor_.forward(obs, keep_cache ? &p.cache : nullptr);
    if (!out.allFinite()) throw std::runtime_error("policy network produced a non-finite output");
    const T lo = T(hp_.log_std_min);
    const T half_span = T(0.5 * (hp_.log_std_max - hp_.log_std_min));
    p.mean = out.topRows(act_dim_);
    p.raw_log_std = out.bottomRows(act_dim_);
    p.log_std = (lo + half_span * (p.raw_log_std.array().tanh() + T(1))).matrix();
    p.std = p.log_std.array().exp().matrix();
    p.pre_tanh = p.mean + p.std.cwiseProduct(noise);
    p.action = p.pre_tanh.array().tanh().matrix();
    const T half_log_2pi = T(0.5 * std::log(2.0 * kPi));
    p.log_prob.resize(obs.cols());
    for (Eigen::Index b = 0; b < obs.cols(); ++b) {
      T lp = T(0);
      for (Eigen::Index j = 0; j < act_dim_; ++j) {
        const T xi = noise(j, b);
        lp += T(-0.5) * xi * xi - p.log_std(j, b) - half_log_2pi - log_one_minus_tanh_sq(p.pre_tanh(j, b));
      }
      p.log_prob[b] = lp;
    }
    return p;
  }

  ActionSample<T> act(const Vector<T>& obs, Rng& rng, bool deterministic) const {
    if (obs.size() != obs_dim_) throw std::invalid_argument("observation has wrong size");
    if (deterministic) {
      const Matrix<T> out = actor_.forward(obs);
      if (!out.allFinite()) throw std::runtime_error("policy network produced a non-finite output");
      return {open_interval(out.topRows(act_dim_).col(0).array().tanh().matrix()), std::nullopt};
    }
    Matrix<T> noise(act_dim_, 1);
    for (Eigen::Index j = 0; j < act_dim_; ++j) noise(j, 0) = static_cast<T>(standard_normal(rng));
    PolicyPass p = policy_forward(obs, noise, false);
    return {open_interval(p.action.col(0)), p.log_prob[0]};
  }

  // tanh saturates to exactly +-1 in floating point for large |u|.
  static Vector<T> open_interval(const Vector<T>& a) {
    const T edge = std::nextafter(T(1), T(0));
    return a.cwiseMax(-edge).cwiseMin(edge);
  }

  PolicyNoise<T> draw_noise(Eigen::Index n, Rng& rng) const {
    PolicyNoise<T> z{Matrix<T>(act_dim_, n), Matrix<T>(act_dim_, n)};
    for (Eigen::Index b = 0; b < n; ++b)
      for (Eigen::Index j = 0; j < act_dim_; ++j) z.current(j, b) = static_cast<T>(standard_normal(rng));
    for (Eigen::Index b = 0; b < n; ++b)
      for (Eigen::Index j = 0; j < act_dim_; ++j) z.next(j, b) = static_cast<T>(standard_normal(rng));
    return z;
  }

  /// Soft Bellman target y = r + gamma (1 - done)(min Q'(s', a') - alpha log pi(a'|s')).
  Vector<T> critic_target(const Batch<T>& batch, const Matrix<T>& next_noise) const {
    const PolicyPass next = policy_forward(batch.next_obs, next_noise, false);
    const Matrix<T> in = stack(batch.next_obs, next.action);
    const Matrix<T> q1 = targets_[0].forward(in);
    const Matrix<T> q2 = targets_[1].forward(in);
    const T a = alpha();
    Vector<T> y(batch.size());
    for (Eigen::Index b = 0; b < batch.size(); ++b) {
      const T soft_v = std::min(q1(0, b), q2(0, b)) - a * next.log_prob[b];
      y[b] = batch.rewards[b] + T(hp_.gamma) * (T(1) - batch.dones[b]) * soft_v;
    }
    return y;
  }

  SacGradients<T> compute_gradients(const Batch<T>& batch, const PolicyNoise<T>& noise) const {
    const Eigen::Index n = batch.size();
    if (n < 1) throw std::invalid_argument("empty batch");
    const T inv_n = T(1) / T(n);
    SacGradients<T> g;
    g.critic1 = Vector<T>::Zero(critics_[0].parameter_count());
    g.critic2 = Vector<T>::Zero(critics_[1].parameter_count());
    g.actor = Vector<T>::Zero(actor_.parameter_count());

    // Critics.
    const Vector<T> y = critic_target(batch, noise.next);
    const Matrix<T> sa = stack(batch.obs, batch.actions);
    Vector<T>* critic_grads[2] = {&g.critic1, &g.critic2};
    double critic_loss[2] = {0, 0};
    double q_sum = 0.0;
    for (int i = 0; i < 2; ++i) {
      typename Mlp<T>::Cache cache;
      const Matrix<T> q = critics_[i].forward(sa, &cache);
      const Vector<T> diff = q.row(0).transpose() - y;
      if (i == 0) {
        g.td_errors = diff;
        q_sum = static_cast<double>(q.sum());
      }
      critic_loss[i] = static_cast<double>(T(0.5) * inv_n * (batch.weights.array() * diff.array().square()).sum());
      const Matrix<T> dq = (inv_n * batch.weights.cwiseProduct(diff)).transpose();
      critics_[i].backward(cache, dq, critic_grads[i]);
    }

    // Actor.
    const PolicyPass pi = policy_forward(batch.obs, noise.current, true);
    const Matrix<T> s_pi = stack(batch.obs, pi.action);
    typename Mlp<T>::Cache c1, c2;
    const Matrix<T> q1 = critics_[0].forward(s_pi, &c1);
    const Matrix<T> q2 = critics_[1].forward(s_pi, &c2);
    Matrix<T> sel1 = Matrix<T>::Zero(1, n);
    Matrix<T> sel2 = Matrix<T>::Zero(1, n);
    const T a = alpha();
    double actor_loss = 0.0;
    double log_prob_sum = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
      const bool first = q1(0, b) <= q2(0, b);
      const T qmin = first ? q1(0, b) : q2(0, b);
      (first ? sel1 : sel2)(0, b) = T(1);
      actor_loss += static_cast<double>(a * pi.log_prob[b] - qmin);
      log_prob_sum += static_cast<double>(pi.log_prob[b]);
    }
    actor_loss /= static_cast<double>(n);
    // dQmin/da for each sample (action rows of the critic input gradient).
    const Matrix<T> dq_da = critics_[0].backward(c1, sel1, nullptr).bottomRows(act_dim_) +
                            critics_[1].backward(c2, sel2, nullptr).bottomRows(act_dim_);
    const T half_span = T(0.5 * (hp_.log_std_max - hp_.log_std_min));
    Matrix<T> head_grad(2 * act_dim_, n);
    for (Eigen::Index b = 0; b < n; ++b) {
      for (Eigen::Index j = 0; j < act_dim_; ++j) {
        const T act = pi.action(j, b);
        const T dtanh = T(1) - act * act;
        const T sxi = pi.std(j, b) * noise.current(j, b);
        // logpi = sum(-xi^2/2 - ls - c - log(1 - tanh(u)^2)), u = mu + exp(ls) xi
        const T dlogp_du = T(2) * act;
        const T dlogp_dmu = dlogp_du;
        const T dlogp_dls = T(-1) + dlogp_du * sxi;
        const T dq_du = dq_da(j, b) * dtanh;
        const T dmu = inv_n * (a * dlogp_dmu - dq_du);
        const T dls = inv_n * (a * dlogp_dls - dq_du * sxi);
        const T t = std::tanh(pi.raw_log_std(j, b));
        head_grad(j, b) = dmu;
        head_grad(act_dim_ + j, b) = dls * half_span * (T(1) - t * t);
      }
    }
    actor_.backward(pi.cache, head_grad, &g.actor);

    // Temperature: L = -log_alpha * mean(log pi + target_entropy).
    const double mean_lp = log_prob_sum / static_cast<double>(n);
    g.log_alpha = static_cast<T>(-(mean_lp + hp_.target_entropy));

    g.losses.critic1 = critic_loss[0];
    g.losses.critic2 = critic_loss[1];
    g.losses.actor = actor_loss;
    g.losses.alpha_loss = -static_cast<double>(log_alpha()) * (mean_lp + hp_.target_entropy);
    g.losses.alpha = static_cast<double>(a);
    g.losses.mean_q = q_sum / static_cast<double>(n);
    g.losses.mean_log_prob = mean_lp;
    return g;
  }

  /// Loss values only; used as the finite-difference oracle's objective.
  SacLosses losses(const Batch<T>& batch, const PolicyNoise<T>& noise) const {
    const Eigen::Index n = batch.size();
    const T inv_n = T(1) / T(n);
    SacLosses out;
    const Vector<T> y = critic_target(batch, noise.next);
    const Matrix<T> sa = stack(batch.obs, batch.actions);
    for (int i = 0; i < 2; ++i) {
      const Matrix<T> q = critics_[i].forward(sa);
      const Vector<T> diff = q.row(0).transpose() - y;
      const double l = static_cast<double>(T(0.5) * inv_n * (batch.weights.array() * diff.array().square()).sum());
      (i == 0 ? out.critic1 : out.critic2) = l;
    }
    const PolicyPass pi = policy_forward(batch.obs, noise.current, false);
    const Matrix<T> s_pi = stack(batch.obs, pi.action);
    const Matrix<T> q1 = critics_[0].forward(s_pi);
    const Matrix<T> q2 = critics_[1].forward(s_pi);
    double actor_loss = 0.0;
    double lp = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
      actor_loss += static_cast<double>(alpha() * pi.log_prob[b] - std::min(q1(0, b), q2(0, b)));
      lp += static_cast<double>(pi.log_prob[b]);
    }
    out.actor = actor_loss / static_cast<double>(n);
    out.mean_log_prob = lp / static_cast<double>(n);
    out.alpha_loss = -static_cast<double>(log_alpha()) * (out.mean_log_prob + hp_.target_entropy);
    out.alpha = static_cast<double>(alpha());
    return out;
  }

  /// One gradient step on critics, actor and temperature, then target
  /// averaging. Throws if any loss is non-finite.
  SacGradients<T> update(const Batch<T>& batch, Rng& rng) {
    const PolicyNoise<T> noise = draw_noise(batch.size(), rng);
    SacGradients<T> g = compute_gradients(batch, noise);
    if (!g.losses.finite() || !g.critic1.allFinite() || !g.critic2.allFinite() || !g.actor.allFinite())
      throw std::runtime_error("SAC update diverged: non-finite loss or gradient at update " +
                               std::to_string(updates_));
    critic_opt_[0].step(critics_[0].params(), g.critic1);
    critic_opt_[1].step(critics_[1].params(), g.critic2);
    actor_opt_.step(actor_.params(), g.actor);
    alpha_opt_.step(log_alpha_, Vector<T>::Constant(1, g.log_alpha));
    for (int i = 0; i < 2; ++i) polyak_update(targets_[i].params(), critics_[i].params(), hp_.tau);
    ++updates_;
    return g;
  }

 private:
  static Matrix<T> stack(const Matrix<T>& top, const Matrix<T>& bottom) {
    Matrix<T> m(top.rows() + bottom.rows(), top.cols());
    m.topRows(top.rows()) = top;
    m.bottomRows(bottom.rows()) = bottom;
    return m;
  }

  SacHyperParams hp_;
  int obs_dim_ = 0;
  int act_dim_ = 0;
  Mlp<T> actor_;
  Mlp<T> critics_[2];
  Mlp<T> targets_[2];
  Adam<T> actor_opt_;
  Adam<T> critic_opt_[2];
  Vector<T> log_alpha_;
  Adam<T> alpha_opt_;
  long updates_ = 0;
};

}  // namespace pegcl::rl
