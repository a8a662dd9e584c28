#pragma once

#include "pegcl/common.hpp"
#include "pegcl/rl/mlp.hpp"

#include <stdexcept>
#include <vector>

namespace pegcl::rl {

/// Binary sum tree over a fixed number of leaves for proportional sampling.
class SumTree {
 public:
  explicit SumTree(std::size_t leaves = 1) {
    while (size_ < leaves) size_ <<= 1;
    nodes_.assign(2 * size_, 0.0);
  }

  void set(std::size_t leaf, double priority) {
    if (!(priority >= 0.0)) throw std::invalid_argument("priority must be non-negative");
    std::size_t i = leaf + size_;
    nodes_[i] = priority;
    for (i >>= 1; i >= 1; i >>= 1) nodes_[i] = nodes_[2 * i] + nodes_[2 * i + 1];
  }

  double get(std::size_t leaf) const { return nodes_[leaf + size_]; }
  double total() const { return nodes_[1]; }

  /// Leaf whose cumulative interval contains value, value in [0, total).
  std::size_t find(double value) const {
    std::size_t i = 1;
    while (i < size_) {
      const double left = nodes_[2 * i];
      if (value < left) {
        i = 2 * i;
      } else {
        value -= left;
        i = 2 * i + 1;
      }
    }
    return i - size_;
  }

 private:
  std::size_t size_ = 1;
  std::vector<double> nodes_;
};

template <typename T>
struct Batch {
  Matrix<T> obs;       // obs_dim x n
  Matrix<T> actions;   // act_dim x n
  Vector<T> rewards;   // n
  Matrix<T> next_obs;  // obs_dim x n
  Vector<T> dones;     // n, 1 for terminal transitions
  Vector<T> weights;   // n, importance weights (all ones when uniform)
  std::vector<std::size_t> indices;

  Eigen::Index size() const { return rewards.size(); }
};

struct ReplayOptions {
  std::size_t capacity = 100000;
  bool prioritized = false;
  double priority_eps = 1e-6;  // epsilon_p
  double priority_alpha = 0.6;
  double importance_beta = 0.4;
};

/// Ring buffer of transitions with uniform or proportional-priority sampling
/// (sampling is with replacement in both modes).
template <typename T>
class ReplayBuffer {
 public:
  ReplayBuffer(int obs_dim, int act_dim, ReplayOptions opts = {})
      : opts_(opts), obs_dim_(obs_dim), act_dim_(act_dim), tree_(opts.capacity) {
    if (opts_.capacity == 0) throw std::invalid_argument("replay capacity must be positive");
    const auto cap = static_cast<Eigen::Index>(opts_.capacity);
    obs_.resize(obs_dim, cap);
    next_obs_.resize(obs_dim, cap);
    actions_.resize(act_dim, cap);
    rewards_.resize(cap);
    dones_.resize(cap);
  }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return opts_.capacity; }
  bool prioritized() const { return opts_.prioritized; }

  template <typename ObsA, typename Act, typename ObsB>
  void push(const ObsA& obs, const Act& action, double reward, const ObsB& next_obs, bool done) {
    if (!std::isfinite(reward)) throw std::invalid_argument("non-finite reward");
    const auto i = static_cast<Eigen::Index>(head_);
    obs_.col(i) = obs.template cast<T>();
    actions_.col(i) = action.template cast<T>();
    rewards_[i] = static_cast<T>(reward);
    next_obs_.col(i) = next_obs.template cast<T>();
    dones_[i] = done ? T(1) : T(0);
    if (opts_.prioritized) tree_.set(head_, max_priority_);
    head_ = (head_ + 1) % opts_.capacity;
    if (size_ < opts_.capacity) ++size_;
  }

  /// Sets the priority of one stored item directly (p, not |td| + eps).
  void set_priority(std::size_t index, double priority) {
    tree_.set(index, priority);
    if (priority > max_priority_) max_priority_ = priority;
  }

  void update_priorities(const std::vector<std::size_t>& indices, const Vector<T>& td_errors) {
    if (!opts_.prioritized) return;
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const double p = std::pow(std::abs(static_cast<double>(td_errors[Eigen::Index(k)])) + opts_.priority_eps,
                                opts_.priority_alpha);
      set_priority(indices[k], p);
    }
  }

  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    if (size_ == 0) throw std::logic_error("cannot sample from an empty replay buffer");
    std::vector<std::size_t> idx(n);
    if (!opts_.prioritized) {
      for (auto& i : idx) i = std::min(size_ - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(size_)));
      return idx;
    }
    const double total = tree_.total();
    if (!(total > 0.0)) throw std::logic_error("all replay priorities are zero");
    for (auto& i : idx) i = std::min(size_ - 1, tree_.find(uniform01(rng) * total));
    return idx;
  }

  Batch<T> sample(std::size_t n, Rng& rng) const {
    Batch<T> b;
    b.indices = sample_indices(n, rng);
    const auto m = static_cast<Eigen::Index>(n);
    b.obs.resize(obs_dim_, m);
    b.next_obs.resize(obs_dim_, m);
    b.actions.resize(act_dim_, m);
    b.rewards.resize(m);
    b.dones.resize(m);
    b.weights = Vector<T>::Ones(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto i = static_cast<Eigen::Index>(b.indices[std::size_t(k)]);
      b.obs.col(k) = obs_.col(i);
      b.next_obs.col(k) = next_obs_.col(i);
      b.actions.col(k) = actions_.col(i);
      b.rewards[k] = rewards_[i];
      b.dones[k] = dones_[i];
    }
    if (opts_.prioritized) {
      const double total = tree_.total();
      double max_w = 0.0;
      std::vector<double> w(n);
      for (std::size_t k = 0; k < n; ++k) {
        const double prob = tree_.get(b.indices[k]) / total;
        w[k] = std::pow(static_cast<double>(size_) * prob, -opts_.importance_beta);
        max_w = std::max(max_w, w[k]);
      }
      for (std::size_t k = 0; k < n; ++k) b.weights[Eigen::Index(k)] = static_cast<T>(w[k] / max_w);
    }
    return b;
  }

  Eigen::Ref<const Matrix<T>> observations() const { return obs_.leftCols(Eigen::Index(size_)); }
  T reward_at(std::size_t i) const { return rewards_[Eigen::Index(i)]; }

 private:
  ReplayOptions opts_;
  int obs_dim_;
  int act_dim_;
  Matrix<T> obs_;
  Matrix<T> next_obs_;
  Matrix<T> actions_;
  Vector<T> rewards_;
  Vector<T> dones_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  SumTree tree_;
  double max_priority_ = 1.0;
};

}  // namespace pegcl::rl
