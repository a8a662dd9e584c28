#pragma once

// Fully connected network with ReLU hidden layers and a linear head.
// Parameters live in one flat vector so that optimizers, target averaging,
// checkpoints and finite-difference checks can treat a network as a point in
// R^n. Batches are column-major: one sample per column.

#include "pegcl/common.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace pegcl::rl {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
class Mlp {
 public:
  struct LayerShape {
    int in = 0;
    int out = 0;
    Eigen::Index weight_offset = 0;
    Eigen::Index bias_offset = 0;
  };

  /// Activations kept for the backward pass.
  struct Cache {
    std::vector<Matrix<T>> inputs;  // input to each layer
    std::vector<Matrix<T>> pre;     // pre-activation of each layer
  };

  Mlp() = default;

  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("network needs at least input and output sizes");
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      LayerShape s{sizes_[l], sizes_[l + 1], offset, offset + Eigen::Index(sizes_[l]) * sizes_[l + 1]};
      offset = s.bias_offset + s.out;
      layers_.push_back(s);
    }
    params_ = Vector<T>::Zero(offset);
  }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases; the
  /// output layer is scaled by head_scale.
  void initialize(Rng& rng, double head_scale = 1.0) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& s = layers_[l];
      double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
      if (l + 1 == layers_.size()) bound *= head_scale;
      for (Eigen::Index i = s.weight_offset; i < s.bias_offset + s.out; ++i)
        params_[i] = static_cast<T>(uniform(rng, -bound, bound));
    }
  }

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  const std::vector<LayerShape>& layers() const { return layers_; }

  Vector<T>& params() { return params_; }
  const Vector<T>& params() const { return params_; }
  Eigen::Index parameter_count() const { return params_.size(); }

  Eigen::Map<const Matrix<T>> weight(std::size_t l) const {
    const auto& s = layers_[l];
    return {params_.data() + s.weight_offset, s.out, s.in};
  }
  Eigen::Map<const Vector<T>> bias(std::size_t l) const {
    const auto& s = layers_[l];
    return {params_.data() + s.bias_offset, s.out};
  }

  Matrix<T> forward(const Matrix<T>& x, Cache* cache = nullptr) const {
    if (x.rows() != input_size()) throw std::invalid_argument("network input has wrong size");
    if (cache) {
      cache->inputs.resize(layers_.size());
      cache->pre.resize(layers_.size());
    }
    Matrix<T> a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix<T> z = weight(l) * a;
      z.colwise() += bias(l);
      if (cache) {
        cache->inputs[l] = std::move(a);
        cache->pre[l] = z;
      }
      a = (l + 1 == layers_.size()) ? z : Matrix<T>(z.cwiseMax(T(0)));
    }
    return a;
  }

  /// Backpropagates dL/d(output) through the cached pass. Adds parameter
  /// gradients into `grad` (same layout as params()) when non-null and
  /// returns dL/d(input).
  Matrix<T> backward(const Cache& cache, const Matrix<T>& grad_out, Vector<T>* grad) const {
    Matrix<T> g = grad_out;
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const auto& s = layers_[li];
      if (li + 1 != layers_.size()) g = g.cwiseProduct((cache.pre[li].array() > T(0)).matrix().template cast<T>());
      if (grad) {
        Eigen::Map<Matrix<T>> gw(grad->data() + s.weight_offset, s.out, s.in);
        Eigen::Map<Vector<T>> gb(grad->data() + s.bias_offset, s.out);
        gw.noalias() += g * cache.inputs[li].transpose();
        gb += g.rowwise().sum();
      }
      g = weight(li).transpose() * g;
    }
    return g;
  }

 private:
  std::vector<int> sizes_;
  std::vector<LayerShape> layers_;
  Vector<T> params_;
};

/// Adam over a flat parameter vector.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Vector<T>::Zero(n)), v_(Vector<T>::Zero(n)) {}

  void step(Vector<T>& params, const Vector<T>& grad) {
    ++t_;
    m_ = T(beta1_) * m_ + T(1 - beta1_) * grad;
    v_ = T(beta2_) * v_ + T(1 - beta2_) * grad.cwiseAbs2();
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const T step_size = static_cast<T>(lr_ * std::sqrt(bc2) / bc1);
    params.array() -= step_size * m_.array() / (v_.array().sqrt() + T(eps_ * std::sqrt(bc2)));
  }

  long steps() const { return t_; }
  Vector<T>& first_moment() { return m_; }
  Vector<T>& second_moment() { return v_; }
  const Vector<T>& first_moment() const { return m_; }
  const Vector<T>& second_moment() const { return v_; }
  void set_steps(long t) { t_ = t; }

 private:
  double lr_ = 3e-4;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  Vector<T> m_;
  Vector<T> v_;
};

/// target <- (1 - tau) target + tau online, elementwise.
template <typename Derived, typename OtherDerived>
void polyak_update(Eigen::MatrixBase<Derived>& target, const Eigen::MatrixBase<OtherDerived>& online, double tau) {
  using T = typename Derived::Scalar;
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("polyak rate must lie in (0, 1]");
  if (tau == 1.0) {
    target = online;
    return;
  }
  target += T(tau) * (online - target);
}

}  // namespace pegcl::rl
