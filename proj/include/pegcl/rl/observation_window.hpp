#pragma once

#include "pegcl/common.hpp"

#include <deque>
#include <stdexcept>

namespace pegcl::rl {

/// Last W per-step observations flattened oldest-first. Before W steps have
/// been seen the window is padded with the first observation.
class ObservationWindow {
 public:
  ObservationWindow(int length, int frame_size) : length_(length), frame_size_(frame_size) {
    if (length < 1 || frame_size < 1) throw std::invalid_argument("window length and frame size must be positive");
  }

  void reset(const Eigen::VectorXd& first) {
    check(first);
    frames_.assign(static_cast<std::size_t>(length_), first);
  }

  void push(const Eigen::VectorXd& frame) {
    check(frame);
    if (frames_.empty()) {
      reset(frame);
      return;
    }
    frames_.pop_front();
    frames_.push_back(frame);
  }

  Eigen::VectorXd flat() const {
    if (frames_.empty()) throw std::logic_error("observation window used before reset");
    Eigen::VectorXd v(size());
    for (int i = 0; i < length_; ++i) v.segment(i * frame_size_, frame_size_) = frames_[std::size_t(i)];
    return v;
  }

  int length() const { return length_; }
  int frame_size() const { return frame_size_; }
  int size() const { return length_ * frame_size_; }

 private:
  void check(const Eigen::VectorXd& f) const {
    if (f.size() != frame_size_) throw std::invalid_argument("observation frame has wrong size");
  }

  int length_;
  int frame_size_;
  std::deque<Eigen::VectorXd> frames_;
};

}  // namespace pegcl::rl
