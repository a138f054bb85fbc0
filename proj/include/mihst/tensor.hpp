#pragma once

// Dense row-major float64 tensors with tape-based reverse-mode gradients.
//
// Ops record a backward closure on the calling thread's active Tape (see
// TapeScope) whenever at least one input requires a gradient. Without an
// active tape nothing is recorded, which is how inference and the
// finite-difference probes of grad_check run.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mihst/error.hpp"

namespace mihst {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_size(const Shape& s);

namespace detail {
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // sized like data iff requires_grad
  bool requires_grad = false;
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  // Rank-2 literal, e.g. Tensor::matrix({{1, 2}, {3, 4}}).
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor row(std::vector<double> values, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }
  // Matrix view: the last dimension is columns, everything before it rows.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node_->data; }
  // Direct write access, for parameter initialization and optimizer steps.
  std::span<double> data_mut() { return node_->data; }
  double operator()(std::size_t r, std::size_t c) const {
    return node_->data[r * cols() + c];
  }
  double item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::span<const double> grad() const { return node_->grad; }
  // Grad buffers are the only mutable state of a recorded tensor, so they
  // are writable through const handles (backward closures hold those).
  std::span<double> grad_mut() const { return node_->grad; }
  void zero_grad();

  // Same underlying storage.
  bool same(const Tensor& other) const noexcept { return node_ == other.node_; }
  // Copy of the values with no gradient tracking.
  Tensor detach() const;

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::TensorNode> node_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and replays every entry once, newest first.
  // A tape can be replayed once; call reset() before recording again.
  void backward(const Tensor& loss);
  void reset();

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t visits() const noexcept { return visits_; }
  bool consumed() const noexcept { return consumed_; }

 private:
  std::vector<std::function<void()>> entries_;
  std::size_t visits_ = 0;
  bool consumed_ = false;
};

// Makes `tape` the active tape of the current thread for this scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape() noexcept;

// Builds an op output. When a tape is active and any input requires a
// gradient, the output gets a zeroed grad buffer and `backward(out)` is
// recorded; it must accumulate into the grads of inputs that require them.
Tensor make_result(Shape shape, std::vector<double> data,
                   std::span<const Tensor> inputs,
                   std::function<void(const Tensor&)> backward);
Tensor make_result(Shape shape, std::vector<double> data,
                   std::initializer_list<Tensor> inputs,
                   std::function<void(const Tensor&)> backward);

}  // namespace mihst
