#include "mihst/tensor.hpp"

#include <algorithm>
#include <utility>

namespace mihst {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return from_data(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_size(shape) != data.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->data.size(), 0.0);
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({1, 1}, {v}, requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return from_data({r, c}, std::move(data), requires_grad);
}

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  const std::size_t c = values.size();
  return from_data({1, c}, std::move(values), requires_grad);
}

std::size_t Tensor::rows() const {
  const auto& s = node_->shape;
  if (s.empty()) return 1;
  if (s.size() == 1) return 1;
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
  return r;
}

std::size_t Tensor::cols() const {
  const auto& s = node_->shape;
  return s.empty() ? 1 : s.back();
}

double Tensor::item() const {
  if (size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->data[0];
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return from_data(shape(), node_->data, false); }

// ---------------------------------------------------------------------------

void Tape::record(std::function<void()> backward) {
  if (consumed_) throw Error("recording on a consumed tape; call reset() first");
  entries_.push_back(std::move(backward));
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw Error("backward called twice on the same tape without reset");
  if (!loss.requires_grad()) throw Error("loss does not require grad");
  if (loss.size() != 1) {
    throw DimensionError("backward needs a scalar loss, got " + shape_str(loss.shape()));
  }
  consumed_ = true;
  Tensor seed = loss;
  seed.grad_mut()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    (*it)();
    ++visits_;
  }
}

void Tape::reset() {
  entries_.clear();
  visits_ = 0;
  consumed_ = false;
}

namespace {
thread_local Tape* g_active = nullptr;
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active) { g_active = &tape; }
TapeScope::~TapeScope() { g_active = previous_; }

Tape* active_tape() noexcept { return g_active; }

Tensor make_result(Shape shape, std::vector<double> data,
                   std::initializer_list<Tensor> inputs,
                   std::function<void(const Tensor&)> backward) {
  return make_result(std::move(shape), std::move(data),
                     std::span<const Tensor>(inputs.begin(), inputs.size()),
                     std::move(backward));
}

Tensor make_result(Shape shape, std::vector<double> data,
                   std::span<const Tensor> inputs,
                   std::function<void(const Tensor&)> backward) {
  Tape* tape = g_active;
  const bool track =
      tape != nullptr &&
      std::any_of(inputs.begin(), inputs.end(),
                  [](const Tensor& t) { return t.requires_grad(); });
  Tensor out = Tensor::from_data(std::move(shape), std::move(data), track);
  if (track) {
    tape->record([fn = std::move(backward), out]() { fn(out); });
  }
  return out;
}

}  // namespace mihst
