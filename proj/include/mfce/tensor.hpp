#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mfce {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct Node;
}

// Dense row-major double tensor with an optional gradient buffer.
//
// Tensor is a handle: copies share the same underlying node. Operations
// below record themselves on their output so that backward() can replay
// the adjoints in reverse topological order.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const { return shape().at(axis); }
  std::size_t numel() const;

  std::span<const double> data() const;
  // Writable view of the values. Only meaningful on leaves (parameters, inputs).
  std::span<double> mutable_data();

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  std::string_view op_name() const;

  // Empty span when no gradient buffer exists.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  // Accumulates d(this)/d(leaf) into every reachable leaf that requires grad.
  // Intermediate gradients are recomputed from scratch on each call.
  void backward() const;

  // Fresh leaf holding a copy of the values, no history.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Ordered list of the operations that produced a tensor. Every entry's inputs
// appear before it.
class ComputationRecord {
 public:
  struct Entry {
    std::string op;
    std::vector<std::size_t> inputs;
    Shape shape;
  };

  static ComputationRecord of(const Tensor& root);

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Dilated cross-correlation over a [C_in x T x F] input with kernel
// [C_out x C_in x k_t x k_f]. Time stride is 1 and time padding is 0; only
// frequency has stride and padding.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int dilation_t, int stride_f = 1,
              int pad_f = 0);

// Fully connected layer applied at every time step. With collapse_freq the
// weights are [C_out x C_in*F] and the output is [C_out x T x 1]; otherwise
// weights are [C_out x C_in] and the frequency extent is kept.
Tensor pointwise(const Tensor& input, const Tensor& weights, bool collapse_freq);

// Adds bias[c] to every (t, f) of channel c.
Tensor add_bias(const Tensor& input, const Tensor& bias);

Tensor relu(const Tensor& input);

// Non-overlapping max pooling along the last axis of [C x T x F].
Tensor max_pool_freq(const Tensor& input, int size);

Tensor log_softmax(const Tensor& input, std::size_t axis);

// -logprobs[target] for a 1-D tensor of log-probabilities.
Tensor nll(const Tensor& logprobs, std::size_t target);

// Per-row -logprobs[r, targets[r]] of a [R x S] tensor, shape [R].
Tensor nll_rows(const Tensor& logprobs, std::span<const std::size_t> targets);

Tensor select_row(const Tensor& matrix, std::size_t row);
Tensor reshape(const Tensor& input, Shape shape);
Tensor transpose(const Tensor& matrix);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& input, double factor);
Tensor sum(const Tensor& input);

}  // namespace mfce
