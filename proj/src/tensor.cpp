#include "mfce/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "mfce/error.hpp"

namespace mfce {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
};

}  // namespace detail

using detail::Node;

namespace {

thread_local bool g_grad_enabled = true;

std::span<double> grad_buffer(Node& node) {
  if (node.grad.size() != node.data.size()) node.grad.assign(node.data.size(), 0.0);
  return node.grad;
}

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_enabled) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

Tensor make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->data.size(), 0.0);
  return Tensor(std::move(node));
}

// Output of an operation. History is kept only when some input requires grad
// and recording is enabled.
Tensor make_result(Shape shape, std::vector<double> data, std::string op,
                   std::initializer_list<const Tensor*> inputs, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = std::move(op);
  if (needs_grad(inputs)) {
    node->requires_grad = true;
    for (const Tensor* t : inputs) node->parents.push_back(t->node());
    node->backward_fn = std::move(fn);
  }
  return Tensor(std::move(node));
}

void require_defined(const Tensor& t, const char* what) {
  if (!t.defined()) throw ShapeError(std::string(what) + ": undefined tensor");
}

void require_dim(const Tensor& t, std::size_t dim, const char* what) {
  require_defined(t, what);
  if (t.dim() != dim) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(dim) +
                     "-d tensor, got " + shape_to_string(t.shape()));
  }
}

std::vector<Node*> topological_order(const std::shared_ptr<Node>& root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? " x " : "") << shape[i];
  out << ']';
  return out.str();
}

// --- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("from_data: shape " + shape_to_string(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  for (std::size_t extent : shape) {
    if (extent == 0) throw ShapeError("from_data: zero extent in " + shape_to_string(shape));
  }
  return make_leaf(std::move(shape), std::move(data), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->data.size(); }
std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!is_leaf()) throw Error("set_requires_grad: only leaves can change requires_grad");
  node_->requires_grad = flag;
  if (flag) {
    grad_buffer(*node_);
  } else {
    node_->grad.clear();
  }
}

bool Tensor::is_leaf() const { return node_->parents.empty(); }
std::string_view Tensor::op_name() const { return node_->op; }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return grad_buffer(*node_); }

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_to_string(shape()));
  return node_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != dim()) throw ShapeError("at: index rank mismatch");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape()[axis]) throw ShapeError("at: index out of range");
    flat = flat * shape()[axis] + i;
    ++axis;
  }
  return node_->data[flat];
}

void Tensor::backward() const {
  require_defined(*this, "backward");
  if (numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_to_string(shape()));
  }
  if (!node_->requires_grad) return;

  std::vector<Node*> order = topological_order(node_);
  for (Node* node : order) {
    if (!node->parents.empty()) node->grad.assign(node->data.size(), 0.0);
  }
  grad_buffer(*node_)[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }
}

Tensor Tensor::detach() const {
  return make_leaf(node_->shape, node_->data, false);
}

ComputationRecord ComputationRecord::of(const Tensor& root) {
  require_defined(root, "ComputationRecord");
  ComputationRecord record;
  std::vector<Node*> order = topological_order(root.node());
  std::unordered_map<const Node*, std::size_t> position;
  for (Node* node : order) {
    Entry entry{node->op, {}, node->shape};
    for (const auto& parent : node->parents) entry.inputs.push_back(position.at(parent.get()));
    position[node] = record.entries_.size();
    record.entries_.push_back(std::move(entry));
  }
  return record;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// --- Convolution ----------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernel, int dilation_t, int stride_f,
              int pad_f) {
  require_dim(input, 3, "conv2d input");
  require_dim(kernel, 4, "conv2d kernel");
  if (dilation_t < 1 || stride_f < 1 || pad_f < 0) {
    throw ShapeError("conv2d: dilation and stride must be >= 1, padding >= 0");
  }
  const std::size_t c_in = input.size(0), t_in = input.size(1), f_in = input.size(2);
  const std::size_t c_out = kernel.size(0), k_t = kernel.size(2), k_f = kernel.size(3);
  if (kernel.size(1) != c_in) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.size(1)) +
                     " input channels, input has " + std::to_string(c_in));
  }
  const std::size_t span_t = (k_t - 1) * static_cast<std::size_t>(dilation_t) + 1;
  if (t_in < span_t) throw GeometryError(receptive_field_message(long(t_in), long(span_t)));
  const long padded_f = static_cast<long>(f_in) + 2L * pad_f;
  if (padded_f < static_cast<long>(k_f)) {
    throw ShapeError("conv2d: frequency extent " + std::to_string(f_in) +
                     " too small for kernel width " + std::to_string(k_f));
  }
  const std::size_t t_out = t_in - span_t + 1;
  const std::size_t f_out = static_cast<std::size_t>((padded_f - long(k_f)) / stride_f + 1);
  const std::size_t rows = c_in * k_t * k_f;
  const std::size_t cols = t_out * f_out;

  // Unfold the input so that each output position is one column.
  std::vector<double> col(rows * cols, 0.0);
  const auto x = input.data();
  for (std::size_t ci = 0; ci < c_in; ++ci) {
    for (std::size_t a = 0; a < k_t; ++a) {
      for (std::size_t b = 0; b < k_f; ++b) {
        double* dst = &col[((ci * k_t + a) * k_f + b) * cols];
        for (std::size_t to = 0; to < t_out; ++to) {
          const double* src = &x[(ci * t_in + to + a * dilation_t) * f_in];
          for (std::size_t fo = 0; fo < f_out; ++fo) {
            long fi = long(fo) * stride_f + long(b) - pad_f;
            if (fi >= 0 && fi < long(f_in)) dst[to * f_out + fo] = src[fi];
          }
        }
      }
    }
  }

  std::vector<double> out(c_out * cols, 0.0);
  const auto w = kernel.data();
  for (std::size_t co = 0; co < c_out; ++co) {
    double* out_row = &out[co * cols];
    for (std::size_t r = 0; r < rows; ++r) {
      const double wr = w[co * rows + r];
      const double* col_row = &col[r * cols];
      for (std::size_t j = 0; j < cols; ++j) out_row[j] += wr * col_row[j];
    }
  }

  auto backward = [=, col = std::move(col)](Node& self) {
    Node& in_node = *self.parents[0];
    Node& k_node = *self.parents[1];
    const std::vector<double>& g = self.grad;
    if (k_node.requires_grad) {
      auto dk = grad_buffer(k_node);
      for (std::size_t co = 0; co < c_out; ++co) {
        const double* g_row = &g[co * cols];
        for (std::size_t r = 0; r < rows; ++r) {
          const double* col_row = &col[r * cols];
          double acc = 0.0;
          for (std::size_t j = 0; j < cols; ++j) acc += g_row[j] * col_row[j];
          dk[co * rows + r] += acc;
        }
      }
    }
    if (in_node.requires_grad) {
      std::vector<double> dcol(rows * cols, 0.0);
      for (std::size_t co = 0; co < c_out; ++co) {
        const double* g_row = &g[co * cols];
        for (std::size_t r = 0; r < rows; ++r) {
          const double wr = k_node.data[co * rows + r];
          double* dcol_row = &dcol[r * cols];
          for (std::size_t j = 0; j < cols; ++j) dcol_row[j] += wr * g_row[j];
        }
      }
      auto dx = grad_buffer(in_node);
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        for (std::size_t a = 0; a < k_t; ++a) {
          for (std::size_t b = 0; b < k_f; ++b) {
            const double* src = &dcol[((ci * k_t + a) * k_f + b) * cols];
            for (std::size_t to = 0; to < t_out; ++to) {
              double* dst = &dx[(ci * t_in + to + a * dilation_t) * f_in];
              for (std::size_t fo = 0; fo < f_out; ++fo) {
                long fi = long(fo) * stride_f + long(b) - pad_f;
                if (fi >= 0 && fi < long(f_in)) dst[fi] += src[to * f_out + fo];
              }
            }
          }
        }
      }
    }
  };
  return make_result({c_out, t_out, f_out}, std::move(out), "conv2d", {&input, &kernel},
                     std::move(backward));
}

Tensor pointwise(const Tensor& input, const Tensor& weights, bool collapse_freq) {
  require_dim(input, 3, "pointwise input");
  require_dim(weights, 2, "pointwise weights");
  const std::size_t c_in = input.size(0), t = input.size(1), f = input.size(2);
  const std::size_t c_out = weights.size(0);
  const std::size_t fan_in = collapse_freq ? c_in * f : c_in;
  if (weights.size(1) != fan_in) {
    throw ShapeError("pointwise: weights " + shape_to_string(weights.shape()) +
                     " do not match input " + shape_to_string(input.shape()) +
                     (collapse_freq ? " (collapsing frequency)" : ""));
  }
  const auto x = input.data();
  const auto w = weights.data();

  if (collapse_freq) {
    std::vector<double> out(c_out * t, 0.0);
    for (std::size_t co = 0; co < c_out; ++co) {
      for (std::size_t ti = 0; ti < t; ++ti) {
        double acc = 0.0;
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          const double* w_row = &w[co * fan_in + ci * f];
          const double* x_row = &x[(ci * t + ti) * f];
          for (std::size_t fi = 0; fi < f; ++fi) acc += w_row[fi] * x_row[fi];
        }
        out[co * t + ti] = acc;
      }
    }
    auto backward = [=](Node& self) {
      Node& in_node = *self.parents[0];
      Node& w_node = *self.parents[1];
      const std::vector<double>& g = self.grad;
      if (w_node.requires_grad) {
        auto dw = grad_buffer(w_node);
        std::vector<double> local(c_out * fan_in, 0.0);
        for (std::size_t co = 0; co < c_out; ++co) {
          for (std::size_t ti = 0; ti < t; ++ti) {
            const double gv = g[co * t + ti];
            for (std::size_t ci = 0; ci < c_in; ++ci) {
              for (std::size_t fi = 0; fi < f; ++fi) {
                local[co * fan_in + ci * f + fi] += gv * in_node.data[(ci * t + ti) * f + fi];
              }
            }
          }
        }
        for (std::size_t i = 0; i < local.size(); ++i) dw[i] += local[i];
      }
      if (in_node.requires_grad) {
        auto dx = grad_buffer(in_node);
        for (std::size_t co = 0; co < c_out; ++co) {
          for (std::size_t ti = 0; ti < t; ++ti) {
            const double gv = g[co * t + ti];
            for (std::size_t ci = 0; ci < c_in; ++ci) {
              for (std::size_t fi = 0; fi < f; ++fi) {
                dx[(ci * t + ti) * f + fi] += gv * w_node.data[co * fan_in + ci * f + fi];
              }
            }
          }
        }
      }
    };
    return make_result({c_out, t, 1}, std::move(out), "pointwise", {&input, &weights},
                       std::move(backward));
  }

  const std::size_t plane = t * f;
  std::vector<double> out(c_out * plane, 0.0);
  for (std::size_t co = 0; co < c_out; ++co) {
    double* out_row = &out[co * plane];
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const double wv = w[co * c_in + ci];
      const double* x_row = &x[ci * plane];
      for (std::size_t j = 0; j < plane; ++j) out_row[j] += wv * x_row[j];
    }
  }
  auto backward = [=](Node& self) {
    Node& in_node = *self.parents[0];
    Node& w_node = *self.parents[1];
    const std::vector<double>& g = self.grad;
    if (w_node.requires_grad) {
      auto dw = grad_buffer(w_node);
      for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          double acc = 0.0;
          for (std::size_t j = 0; j < plane; ++j) {
            acc += g[co * plane + j] * in_node.data[ci * plane + j];
          }
          dw[co * c_in + ci] += acc;
        }
      }
    }
    if (in_node.requires_grad) {
      auto dx = grad_buffer(in_node);
      for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          const double wv = w_node.data[co * c_in + ci];
          for (std::size_t j = 0; j < plane; ++j) dx[ci * plane + j] += wv * g[co * plane + j];
        }
      }
    }
  };
  return make_result({c_out, t, f}, std::move(out), "pointwise", {&input, &weights},
                     std::move(backward));
}

Tensor add_bias(const Tensor& input, const Tensor& bias) {
  require_dim(input, 3, "add_bias input");
  require_dim(bias, 1, "add_bias bias");
  const std::size_t channels = input.size(0);
  if (bias.size(0) != channels) throw ShapeError("add_bias: bias length != channel count");
  const std::size_t plane = input.size(1) * input.size(2);
  std::vector<double> out(input.data().begin(), input.data().end());
  for (std::size_t c = 0; c < channels; ++c) {
    const double b = bias.data()[c];
    for (std::size_t j = 0; j < plane; ++j) out[c * plane + j] += b;
  }
  auto backward = [=](Node& self) {
    Node& in_node = *self.parents[0];
    Node& b_node = *self.parents[1];
    if (in_node.requires_grad) {
      auto dx = grad_buffer(in_node);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i];
    }
    if (b_node.requires_grad) {
      auto db = grad_buffer(b_node);
      for (std::size_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < plane; ++j) acc += self.grad[c * plane + j];
        db[c] += acc;
      }
    }
  };
  return make_result(input.shape(), std::move(out), "add_bias", {&input, &bias},
                     std::move(backward));
}

// --- Elementwise and reductions ------------------------------------------

Tensor relu(const Tensor& input) {
  require_defined(input, "relu");
  std::vector<double> out(input.data().begin(), input.data().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  auto backward = [](Node& self) {
    Node& in_node = *self.parents[0];
    auto dx = grad_buffer(in_node);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (in_node.data[i] > 0.0) dx[i] += self.grad[i];
    }
  };
  return make_result(input.shape(), std::move(out), "relu", {&input}, std::move(backward));
}

Tensor max_pool_freq(const Tensor& input, int size) {
  require_dim(input, 3, "max_pool_freq");
  if (size < 1) throw ShapeError("max_pool_freq: pool size must be >= 1");
  const std::size_t c = input.size(0), t = input.size(1), f = input.size(2);
  const std::size_t pool = static_cast<std::size_t>(size);
  if (f < pool) throw ShapeError("max_pool_freq: frequency extent smaller than pool size");
  const std::size_t f_out = f / pool;
  std::vector<double> out(c * t * f_out);
  std::vector<std::size_t> argmax(out.size());
  const auto x = input.data();
  for (std::size_t row = 0; row < c * t; ++row) {
    for (std::size_t fo = 0; fo < f_out; ++fo) {
      std::size_t best = row * f + fo * pool;
      for (std::size_t k = 1; k < pool; ++k) {
        if (x[row * f + fo * pool + k] > x[best]) best = row * f + fo * pool + k;
      }
      out[row * f_out + fo] = x[best];
      argmax[row * f_out + fo] = best;
    }
  }
  auto backward = [argmax = std::move(argmax)](Node& self) {
    auto dx = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += self.grad[i];
  };
  return make_result({c, t, f_out}, std::move(out), "max_pool_freq", {&input},
                     std::move(backward));
}

Tensor log_softmax(const Tensor& input, std::size_t axis) {
  require_defined(input, "log_softmax");
  if (axis >= input.dim()) throw ShapeError("log_softmax: axis out of range");
  const Shape& shape = input.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t n = shape[axis];
  const auto x = input.data();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * n * inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, x[base + k * inner]);
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += std::exp(x[base + k * inner] - mx);
      const double lse = mx + std::log(s);
      for (std::size_t k = 0; k < n; ++k) out[base + k * inner] = x[base + k * inner] - lse;
    }
  }
  auto backward = [=](Node& self) {
    auto dx = grad_buffer(*self.parents[0]);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * n * inner + i;
        double gsum = 0.0;
        for (std::size_t k = 0; k < n; ++k) gsum += self.grad[base + k * inner];
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t idx = base + k * inner;
          dx[idx] += self.grad[idx] - std::exp(self.data[idx]) * gsum;
        }
      }
    }
  };
  return make_result(shape, std::move(out), "log_softmax", {&input}, std::move(backward));
}

Tensor nll(const Tensor& logprobs, std::size_t target) {
  require_dim(logprobs, 1, "nll");
  if (target >= logprobs.size(0)) {
    throw LabelError("nll: target " + std::to_string(target) + " outside [0, " +
                     std::to_string(logprobs.size(0)) + ")");
  }
  auto backward = [target](Node& self) {
    grad_buffer(*self.parents[0])[target] -= self.grad[0];
  };
  return make_result({1}, {-logprobs.data()[target]}, "nll", {&logprobs}, std::move(backward));
}

Tensor nll_rows(const Tensor& logprobs, std::span<const std::size_t> targets) {
  require_dim(logprobs, 2, "nll_rows");
  const std::size_t rows = logprobs.size(0), classes = logprobs.size(1);
  if (targets.size() != rows) {
    throw ShapeError("nll_rows: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(rows) + " rows");
  }
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= classes) {
      throw LabelError("nll_rows: target " + std::to_string(targets[r]) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
    out[r] = -logprobs.data()[r * classes + targets[r]];
  }
  std::vector<std::size_t> idx(targets.begin(), targets.end());
  auto backward = [=, idx = std::move(idx)](Node& self) {
    auto dx = grad_buffer(*self.parents[0]);
    for (std::size_t r = 0; r < rows; ++r) dx[r * classes + idx[r]] -= self.grad[r];
  };
  return make_result({rows}, std::move(out), "nll_rows", {&logprobs}, std::move(backward));
}

Tensor select_row(const Tensor& matrix, std::size_t row) {
  require_dim(matrix, 2, "select_row");
  if (row >= matrix.size(0)) throw ShapeError("select_row: row out of range");
  const std::size_t width = matrix.size(1);
  auto first = matrix.data().begin() + static_cast<std::ptrdiff_t>(row * width);
  std::vector<double> out(first, first + static_cast<std::ptrdiff_t>(width));
  auto backward = [=](Node& self) {
    auto dx = grad_buffer(*self.parents[0]);
    for (std::size_t j = 0; j < width; ++j) dx[row * width + j] += self.grad[j];
  };
  return make_result({width}, std::move(out), "select_row", {&matrix}, std::move(backward));
}

Tensor reshape(const Tensor& input, Shape shape) {
  require_defined(input, "reshape");
  if (shape_numel(shape) != input.numel()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(input.shape()) + " as " +
                     shape_to_string(shape));
  }
  std::vector<double> out(input.data().begin(), input.data().end());
  auto backward = [](Node& self) {
    auto dx = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i];
  };
  return make_result(std::move(shape), std::move(out), "reshape", {&input}, std::move(backward));
}

Tensor transpose(const Tensor& matrix) {
  require_dim(matrix, 2, "transpose");
  const std::size_t rows = matrix.size(0), cols = matrix.size(1);
  std::vector<double> out(rows * cols);
  const auto x = matrix.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = x[r * cols + c];
  }
  auto backward = [=](Node& self) {
    auto dx = grad_buffer(*self.parents[0]);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) dx[r * cols + c] += self.grad[c * rows + r];
    }
  };
  return make_result({cols, rows}, std::move(out), "transpose", {&matrix}, std::move(backward));
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  if (a.shape() != b.shape()) throw ShapeError("add: shape mismatch");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto backward = [](Node& self) {
    for (auto& parent : self.parents) {
      if (!parent->requires_grad) continue;
      auto dx = grad_buffer(*parent);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i];
    }
  };
  return make_result(a.shape(), std::move(out), "add", {&a, &b}, std::move(backward));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  if (a.shape() != b.shape()) throw ShapeError("mul: shape mismatch");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto backward = [](Node& self) {
    Node& lhs = *self.parents[0];
    Node& rhs = *self.parents[1];
    if (lhs.requires_grad) {
      auto da = grad_buffer(lhs);
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += self.grad[i] * rhs.data[i];
    }
    if (rhs.requires_grad) {
      auto db = grad_buffer(rhs);
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += self.grad[i] * lhs.data[i];
    }
  };
  return make_result(a.shape(), std::move(out), "mul", {&a, &b}, std::move(backward));
}

Tensor scale(const Tensor& input, double factor) {
  require_defined(input, "scale");
  std::vector<double> out(input.data().begin(), input.data().end());
  for (double& v : out) v *= factor;
  auto backward = [factor](Node& self) {
    auto dx = grad_buffer(*self.parents[0]);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * factor;
  };
  return make_result(input.shape(), std::move(out), "scale", {&input}, std::move(backward));
}

Tensor sum(const Tensor& input) {
  require_defined(input, "sum");
  double total = 0.0;
  for (double v : input.data()) total += v;
  auto backward = [](Node& self) {
    auto dx = grad_buffer(*self.parents[0]);
    for (double& v : dx) v += self.grad[0];
  };
  return make_result({1}, {total}, "sum", {&input}, std::move(backward));
}

}  // namespace mfce
