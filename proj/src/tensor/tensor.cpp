#include "nmd/tensor/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <numeric>
#include <unordered_set>

namespace nmd {

namespace {

std::atomic<std::uint64_t> g_next_id{1};
std::atomic<std::int64_t> g_live_bytes{0};
std::atomic<std::int64_t> g_peak_bytes{0};
std::atomic<std::int64_t> g_live_nodes{0};
thread_local bool t_grad_enabled = true;

void track_alloc(std::int64_t bytes) {
  const std::int64_t now = g_live_bytes.fetch_add(bytes) + bytes;
  std::int64_t peak = g_peak_bytes.load();
  while (now > peak && !g_peak_bytes.compare_exchange_weak(peak, now)) {
  }
}

std::int64_t payload_bytes(const std::vector<double>& v) {
  return static_cast<std::int64_t>(v.size() * sizeof(double));
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace detail {

Node::Node(Shape s, std::vector<double> v, bool rg)
    : shape(std::move(s)), value(std::move(v)), requires_grad(rg), id(g_next_id.fetch_add(1)) {
  if (numel(shape) != value.size()) {
    throw TensorError("tensor shape " + shape_str(shape) + " does not match " +
                      std::to_string(value.size()) + " values");
  }
  g_live_nodes.fetch_add(1);
  track_alloc(payload_bytes(value));
}

Node::~Node() {
  g_live_nodes.fetch_sub(1);
  g_live_bytes.fetch_sub(payload_bytes(value) + payload_bytes(grad));
}

void Node::ensure_grad() {
  if (grad.size() != value.size()) {
    track_alloc(payload_bytes(value) - payload_bytes(grad));
    grad.assign(value.size(), 0.0);
  }
}

}  // namespace detail

Tensor::Tensor() = default;

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return Tensor(std::make_shared<detail::Node>(std::move(shape), std::move(values), false));
}

Tensor Tensor::scalar(double value) { return constant({}, {value}); }

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = nmd::numel(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  auto node = std::make_shared<detail::Node>(std::move(shape), std::move(values), true);
  node->ensure_grad();
  return Tensor(std::move(node));
}

Tensor Tensor::from_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                       std::function<void(detail::Node&)> backward_fn) {
  bool needs = false;
  if (t_grad_enabled) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  auto node = std::make_shared<detail::Node>(std::move(shape), std::move(values), needs);
  if (needs) {
    node->parents.reserve(inputs.size());
    for (auto& in : inputs) node->parents.push_back(in.node_);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const {
  if (!node_) throw TensorError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw TensorError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->value.size() : 0; }

std::span<const double> Tensor::values() const {
  if (!node_) throw TensorError("use of undefined tensor");
  return node_->value;
}

std::span<double> Tensor::mutable_values() {
  if (!node_) throw TensorError("use of undefined tensor");
  return node_->value;
}

double Tensor::value(std::size_t flat_index) const { return values()[flat_index]; }

double Tensor::item() const {
  if (numel() != 1) throw TensorError("item() on non-scalar tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

std::span<const double> Tensor::grad() const {
  if (!node_) throw TensorError("use of undefined tensor");
  return node_->grad;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::has_grad() const { return node_ && node_->grad_ready; }

void Tensor::zero_grad() {
  if (!node_) return;
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  node_->grad_ready = false;
}

std::uint64_t Tensor::id() const { return node_ ? node_->id : 0; }
bool Tensor::is_leaf() const { return node_ && !node_->backward_fn; }

Tensor Tensor::detach() const { return constant(shape(), std::vector<double>(values().begin(), values().end())); }

namespace {

std::vector<detail::Node*> topo_order(detail::Node* root) {
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  // Iterative post-order DFS; rollouts produce graphs far deeper than the
  // native stack tolerates.
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

void backward(const Tensor& root, std::span<const double> seed) {
  if (!root.defined()) throw TensorError("backward on undefined tensor");
  if (seed.size() != root.numel()) {
    throw TensorError("backward seed has " + std::to_string(seed.size()) + " entries for tensor " +
                      shape_str(root.shape()));
  }
  detail::Node* r = root.node().get();
  if (!r->requires_grad) return;
  auto order = topo_order(r);
  for (auto* n : order) {
    const bool leaf = !n->backward_fn;
    if (leaf) {
      n->ensure_grad();
    } else {
      n->ensure_grad();
      std::fill(n->grad.begin(), n->grad.end(), 0.0);
    }
  }
  for (std::size_t i = 0; i < seed.size(); ++i) r->grad[i] += seed[i];
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward_fn) {
      n->backward_fn(*n);
    } else {
      n->grad_ready = true;
    }
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw TensorError("backward requires a scalar loss, got shape " +
                      (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  const double one = 1.0;
  backward(loss, std::span<const double>(&one, 1));
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

MemoryStats memory_stats() { return {g_live_bytes.load(), g_peak_bytes.load(), g_live_nodes.load()}; }

void reset_peak_memory() { g_peak_bytes.store(g_live_bytes.load()); }

}  // namespace nmd
