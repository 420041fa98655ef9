#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nmd {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class TensorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// One vertex of the define-by-run differentiation graph. Result nodes own
// their inputs through `parents`; inputs never point at results, so a graph
// is released as soon as the last handle to its root goes away.
struct Node {
  Node(Shape shape, std::vector<double> value, bool requires_grad);
  ~Node();
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  void ensure_grad();

  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool grad_ready = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;
};

}  // namespace detail

/// Dense row-major float64 array taking part in reverse-mode differentiation.
///
/// Copies are shallow: two handles to the same node see the same values and
/// gradient. Leaves created with `parameter` accumulate gradient across
/// backward passes until `zero_grad`; constants never do.
class Tensor {
 public:
  Tensor();

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  static Tensor zeros(Shape shape);
  static Tensor parameter(Shape shape, std::vector<double> values);

  // Builds an interior node. When gradient recording is disabled or no input
  // requires grad, the result is a constant and `backward_fn` is dropped.
  static Tensor from_op(Shape shape, std::vector<double> values,
                        std::vector<Tensor> inputs,
                        std::function<void(detail::Node&)> backward_fn);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  // Direct write access; only meaningful for leaves (optimizer updates,
  // loading checkpoints). Writing into an interior node does not propagate.
  std::span<double> mutable_values();
  double value(std::size_t flat_index) const;
  double item() const;

  // Gradient buffer; an empty span when no backward pass reached this node.
  std::span<const double> grad() const;
  bool requires_grad() const;
  bool has_grad() const;
  void zero_grad();

  std::uint64_t id() const;
  bool is_leaf() const;

  // Constant copy of the current values, detached from the graph.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Reverse-mode pass from a scalar loss; every reachable leaf that requires
/// grad receives d(loss)/d(leaf), accumulated into its existing buffer.
void backward(const Tensor& loss);

/// Vector-Jacobian product: seeds `root` with `seed` (same element count)
/// instead of 1.
void backward(const Tensor& root, std::span<const double> seed);

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

struct MemoryStats {
  std::int64_t live_bytes = 0;
  std::int64_t peak_bytes = 0;
  std::int64_t live_nodes = 0;
};

// Process-wide accounting of node payload bytes (values and grads).
MemoryStats memory_stats();
void reset_peak_memory();

}  // namespace nmd
