#pragma once

// Dense real tensors with reverse-mode differentiation. Values are row-major
// doubles. A tensor is a handle; copies share the node.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace hrtfnp::ag {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

struct Node;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from(const Shape& shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false) { return from({}, {v}, requires_grad); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t i) const { return shape().at(i); }
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  const std::vector<double>& values() const;
  /// Writable values; meant for parameter updates on leaves.
  std::vector<double>& mutable_values();
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  /// Gradient buffer (zeros when none has been accumulated).
  const std::vector<double>& grad() const;
  void zero_grad();

  std::shared_ptr<Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node> node_;
};

/// Graph node. Exposed so model code can define fused operations through
/// make_op.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  /// Propagates this node's grad into the parents' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

/// Builds a result node. When recording is enabled and any input requires a
/// gradient, `backward` is attached; it receives the result node and must
/// accumulate into parents[i]->ensure_grad() for inputs that require grad.
Tensor make_op(const std::vector<Tensor>& inputs, Shape shape, std::vector<double> value,
               std::function<void(Node&)> backward);

/// Disables graph recording on this thread while alive.
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

/// Reverse pass from a scalar. Leaf gradients accumulate across calls;
/// intermediate gradients are recomputed. Throws ArgumentError for a
/// non-scalar loss.
void backward(const Tensor& loss);

/// Same values, no history.
Tensor detach(const Tensor& a);

// Element-wise binary ops. b must have a's shape, be a suffix of it
// (broadcast over leading dimensions) or hold a single element.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
/// a / b with 0 wherever b == 0 (no gradient flows there). Same shapes.
Tensor safe_div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor square(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Sum over one axis (removed from the shape).
Tensor sum_axis(const Tensor& a, std::size_t axis);

/// (..., K) x (K, N) -> (..., N).
Tensor matmul(const Tensor& a, const Tensor& b);
/// Constant (R x S) matrix applied along axis 0: (S, ...) -> (R, ...).
Tensor linear_map(std::shared_ptr<const Eigen::MatrixXd> m, const Tensor& a);

Tensor reshape(const Tensor& a, const Shape& shape);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& perm);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);

/// 1-D convolution along axis 1 with zero padding and an odd kernel.
/// x: (B, F, Cin), w: (D, K, Cin, Cout), which[b] in [0, D) selects the
/// weight set of batch row b. out[b, f, o] = sum_{k, i} w[which[b], k, i, o] x[b, f + k - K/2, i].
Tensor conv1d(const Tensor& x, const Tensor& w, std::shared_ptr<const std::vector<std::size_t>> which);

// Named-tensor archive: u32 count, then per tensor u32 name length, name,
// u32 rank, u32 dims, data (f32, or f64 in the precise variant).
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;
std::vector<std::uint8_t> encode_archive(const NamedTensors& tensors, bool precise = false);
NamedTensors decode_archive(std::span<const std::uint8_t> bytes, bool precise = false);
void save_archive(const std::string& path, const NamedTensors& tensors, bool precise = false);
NamedTensors load_archive(const std::string& path, bool precise = false);

}  // namespace hrtfnp::ag
