#pragma once

#include <functional>
#include <memory>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "musg/tensor.hpp"

// Reverse-mode differentiation over dense row-major matrices.
//
// Every op returns a Var that owns its value and keeps shared ownership of
// the inputs it needs for the backward pass. Calling backward() on a 1x1 Var
// walks the recorded graph in reverse topological order and accumulates
// gradients into every Var that requires them. A graph belongs to the thread
// that built it; there is no global tape.
namespace musg::ad {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads `self.grad` and accumulates into the parents that require grad.
  std::function<void(Node& self)> backward;

  Tensor<T>& grad_buffer() {
    if (!grad.same_shape(value) || grad.size() != value.size()) grad = Tensor<T>(value.rows(), value.cols());
    return grad;
  }
  Node() = default;
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;
  // Releases the ancestor chain iteratively; long chains would otherwise
  // recurse once per node.
  ~Node() {
    std::vector<std::shared_ptr<Node>> pending = std::move(parents);
    while (!pending.empty()) {
      std::shared_ptr<Node> p = std::move(pending.back());
      pending.pop_back();
      if (p.use_count() == 1) {
        for (auto& q : p->parents) pending.push_back(std::move(q));
        p->parents.clear();
      }
    }
  }

  // Gradient buffer of parent i, or nullptr when that parent is constant.
  Tensor<T>* parent_grad(std::size_t i) {
    return parents[i]->requires_grad ? &parents[i]->grad_buffer() : nullptr;
  }
};

template <typename T>
class Var {
 public:
  using BackwardFn = std::function<void(Node<T>&)>;

  Var() = default;

  static Var constant(Tensor<T> value) { return leaf(std::move(value), false); }
  static Var leaf(Tensor<T> value, bool requires_grad) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }
  // Builds an op node. The backward closure is dropped when no parent needs
  // a gradient, so constant subgraphs cost nothing on the backward pass.
  static Var make(Tensor<T> value, std::vector<Var> parents, BackwardFn backward);

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  // Empty tensor until a backward pass reaches this Var.
  const Tensor<T>& grad() const { return node_->grad; }
  Tensor<T>& grad() { return node_->grad_buffer(); }
  bool requires_grad() const { return node_->requires_grad; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  void zero_grad() { node_->grad = Tensor<T>(); }

  // Seeds d(self)/d(self) = 1; requires a 1x1 value.
  void backward() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}
  std::shared_ptr<Node<T>> node_;
};

// y = x W^T (+ b); x [n,in], W [out,in], b [1,out].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight);
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, std::type_identity_t<T> factor);
// |x|; the derivative at 0 is taken as 0.
template <typename T>
Var<T> abs(const Var<T>& x);
template <typename T>
Var<T> relu(const Var<T>& x);
template <typename T>
Var<T> sigmoid(const Var<T>& x);
// axis 1 normalizes each row, axis 0 each column.
template <typename T>
Var<T> softmax(const Var<T>& x, int axis);
// Row-wise normalization followed by gain [1,d] and bias [1,d].
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias,
                  std::type_identity_t<T> eps = T(1e-5));
// Rows of `table` selected by `indices`; indices are not differentiable.
template <typename T>
Var<T> embedding(const Var<T>& table, std::span<const int> indices);
template <typename T>
Var<T> gather_rows(const Var<T>& x, std::span<const int> indices);
template <typename T>
Var<T> concat(const std::vector<Var<T>>& xs, int axis);
// out[dst[e]] += messages[e], summed in ascending edge order. Rows with no
// incoming message stay zero.
template <typename T>
Var<T> scatter_sum(const Var<T>& messages, std::span<const int> dst, std::size_t n);
// Element-wise mean of equally shaped tensors, accumulated in list order.
template <typename T>
Var<T> mean_over(const std::vector<Var<T>>& xs);
// Row mean over each half-open [begin, end) range; empty ranges are an error.
template <typename T>
Var<T> segment_mean(const Var<T>& x, std::span<const std::pair<int, int>> ranges);
template <typename T>
Var<T> sum(const Var<T>& x);

// Mean binary cross-entropy over all logits, log-sum-exp stable.
template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, std::type_identity_t<std::span<const T>> targets);
// Mean categorical cross-entropy; logits [b,C].
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const int> class_ids);

}  // namespace musg::ad
