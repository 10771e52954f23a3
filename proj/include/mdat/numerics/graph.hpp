#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mdat/numerics/param_set.hpp"
#include "mdat/numerics/tensor.hpp"

namespace mdat::numerics {

template <class Real>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; only valid while the graph lives.
template <class Real>
struct Var {
  Graph<Real>* graph = nullptr;
  std::size_t id = 0;

  const Tensor<Real>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Tape of operation records for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the tape is already a
/// topological order and backward() is a single reverse sweep.
template <class Real>
class Graph {
 public:
  /// Receives the node's own output value and its accumulated gradient.
  using BackwardFn =
      std::function<void(Graph&, const Tensor<Real>& out_value, const Tensor<Real>& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<Real> constant(Tensor<Real> value);

  /// Leaf bound to a named parameter. Requesting the same entry of the same
  /// set twice returns the same node.
  Var<Real> parameter(const ParamSet<Real>& params, const std::string& name);

  /// Records a computed node. `inputs` must already be on this tape.
  Var<Real> record(const char* op, Tensor<Real> value, std::vector<std::size_t> inputs,
                   BackwardFn backward);

  const Tensor<Real>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const char* op(std::size_t id) const { return nodes_.at(id).op; }
  std::size_t size() const { return nodes_.size(); }

  /// Adds `g` into the gradient buffer of node `id` (no-op for constants).
  void accumulate(std::size_t id, const Tensor<Real>& g);
  Tensor<Real>& grad_buffer(std::size_t id);

  /// Reverse sweep from a scalar node. Throws on non-scalar loss or a tape
  /// that violates topological order.
  void backward(Var<Real> loss);

  /// Gradient of the last backward() with respect to every entry of
  /// `params` (the same set object the forward pass read); entries that
  /// never entered the graph get zeros.
  ParamSet<Real> gradients(const ParamSet<Real>& params) const;

  /// Gradient buffer of an arbitrary node after backward(); zeros if none.
  Tensor<Real> grad(Var<Real> v) const;

  /// Which side of the kink every relu / leaky_relu input fell on, in tape
  /// order. Two evaluations with different patterns straddle a point where
  /// the function is not differentiable.
  std::vector<bool> branch_pattern() const;

 private:
  struct Node {
    const char* op = "";
    Tensor<Real> value;
    Tensor<Real> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;  // deque: values stay put while the tape grows
  std::map<std::pair<const void*, std::string>, std::size_t> param_nodes_;
};

template <class Real>
const Tensor<Real>& Var<Real>::value() const {
  return graph->value(id);
}

// ---------------------------------------------------------------------------
// Operations. All take and return Vars on the same graph and check that every
// forward result is finite.

template <class Real>
Var<Real> matmul(Var<Real> a, Var<Real> b);

/// X * W + b, with b broadcast over rows.
template <class Real>
Var<Real> affine(Var<Real> x, Var<Real> w, Var<Real> b);

template <class Real>
Var<Real> add(Var<Real> a, Var<Real> b);

/// Elementwise product.
template <class Real>
Var<Real> mul(Var<Real> a, Var<Real> b);

template <class Real>
Var<Real> scale(Var<Real> x, Real factor);

template <class Real>
Var<Real> transpose(Var<Real> x);

template <class Real>
Var<Real> softmax_rows(Var<Real> x);

template <class Real>
Var<Real> leaky_relu(Var<Real> x, Real slope);

template <class Real>
Var<Real> relu(Var<Real> x);

template <class Real>
Var<Real> tanh(Var<Real> x);

template <class Real>
Var<Real> sigmoid(Var<Real> x);

template <class Real>
Var<Real> layer_norm(Var<Real> x, Var<Real> gamma, Var<Real> beta, Real eps);

/// Stacks rows: [a; b]. Column counts must agree.
template <class Real>
Var<Real> concat_rows(Var<Real> a, Var<Real> b);

/// Joins along the feature axis: [a, b]. Row counts must agree.
template <class Real>
Var<Real> concat_cols(Var<Real> a, Var<Real> b);

template <class Real>
Var<Real> slice_rows(Var<Real> x, std::size_t begin, std::size_t count);

template <class Real>
Var<Real> slice_cols(Var<Real> x, std::size_t begin, std::size_t count);

/// Mean over the time (row) axis: T x D -> 1 x D.
template <class Real>
Var<Real> mean_rows(Var<Real> x);

/// Sum of every entry, as a 1-element tensor.
template <class Real>
Var<Real> sum_all(Var<Real> x);

/// Inverted dropout. Identity when `train` is false or p == 0.
template <class Real>
Var<Real> dropout(Var<Real> x, Real p, bool train, std::mt19937_64* rng);

/// -log softmax(logits)[label] for a 1 x C logit row, computed with
/// log-sum-exp. The gradient with respect to the logits is
/// softmax(logits) - onehot(label).
template <class Real>
Var<Real> cross_entropy(Var<Real> logits, std::size_t label);

// ---------------------------------------------------------------------------
// Plain tensor helpers without a tape.

template <class Real>
Tensor<Real> softmax_rows(const Tensor<Real>& x);

/// -log(probs[label]) for a probability vector.
template <class Real>
Real cross_entropy_from_probs(const Tensor<Real>& probs, std::size_t label);

}  // namespace mdat::numerics
