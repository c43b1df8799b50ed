#ifndef PBGCN_TENSOR_HPP
#define PBGCN_TENSOR_HPP

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pbgcn/errors.hpp"

namespace pbgcn {

/// Dense row-major tensor. Precision is a template parameter: double for
/// correctness work, float available for faster training.
template <class S>
struct TensorT {
  std::vector<int> shape;
  std::vector<S> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> shape_in);
  TensorT(std::vector<int> shape_in, std::vector<S> data_in);

  static TensorT zeros(std::vector<int> shape);
  static TensorT scalar(S v);

  long long numel() const;
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape.at(i); }
  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }

  S at(std::initializer_list<int> idx) const;
  S& at(std::initializer_list<int> idx);

  void fill(S v);
  bool same_shape(const TensorT& other) const { return shape == other.shape; }
};

/// A learnable tensor with its gradient accumulator and momentum buffer.
/// `apply_decay` opts a parameter out of weight decay (edge masks and
/// aggregation weights keep their off-support / neutral entries untouched).
template <class S>
struct ParameterT {
  std::string name;
  TensorT<S> value;
  TensorT<S> grad;
  TensorT<S> velocity;
  bool apply_decay = true;
  long long grad_updates = 0;

  ParameterT() = default;
  ParameterT(std::string name_in, TensorT<S> value_in);

  void zero_grad();
};

/// Reverse-mode tape over the handful of operations the network needs.
/// Nodes are recorded in topological order; backward() replays the exact
/// reverse order. One tape per forward pass; single-threaded by design —
/// batch parallelism runs independent tapes and merges parameter gradients.
template <class S>
class TapeT {
 public:
  using NodeId = int;

  /// Leaf that never receives a gradient (inputs, fixed operators).
  NodeId constant(TensorT<S> v);
  /// Leaf bound to a parameter; backward() accumulates into its grad.
  /// Registering the same parameter twice returns the same node.
  NodeId param(ParameterT<S>& p);

  /// y = w * x (+ optional bias via add_bias). w is [R x C]; x's leading
  /// dimension must be C, remaining axes are flattened as columns.
  NodeId matmul(NodeId w, NodeId x);
  /// Adds b[c] to every column of x (leading dim C).
  NodeId add_bias(NodeId x, NodeId b);
  /// Vertex mixing: y[c,t,i,m] = sum_j op[i,j] * z[c,t,j,m].
  /// z is [C,T,V,M]; op is [V,V].
  NodeId graph_mix(NodeId z, NodeId op);
  /// Temporal convolution along axis 1 of [C,T,V,M] with kernel
  /// w [C_out, C_in, tau], zero padding floor(tau/2), output length
  /// ceil(T / stride).
  NodeId temporal_conv(NodeId x, NodeId w, int stride);

  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId relu(NodeId x);
  /// y = s[index] * x, where s is a tensor parameter (or any node).
  NodeId scale_by_entry(NodeId x, NodeId s, int index);
  /// Restrict the vertex axis of [C,T,V,M] to the given positions.
  NodeId gather_vertices(NodeId x, std::vector<int> indices);
  /// Embed [C,T,|idx|,M] back into a [C,T,V,M] tensor, zero elsewhere.
  /// Indices must be distinct.
  NodeId scatter_vertices(NodeId x, std::vector<int> indices, int num_vertices);
  /// Mean over (T, V) and a weighted mean over bodies: output [C].
  NodeId global_pool(NodeId x, std::vector<S> body_weights);
  /// Scalar loss; logits is a length-K vector. Max-subtracted softmax.
  NodeId softmax_cross_entropy(NodeId logits, int label);
  NodeId sum(NodeId x);

  const TensorT<S>& value(NodeId id) const { return nodes_.at(id).value; }
  /// Gradient buffer of a node after backward(); empty if backward has not
  /// touched it.
  const TensorT<S>& grad(NodeId id) const { return nodes_.at(id).grad; }

  /// Reverse sweep from a scalar loss. Parameter gradients are accumulated
  /// (+=) into each ParameterT::grad.
  void backward(NodeId loss);
  /// Same, but gradients go into `sink` keyed by parameter; used by the
  /// sharded trainer so threads never touch shared state.
  void backward(NodeId loss, std::unordered_map<const ParameterT<S>*, TensorT<S>>& sink);

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    TensorT<S> value;
    TensorT<S> grad;
    std::function<void(TapeT&)> pull;  // accumulate into input grads
    ParameterT<S>* parameter = nullptr;
    bool needs_grad = false;
  };

  NodeId push(TensorT<S> value, bool needs_grad, std::function<void(TapeT&)> pull);
  void run_backward(NodeId loss,
                    std::unordered_map<const ParameterT<S>*, TensorT<S>>* sink);
  TensorT<S>& grad_buf(NodeId id);

  std::vector<Node> nodes_;
  std::unordered_map<const ParameterT<S>*, NodeId> param_nodes_;
};

using Tensor = TensorT<double>;
using Parameter = ParameterT<double>;
using Tape = TapeT<double>;

extern template struct TensorT<float>;
extern template struct TensorT<double>;
extern template struct ParameterT<float>;
extern template struct ParameterT<double>;
extern template class TapeT<float>;
extern template class TapeT<double>;

}  // namespace pbgcn

#endif
