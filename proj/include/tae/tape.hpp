#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tae/tensor.hpp"

namespace tae {

// Handle to a node on a Tape.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

enum class OpKind : std::uint8_t {
  kInput,     // parameter leaf, gradient collected
  kConstant,  // data leaf, gradient discarded
  kMatVec,
  kAdd,
  kMul,
  kConcat,
  kSlice,
  kSigmoid,
  kTanh,
  kSoftmax,
  kMse,
  kScale,
  kWeightedSum,      // sum_k w[k] * v_k
  kStraightThrough,  // forward one-hot, backward identity into p
  kDetach,           // forward copy, backward blocked
  kSoftmaxXent,      // -log softmax(z)[label]
};

const char* op_name(OpKind k);

// Append-only computation tape. Operands always precede results, so the
// reverse insertion order is a reverse topological order. Single-owner:
// one tape per forward/backward pass, never shared across threads.
class Tape {
 public:
  Var input(Tensor value);
  Var constant(Tensor value);

  Var matvec(Var w, Var x);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var concat(std::span<const Var> parts);
  Var slice(Var x, std::size_t begin, std::size_t len);
  Var sigmoid(Var x);
  Var tanh(Var x);
  Var softmax(Var x);
  Var mse(Var a, Var b);
  Var scale(Var x, double alpha);
  Var weighted_sum(Var weights, std::span<const Var> values);
  Var straight_through(Var probs, std::size_t hard_index);
  Var detach(Var x);
  Var softmax_xent(Var logits, std::size_t label);

  const Tensor& value(Var v) const;
  // Runs reverse accumulation from a scalar root. Rejects a second call on
  // the same tape and non-scalar roots.
  void backward(Var root);
  const Tensor& grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

 private:
  struct Node {
    OpKind op;
    std::vector<std::uint32_t> args;
    std::size_t a = 0;   // slice begin / straight-through index / xent label
    std::size_t b = 0;   // slice length
    double alpha = 0.0;  // scale factor
    Tensor value;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  void check_finite(const Node& n) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool backward_done_ = false;
};

// Numerically stable softmax of a raw buffer (max-subtracted).
void softmax_inplace(std::vector<double>& v);

}  // namespace tae
