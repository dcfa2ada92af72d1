#include "tae/tape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tae {

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kInput: return "input";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatVec: return "matvec";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kMse: return "mse";
    case OpKind::kScale: return "scale";
    case OpKind::kWeightedSum: return "weighted_sum";
    case OpKind::kStraightThrough: return "straight_through";
    case OpKind::kDetach: return "detach";
    case OpKind::kSoftmaxXent: return "softmax_xent";
  }
  return "?";
}

void softmax_inplace(std::vector<double>& v) {
  double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

namespace {
[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  std::ostringstream os;
  os << op << ": incompatible shapes " << shape_str(a) << " and " << shape_str(b);
  throw std::invalid_argument(os.str());
}
}  // namespace

Var Tape::push(Node node) {
  check_finite(node);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw std::logic_error("invalid tape handle");
  return nodes_[v.id];
}

void Tape::check_finite(const Node& n) const {
  if (!n.value.all_finite()) {
    std::ostringstream os;
    os << "non-finite result in op '" << op_name(n.op) << "' with shape " << shape_str(n.value);
    throw std::runtime_error(os.str());
  }
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

Var Tape::input(Tensor value) {
  return push(Node{OpKind::kInput, {}, 0, 0, 0.0, std::move(value)});
}

Var Tape::constant(Tensor value) {
  return push(Node{OpKind::kConstant, {}, 0, 0, 0.0, std::move(value)});
}

Var Tape::matvec(Var w, Var x) {
  const Tensor& W = value(w);
  const Tensor& X = value(x);
  if (W.rank() != 2 || X.rank() != 1 || W.cols() != X.size()) shape_error("matvec", W, X);
  Tensor out = Tensor::zeros({W.rows()});
  for (std::size_t r = 0; r < W.rows(); ++r) {
    const double* row = &W.data[r * W.cols()];
    double s = 0.0;
    for (std::size_t c = 0; c < W.cols(); ++c) s += row[c] * X.data[c];
    out.data[r] = s;
  }
  return push(Node{OpKind::kMatVec, {w.id, x.id}, 0, 0, 0.0, std::move(out)});
}

Var Tape::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B)) shape_error("add", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
  return push(Node{OpKind::kAdd, {a.id, b.id}, 0, 0, 0.0, std::move(out)});
}

Var Tape::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B)) shape_error("mul", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
  return push(Node{OpKind::kMul, {a.id, b.id}, 0, 0, 0.0, std::move(out)});
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  std::size_t total = 0;
  for (Var p : parts) {
    if (value(p).rank() != 1) throw std::invalid_argument("concat: rank-1 operands required");
    total += value(p).size();
  }
  Tensor out = Tensor::zeros({total});
  std::size_t off = 0;
  Node n{OpKind::kConcat, {}, 0, 0, 0.0, Tensor{}};
  for (Var p : parts) {
    const Tensor& t = value(p);
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + off);
    off += t.size();
    n.args.push_back(p.id);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::slice(Var x, std::size_t begin, std::size_t len) {
  const Tensor& X = value(x);
  if (X.rank() != 1 || begin + len > X.size() || len == 0) {
    std::ostringstream os;
    os << "slice: [" << begin << "," << begin + len << ") out of range for " << shape_str(X);
    throw std::invalid_argument(os.str());
  }
  Tensor out = Tensor::zeros({len});
  std::copy(X.data.begin() + begin, X.data.begin() + begin + len, out.data.begin());
  return push(Node{OpKind::kSlice, {x.id}, begin, len, 0.0, std::move(out)});
}

Var Tape::sigmoid(Var x) {
  Tensor out = value(x);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return push(Node{OpKind::kSigmoid, {x.id}, 0, 0, 0.0, std::move(out)});
}

Var Tape::tanh(Var x) {
  Tensor out = value(x);
  for (double& v : out.data) v = std::tanh(v);
  return push(Node{OpKind::kTanh, {x.id}, 0, 0, 0.0, std::move(out)});
}

Var Tape::softmax(Var x) {
  Tensor out = value(x);
  if (out.rank() != 1) throw std::invalid_argument("softmax: rank-1 operand required");
  softmax_inplace(out.data);
  return push(Node{OpKind::kSoftmax, {x.id}, 0, 0, 0.0, std::move(out)});
}

Var Tape::mse(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B)) shape_error("mse", A, B);
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    double d = A.data[i] - B.data[i];
    s += d * d;
  }
  s /= static_cast<double>(A.size());
  return push(Node{OpKind::kMse, {a.id, b.id}, 0, 0, 0.0, Tensor::scalar(s)});
}

Var Tape::scale(Var x, double alpha) {
  Tensor out = value(x);
  for (double& v : out.data) v *= alpha;
  return push(Node{OpKind::kScale, {x.id}, 0, 0, alpha, std::move(out)});
}

Var Tape::weighted_sum(Var weights, std::span<const Var> values) {
  const Tensor& W = value(weights);
  if (W.rank() != 1 || W.size() != values.size())
    throw std::invalid_argument("weighted_sum: weight count does not match operand count");
  const Tensor& first = value(values[0]);
  Tensor out = Tensor::zeros(first.shape);
  Node n{OpKind::kWeightedSum, {weights.id}, 0, 0, 0.0, Tensor{}};
  for (std::size_t k = 0; k < values.size(); ++k) {
    const Tensor& v = value(values[k]);
    if (!v.same_shape(first)) shape_error("weighted_sum", first, v);
    for (std::size_t i = 0; i < v.size(); ++i) out.data[i] += W.data[k] * v.data[i];
    n.args.push_back(values[k].id);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::straight_through(Var probs, std::size_t hard_index) {
  const Tensor& P = value(probs);
  if (P.rank() != 1 || hard_index >= P.size())
    throw std::invalid_argument("straight_through: index out of range");
  Tensor out = Tensor::zeros(P.shape);
  out.data[hard_index] = 1.0;
  return push(Node{OpKind::kStraightThrough, {probs.id}, hard_index, 0, 0.0, std::move(out)});
}

Var Tape::detach(Var x) {
  return push(Node{OpKind::kDetach, {x.id}, 0, 0, 0.0, value(x)});
}

Var Tape::softmax_xent(Var logits, std::size_t label) {
  const Tensor& Z = value(logits);
  if (Z.rank() != 1 || label >= Z.size())
    throw std::invalid_argument("softmax_xent: label out of range");
  std::vector<double> p = Z.data;
  softmax_inplace(p);
  double loss = -std::log(p[label]);
  return push(Node{OpKind::kSoftmaxXent, {logits.id}, label, 0, 0.0, Tensor::scalar(loss)});
}

void Tape::backward(Var root) {
  if (backward_done_) throw std::logic_error("backward already run on this tape");
  const Tensor& r = value(root);
  if (!r.is_scalar()) throw std::invalid_argument("backward: root must be scalar, got " + shape_str(r));
  backward_done_ = true;

  grads_.clear();
  grads_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) grads_[i] = Tensor::zeros(nodes_[i].value.shape);
  grads_[root.id].data[0] = 1.0;

  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    const Node& n = nodes_[idx];
    const Tensor& gy = grads_[idx];
    switch (n.op) {
      case OpKind::kInput:
      case OpKind::kConstant:
      case OpKind::kDetach:
        break;
      case OpKind::kMatVec: {
        Tensor& gw = grads_[n.args[0]];
        Tensor& gx = grads_[n.args[1]];
        const Tensor& W = nodes_[n.args[0]].value;
        const Tensor& X = nodes_[n.args[1]].value;
        for (std::size_t r2 = 0; r2 < W.rows(); ++r2) {
          double g = gy.data[r2];
          if (g == 0.0) continue;
          double* gwrow = &gw.data[r2 * W.cols()];
          const double* wrow = &W.data[r2 * W.cols()];
          for (std::size_t c = 0; c < W.cols(); ++c) {
            gwrow[c] += g * X.data[c];
            gx.data[c] += g * wrow[c];
          }
        }
        break;
      }
      case OpKind::kAdd: {
        Tensor& ga = grads_[n.args[0]];
        Tensor& gb = grads_[n.args[1]];
        for (std::size_t i = 0; i < gy.size(); ++i) {
          ga.data[i] += gy.data[i];
          gb.data[i] += gy.data[i];
        }
        break;
      }
      case OpKind::kMul: {
        Tensor& ga = grads_[n.args[0]];
        Tensor& gb = grads_[n.args[1]];
        const Tensor& A = nodes_[n.args[0]].value;
        const Tensor& B = nodes_[n.args[1]].value;
        for (std::size_t i = 0; i < gy.size(); ++i) {
          ga.data[i] += gy.data[i] * B.data[i];
          gb.data[i] += gy.data[i] * A.data[i];
        }
        break;
      }
      case OpKind::kConcat: {
        std::size_t off = 0;
        for (std::uint32_t arg : n.args) {
          Tensor& g = grads_[arg];
          for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += gy.data[off + i];
          off += g.size();
        }
        break;
      }
      case OpKind::kSlice: {
        Tensor& g = grads_[n.args[0]];
        for (std::size_t i = 0; i < n.b; ++i) g.data[n.a + i] += gy.data[i];
        break;
      }
      case OpKind::kSigmoid: {
        Tensor& g = grads_[n.args[0]];
        for (std::size_t i = 0; i < gy.size(); ++i) {
          double y = n.value.data[i];
          g.data[i] += gy.data[i] * y * (1.0 - y);
        }
        break;
      }
      case OpKind::kTanh: {
        Tensor& g = grads_[n.args[0]];
        for (std::size_t i = 0; i < gy.size(); ++i) {
          double y = n.value.data[i];
          g.data[i] += gy.data[i] * (1.0 - y * y);
        }
        break;
      }
      case OpKind::kSoftmax: {
        Tensor& g = grads_[n.args[0]];
        double dot = 0.0;
        for (std::size_t i = 0; i < gy.size(); ++i) dot += gy.data[i] * n.value.data[i];
        for (std::size_t i = 0; i < gy.size(); ++i)
          g.data[i] += n.value.data[i] * (gy.data[i] - dot);
        break;
      }
      case OpKind::kMse: {
        Tensor& ga = grads_[n.args[0]];
        Tensor& gb = grads_[n.args[1]];
        const Tensor& A = nodes_[n.args[0]].value;
        const Tensor& B = nodes_[n.args[1]].value;
        double c = 2.0 * gy.data[0] / static_cast<double>(A.size());
        for (std::size_t i = 0; i < A.size(); ++i) {
          double d = c * (A.data[i] - B.data[i]);
          ga.data[i] += d;
          gb.data[i] -= d;
        }
        break;
      }
      case OpKind::kScale: {
        Tensor& g = grads_[n.args[0]];
        for (std::size_t i = 0; i < gy.size(); ++i) g.data[i] += n.alpha * gy.data[i];
        break;
      }
      case OpKind::kWeightedSum: {
        Tensor& gw = grads_[n.args[0]];
        const Tensor& W = nodes_[n.args[0]].value;
        for (std::size_t k = 1; k < n.args.size(); ++k) {
          const Tensor& v = nodes_[n.args[k]].value;
          Tensor& gv = grads_[n.args[k]];
          double wk = W.data[k - 1];
          double dot = 0.0;
          for (std::size_t i = 0; i < gy.size(); ++i) {
            dot += gy.data[i] * v.data[i];
            gv.data[i] += wk * gy.data[i];
          }
          gw.data[k - 1] += dot;
        }
        break;
      }
      case OpKind::kStraightThrough: {
        Tensor& g = grads_[n.args[0]];
        for (std::size_t i = 0; i < gy.size(); ++i) g.data[i] += gy.data[i];
        break;
      }
      case OpKind::kSoftmaxXent: {
        Tensor& g = grads_[n.args[0]];
        std::vector<double> p = nodes_[n.args[0]].value.data;
        softmax_inplace(p);
        double gl = gy.data[0];
        for (std::size_t i = 0; i < p.size(); ++i) g.data[i] += gl * p[i];
        g.data[n.a] -= gl;
        break;
      }
    }
  }
}

const Tensor& Tape::grad(Var v) const {
  if (!backward_done_) throw std::logic_error("grad requested before backward");
  if (!v.valid() || v.id >= grads_.size()) throw std::logic_error("invalid tape handle");
  return grads_[v.id];
}

}  // namespace tae
