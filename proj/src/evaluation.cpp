#include "tae/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "tae/rng.hpp"
#include "tae/tape.hpp"

namespace tae {

StructureScore micro_precision(const std::map<std::string, BinaryTree>& pred,
                               const std::map<std::string, BinaryTree>& gold,
                               bool include_root) {
  StructureScore score;
  for (const auto& [doc_id, tree] : pred) {
    auto g = gold.find(doc_id);
    if (g == gold.end()) {
      score.errors.push_back(doc_id + ": no gold tree");
      continue;
    }
    if (tree.leaf_count() != g->second.leaf_count()) {
      score.errors.push_back(doc_id + ": leaf count mismatch (predicted " +
                             std::to_string(tree.leaf_count()) + ", gold " +
                             std::to_string(g->second.leaf_count()) + ")");
      continue;
    }
    SpanSet ps = tree_spans(tree, include_root);
    SpanSet gs = tree_spans(g->second, include_root);
    StructureScore::DocCount dc;
    dc.doc_id = doc_id;
    dc.predicted = ps.size();
    for (const auto& span : ps)
      if (gs.count(span)) ++dc.matched;
    score.matched += dc.matched;
    score.predicted += dc.predicted;
    score.per_doc.push_back(std::move(dc));
  }
  score.micro_precision =
      score.predicted == 0
          ? 0.0
          : 100.0 * static_cast<double>(score.matched) / static_cast<double>(score.predicted);
  return score;
}

BaselineKind baseline_kind_from_string(const std::string& name) {
  if (name == "left") return BaselineKind::kLeft;
  if (name == "right") return BaselineKind::kRight;
  if (name == "hier-left") return BaselineKind::kHierLeft;
  if (name == "hier-right") return BaselineKind::kHierRight;
  throw std::invalid_argument("unknown baseline kind \"" + name +
                              "\" (expected left, right, hier-left, hier-right)");
}

const char* baseline_kind_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kLeft: return "left";
    case BaselineKind::kRight: return "right";
    case BaselineKind::kHierLeft: return "hier-left";
    case BaselineKind::kHierRight: return "hier-right";
  }
  return "?";
}

namespace {

int chain(BinaryTree& tree, const std::vector<int>& nodes, bool left_branching) {
  int acc;
  if (left_branching) {
    acc = nodes.front();
    for (std::size_t i = 1; i < nodes.size(); ++i) acc = tree.add_internal(acc, nodes[i]);
  } else {
    acc = nodes.back();
    for (std::size_t i = nodes.size() - 1; i-- > 0;) acc = tree.add_internal(nodes[i], acc);
  }
  return acc;
}

}  // namespace

BinaryTree baseline_tree(BaselineKind kind, const std::vector<int>& sentence_sizes) {
  if (sentence_sizes.empty()) throw std::invalid_argument("baseline_tree needs sentences");
  int total = 0;
  for (int n : sentence_sizes) {
    if (n <= 0) throw std::invalid_argument("sentence sizes must be positive");
    total += n;
  }
  const bool left = kind == BaselineKind::kLeft || kind == BaselineKind::kHierLeft;
  const bool hier = kind == BaselineKind::kHierLeft || kind == BaselineKind::kHierRight;

  BinaryTree tree;
  if (!hier) {
    std::vector<int> leaves;
    for (int i = 0; i < total; ++i) leaves.push_back(tree.add_leaf(i));
    tree.root = chain(tree, leaves, left);
    return tree;
  }
  std::vector<int> roots;
  int offset = 0;
  for (int n : sentence_sizes) {
    std::vector<int> leaves;
    for (int i = 0; i < n; ++i) leaves.push_back(tree.add_leaf(offset + i));
    roots.push_back(chain(tree, leaves, left));
    offset += n;
  }
  tree.root = chain(tree, roots, left);
  return tree;
}

namespace {

double log_catalan(int m) {
  // Cat(m) = (2m)! / ((m+1)! m!)
  return std::lgamma(2.0 * m + 1.0) - std::lgamma(m + 2.0) - std::lgamma(m + 1.0);
}

}  // namespace

double span_probability_random_tree(int span_len, int n_leaves) {
  if (span_len < 1 || n_leaves < 1 || span_len > n_leaves)
    throw std::invalid_argument("span length must lie in [1, n]");
  if (span_len == 1) return 1.0;  // every leaf is trivially a constituent
  return std::exp(log_catalan(span_len - 1) + log_catalan(n_leaves - span_len) -
                  log_catalan(n_leaves - 1));
}

double expected_random_micro_precision(const std::map<std::string, BinaryTree>& gold,
                                       bool include_root) {
  double expected_matches = 0.0;
  std::size_t predicted = 0;
  for (const auto& [doc_id, tree] : gold) {
    const int n = tree.leaf_count();
    if (n < 2) continue;
    // A random prediction has n-1 spans, one fewer with the root dropped.
    predicted += static_cast<std::size_t>(include_root ? n - 1 : n - 2);
    for (const auto& [lo, hi] : tree_spans(tree, include_root))
      expected_matches += span_probability_random_tree(hi - lo + 1, n);
  }
  return predicted == 0 ? 0.0 : 100.0 * expected_matches / static_cast<double>(predicted);
}

namespace {

void check_probe_data(const std::vector<Tensor>& encodings, const std::vector<int>& labels) {
  if (encodings.empty()) throw std::invalid_argument("probe needs at least one encoding");
  if (encodings.size() != labels.size())
    throw std::invalid_argument("probe encoding/label count mismatch");
  for (int label : labels)
    if (label < 1 || label > 5)
      throw std::invalid_argument("probe label out of range 1..5: " + std::to_string(label));
  for (const Tensor& e : encodings)
    if (e.shape != encodings.front().shape)
      throw std::invalid_argument("probe encodings must share one dimension");
}

}  // namespace

ProbeModel probe_train(const std::vector<Tensor>& encodings, const std::vector<int>& labels,
                       const ProbeConfig& cfg) {
  check_probe_data(encodings, labels);
  const std::size_t H = encodings.front().size();

  ProbeModel model;
  model.W = Tensor::zeros({5, H});
  model.b = Tensor::zeros({5});
  SplitMix64 rng(cfg.seed);
  const double r = 1.0 / std::sqrt(static_cast<double>(H));
  for (double& x : model.W.data) x = rng.uniform(-r, r);

  Tensor mW = Tensor::zeros({5, H}), vW = Tensor::zeros({5, H});
  Tensor mb = Tensor::zeros({5}), vb = Tensor::zeros({5});
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t begin = 0; begin < encodings.size(); begin += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, encodings.size() - begin);
      Tape tape;
      Var W = tape.input(model.W);
      Var b = tape.input(model.b);
      Var total;
      for (std::size_t k = 0; k < count; ++k) {
        Var x = tape.constant(encodings[begin + k]);
        Var logits = tape.add(tape.matvec(W, x), b);
        Var loss = tape.softmax_xent(logits, static_cast<std::size_t>(labels[begin + k] - 1));
        total = total.valid() ? tape.add(total, loss) : loss;
      }
      total = tape.scale(total, 1.0 / static_cast<double>(count));
      tape.backward(total);

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
      auto adam = [&](Tensor& value, Tensor& m, Tensor& v, const Tensor& g) {
        for (std::size_t i = 0; i < value.size(); ++i) {
          m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
          v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
          value[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
        }
      };
      adam(model.W, mW, vW, tape.grad(W));
      adam(model.b, mb, vb, tape.grad(b));
    }
  }
  return model;
}

int probe_predict(const ProbeModel& model, const Tensor& encoding) {
  if (encoding.size() != model.W.cols())
    throw std::invalid_argument("encoding dimension does not match probe");
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t cls = 0; cls < 5; ++cls) {
    double s = model.b[cls];
    for (std::size_t i = 0; i < encoding.size(); ++i) s += model.W.at(cls, i) * encoding[i];
    if (cls == 0 || s > best_score) {
      best = cls;
      best_score = s;
    }
  }
  return static_cast<int>(best) + 1;
}

double probe_eval(const ProbeModel& model, const std::vector<Tensor>& encodings,
                  const std::vector<int>& labels) {
  check_probe_data(encodings, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < encodings.size(); ++i)
    if (probe_predict(model, encodings[i]) == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(encodings.size());
}

int majority_class(const std::vector<int>& labels) {
  if (labels.empty()) throw std::invalid_argument("majority_class needs labels");
  std::array<std::size_t, 6> counts{};
  for (int label : labels) {
    if (label < 1 || label > 5)
      throw std::invalid_argument("label out of range 1..5: " + std::to_string(label));
    ++counts[static_cast<std::size_t>(label)];
  }
  int best = 1;
  for (int cls = 2; cls <= 5; ++cls)
    if (counts[static_cast<std::size_t>(cls)] > counts[static_cast<std::size_t>(best)]) best = cls;
  return best;
}

double majority_accuracy(const std::vector<int>& labels) {
  int cls = majority_class(labels);
  std::size_t n = 0;
  for (int label : labels)
    if (label == cls) ++n;
  return static_cast<double>(n) / static_cast<double>(labels.size());
}

RetrievalResult nearest_documents(const std::string& query_id,
                                  const std::map<std::string, Tensor>& encodings, std::size_t k) {
  auto q = encodings.find(query_id);
  if (q == encodings.end()) throw std::invalid_argument("query \"" + query_id + "\" not found");
  const Tensor& query = q->second;
  const double qn = query.l2_norm();
  if (qn == 0.0) throw std::invalid_argument("query \"" + query_id + "\" has a zero-norm encoding");

  RetrievalResult result;
  std::vector<Neighbor> all;
  for (const auto& [doc_id, enc] : encodings) {
    if (doc_id == query_id) continue;
    if (enc.size() != query.size())
      throw std::invalid_argument("encoding dimension mismatch at \"" + doc_id + "\"");
    const double norm = enc.l2_norm();
    if (norm == 0.0) {
      result.warnings.push_back(doc_id + ": zero-norm encoding excluded");
      continue;
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < enc.size(); ++i) dot += enc[i] * query[i];
    all.push_back({doc_id, dot / (norm * qn)});
  }

  auto by_similar = [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.doc_id < b.doc_id;
  };
  auto by_different = [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity < b.similarity;
    return a.doc_id < b.doc_id;
  };
  k = std::min(k, all.size());
  result.most_similar = all;
  std::sort(result.most_similar.begin(), result.most_similar.end(), by_similar);
  result.most_similar.resize(k);
  result.most_different = all;
  std::sort(result.most_different.begin(), result.most_different.end(), by_different);
  result.most_different.resize(k);
  return result;
}

}  // namespace tae
