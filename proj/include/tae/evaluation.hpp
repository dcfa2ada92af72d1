#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tae/corpus.hpp"
#include "tae/tensor.hpp"
#include "tae/tree.hpp"

namespace tae {

using SpanSet = std::set<std::pair<int, int>>;

struct StructureScore {
  double micro_precision = 0.0;  // percentage
  std::size_t matched = 0;
  std::size_t predicted = 0;

  struct DocCount {
    std::string doc_id;
    std::size_t matched = 0;
    std::size_t predicted = 0;
  };
  std::vector<DocCount> per_doc;      // doc_id order
  std::vector<std::string> errors;    // documents excluded (missing gold, leaf mismatch)
};

// 100 * sum |spans(pred) ∩ spans(gold)| / sum |spans(pred)| over documents.
// Mismatched or missing gold excludes the document and reports it.
StructureScore micro_precision(const std::map<std::string, BinaryTree>& pred,
                               const std::map<std::string, BinaryTree>& gold,
                               bool include_root = true);

enum class BaselineKind { kLeft, kRight, kHierLeft, kHierRight };

// Parses "left", "right", "hier-left", "hier-right".
BaselineKind baseline_kind_from_string(const std::string& name);
const char* baseline_kind_name(BaselineKind kind);

// Deterministic branching baselines. Left/right ignore sentence boundaries;
// the hierarchical variants branch within each sentence and then over
// sentence roots the same way.
BinaryTree baseline_tree(BaselineKind kind, const std::vector<int>& sentence_sizes);

// Probability that a contiguous leaf span of the given length is a
// constituent of a uniformly random binary tree with n leaves. Depends only
// on the length: (trees inside the span) x (trees around the contracted
// span) / (all trees), a ratio of Catalan numbers evaluated in log space.
double span_probability_random_tree(int span_len, int n_leaves);

// Expected micro-precision of uniformly random binary document trees
// against the given gold treebank.
double expected_random_micro_precision(const std::map<std::string, BinaryTree>& gold,
                                       bool include_root = true);

struct ProbeConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 20;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

// Single affine layer from a document encoding to 5 class scores.
struct ProbeModel {
  Tensor W;  // 5 x H
  Tensor b;  // 5
};

// Softmax cross-entropy over frozen encodings; labels in 1..5.
ProbeModel probe_train(const std::vector<Tensor>& encodings, const std::vector<int>& labels,
                       const ProbeConfig& cfg);

// Argmax class (ties toward the lowest class); returns 1..5.
int probe_predict(const ProbeModel& model, const Tensor& encoding);

// Fraction of correct argmax predictions.
double probe_eval(const ProbeModel& model, const std::vector<Tensor>& encodings,
                  const std::vector<int>& labels);

// Most frequent label (ties toward the lowest class) and its frequency.
int majority_class(const std::vector<int>& labels);
double majority_accuracy(const std::vector<int>& labels);

struct Neighbor {
  std::string doc_id;
  double similarity = 0.0;
};

struct RetrievalResult {
  std::vector<Neighbor> most_similar;    // descending similarity, ties by doc_id
  std::vector<Neighbor> most_different;  // ascending similarity, ties by doc_id
  std::vector<std::string> warnings;     // zero-norm encodings excluded
};

// Cosine similarity of every other document to the query.
RetrievalResult nearest_documents(const std::string& query_id,
                                  const std::map<std::string, Tensor>& encodings, std::size_t k);

}  // namespace tae
