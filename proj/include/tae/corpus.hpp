#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tae/tensor.hpp"
#include "tae/tree.hpp"

namespace tae {

// A pre-segmented document: ordered sentences of EDU strings, optional
// 5-class label. EDUs are whitespace-tokenized text.
struct Document {
  std::string doc_id;
  std::vector<std::vector<std::string>> sentences;
  std::optional<int> label;  // 1..5

  int edu_count() const;
  std::vector<int> sentence_sizes() const;
};

struct CorpusLimits {
  std::size_t max_edus = 150;
  std::size_t max_words = 50;
};

struct LoadStats {
  std::size_t loaded = 0;
  std::size_t skipped_empty = 0;
};

std::vector<std::string> tokenize(const std::string& text);

// One JSON record per line: {"doc_id": str, "sentences": [[str,...],...],
// "label": int|null}. Truncates to the caps, skips empty documents with a
// warning count, rejects malformed records with the line number.
std::vector<Document> load_documents(const std::string& path, const CorpusLimits& limits = {},
                                     LoadStats* stats = nullptr);

// Frequency-ranked vocabulary. Real tokens get ids 1..size(); id 0 is the
// reserved unknown id and is not part of the token map.
struct Vocab {
  static constexpr int kUnkId = 0;
  static constexpr const char* kUnkToken = "<unk>";

  std::unordered_map<std::string, int> token_to_id;
  std::vector<std::string> id_to_token;  // index 0 = kUnkToken

  int lookup(const std::string& token) const;
  std::size_t size() const { return token_to_id.size(); }
  bool contains(const std::string& token) const { return token_to_id.count(token) > 0; }

  static Vocab from_tokens(const std::vector<std::string>& ranked_tokens);
};

// Tokens ranked by frequency (ties broken lexicographically), filtered by
// min_freq, capped at max_size.
Vocab build_vocab(std::span<const Document> docs, std::size_t max_size = 50000,
                  std::size_t min_freq = 10);

struct EmbeddingTable {
  std::size_t dim = 0;
  bool frozen = true;
  std::unordered_map<std::string, std::vector<double>> vectors;
  std::vector<double> unk;  // zeros by default

  const std::vector<double>* find(const std::string& token) const;
};

// Text lines: token v1 v2 ... vd.
EmbeddingTable load_embeddings(const std::string& path);

// Mean of per-token vectors over the first max_words tokens; tokens outside
// vocab or table contribute the unknown vector.
Tensor embed_edu(std::span<const std::string> tokens, const EmbeddingTable& table,
                 const Vocab& vocab, std::size_t max_words = 50);

struct GoldLoadResult {
  std::map<std::string, BinaryTree> trees;
  std::vector<std::string> errors;  // one message per rejected document
};

// One "doc_id<TAB>s-expression" per line; n-ary trees are right-binarized.
// Lines starting with '#' are ignored. Per-document failures are collected,
// the remainder still loads.
GoldLoadResult load_gold_trees(const std::string& path);

void save_trees(const std::string& path, const std::vector<std::pair<std::string, BinaryTree>>& trees,
                const std::string& header_comment = "");

// Length-stratified development split: stable sort by (EDU count, doc_id),
// take every ceil(N/dev_target)-th document starting at index 0.
struct SplitResult {
  std::vector<Document> train;
  std::vector<Document> dev;
};
SplitResult stratified_dev_split(std::vector<Document> docs, std::size_t dev_target = 36);

}  // namespace tae
