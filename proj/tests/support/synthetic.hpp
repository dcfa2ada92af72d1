#pragma once

// Deterministic synthetic corpora and fixtures for tests. The planted corpus
// has known sentence templates and document shapes, so gold trees (and the
// scores simple baselines earn on them) are known by construction.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tae/corpus.hpp"
#include "tae/tensor.hpp"
#include "tae/tree.hpp"

namespace synth {

struct Corpus {
  std::vector<tae::Document> docs;
  std::map<std::string, tae::BinaryTree> gold;  // full-document trees over EDU indices
  std::vector<std::pair<std::string, std::vector<double>>> embeddings;
  std::size_t emb_dim = 0;
};

// Topic-clustered corpus: 10 topics x 4 words + 4 connectors, EDUs of three
// tokens, sentence templates of 2..4 EDUs, document shapes cycling through
// six sentence-size patterns. Labels are 1..5, derived from the lead topic.
Corpus planted_corpus(std::size_t n_docs, std::uint64_t seed, std::size_t emb_dim = 32);

// Five hand-scored documents with gold trees; the exact micro-precision each
// chain baseline earns on them (root span counted) is precomputed.
struct BaselineFixture {
  std::vector<tae::Document> docs;
  std::map<std::string, tae::BinaryTree> gold;
  double left = 0, right = 0, hier_left = 0, hier_right = 0;
};
BaselineFixture baseline_fixture();

// Well-separated encodings for probe tests: five class centers 3*e_k plus
// uniform noise, interleaved by class.
struct SeparableEncodings {
  std::vector<std::pair<tae::Tensor, int>> train;  // (hidden vector, label 1..5)
  std::vector<std::pair<tae::Tensor, int>> eval;
};
SeparableEncodings separable_encodings(std::size_t per_class_train, std::size_t per_class_eval,
                                       std::size_t dim, std::uint64_t seed);

void write_corpus_file(const std::filesystem::path& path, const std::vector<tae::Document>& docs);
void write_embeddings_file(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, std::vector<double>>>& embeddings);
void write_gold_file(const std::filesystem::path& path,
                     const std::map<std::string, tae::BinaryTree>& gold);

// Fresh per-test scratch directory under ./tae_test_tmp (wiped if it exists).
std::filesystem::path temp_dir(const std::string& name);

}  // namespace synth
