#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"
#include "tae/evaluation.hpp"
#include "tae/rng.hpp"

using tae::BaselineKind;
using tae::BinaryTree;
using tae::Tensor;

namespace {

std::map<std::string, BinaryTree> one_doc(const std::string& id, const std::string& sexpr) {
  std::map<std::string, BinaryTree> m;
  m.emplace(id, tae::parse_tree(sexpr));
  return m;
}

}  // namespace

TEST_CASE("micro precision on hand examples") {
  SUBCASE("identical trees score 100") {
    auto pred = one_doc("d", "((0 1) (2 3))");
    auto score = tae::micro_precision(pred, pred);
    CHECK(score.micro_precision == 100.0);
    CHECK(score.matched == 3);
    CHECK(score.predicted == 3);
    CHECK(score.errors.empty());
  }
  SUBCASE("half overlap scores 50") {
    auto pred = one_doc("d", "((0 1) 2)");
    auto gold = one_doc("d", "(0 (1 2))");
    auto score = tae::micro_precision(pred, gold);
    CHECK(score.micro_precision == 50.0);  // only the root span matches
    CHECK(score.matched == 1);

    auto no_root = tae::micro_precision(pred, gold, false);
    CHECK(no_root.micro_precision == 0.0);
    CHECK(no_root.predicted == 1);
  }
  SUBCASE("missing gold and leaf mismatches exclude the document") {
    std::map<std::string, BinaryTree> pred;
    pred.emplace("a", tae::parse_tree("(0 1)"));
    pred.emplace("b", tae::parse_tree("(0 (1 2))"));
    pred.emplace("c", tae::parse_tree("(0 1)"));
    std::map<std::string, BinaryTree> gold;
    gold.emplace("a", tae::parse_tree("(0 1)"));
    gold.emplace("b", tae::parse_tree("(0 1)"));  // three leaves predicted, two gold

    auto score = tae::micro_precision(pred, gold);
    CHECK(score.per_doc.size() == 1);
    CHECK(score.per_doc[0].doc_id == "a");
    CHECK(score.micro_precision == 100.0);
    REQUIRE(score.errors.size() == 2);
    CHECK(score.errors[0].find("leaf count mismatch") != std::string::npos);
    CHECK(score.errors[1].find("no gold tree") != std::string::npos);
  }
  SUBCASE("single-EDU documents carry no spans") {
    auto pred = one_doc("d", "0");
    auto score = tae::micro_precision(pred, pred);
    CHECK(score.predicted == 0);
    CHECK(score.micro_precision == 0.0);  // empty denominator
  }
}

TEST_CASE("micro precision agrees with the brute-force scorer") {
  tae::SplitMix64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::map<std::string, BinaryTree> pred, gold;
    int docs = 1 + static_cast<int>(rng.below(4));
    for (int d = 0; d < docs; ++d) {
      int n = 2 + static_cast<int>(rng.below(6));
      std::string id = "doc" + std::to_string(d);
      pred.emplace(id, oracle::random_tree(n, rng));
      gold.emplace(id, oracle::random_tree(n, rng));
    }
    CHECK(tae::micro_precision(pred, gold).micro_precision ==
          oracle::micro_precision(pred, gold));
    CHECK(tae::micro_precision(pred, gold, false).micro_precision ==
          oracle::micro_precision(pred, gold, false));
  }
}

TEST_CASE("branching baselines build the advertised shapes") {
  auto shape = [](BaselineKind kind, const std::vector<int>& sizes) {
    return tae::serialize_tree(tae::baseline_tree(kind, sizes));
  };
  CHECK(shape(BaselineKind::kLeft, {4}) == "(((0 1) 2) 3)");
  CHECK(shape(BaselineKind::kRight, {4}) == "(0 (1 (2 3)))");
  // Flat baselines ignore sentence boundaries entirely.
  CHECK(shape(BaselineKind::kLeft, {2, 2}) == "(((0 1) 2) 3)");
  CHECK(shape(BaselineKind::kRight, {2, 2}) == "(0 (1 (2 3)))");
  // Hierarchical ones chain within sentences, then over sentence roots.
  CHECK(shape(BaselineKind::kHierLeft, {2, 2}) == "((0 1) (2 3))");
  CHECK(shape(BaselineKind::kHierRight, {2, 2}) == "((0 1) (2 3))");
  CHECK(shape(BaselineKind::kHierLeft, {1, 2, 1}) == "((0 (1 2)) 3)");
  CHECK(shape(BaselineKind::kHierRight, {1, 2, 1}) == "(0 ((1 2) 3))");
  CHECK(shape(BaselineKind::kHierLeft, {3, 2}) == "(((0 1) 2) (3 4))");
  CHECK(shape(BaselineKind::kHierRight, {3, 2}) == "((0 (1 2)) (3 4))");
  CHECK(shape(BaselineKind::kLeft, {1}) == "0");

  CHECK_THROWS_AS(tae::baseline_tree(BaselineKind::kLeft, {}), std::invalid_argument);
  CHECK_THROWS_AS(tae::baseline_tree(BaselineKind::kLeft, {2, 0}), std::invalid_argument);
}

TEST_CASE("baseline kinds parse and print") {
  for (auto kind : {BaselineKind::kLeft, BaselineKind::kRight, BaselineKind::kHierLeft,
                    BaselineKind::kHierRight})
    CHECK(tae::baseline_kind_from_string(tae::baseline_kind_name(kind)) == kind);
  CHECK_THROWS_AS(tae::baseline_kind_from_string("middle"), std::invalid_argument);
}

TEST_CASE("baselines reproduce the hand-scored fixture exactly") {
  synth::BaselineFixture fx = synth::baseline_fixture();
  auto run = [&](BaselineKind kind) {
    std::map<std::string, BinaryTree> pred;
    for (const auto& doc : fx.docs)
      pred.emplace(doc.doc_id, tae::baseline_tree(kind, doc.sentence_sizes()));
    return tae::micro_precision(pred, fx.gold).micro_precision;
  };
  CHECK(run(BaselineKind::kLeft) == fx.left);
  CHECK(run(BaselineKind::kRight) == fx.right);
  CHECK(run(BaselineKind::kHierLeft) == fx.hier_left);
  CHECK(run(BaselineKind::kHierRight) == fx.hier_right);

  // On sentence-respecting treebanks the hierarchical chains dominate the
  // flat ones.
  CHECK(run(BaselineKind::kHierLeft) >= run(BaselineKind::kLeft));
  CHECK(run(BaselineKind::kHierRight) >= run(BaselineKind::kRight));
}

TEST_CASE("random-tree span probabilities match exhaustive enumeration") {
  // Spot values first: 1/2, 2/5, 5/14, and Cat(1)Cat(5)/Cat(6) = 42/132.
  CHECK(tae::span_probability_random_tree(2, 3) == doctest::Approx(0.5));
  CHECK(tae::span_probability_random_tree(2, 4) == doctest::Approx(0.4));
  CHECK(tae::span_probability_random_tree(3, 4) == doctest::Approx(0.4));
  CHECK(tae::span_probability_random_tree(2, 5) == doctest::Approx(5.0 / 14.0));
  CHECK(tae::span_probability_random_tree(3, 5) == doctest::Approx(2.0 / 7.0));
  CHECK(tae::span_probability_random_tree(2, 7) == doctest::Approx(42.0 / 132.0));
  CHECK(tae::span_probability_random_tree(1, 9) == 1.0);
  CHECK(tae::span_probability_random_tree(9, 9) == doctest::Approx(1.0));
  CHECK_THROWS_AS(tae::span_probability_random_tree(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(tae::span_probability_random_tree(4, 3), std::invalid_argument);

  for (int n = 2; n <= 8; ++n) {
    auto trees = oracle::all_trees(n);
    for (int len = 2; len <= n; ++len) {
      double expect = tae::span_probability_random_tree(len, n);
      // The probability may not depend on where the span sits.
      for (int start = 0; start + len <= n; ++start) {
        std::size_t hits = 0;
        for (const auto& t : trees)
          if (oracle::spans(t).count({start, start + len - 1})) ++hits;
        double freq = static_cast<double>(hits) / static_cast<double>(trees.size());
        INFO("n ", n, " len ", len, " start ", start);
        CHECK(freq == doctest::Approx(expect).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("expected random precision equals the enumeration average") {
  std::map<std::string, BinaryTree> gold;
  gold.emplace("a", tae::parse_tree("(0 (1 2))"));
  gold.emplace("b", tae::parse_tree("((0 1) (2 3))"));
  gold.emplace("c", tae::parse_tree("(((0 1) 2) (3 4))"));
  gold.emplace("single", tae::parse_tree("0"));  // contributes nothing

  for (bool include_root : {true, false}) {
    double expected_matches = 0.0;
    std::size_t predicted = 0;
    for (const auto& [id, gtree] : gold) {
      int n = gtree.leaf_count();
      if (n < 2) continue;
      predicted += static_cast<std::size_t>(include_root ? n - 1 : n - 2);
      auto gspans = oracle::spans(gtree, include_root);
      auto trees = oracle::all_trees(n);
      double sum = 0.0;
      for (const auto& t : trees) {
        for (const auto& span : oracle::spans(t, include_root))
          if (gspans.count(span)) sum += 1.0;
      }
      expected_matches += sum / static_cast<double>(trees.size());
    }
    double expect = 100.0 * expected_matches / static_cast<double>(predicted);
    INFO("include_root ", include_root);
    CHECK(tae::expected_random_micro_precision(gold, include_root) ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("probe training separates wide-margin clusters") {
  synth::SeparableEncodings data = synth::separable_encodings(20, 8, 12, 5);
  std::vector<Tensor> train_x, eval_x;
  std::vector<int> train_y, eval_y;
  for (const auto& [x, y] : data.train) {
    train_x.push_back(x);
    train_y.push_back(y);
  }
  for (const auto& [x, y] : data.eval) {
    eval_x.push_back(x);
    eval_y.push_back(y);
  }

  tae::ProbeConfig cfg;
  cfg.learning_rate = 0.01;  // fewer samples than the full pipeline, so step harder
  tae::ProbeModel model = tae::probe_train(train_x, train_y, cfg);
  CHECK(tae::probe_eval(model, train_x, train_y) >= 0.95);
  CHECK(tae::probe_eval(model, eval_x, eval_y) >= 0.9);

  // Same configuration, same model, bit for bit.
  tae::ProbeModel again = tae::probe_train(train_x, train_y, cfg);
  CHECK(model.W.data == again.W.data);
  CHECK(model.b.data == again.b.data);
}

TEST_CASE("probe input validation") {
  std::vector<Tensor> xs = {Tensor::vec({1.0, 0.0})};
  tae::ProbeConfig cfg;
  CHECK_THROWS_AS(tae::probe_train({}, {}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(tae::probe_train(xs, {1, 2}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(tae::probe_train(xs, {0}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(tae::probe_train(xs, {6}, cfg), std::invalid_argument);
  std::vector<Tensor> ragged = {Tensor::vec({1.0, 0.0}), Tensor::vec({1.0})};
  CHECK_THROWS_AS(tae::probe_train(ragged, {1, 2}, cfg), std::invalid_argument);

  tae::ProbeModel zero;
  zero.W = Tensor::zeros({5, 2});
  zero.b = Tensor::zeros({5});
  CHECK(tae::probe_predict(zero, Tensor::vec({1.0, 1.0})) == 1);  // all-tie, lowest class
  zero.b[1] = 1.0;
  zero.b[2] = 1.0;
  CHECK(tae::probe_predict(zero, Tensor::vec({0.0, 0.0})) == 2);  // tie between 2 and 3
  CHECK_THROWS_AS(tae::probe_predict(zero, Tensor::vec({1.0})), std::invalid_argument);
}

TEST_CASE("majority class statistics") {
  CHECK(tae::majority_class({1, 1, 2}) == 1);
  CHECK(tae::majority_accuracy({1, 1, 2}) == doctest::Approx(2.0 / 3.0));
  CHECK(tae::majority_class({1, 2}) == 1);        // tie goes to the lowest class
  CHECK(tae::majority_class({5, 3, 5, 3}) == 3);  // likewise
  CHECK(tae::majority_class({4}) == 4);
  CHECK_THROWS_AS(tae::majority_class({}), std::invalid_argument);
  CHECK_THROWS_AS(tae::majority_class({1, 7}), std::invalid_argument);

  // A 10000-document label multiset with a 3563-strong plurality.
  std::vector<int> labels;
  auto push = [&](int cls, int n) { labels.insert(labels.end(), n, cls); };
  push(1, 2000);
  push(2, 3563);
  push(3, 2000);
  push(4, 1800);
  push(5, 637);
  REQUIRE(labels.size() == 10000);
  CHECK(tae::majority_class(labels) == 2);
  CHECK(tae::majority_accuracy(labels) == 3563.0 / 10000.0);
}

TEST_CASE("nearest documents ranks by cosine with doc_id ties") {
  std::map<std::string, Tensor> enc;
  enc.emplace("query", Tensor::vec({3.0, 4.0}));
  enc.emplace("twin", Tensor::vec({3.0, 4.0}));        // cosine exactly 1
  enc.emplace("scaled", Tensor::vec({6.0, 8.0}));      // also exactly 1
  enc.emplace("orthogonal", Tensor::vec({-4.0, 3.0}));  // exactly 0
  enc.emplace("opposite", Tensor::vec({-3.0, -4.0}));  // exactly -1
  enc.emplace("zero", Tensor::zeros({2}));

  auto result = tae::nearest_documents("query", enc, 10);
  REQUIRE(result.warnings.size() == 1);
  CHECK(result.warnings[0].find("zero") != std::string::npos);
  REQUIRE(result.most_similar.size() == 4);  // k capped at available docs

  CHECK(result.most_similar[0].doc_id == "scaled");  // tie at 1.0, id order
  CHECK(result.most_similar[1].doc_id == "twin");
  CHECK(result.most_similar[0].similarity == 1.0);
  CHECK(result.most_similar[2].doc_id == "orthogonal");
  CHECK(result.most_similar[2].similarity == 0.0);
  CHECK(result.most_similar[3].doc_id == "opposite");
  CHECK(result.most_similar[3].similarity == -1.0);

  CHECK(result.most_different[0].doc_id == "opposite");
  CHECK(result.most_different[3].doc_id == "twin");  // scaled < twin only by id
  CHECK(result.most_different[2].doc_id == "scaled");

  auto top2 = tae::nearest_documents("query", enc, 2);
  CHECK(top2.most_similar.size() == 2);
  CHECK(top2.most_different.size() == 2);
}

TEST_CASE("nearest documents input validation") {
  std::map<std::string, Tensor> enc;
  enc.emplace("a", Tensor::vec({1.0, 0.0}));
  enc.emplace("z", Tensor::zeros({2}));
  CHECK_THROWS_AS(tae::nearest_documents("missing", enc, 3), std::invalid_argument);
  CHECK_THROWS_AS(tae::nearest_documents("z", enc, 3), std::invalid_argument);

  enc.emplace("ragged", Tensor::vec({1.0, 2.0, 3.0}));
  CHECK_THROWS_AS(tae::nearest_documents("a", enc, 3), std::invalid_argument);
}

TEST_CASE("nearest documents agrees with a brute-force sort") {
  tae::SplitMix64 rng(404);
  std::map<std::string, Tensor> enc;
  for (int i = 0; i < 200; ++i) {
    Tensor v = Tensor::zeros({8});
    for (std::size_t j = 0; j < 8; ++j) v[j] = rng.uniform(-1.0, 1.0);
    char id[16];
    std::snprintf(id, sizeof id, "d%03d", i);
    enc.emplace(id, std::move(v));
  }
  const std::string query = "d000";
  auto result = tae::nearest_documents(query, enc, 12);

  // Straight-line cosine + stable resort.
  std::vector<std::pair<double, std::string>> sims;
  const Tensor& q = enc.at(query);
  double qn = 0.0;
  for (std::size_t j = 0; j < 8; ++j) qn += q[j] * q[j];
  qn = std::sqrt(qn);
  for (const auto& [id, v] : enc) {
    if (id == query) continue;
    double dot = 0.0, n2 = 0.0;
    for (std::size_t j = 0; j < 8; ++j) {
      dot += v[j] * q[j];
      n2 += v[j] * v[j];
    }
    sims.emplace_back(dot / (std::sqrt(n2) * qn), id);
  }
  std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  REQUIRE(result.most_similar.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(result.most_similar[i].doc_id == sims[i].second);
    CHECK(result.most_similar[i].similarity == sims[i].first);
  }
  std::reverse(sims.begin(), sims.end());
  // Reversing a descending doc_id-tie-broken order flips ties too; redo the
  // ascending comparator instead.
  std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; i < 12; ++i) CHECK(result.most_different[i].doc_id == sims[i].second);
}
