#pragma once

#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tae {

// Binary tree over leaves 0..n-1 in left-to-right order, arena-backed.
struct BinaryTree {
  struct Node {
    int leaf = -1;   // >= 0 for leaves
    int left = -1;   // child ids for internal nodes
    int right = -1;
    bool is_leaf() const { return leaf >= 0; }
  };
  std::vector<Node> nodes;
  int root = -1;

  int add_leaf(int leaf_index);
  int add_internal(int left, int right);
  bool empty() const { return root < 0; }
  int leaf_count() const;
};

bool trees_equal(const BinaryTree& a, const BinaryTree& b);

// Ordered merge positions producing a binary tree bottom-up: entry k is the
// index of the left element of the pair merged at step k among the current
// n-k elements.
struct MergeTrace {
  std::vector<int> merges;
  std::size_t leaf_count() const { return merges.size() + 1; }
};

void validate_trace(const MergeTrace& trace);
BinaryTree tree_from_trace(const MergeTrace& trace, int n_leaves);
// Canonical trace (leftmost mergeable pair first); inverse of tree_from_trace
// up to canonicalization: tree_from_trace(trace_from_tree(t)) == t.
MergeTrace trace_from_tree(const BinaryTree& tree);

// Canonical s-expression form: leaf -> "0", internal -> "(L R)".
std::string serialize_tree(const BinaryTree& tree);

struct TreeParseError : std::runtime_error {
  std::size_t offset;
  TreeParseError(const std::string& what, std::size_t offset_);
};

BinaryTree parse_tree(const std::string& text);

// N-ary tree for gold inputs; grammar T := leafIndex | "(" T T+ ")".
struct NaryTree {
  struct Node {
    int leaf = -1;
    std::vector<int> children;
    bool is_leaf() const { return leaf >= 0; }
  };
  std::vector<Node> nodes;
  int root = -1;
};

NaryTree parse_nary_tree(const std::string& text);

// Converts every k-ary node into a right-leaning chain of binary nodes;
// leaf order and outer spans are preserved. Validates that leaves read
// 0..n-1 left to right.
BinaryTree right_binarize(const NaryTree& tree);

// (start, end) leaf-index pairs of internal nodes, end inclusive. Root span
// included unless include_root is false; single-leaf spans never counted.
std::set<std::pair<int, int>> tree_spans(const BinaryTree& tree, bool include_root = true);

}  // namespace tae
