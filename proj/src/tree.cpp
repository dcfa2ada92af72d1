#include "tae/tree.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace tae {

int BinaryTree::add_leaf(int leaf_index) {
  nodes.push_back(Node{leaf_index, -1, -1});
  return static_cast<int>(nodes.size() - 1);
}

int BinaryTree::add_internal(int left, int right) {
  nodes.push_back(Node{-1, left, right});
  return static_cast<int>(nodes.size() - 1);
}

int BinaryTree::leaf_count() const {
  int n = 0;
  for (const Node& node : nodes)
    if (node.is_leaf()) ++n;
  return n;
}

namespace {
bool equal_rec(const BinaryTree& a, int ia, const BinaryTree& b, int ib) {
  const auto& na = a.nodes[ia];
  const auto& nb = b.nodes[ib];
  if (na.is_leaf() != nb.is_leaf()) return false;
  if (na.is_leaf()) return na.leaf == nb.leaf;
  return equal_rec(a, na.left, b, nb.left) && equal_rec(a, na.right, b, nb.right);
}
}  // namespace

bool trees_equal(const BinaryTree& a, const BinaryTree& b) {
  if (a.empty() || b.empty()) return a.empty() == b.empty();
  return equal_rec(a, a.root, b, b.root);
}

void validate_trace(const MergeTrace& trace) {
  std::size_t n = trace.leaf_count();
  for (std::size_t k = 0; k < trace.merges.size(); ++k) {
    int limit = static_cast<int>(n - k) - 2;  // candidates among n-k elements
    if (trace.merges[k] < 0 || trace.merges[k] > limit) {
      std::ostringstream os;
      os << "invalid merge trace: entry " << k << " = " << trace.merges[k]
         << " outside [0," << limit << "]";
      throw std::invalid_argument(os.str());
    }
  }
}

BinaryTree tree_from_trace(const MergeTrace& trace, int n_leaves) {
  if (n_leaves < 1) throw std::invalid_argument("tree_from_trace: need at least one leaf");
  if (trace.merges.size() + 1 != static_cast<std::size_t>(n_leaves))
    throw std::invalid_argument("tree_from_trace: trace length does not match leaf count");
  validate_trace(trace);
  BinaryTree tree;
  std::vector<int> frontier;
  for (int i = 0; i < n_leaves; ++i) frontier.push_back(tree.add_leaf(i));
  for (int pos : trace.merges) {
    int parent = tree.add_internal(frontier[pos], frontier[pos + 1]);
    frontier[pos] = parent;
    frontier.erase(frontier.begin() + pos + 1);
  }
  tree.root = frontier[0];
  return tree;
}

MergeTrace trace_from_tree(const BinaryTree& tree) {
  MergeTrace trace;
  if (tree.empty()) throw std::invalid_argument("trace_from_tree: empty tree");
  // Frontier of original node ids; repeatedly merge the leftmost adjacent
  // pair that shares a parent in the tree.
  std::vector<int> parent(tree.nodes.size(), -1);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    if (!n.is_leaf()) {
      parent[n.left] = static_cast<int>(i);
      parent[n.right] = static_cast<int>(i);
    }
  }
  std::vector<int> frontier;
  std::function<void(int)> collect = [&](int id) {
    const auto& n = tree.nodes[id];
    if (n.is_leaf()) {
      frontier.push_back(id);
      return;
    }
    collect(n.left);
    collect(n.right);
  };
  collect(tree.root);

  while (frontier.size() > 1) {
    bool merged = false;
    for (std::size_t i = 0; i + 1 < frontier.size(); ++i) {
      int p = parent[frontier[i]];
      if (p >= 0 && p == parent[frontier[i + 1]] &&
          tree.nodes[p].left == frontier[i] && tree.nodes[p].right == frontier[i + 1]) {
        trace.merges.push_back(static_cast<int>(i));
        frontier[i] = p;
        frontier.erase(frontier.begin() + i + 1);
        merged = true;
        break;
      }
    }
    if (!merged) throw std::invalid_argument("trace_from_tree: malformed tree");
  }
  return trace;
}

namespace {
void serialize_rec(const BinaryTree& tree, int id, std::string& out) {
  const auto& n = tree.nodes[id];
  if (n.is_leaf()) {
    out += std::to_string(n.leaf);
    return;
  }
  out += '(';
  serialize_rec(tree, n.left, out);
  out += ' ';
  serialize_rec(tree, n.right, out);
  out += ')';
}
}  // namespace

std::string serialize_tree(const BinaryTree& tree) {
  if (tree.empty()) throw std::invalid_argument("serialize_tree: empty tree");
  std::string out;
  serialize_rec(tree, tree.root, out);
  return out;
}

TreeParseError::TreeParseError(const std::string& what, std::size_t offset_)
    : std::runtime_error(what + " at offset " + std::to_string(offset_)), offset(offset_) {}

namespace {
struct SexprParser {
  const std::string& text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }
  bool done() {
    skip_ws();
    return pos >= text.size();
  }
  int parse_leaf() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    if (pos == start) throw TreeParseError("expected leaf index", pos);
    return std::stoi(text.substr(start, pos - start));
  }
};
}  // namespace

BinaryTree parse_tree(const std::string& text) {
  BinaryTree tree;
  SexprParser p{text};
  std::function<int()> parse = [&]() -> int {
    p.skip_ws();
    if (p.pos >= text.size()) throw TreeParseError("unexpected end of input", p.pos);
    if (text[p.pos] == '(') {
      ++p.pos;
      int left = parse();
      int right = parse();
      p.skip_ws();
      if (p.pos >= text.size() || text[p.pos] != ')')
        throw TreeParseError("expected ')' (trees must be binary)", p.pos);
      ++p.pos;
      return tree.add_internal(left, right);
    }
    return tree.add_leaf(p.parse_leaf());
  };
  tree.root = parse();
  if (!p.done()) throw TreeParseError("trailing input after tree", p.pos);

  // Leaves must read 0..n-1 left to right.
  std::vector<int> leaves;
  std::function<void(int)> walk = [&](int id) {
    const auto& n = tree.nodes[id];
    if (n.is_leaf()) {
      leaves.push_back(n.leaf);
      return;
    }
    walk(n.left);
    walk(n.right);
  };
  walk(tree.root);
  for (std::size_t i = 0; i < leaves.size(); ++i)
    if (leaves[i] != static_cast<int>(i))
      throw TreeParseError("leaves must be 0..n-1 in order, got " + std::to_string(leaves[i]) +
                               " in position " + std::to_string(i),
                           0);
  return tree;
}

NaryTree parse_nary_tree(const std::string& text) {
  NaryTree tree;
  SexprParser p{text};
  std::function<int()> parse = [&]() -> int {
    p.skip_ws();
    if (p.pos >= text.size()) throw TreeParseError("unexpected end of input", p.pos);
    if (text[p.pos] == '(') {
      ++p.pos;
      NaryTree::Node node;
      while (true) {
        p.skip_ws();
        if (p.pos >= text.size()) throw TreeParseError("unbalanced parentheses", p.pos);
        if (text[p.pos] == ')') {
          ++p.pos;
          break;
        }
        node.children.push_back(parse());
      }
      if (node.children.size() < 2)
        throw TreeParseError("internal node needs at least two children", p.pos);
      tree.nodes.push_back(std::move(node));
      return static_cast<int>(tree.nodes.size() - 1);
    }
    NaryTree::Node leaf;
    leaf.leaf = p.parse_leaf();
    tree.nodes.push_back(leaf);
    return static_cast<int>(tree.nodes.size() - 1);
  };
  tree.root = parse();
  if (!p.done()) throw TreeParseError("trailing input after tree", p.pos);
  return tree;
}

BinaryTree right_binarize(const NaryTree& nary) {
  if (nary.root < 0) throw std::invalid_argument("right_binarize: empty tree");
  BinaryTree out;
  std::function<int(int)> convert = [&](int id) -> int {
    const auto& n = nary.nodes[id];
    if (n.is_leaf()) return out.add_leaf(n.leaf);
    std::vector<int> kids;
    kids.reserve(n.children.size());
    for (int c : n.children) kids.push_back(convert(c));
    int acc = kids.back();
    for (std::size_t i = kids.size() - 1; i-- > 0;) acc = out.add_internal(kids[i], acc);
    return acc;
  };
  out.root = convert(nary.root);

  std::vector<int> leaves;
  std::function<void(int)> walk = [&](int id) {
    const auto& n = out.nodes[id];
    if (n.is_leaf()) {
      leaves.push_back(n.leaf);
      return;
    }
    walk(n.left);
    walk(n.right);
  };
  walk(out.root);
  for (std::size_t i = 0; i < leaves.size(); ++i)
    if (leaves[i] != static_cast<int>(i)) {
      std::ostringstream os;
      os << "non-contiguous leaves: expected " << i << ", got " << leaves[i];
      throw std::invalid_argument(os.str());
    }
  return out;
}

std::set<std::pair<int, int>> tree_spans(const BinaryTree& tree, bool include_root) {
  std::set<std::pair<int, int>> spans;
  if (tree.empty()) return spans;
  std::function<std::pair<int, int>(int)> walk = [&](int id) -> std::pair<int, int> {
    const auto& n = tree.nodes[id];
    if (n.is_leaf()) return {n.leaf, n.leaf};
    auto l = walk(n.left);
    auto r = walk(n.right);
    std::pair<int, int> span{l.first, r.second};
    spans.insert(span);
    return span;
  };
  auto root_span = walk(tree.root);
  if (!include_root && tree.nodes[tree.root].is_leaf() == false) spans.erase(root_span);
  return spans;
}

}  // namespace tae
