#include "tae/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tae {

ParamEntry& ParamStore::at(const std::string& name) {
  for (auto& e : entries)
    if (e.name == name) return e;
  throw std::out_of_range("no parameter named \"" + name + "\"");
}

const ParamEntry& ParamStore::at(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw std::out_of_range("no parameter named \"" + name + "\"");
}

bool ParamStore::has(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return true;
  return false;
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> param_shapes(const ModelConfig& cfg) {
  if (cfg.hidden == 0) throw std::invalid_argument("hidden must be positive");
  if (cfg.emb_dim == 0) throw std::invalid_argument("emb_dim must be positive");
  const std::size_t H = cfg.hidden, E = cfg.emb_dim;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> shapes = {
      {"leaf_W", {2 * H, E}}, {"leaf_b", {2 * H}},
      {"enc_W", {5 * H, 2 * H}}, {"enc_b", {5 * H}},
      {"score_w", {1, H}}, {"score_b", {1}},
      {"dec_W", {8 * H, H}}, {"dec_b", {8 * H}},
      {"proj_W", {E, H}}, {"proj_b", {E}},
  };
  if (!cfg.share_levels) {
    shapes.push_back({"doc_enc_W", {5 * H, 2 * H}});
    shapes.push_back({"doc_enc_b", {5 * H}});
    shapes.push_back({"doc_score_w", {1, H}});
    shapes.push_back({"doc_score_b", {1}});
    shapes.push_back({"doc_dec_W", {8 * H, H}});
    shapes.push_back({"doc_dec_b", {8 * H}});
  }
  return shapes;
}

namespace {

// Forget-gate blocks get bias +1: encoder stacks [i, f_l, f_r, o, u], the
// decoder stacks [i_l, f_l, o_l, u_l, i_r, f_r, o_r, u_r].
void set_forget_bias(ParamStore& store, const std::string& name, std::size_t H, bool decoder) {
  if (!store.has(name)) return;
  Tensor& b = store.at(name).value;
  if (decoder) {
    for (std::size_t i = H; i < 2 * H; ++i) b[i] = 1.0;
    for (std::size_t i = 5 * H; i < 6 * H; ++i) b[i] = 1.0;
  } else {
    for (std::size_t i = H; i < 3 * H; ++i) b[i] = 1.0;
  }
}

}  // namespace

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const double r = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg.hidden));
  ParamStore store;
  for (const auto& [name, shape] : param_shapes(cfg)) {
    ParamEntry e;
    e.name = name;
    e.value = Tensor::zeros(shape);
    for (double& x : e.value.data) x = rng.uniform(-r, r);
    e.m = Tensor::zeros(shape);
    e.v = Tensor::zeros(shape);
    store.entries.push_back(std::move(e));
  }
  set_forget_bias(store, "enc_b", cfg.hidden, false);
  set_forget_bias(store, "dec_b", cfg.hidden, true);
  set_forget_bias(store, "doc_enc_b", cfg.hidden, false);
  set_forget_bias(store, "doc_dec_b", cfg.hidden, true);
  return store;
}

BoundParams bind_params(Tape& tape, const ParamStore& store, const ModelConfig& cfg) {
  BoundParams bound;
  auto expected = param_shapes(cfg);
  if (expected.size() != store.entries.size())
    throw std::invalid_argument("parameter store does not match config layout");
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& e = store.entries[i];
    if (e.name != expected[i].first || e.value.shape != expected[i].second)
      throw std::invalid_argument("parameter \"" + e.name + "\" does not match config layout");
    bound.all.push_back(tape.input(e.value));
  }
  auto var = [&](const std::string& name) {
    for (std::size_t i = 0; i < store.entries.size(); ++i)
      if (store.entries[i].name == name) return bound.all[i];
    throw std::out_of_range("no parameter named \"" + name + "\"");
  };
  ModelVars& v = bound.vars;
  v.leaf_W = var("leaf_W");
  v.leaf_b = var("leaf_b");
  v.proj_W = var("proj_W");
  v.proj_b = var("proj_b");
  v.sent = {var("enc_W"), var("enc_b"), var("score_w"), var("score_b"),
            var("dec_W"), var("dec_b")};
  v.doc = cfg.share_levels
              ? v.sent
              : LevelVars{var("doc_enc_W"), var("doc_enc_b"), var("doc_score_w"),
                          var("doc_score_b"), var("doc_dec_W"), var("doc_dec_b")};
  return bound;
}

NodeState leaf_transform(Tape& tape, Var embedding, const ModelVars& vars) {
  Var z = tape.add(tape.matvec(vars.leaf_W, embedding), vars.leaf_b);
  std::size_t H = tape.value(z).size() / 2;
  NodeState s;
  s.c = tape.slice(z, 0, H);
  s.h = tape.tanh(tape.slice(z, H, H));
  return s;
}

NodeState compose(Tape& tape, const NodeState& l, const NodeState& r, const LevelVars& vars) {
  std::array<Var, 2> hs = {l.h, r.h};
  Var x = tape.concat(hs);
  Var z = tape.add(tape.matvec(vars.enc_W, x), vars.enc_b);
  std::size_t H = tape.value(z).size() / 5;
  Var i = tape.sigmoid(tape.slice(z, 0, H));
  Var f_l = tape.sigmoid(tape.slice(z, H, H));
  Var f_r = tape.sigmoid(tape.slice(z, 2 * H, H));
  Var o = tape.sigmoid(tape.slice(z, 3 * H, H));
  Var u = tape.tanh(tape.slice(z, 4 * H, H));
  NodeState p;
  p.c = tape.add(tape.add(tape.mul(f_l, l.c), tape.mul(f_r, r.c)), tape.mul(i, u));
  p.h = tape.mul(o, tape.tanh(p.c));
  return p;
}

std::pair<NodeState, NodeState> split(Tape& tape, const NodeState& parent, const LevelVars& vars) {
  Var z = tape.add(tape.matvec(vars.dec_W, parent.h), vars.dec_b);
  std::size_t H = tape.value(z).size() / 8;
  Var i_l = tape.sigmoid(tape.slice(z, 0, H));
  Var f_l = tape.sigmoid(tape.slice(z, H, H));
  Var o_l = tape.sigmoid(tape.slice(z, 2 * H, H));
  Var u_l = tape.tanh(tape.slice(z, 3 * H, H));
  Var i_r = tape.sigmoid(tape.slice(z, 4 * H, H));
  Var f_r = tape.sigmoid(tape.slice(z, 5 * H, H));
  Var o_r = tape.sigmoid(tape.slice(z, 6 * H, H));
  Var u_r = tape.tanh(tape.slice(z, 7 * H, H));
  NodeState l, r;
  l.c = tape.add(tape.mul(f_l, parent.c), tape.mul(i_l, u_l));
  l.h = tape.mul(o_l, tape.tanh(l.c));
  r.c = tape.add(tape.mul(f_r, parent.c), tape.mul(i_r, u_r));
  r.h = tape.mul(o_r, tape.tanh(r.c));
  return {l, r};
}

double gumbel_noise(double u) {
  if (!(u > 0.0 && u < 1.0))
    throw std::invalid_argument("gumbel_noise requires u strictly inside (0,1)");
  return -std::log(-std::log(u));
}

MergeChoice select_merge(Tape& tape, Var scores, const GumbelConfig& cfg, SplitMix64& rng) {
  const Tensor& s = tape.value(scores);
  if (s.size() < 1) throw std::invalid_argument("select_merge needs at least one score");
  if (!(cfg.tau > 0.0)) throw std::invalid_argument("temperature must be positive");

  Var perturbed = scores;
  if (cfg.noise_enabled) {
    Tensor g = Tensor::zeros({s.size()});
    for (double& x : g.data) x = gumbel_noise(rng.uniform_open01());
    perturbed = tape.add(scores, tape.constant(std::move(g)));
  }
  MergeChoice choice;
  choice.p = tape.softmax(tape.scale(perturbed, 1.0 / cfg.tau));

  const Tensor& p = tape.value(choice.p);
  choice.index = 0;
  for (std::size_t k = 1; k < p.size(); ++k)
    if (p[k] > p[choice.index]) choice.index = k;

  choice.weights = cfg.straight_through ? tape.straight_through(choice.p, choice.index) : choice.p;
  return choice;
}

EncodeResult encode_sequence(Tape& tape, const std::vector<NodeState>& leaves,
                             const LevelVars& vars, const GumbelConfig& cfg, SplitMix64& rng) {
  if (leaves.empty()) throw std::invalid_argument("encode_sequence needs at least one state");
  EncodeResult result;
  std::vector<NodeState> states = leaves;
  while (states.size() > 1) {
    std::vector<NodeState> candidates;
    std::vector<Var> cand_scores;
    candidates.reserve(states.size() - 1);
    for (std::size_t k = 0; k + 1 < states.size(); ++k) {
      NodeState cand = compose(tape, states[k], states[k + 1], vars);
      cand_scores.push_back(
          tape.add(tape.matvec(vars.score_w, cand.h), vars.score_b));
      candidates.push_back(cand);
    }
    Var scores = cand_scores.size() == 1 ? cand_scores[0] : tape.concat(cand_scores);
    MergeChoice choice = select_merge(tape, scores, cfg, rng);

    std::vector<Var> cand_c, cand_h;
    for (const NodeState& c : candidates) {
      cand_c.push_back(c.c);
      cand_h.push_back(c.h);
    }
    NodeState merged;
    merged.c = tape.weighted_sum(choice.weights, cand_c);
    merged.h = tape.weighted_sum(choice.weights, cand_h);

    states[choice.index] = merged;
    states.erase(states.begin() + static_cast<std::ptrdiff_t>(choice.index) + 1);
    result.trace.merges.push_back(choice.index);
  }
  result.root = states[0];
  return result;
}

std::vector<NodeState> decode_tree(Tape& tape, const NodeState& root, const MergeTrace& trace,
                                   const LevelVars& vars) {
  validate_trace(trace);
  std::vector<NodeState> states = {root};
  for (std::size_t k = trace.merges.size(); k-- > 0;) {
    std::size_t pos = trace.merges[k];
    auto [l, r] = split(tape, states[pos], vars);
    states[pos] = l;
    states.insert(states.begin() + static_cast<std::ptrdiff_t>(pos) + 1, r);
  }
  return states;
}

DocumentEncoding encode_document(Tape& tape, const std::vector<std::vector<NodeState>>& sentences,
                                 const ModelVars& vars, const GumbelConfig& cfg, SplitMix64& rng) {
  if (sentences.empty()) throw std::invalid_argument("encode_document needs at least one sentence");
  DocumentEncoding enc;
  for (const auto& sent : sentences) {
    EncodeResult r = encode_sequence(tape, sent, vars.sent, cfg, rng);
    enc.sentence_roots.push_back(r.root);
    enc.sentence_traces.push_back(std::move(r.trace));
  }
  EncodeResult top = encode_sequence(tape, enc.sentence_roots, vars.doc, cfg, rng);
  enc.doc_root = top.root;
  enc.doc_trace = std::move(top.trace);
  return enc;
}

namespace {

int copy_subtree(const BinaryTree& src, int node, int offset, BinaryTree& dst) {
  const auto& n = src.nodes[static_cast<std::size_t>(node)];
  if (n.leaf >= 0) return dst.add_leaf(n.leaf + offset);
  int l = copy_subtree(src, n.left, offset, dst);
  int r = copy_subtree(src, n.right, offset, dst);
  return dst.add_internal(l, r);
}

}  // namespace

BinaryTree full_document_tree(const std::vector<MergeTrace>& sentence_traces,
                              const MergeTrace& doc_trace) {
  if (sentence_traces.empty())
    throw std::invalid_argument("full_document_tree needs at least one sentence");
  if (doc_trace.leaf_count() != sentence_traces.size())
    throw std::invalid_argument("document trace does not cover the sentence count");

  std::vector<BinaryTree> sub;
  std::vector<int> sub_roots;
  int offset = 0;
  for (const auto& t : sentence_traces) {
    sub.push_back(tree_from_trace(t, static_cast<int>(t.leaf_count())));
    sub_roots.push_back(offset);
    offset += static_cast<int>(t.leaf_count());
  }

  BinaryTree doc = tree_from_trace(doc_trace, static_cast<int>(sentence_traces.size()));
  BinaryTree out;
  // Rebuild the document tree, grafting sentence subtrees in place of leaves.
  std::vector<int> mapped(doc.nodes.size(), -1);
  for (std::size_t i = 0; i < doc.nodes.size(); ++i) {
    const auto& n = doc.nodes[i];
    if (n.leaf >= 0) {
      mapped[i] = copy_subtree(sub[static_cast<std::size_t>(n.leaf)],
                               sub[static_cast<std::size_t>(n.leaf)].root,
                               sub_roots[static_cast<std::size_t>(n.leaf)], out);
    } else {
      mapped[i] = out.add_internal(mapped[static_cast<std::size_t>(n.left)],
                                   mapped[static_cast<std::size_t>(n.right)]);
    }
  }
  out.root = mapped[static_cast<std::size_t>(doc.root)];
  return out;
}

InducedDocument induce_document(const ParamStore& store, const ModelConfig& cfg,
                                const std::vector<std::vector<Tensor>>& sentence_embeddings) {
  Tape tape;
  BoundParams bound = bind_params(tape, store, cfg);
  GumbelConfig eval_cfg;  // tau=1, noise off, straight-through
  SplitMix64 rng(0);

  std::vector<std::vector<NodeState>> sentences;
  for (const auto& sent : sentence_embeddings) {
    std::vector<NodeState> leaves;
    for (const Tensor& emb : sent)
      leaves.push_back(leaf_transform(tape, tape.constant(emb), bound.vars));
    sentences.push_back(std::move(leaves));
  }
  DocumentEncoding enc = encode_document(tape, sentences, bound.vars, eval_cfg, rng);

  InducedDocument out;
  out.tree = full_document_tree(enc.sentence_traces, enc.doc_trace);
  out.doc_h = tape.value(enc.doc_root.h);
  out.doc_c = tape.value(enc.doc_root.c);
  return out;
}

namespace {

constexpr char kMagic[4] = {'T', 'A', 'E', 'C'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

void write_f64(std::ostream& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  write_u64(out, bits);
}

void write_str(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) {
  std::uint64_t bits = read_u64(in);
  double x;
  std::memcpy(&x, &bits, 8);
  return x;
}

std::string read_str(std::istream& in, std::uint64_t max_len = 1ull << 32) {
  std::uint64_t len = read_u64(in);
  if (len > max_len) throw std::runtime_error("corrupt checkpoint: string length overflow");
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_str(out, ckpt.config.dump());

  // Real tokens only; the unknown entry is implicit at id 0.
  write_u64(out, ckpt.vocab.id_to_token.empty() ? 0 : ckpt.vocab.id_to_token.size() - 1);
  for (std::size_t i = 1; i < ckpt.vocab.id_to_token.size(); ++i)
    write_str(out, ckpt.vocab.id_to_token[i]);

  write_u64(out, ckpt.params.entries.size());
  for (const auto& e : ckpt.params.entries) {
    write_str(out, e.name);
    write_u32(out, static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t d : e.value.shape) write_u64(out, d);
    for (double x : e.value.data) write_f64(out, x);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  std::string config_text = read_str(in);
  try {
    ckpt.config = nlohmann::json::parse(config_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("corrupt checkpoint config: ") + e.what());
  }

  std::uint64_t n_tokens = read_u64(in);
  std::vector<std::string> tokens;
  tokens.reserve(n_tokens);
  for (std::uint64_t i = 0; i < n_tokens; ++i) tokens.push_back(read_str(in));
  ckpt.vocab = Vocab::from_tokens(tokens);

  std::uint64_t n_params = read_u64(in);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    ParamEntry e;
    e.name = read_str(in);
    std::uint32_t rank = read_u32(in);
    if (rank < 1 || rank > 2)
      throw std::runtime_error("corrupt checkpoint: bad rank for \"" + e.name + "\"");
    std::vector<std::size_t> shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(read_u64(in));
    e.value = Tensor::zeros(shape);
    for (double& x : e.value.data) x = read_f64(in);
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    if (!e.value.all_finite())
      throw std::runtime_error("checkpoint parameter \"" + e.name + "\" is not finite");
    e.m = Tensor::zeros(shape);
    e.v = Tensor::zeros(shape);
    ckpt.params.entries.push_back(std::move(e));
  }

  ModelConfig cfg = model_config_from_json(ckpt.config);
  auto expected = param_shapes(cfg);
  if (expected.size() != ckpt.params.entries.size())
    throw std::runtime_error("checkpoint parameter count does not match its config");
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& e = ckpt.params.entries[i];
    if (e.name != expected[i].first)
      throw std::runtime_error("checkpoint parameter order mismatch at \"" + e.name +
                               "\" (expected \"" + expected[i].first + "\")");
    if (e.value.shape != expected[i].second)
      throw std::runtime_error("checkpoint parameter \"" + e.name + "\" has shape " +
                               shape_str(e.value) + ", inconsistent with its config");
  }
  return ckpt;
}

ModelConfig model_config_from_json(const nlohmann::json& config) {
  ModelConfig cfg;
  if (!config.contains("hidden") || !config.contains("emb_dim"))
    throw std::runtime_error("config missing \"hidden\" or \"emb_dim\"");
  cfg.hidden = config["hidden"].get<std::size_t>();
  cfg.emb_dim = config["emb_dim"].get<std::size_t>();
  if (config.contains("share_levels")) cfg.share_levels = config["share_levels"].get<bool>();
  return cfg;
}

}  // namespace tae
