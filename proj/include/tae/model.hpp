#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tae/corpus.hpp"
#include "tae/rng.hpp"
#include "tae/tape.hpp"
#include "tae/tensor.hpp"
#include "tae/tree.hpp"

#include "json.hpp"

namespace tae {

struct ModelConfig {
  std::size_t hidden = 64;
  std::size_t emb_dim = 0;
  // One parameter set for both levels by default; false gives the document
  // level its own composition/scorer/split weights.
  bool share_levels = true;
};

// Gumbel perturbation settings for merge selection. straight_through=false
// switches to the relaxed surrogate (merged state is the p-weighted mixture
// of candidates, structure still follows argmax) — used by gradient checks.
struct GumbelConfig {
  double tau = 1.0;
  bool noise_enabled = false;
  bool straight_through = true;
};

// A (memory, hidden) pair living on some tape.
struct NodeState {
  Var c;
  Var h;
};

// Named parameter tensor with its Adam state. Moments live here so phase
// masking can freeze a parameter completely (value, m, v, and step).
struct ParamEntry {
  std::string name;
  Tensor value;
  Tensor m;
  Tensor v;
  std::uint64_t step = 0;
};

struct ParamStore {
  std::vector<ParamEntry> entries;

  ParamEntry& at(const std::string& name);
  const ParamEntry& at(const std::string& name) const;
  bool has(const std::string& name) const;
};

// Fixed (name, shape) layout for a config; defines initialization, binding,
// and checkpoint order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> param_shapes(const ModelConfig& cfg);

// Uniform [-1/sqrt(2H), 1/sqrt(2H)] draws in layout order from one stream,
// then forget-gate bias blocks are set to +1.
ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

// Parameter handles for one encoder/decoder level.
struct LevelVars {
  Var enc_W, enc_b;    // 5H x 2H, 5H
  Var score_w, score_b;  // 1 x H, 1
  Var dec_W, dec_b;    // 8H x H, 8H
};

struct ModelVars {
  Var leaf_W, leaf_b;  // 2H x E, 2H
  Var proj_W, proj_b;  // E x H, E
  LevelVars sent;
  LevelVars doc;  // same handles as sent when levels are shared
};

struct BoundParams {
  ModelVars vars;
  std::vector<Var> all;  // one Var per store entry, in store order
};

BoundParams bind_params(Tape& tape, const ParamStore& store, const ModelConfig& cfg);

// Affine map of an EDU embedding to 2H values: first H become c, last H
// become h through tanh.
NodeState leaf_transform(Tape& tape, Var embedding, const ModelVars& vars);

// Binary TreeLSTM cell: gates [i, f_l, f_r, o, u] from W.[h_l;h_r]+b,
// c_p = f_l.c_l + f_r.c_r + i.u, h_p = o.tanh(c_p).
NodeState compose(Tape& tape, const NodeState& l, const NodeState& r, const LevelVars& vars);

// Inverse cell: eight gate blocks [i_l,f_l,o_l,u_l,i_r,f_r,o_r,u_r] from
// W.h_p + b; c_l = f_l.c_p + i_l.u_l (right side alike), h = o.tanh(c).
std::pair<NodeState, NodeState> split(Tape& tape, const NodeState& parent, const LevelVars& vars);

// g = -log(-log(u)); u must lie strictly in (0,1).
double gumbel_noise(double u);

struct MergeChoice {
  Var p;          // softmax((scores+g)/tau)
  Var weights;    // one-hot straight-through of p, or p itself when relaxed
  std::size_t index = 0;
};

// Scores length n-1 >= 1. Noise comes from rng only when enabled; ties in
// the argmax break toward the lowest index.
MergeChoice select_merge(Tape& tape, Var scores, const GumbelConfig& cfg, SplitMix64& rng);

struct EncodeResult {
  NodeState root;
  MergeTrace trace;
};

// Repeats score -> select -> compose until one state remains. Candidate
// compositions of all adjacent pairs are built each step; only the selected
// pair's composition survives (as the weights-mixed state), the rest are
// discarded. n=1 returns the input with an empty trace.
EncodeResult encode_sequence(Tape& tape, const std::vector<NodeState>& leaves,
                             const LevelVars& vars, const GumbelConfig& cfg, SplitMix64& rng);

// Mirrors the encoder exactly: splits in reverse merge order, so output k
// corresponds positionally to input leaf k.
std::vector<NodeState> decode_tree(Tape& tape, const NodeState& root, const MergeTrace& trace,
                                   const LevelVars& vars);

struct DocumentEncoding {
  NodeState doc_root;
  std::vector<NodeState> sentence_roots;
  std::vector<MergeTrace> sentence_traces;
  MergeTrace doc_trace;
};

// Two-level encoding: each sentence's leaves to a sentence root, then the
// sentence roots to the document root.
DocumentEncoding encode_document(Tape& tape, const std::vector<std::vector<NodeState>>& sentences,
                                 const ModelVars& vars, const GumbelConfig& cfg, SplitMix64& rng);

// Document-level tree with each leaf replaced by its sentence tree; leaf
// indices count EDUs across the whole document.
BinaryTree full_document_tree(const std::vector<MergeTrace>& sentence_traces,
                              const MergeTrace& doc_trace);

// Deterministic eval-mode pass over one embedded document (noise and
// dropout off, pure argmax).
struct InducedDocument {
  BinaryTree tree;
  Tensor doc_h;
  Tensor doc_c;
};
InducedDocument induce_document(const ParamStore& store, const ModelConfig& cfg,
                                const std::vector<std::vector<Tensor>>& sentence_embeddings);

// Versioned binary dump: magic "TAEC", version, resolved-config JSON, vocab
// tokens, every parameter tensor in layout order. Loading re-derives the
// expected layout from the embedded config and validates names and shapes.
struct Checkpoint {
  nlohmann::json config;
  Vocab vocab;
  ParamStore params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

ModelConfig model_config_from_json(const nlohmann::json& config);

}  // namespace tae
