#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tae/corpus.hpp"
#include "tae/model.hpp"
#include "tae/rng.hpp"
#include "tae/tape.hpp"

#include "json.hpp"

namespace tae {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 20;
  double dropout = 0.2;
  double grad_clip_norm = 2.0;
  std::size_t epochs = 40;
  std::size_t hidden = 64;
  double tau_start = 5.0;
  double tau_end = 1.0;
  std::size_t tau_anneal_epochs = 3;
  bool embeddings_frozen = true;
  std::size_t max_edus = 150;
  std::size_t max_words = 50;
  std::size_t vocab_cap = 50000;
  std::size_t min_freq = 10;
  std::uint64_t seed = 1;
  bool share_levels = true;
  bool structure_first = true;
  std::size_t threads = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

enum class Phase { kStructure, kRepresentation };

const char* phase_name(Phase p);

// True for parameters the Structure phase updates (the merge scorer); the
// Representation phase updates everything else.
bool is_structure_param(const std::string& name);

// Mean over leaves of MSE(softmax(input), softmax(output)), softmax taken
// over the embedding dimension of each leaf.
Var reconstruction_loss(Tape& tape, std::span<const Var> inputs, std::span<const Var> outputs);

// Convenience for plain tensors: builds a throwaway tape.
double reconstruction_loss(const std::vector<Tensor>& inputs, const std::vector<Tensor>& outputs);

// Linear temperature decay over the first tau_anneal_epochs Structure
// epochs, constant tau_end afterwards. Evaluated as a single interpolation
// so the endpoints and intermediate values are exact.
double anneal_tau(std::size_t structure_epoch, const TrainConfig& cfg);

// A document with every EDU replaced by its mean word embedding.
struct EmbeddedDoc {
  std::string doc_id;
  std::vector<std::vector<Tensor>> sentences;
  std::optional<int> label;

  int edu_count() const;
};

std::vector<EmbeddedDoc> embed_corpus(std::span<const Document> docs, const EmbeddingTable& table,
                                      const Vocab& vocab, std::size_t max_words = 50);

struct ForwardOptions {
  GumbelConfig gumbel;
  double dropout = 0.0;  // 0 disables masking entirely
};

struct ForwardResult {
  Var loss;
  DocumentEncoding enc;
};

// Full autoencoding pass over one document: sentence-level reconstruction
// (decode each sentence root back to leaves, project to embedding space)
// plus document-level reconstruction (decode the document root back to
// sentence-root hiddens, targets detached). Losses are summed. Dropout
// masks input embeddings, the document root hidden, and output embeddings.
ForwardResult document_forward(Tape& tape, const EmbeddedDoc& doc, const BoundParams& bound,
                               const ForwardOptions& opt, SplitMix64& rng);

struct EpochStats {
  double mean_loss = 0.0;
  double mean_grad_norm = 0.0;        // after phase masking, before clipping
  double max_clipped_grad_norm = 0.0;
  std::size_t steps = 0;
};

// One pass over docs in order, mini-batches of cfg.batch_size, per-item
// tapes with index-ordered gradient reduction, global-norm clipping, and an
// Adam step restricted to the active phase's parameters (frozen parameters
// keep value, moments, and step count bit-identical).
EpochStats train_epoch(std::span<const EmbeddedDoc> docs, ParamStore& params, Phase phase,
                       double tau, std::uint64_t epoch_index, const TrainConfig& cfg,
                       const ModelConfig& mcfg);

// Mean eval-mode loss (noise, dropout off; pure argmax structure).
double eval_loss(std::span<const EmbeddedDoc> docs, const ParamStore& params,
                 const ModelConfig& mcfg);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  Phase phase = Phase::kStructure;
  double tau = 0.0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double grad_norm = 0.0;
};

nlohmann::json epoch_record_to_json(const EpochRecord& rec);

struct FitResult {
  ParamStore best_params;
  std::size_t best_epoch = 0;  // 0 = initialization
  double best_dev_loss = 0.0;
  double init_dev_loss = 0.0;
  std::vector<EpochRecord> log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Alternates Structure and Representation epochs (Structure first by
// default), annealing tau across Structure epochs, evaluating dev loss after
// every epoch, and retaining the checkpoint with minimum dev loss (ties go
// to the earlier epoch; initialization counts as epoch 0). Falls back to the
// training set for model selection when dev is empty.
FitResult fit(std::span<const EmbeddedDoc> train, std::span<const EmbeddedDoc> dev,
              const TrainConfig& cfg, const ModelConfig& mcfg,
              const EpochCallback& on_epoch = nullptr);

}  // namespace tae
