#include "tae/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace tae {

void TrainConfig::validate() const {
  auto positive = [](double x, const char* field) {
    if (!(x > 0.0)) throw std::invalid_argument(std::string(field) + " must be positive");
  };
  positive(learning_rate, "learning_rate");
  positive(grad_clip_norm, "grad_clip_norm");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0,1)");
  if (hidden == 0) throw std::invalid_argument("hidden must be positive");
  if (!(tau_end > 0.0)) throw std::invalid_argument("tau_end must be positive");
  if (!(tau_start >= tau_end)) throw std::invalid_argument("tau_start must be >= tau_end");
  if (max_edus == 0) throw std::invalid_argument("max_edus must be positive");
  if (max_words == 0) throw std::invalid_argument("max_words must be positive");
  if (threads == 0) throw std::invalid_argument("threads must be positive");
  if (!embeddings_frozen)
    throw std::invalid_argument("embeddings_frozen must stay true (trainable embeddings unsupported)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw std::invalid_argument("adam betas must lie in [0,1)");
  positive(adam_eps, "adam_eps");
}

const char* phase_name(Phase p) {
  return p == Phase::kStructure ? "structure" : "representation";
}

bool is_structure_param(const std::string& name) {
  return name.find("score") != std::string::npos;
}

Var reconstruction_loss(Tape& tape, std::span<const Var> inputs, std::span<const Var> outputs) {
  if (inputs.empty()) throw std::invalid_argument("reconstruction_loss needs at least one leaf");
  if (inputs.size() != outputs.size())
    throw std::invalid_argument("reconstruction_loss input/output count mismatch");
  Var total;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Var term = tape.mse(tape.softmax(inputs[i]), tape.softmax(outputs[i]));
    total = total.valid() ? tape.add(total, term) : term;
  }
  return tape.scale(total, 1.0 / static_cast<double>(inputs.size()));
}

double reconstruction_loss(const std::vector<Tensor>& inputs, const std::vector<Tensor>& outputs) {
  Tape tape;
  std::vector<Var> in_vars, out_vars;
  for (const Tensor& t : inputs) in_vars.push_back(tape.constant(t));
  for (const Tensor& t : outputs) out_vars.push_back(tape.constant(t));
  return tape.value(reconstruction_loss(tape, in_vars, out_vars))[0];
}

double anneal_tau(std::size_t structure_epoch, const TrainConfig& cfg) {
  if (cfg.tau_anneal_epochs == 0 || structure_epoch >= cfg.tau_anneal_epochs) return cfg.tau_end;
  const double A = static_cast<double>(cfg.tau_anneal_epochs);
  const double k = static_cast<double>(structure_epoch);
  // Single interpolation expression so k=0 and k=A give the endpoints and
  // rational intermediates round once.
  return (cfg.tau_start * (A - k) + cfg.tau_end * k) / A;
}

int EmbeddedDoc::edu_count() const {
  int n = 0;
  for (const auto& s : sentences) n += static_cast<int>(s.size());
  return n;
}

std::vector<EmbeddedDoc> embed_corpus(std::span<const Document> docs, const EmbeddingTable& table,
                                      const Vocab& vocab, std::size_t max_words) {
  std::vector<EmbeddedDoc> out;
  out.reserve(docs.size());
  for (const Document& doc : docs) {
    EmbeddedDoc e;
    e.doc_id = doc.doc_id;
    e.label = doc.label;
    for (const auto& sent : doc.sentences) {
      std::vector<Tensor> embs;
      embs.reserve(sent.size());
      for (const std::string& edu : sent)
        embs.push_back(embed_edu(tokenize(edu), table, vocab, max_words));
      e.sentences.push_back(std::move(embs));
    }
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

// Inverted dropout mask: entries 0 or 1/(1-p), drawn per element.
Tensor dropout_mask(std::size_t n, double p, SplitMix64& rng) {
  Tensor mask = Tensor::zeros({n});
  const double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < n; ++i)
    mask[i] = rng.uniform_open01() >= p ? keep_scale : 0.0;
  return mask;
}

Var maybe_dropout(Tape& tape, Var x, double p, SplitMix64& rng) {
  if (p <= 0.0) return x;
  return tape.mul(x, tape.constant(dropout_mask(tape.value(x).size(), p, rng)));
}

}  // namespace

ForwardResult document_forward(Tape& tape, const EmbeddedDoc& doc, const BoundParams& bound,
                               const ForwardOptions& opt, SplitMix64& rng) {
  if (doc.sentences.empty()) throw std::invalid_argument("document has no sentences");

  // Inputs: clean embeddings kept for the loss targets, masked copies fed in.
  std::vector<Var> clean;
  std::vector<std::vector<NodeState>> sentences;
  for (const auto& sent : doc.sentences) {
    std::vector<NodeState> leaves;
    for (const Tensor& emb : sent) {
      Var e = tape.constant(emb);
      clean.push_back(e);
      leaves.push_back(leaf_transform(tape, maybe_dropout(tape, e, opt.dropout, rng), bound.vars));
    }
    sentences.push_back(std::move(leaves));
  }

  DocumentEncoding enc = encode_document(tape, sentences, bound.vars, opt.gumbel, rng);

  // Sentence level: decode each sentence root back to its leaves, project
  // to embedding space, compare against the clean inputs.
  std::vector<Var> recon;
  for (std::size_t s = 0; s < enc.sentence_roots.size(); ++s) {
    std::vector<NodeState> leaves =
        decode_tree(tape, enc.sentence_roots[s], enc.sentence_traces[s], bound.vars.sent);
    for (const NodeState& leaf : leaves) {
      Var out = tape.add(tape.matvec(bound.vars.proj_W, leaf.h), bound.vars.proj_b);
      recon.push_back(maybe_dropout(tape, out, opt.dropout, rng));
    }
  }
  Var loss = reconstruction_loss(tape, clean, recon);

  // Document level: decode the document root back to sentence-root hiddens.
  // Targets are detached so this term trains the document-level autoencoder
  // without doubling as a sentence-level objective.
  NodeState doc_root = enc.doc_root;
  doc_root.h = maybe_dropout(tape, doc_root.h, opt.dropout, rng);
  std::vector<NodeState> roots = decode_tree(tape, doc_root, enc.doc_trace, bound.vars.doc);
  std::vector<Var> targets, outputs;
  for (std::size_t s = 0; s < roots.size(); ++s) {
    targets.push_back(tape.detach(enc.sentence_roots[s].h));
    outputs.push_back(roots[s].h);
  }
  loss = tape.add(loss, reconstruction_loss(tape, targets, outputs));

  return {loss, std::move(enc)};
}

namespace {

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double global_norm(const std::vector<Tensor>& grads) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (double x : g.data) sq += x * x;
  return std::sqrt(sq);
}

}  // namespace

EpochStats train_epoch(std::span<const EmbeddedDoc> docs, ParamStore& params, Phase phase,
                       double tau, std::uint64_t epoch_index, const TrainConfig& cfg,
                       const ModelConfig& mcfg) {
  cfg.validate();
  EpochStats stats;
  if (docs.empty()) return stats;

  std::vector<char> active(params.entries.size());
  for (std::size_t i = 0; i < params.entries.size(); ++i)
    active[i] = (phase == Phase::kStructure) == is_structure_param(params.entries[i].name);

  ForwardOptions opt;
  opt.gumbel.tau = tau;
  opt.gumbel.noise_enabled = true;
  opt.gumbel.straight_through = true;
  opt.dropout = cfg.dropout;

  double loss_sum = 0.0;
  for (std::size_t begin = 0; begin < docs.size(); begin += cfg.batch_size) {
    const std::size_t count = std::min(cfg.batch_size, docs.size() - begin);

    std::vector<std::vector<Tensor>> item_grads(count);
    std::vector<double> item_loss(count);
    parallel_for(count, cfg.threads, [&](std::size_t k) {
      const EmbeddedDoc& doc = docs[begin + k];
      try {
        Tape tape;
        BoundParams bound = bind_params(tape, params, mcfg);
        SplitMix64 rng(mix_seed(cfg.seed, epoch_index, begin + k));
        ForwardResult fw = document_forward(tape, doc, bound, opt, rng);
        tape.backward(fw.loss);
        item_loss[k] = tape.value(fw.loss)[0];
        item_grads[k].reserve(bound.all.size());
        for (Var v : bound.all) item_grads[k].push_back(tape.grad(v));
      } catch (const std::exception& e) {
        throw std::runtime_error("epoch " + std::to_string(epoch_index) + ", document \"" +
                                 doc.doc_id + "\": " + e.what());
      }
    });

    // Index-ordered reduction keeps results identical across thread counts.
    std::vector<Tensor> grads;
    grads.reserve(params.entries.size());
    for (std::size_t p = 0; p < params.entries.size(); ++p)
      grads.push_back(Tensor::zeros(params.entries[p].value.shape));
    for (std::size_t k = 0; k < count; ++k) {
      loss_sum += item_loss[k];
      for (std::size_t p = 0; p < grads.size(); ++p)
        for (std::size_t i = 0; i < grads[p].size(); ++i)
          grads[p][i] += item_grads[k][p][i];
    }
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t p = 0; p < grads.size(); ++p) {
      if (!active[p]) {
        std::fill(grads[p].data.begin(), grads[p].data.end(), 0.0);
        continue;
      }
      for (double& x : grads[p].data) x *= inv;
    }

    double norm = global_norm(grads);
    if (norm > cfg.grad_clip_norm) {
      const double scale = cfg.grad_clip_norm / norm;
      for (Tensor& g : grads)
        for (double& x : g.data) x *= scale;
    }
    stats.mean_grad_norm += norm;
    stats.max_clipped_grad_norm = std::max(stats.max_clipped_grad_norm, global_norm(grads));

    for (std::size_t p = 0; p < params.entries.size(); ++p) {
      if (!active[p]) continue;
      ParamEntry& e = params.entries[p];
      e.step += 1;
      const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
      const double bc1 = 1.0 - std::pow(b1, static_cast<double>(e.step));
      const double bc2 = 1.0 - std::pow(b2, static_cast<double>(e.step));
      for (std::size_t i = 0; i < e.value.size(); ++i) {
        const double g = grads[p][i];
        e.m[i] = b1 * e.m[i] + (1.0 - b1) * g;
        e.v[i] = b2 * e.v[i] + (1.0 - b2) * g * g;
        const double mhat = e.m[i] / bc1;
        const double vhat = e.v[i] / bc2;
        e.value[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
      }
      if (!e.value.all_finite())
        throw std::runtime_error("epoch " + std::to_string(epoch_index) + ": parameter \"" +
                                 e.name + "\" became non-finite after the update");
    }
    ++stats.steps;
  }

  stats.mean_loss = loss_sum / static_cast<double>(docs.size());
  stats.mean_grad_norm /= static_cast<double>(stats.steps);
  return stats;
}

double eval_loss(std::span<const EmbeddedDoc> docs, const ParamStore& params,
                 const ModelConfig& mcfg) {
  if (docs.empty()) throw std::invalid_argument("eval_loss needs at least one document");
  ForwardOptions opt;  // noise off, dropout 0, straight-through argmax
  double sum = 0.0;
  SplitMix64 rng(0);
  for (const EmbeddedDoc& doc : docs) {
    Tape tape;
    BoundParams bound = bind_params(tape, params, mcfg);
    ForwardResult fw = document_forward(tape, doc, bound, opt, rng);
    sum += tape.value(fw.loss)[0];
  }
  return sum / static_cast<double>(docs.size());
}

nlohmann::json epoch_record_to_json(const EpochRecord& rec) {
  return nlohmann::json{{"epoch", rec.epoch},   {"phase", phase_name(rec.phase)},
                        {"tau", rec.tau},       {"train_loss", rec.train_loss},
                        {"dev_loss", rec.dev_loss}, {"grad_norm", rec.grad_norm}};
}

FitResult fit(std::span<const EmbeddedDoc> train, std::span<const EmbeddedDoc> dev,
              const TrainConfig& cfg, const ModelConfig& mcfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("fit needs a non-empty training set");
  std::span<const EmbeddedDoc> selection = dev.empty() ? train : dev;

  FitResult result;
  ParamStore params = init_params(mcfg, cfg.seed);
  result.init_dev_loss = eval_loss(selection, params, mcfg);
  result.best_params = params;
  result.best_epoch = 0;
  result.best_dev_loss = result.init_dev_loss;

  std::size_t structure_epochs_done = 0;
  double tau = anneal_tau(0, cfg);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const bool odd = epoch % 2 == 1;
    const Phase phase = odd == cfg.structure_first ? Phase::kStructure : Phase::kRepresentation;
    if (phase == Phase::kStructure) {
      tau = anneal_tau(structure_epochs_done, cfg);
      ++structure_epochs_done;
    }

    EpochStats stats = train_epoch(train, params, phase, tau, epoch, cfg, mcfg);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = phase;
    rec.tau = tau;
    rec.train_loss = stats.mean_loss;
    rec.dev_loss = eval_loss(selection, params, mcfg);
    rec.grad_norm = stats.mean_grad_norm;
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.dev_loss < result.best_dev_loss) {
      result.best_dev_loss = rec.dev_loss;
      result.best_epoch = epoch;
      result.best_params = params;
    }
  }
  return result;
}

}  // namespace tae
