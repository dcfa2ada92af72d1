// Command-line driver: train, induce, eval-structure, baseline, probe,
// nearest, grad-check. Commands compose through files only; every artifact
// embeds the resolved configuration that produced it.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tae/corpus.hpp"
#include "tae/evaluation.hpp"
#include "tae/grad_check.hpp"
#include "tae/model.hpp"
#include "tae/training.hpp"

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    auto eq = text.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key=value");
    std::string key = trim(text.substr(0, eq));
    std::string value = trim(text.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty key");
    if (!values.emplace(key, value).second)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": duplicate key \"" + key +
                               "\"");
  }
  return values;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::runtime_error("config key \"" + key + "\": expected a boolean, got \"" + value + "\"");
}

// Applies a key=value config file underneath the command line: a flag given
// on the command line always wins, unknown config keys are rejected by name.
class Overlay {
 public:
  explicit Overlay(CLI::App* cmd) : cmd_(cmd) {}

  template <typename T>
  void bind(const std::string& key, T& target) {
    setters_.emplace(key, [key, &target](const std::string& value) {
      try {
        if constexpr (std::is_same_v<T, bool>) {
          target = parse_bool(key, value);
        } else if constexpr (std::is_same_v<T, double>) {
          target = std::stod(value);
        } else if constexpr (std::is_integral_v<T>) {
          target = static_cast<T>(std::stoull(value));
        } else {
          target = value;
        }
      } catch (const std::invalid_argument&) {
        throw std::runtime_error("config key \"" + key + "\": cannot parse \"" + value + "\"");
      }
    });
  }

  void apply(const std::string& config_path) const {
    if (config_path.empty()) return;
    for (const auto& [key, value] : parse_config_file(config_path)) {
      auto it = setters_.find(key);
      if (it == setters_.end())
        throw std::runtime_error("unknown config key \"" + key + "\" in " + config_path);
      if (cmd_->count("--" + key) > 0) continue;  // command line wins
      it->second(value);
    }
  }

 private:
  CLI::App* cmd_;
  std::map<std::string, std::function<void(const std::string&)>> setters_;
};

void write_report(const std::string& path, const json& report) {
  std::string text = report.dump(2);
  text += "\n";
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Options shared by every command that runs the model over a corpus.
struct TrainArgs {
  tae::TrainConfig train;
  std::string corpus, embeddings, dev_corpus, out_dir, config;
  std::size_t dev_target = 36;
};

void add_train_options(CLI::App* cmd, Overlay& overlay, TrainArgs& a) {
  tae::TrainConfig& t = a.train;
  cmd->add_option("--corpus", a.corpus, "training corpus (one JSON record per line)")->required();
  cmd->add_option("--embeddings", a.embeddings, "word embedding file")->required();
  cmd->add_option("--dev_corpus", a.dev_corpus,
                  "development corpus (default: stratified split from --corpus)");
  cmd->add_option("--out", a.out_dir, "output directory")->required();
  cmd->add_option("--config", a.config, "key=value config file (command line wins)");
  cmd->add_option("--dev_target", a.dev_target, "development-set size for the automatic split");
  cmd->add_option("--learning_rate", t.learning_rate, "Adam learning rate");
  cmd->add_option("--batch_size", t.batch_size, "mini-batch size");
  cmd->add_option("--dropout", t.dropout, "dropout rate");
  cmd->add_option("--grad_clip_norm", t.grad_clip_norm, "global gradient-norm clip");
  cmd->add_option("--epochs", t.epochs, "total epochs (phases alternate per epoch)");
  cmd->add_option("--hidden", t.hidden, "hidden dimension H");
  cmd->add_option("--tau_start", t.tau_start, "initial Gumbel temperature");
  cmd->add_option("--tau_end", t.tau_end, "final Gumbel temperature");
  cmd->add_option("--tau_anneal_epochs", t.tau_anneal_epochs,
                  "structure epochs over which tau decays");
  cmd->add_option("--max_edus", t.max_edus, "EDU cap per document");
  cmd->add_option("--max_words", t.max_words, "token cap per EDU");
  cmd->add_option("--vocab_cap", t.vocab_cap, "vocabulary size cap");
  cmd->add_option("--min_freq", t.min_freq, "minimum token frequency");
  cmd->add_option("--seed", t.seed, "random seed");
  cmd->add_option("--share_levels", t.share_levels,
                  "share sentence- and document-level parameters");
  cmd->add_option("--structure_first", t.structure_first, "start with a Structure epoch");
  cmd->add_option("--threads", t.threads, "worker threads per batch");

  overlay.bind("corpus", a.corpus);
  overlay.bind("embeddings", a.embeddings);
  overlay.bind("dev_corpus", a.dev_corpus);
  overlay.bind("out", a.out_dir);
  overlay.bind("dev_target", a.dev_target);
  overlay.bind("learning_rate", t.learning_rate);
  overlay.bind("batch_size", t.batch_size);
  overlay.bind("dropout", t.dropout);
  overlay.bind("grad_clip_norm", t.grad_clip_norm);
  overlay.bind("epochs", t.epochs);
  overlay.bind("hidden", t.hidden);
  overlay.bind("tau_start", t.tau_start);
  overlay.bind("tau_end", t.tau_end);
  overlay.bind("tau_anneal_epochs", t.tau_anneal_epochs);
  overlay.bind("max_edus", t.max_edus);
  overlay.bind("max_words", t.max_words);
  overlay.bind("vocab_cap", t.vocab_cap);
  overlay.bind("min_freq", t.min_freq);
  overlay.bind("seed", t.seed);
  overlay.bind("share_levels", t.share_levels);
  overlay.bind("structure_first", t.structure_first);
  overlay.bind("threads", t.threads);
}

json train_config_json(const TrainArgs& a, std::size_t emb_dim) {
  const tae::TrainConfig& t = a.train;
  return json{{"command", "train"},
              {"corpus", a.corpus},
              {"embeddings", a.embeddings},
              {"dev_corpus", a.dev_corpus},
              {"out", a.out_dir},
              {"dev_target", a.dev_target},
              {"learning_rate", t.learning_rate},
              {"batch_size", t.batch_size},
              {"dropout", t.dropout},
              {"grad_clip_norm", t.grad_clip_norm},
              {"epochs", t.epochs},
              {"hidden", t.hidden},
              {"emb_dim", emb_dim},
              {"tau_start", t.tau_start},
              {"tau_end", t.tau_end},
              {"tau_anneal_epochs", t.tau_anneal_epochs},
              {"embeddings_frozen", t.embeddings_frozen},
              {"max_edus", t.max_edus},
              {"max_words", t.max_words},
              {"vocab_cap", t.vocab_cap},
              {"min_freq", t.min_freq},
              {"seed", t.seed},
              {"share_levels", t.share_levels},
              {"structure_first", t.structure_first},
              {"threads", t.threads}};
}

int run_train(const TrainArgs& a) {
  a.train.validate();
  tae::CorpusLimits limits{a.train.max_edus, a.train.max_words};

  tae::LoadStats stats;
  std::vector<tae::Document> train_docs = tae::load_documents(a.corpus, limits, &stats);
  if (stats.skipped_empty > 0)
    std::cerr << "warning: skipped " << stats.skipped_empty << " empty document(s)\n";
  if (train_docs.empty()) throw std::runtime_error("corpus has no usable documents");

  std::vector<tae::Document> dev_docs;
  if (!a.dev_corpus.empty()) {
    dev_docs = tae::load_documents(a.dev_corpus, limits);
  } else {
    tae::SplitResult split = tae::stratified_dev_split(std::move(train_docs), a.dev_target);
    train_docs = std::move(split.train);
    dev_docs = std::move(split.dev);
  }
  std::cout << "train documents: " << train_docs.size() << ", dev documents: " << dev_docs.size()
            << "\n";

  tae::Vocab vocab = tae::build_vocab(train_docs, a.train.vocab_cap, a.train.min_freq);
  tae::EmbeddingTable table = tae::load_embeddings(a.embeddings);
  std::cout << "vocabulary: " << vocab.size() << " tokens, embedding dimension " << table.dim
            << "\n";

  std::vector<tae::EmbeddedDoc> train_emb =
      tae::embed_corpus(train_docs, table, vocab, a.train.max_words);
  std::vector<tae::EmbeddedDoc> dev_emb =
      tae::embed_corpus(dev_docs, table, vocab, a.train.max_words);

  tae::ModelConfig mcfg;
  mcfg.hidden = a.train.hidden;
  mcfg.emb_dim = table.dim;
  mcfg.share_levels = a.train.share_levels;

  std::filesystem::create_directories(a.out_dir);
  const std::string log_path = a.out_dir + "/train_log.jsonl";
  const std::string ckpt_path = a.out_dir + "/model.ckpt";
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw std::runtime_error("cannot write training log: " + log_path);

  json cfg_json = train_config_json(a, table.dim);
  log << json{{"config", cfg_json}}.dump() << "\n";

  tae::FitResult fit = tae::fit(train_emb, dev_emb, a.train, mcfg, [&](const tae::EpochRecord& r) {
    log << tae::epoch_record_to_json(r).dump() << "\n";
    log.flush();
    std::cout << "epoch " << r.epoch << " [" << tae::phase_name(r.phase) << "] tau=" << r.tau
              << " train_loss=" << r.train_loss << " dev_loss=" << r.dev_loss << "\n";
  });

  log << json{{"best_epoch", fit.best_epoch},
              {"best_dev_loss", fit.best_dev_loss},
              {"init_dev_loss", fit.init_dev_loss}}
             .dump()
      << "\n";
  if (!log) throw std::runtime_error("write failed: " + log_path);

  tae::save_checkpoint(ckpt_path, {cfg_json, vocab, fit.best_params});
  std::cout << "best epoch " << fit.best_epoch << " (dev loss " << fit.best_dev_loss << " from "
            << fit.init_dev_loss << " at init)\n"
            << "checkpoint: " << ckpt_path << "\nlog: " << log_path << "\n";
  return 0;
}

// Shared by induce/probe/nearest: loads a checkpoint plus a corpus and
// re-embeds the corpus with the checkpoint's vocabulary and caps.
struct LoadedRun {
  tae::Checkpoint ckpt;
  tae::ModelConfig mcfg;
  std::vector<tae::Document> docs;
  std::vector<tae::EmbeddedDoc> embedded;
};

LoadedRun load_run(const std::string& ckpt_path, const std::string& corpus_path,
                   const std::string& emb_path) {
  LoadedRun run;
  run.ckpt = tae::load_checkpoint(ckpt_path);
  run.mcfg = tae::model_config_from_json(run.ckpt.config);

  tae::CorpusLimits limits;
  if (run.ckpt.config.contains("max_edus"))
    limits.max_edus = run.ckpt.config["max_edus"].get<std::size_t>();
  if (run.ckpt.config.contains("max_words"))
    limits.max_words = run.ckpt.config["max_words"].get<std::size_t>();

  run.docs = tae::load_documents(corpus_path, limits);
  if (run.docs.empty()) throw std::runtime_error("corpus has no usable documents");
  tae::EmbeddingTable table = tae::load_embeddings(emb_path);
  if (table.dim != run.mcfg.emb_dim)
    throw std::runtime_error("embedding dimension " + std::to_string(table.dim) +
                             " does not match checkpoint emb_dim " +
                             std::to_string(run.mcfg.emb_dim));
  run.embedded = tae::embed_corpus(run.docs, table, run.ckpt.vocab, limits.max_words);
  return run;
}

int run_induce(const std::string& ckpt_path, const std::string& corpus_path,
               const std::string& emb_path, const std::string& out_path) {
  LoadedRun run = load_run(ckpt_path, corpus_path, emb_path);

  std::vector<std::pair<std::string, tae::BinaryTree>> trees;
  for (const tae::EmbeddedDoc& doc : run.embedded) {
    tae::InducedDocument induced =
        tae::induce_document(run.ckpt.params, run.mcfg, doc.sentences);
    trees.emplace_back(doc.doc_id, std::move(induced.tree));
  }

  json cfg{{"command", "induce"},
           {"checkpoint", ckpt_path},
           {"corpus", corpus_path},
           {"embeddings", emb_path},
           {"model_config", run.ckpt.config}};
  tae::save_trees(out_path, trees, "config: " + cfg.dump());
  std::cout << "wrote " << trees.size() << " tree(s) to " << out_path << "\n";
  return 0;
}

int run_eval_structure(const std::string& pred_path, const std::string& gold_path, bool drop_root,
                       const std::string& out_path) {
  tae::GoldLoadResult pred = tae::load_gold_trees(pred_path);
  tae::GoldLoadResult gold = tae::load_gold_trees(gold_path);
  tae::StructureScore score = tae::micro_precision(pred.trees, gold.trees, !drop_root);

  std::vector<std::string> errors = pred.errors;
  errors.insert(errors.end(), gold.errors.begin(), gold.errors.end());
  errors.insert(errors.end(), score.errors.begin(), score.errors.end());
  if (score.per_doc.empty())
    throw std::runtime_error("no documents scored (" + std::to_string(errors.size()) +
                             " error(s))");

  json per_doc = json::array();
  for (const auto& d : score.per_doc)
    per_doc.push_back({{"doc_id", d.doc_id}, {"matched", d.matched}, {"predicted", d.predicted}});
  json report{{"command", "eval-structure"},
              {"pred", pred_path},
              {"gold", gold_path},
              {"include_root", !drop_root},
              {"micro_precision", score.micro_precision},
              {"matched", score.matched},
              {"predicted", score.predicted},
              {"documents", score.per_doc.size()},
              {"per_doc", per_doc},
              {"errors", errors}};
  write_report(out_path, report);
  return 0;
}

int run_baseline(const std::string& corpus_path, const std::string& kind_name,
                 std::size_t max_edus, std::size_t max_words, const std::string& out_path) {
  tae::BaselineKind kind = tae::baseline_kind_from_string(kind_name);
  std::vector<tae::Document> docs =
      tae::load_documents(corpus_path, {max_edus, max_words});
  if (docs.empty()) throw std::runtime_error("corpus has no usable documents");

  std::vector<std::pair<std::string, tae::BinaryTree>> trees;
  for (const tae::Document& doc : docs)
    trees.emplace_back(doc.doc_id, tae::baseline_tree(kind, doc.sentence_sizes()));

  json cfg{{"command", "baseline"},
           {"corpus", corpus_path},
           {"kind", kind_name},
           {"max_edus", max_edus},
           {"max_words", max_words}};
  tae::save_trees(out_path, trees, "config: " + cfg.dump());
  std::cout << "wrote " << trees.size() << " " << kind_name << "-branching tree(s) to " << out_path
            << "\n";
  return 0;
}

// Eval-mode document encodings (the document root hidden state) for every
// document; used by probe and nearest.
std::map<std::string, tae::Tensor> encode_all(const LoadedRun& run) {
  std::map<std::string, tae::Tensor> enc;
  for (const tae::EmbeddedDoc& doc : run.embedded)
    enc.emplace(doc.doc_id,
                tae::induce_document(run.ckpt.params, run.mcfg, doc.sentences).doc_h);
  return enc;
}

int run_probe(const std::string& ckpt_path, const std::string& train_corpus,
              const std::string& eval_corpus, const std::string& emb_path,
              const tae::ProbeConfig& pcfg, const std::string& out_path) {
  LoadedRun train_run = load_run(ckpt_path, train_corpus, emb_path);
  LoadedRun eval_run = load_run(ckpt_path, eval_corpus, emb_path);

  auto gather = [](const LoadedRun& run, std::vector<tae::Tensor>& enc, std::vector<int>& labels) {
    std::size_t skipped = 0;
    for (const tae::EmbeddedDoc& doc : run.embedded) {
      if (!doc.label) {
        ++skipped;
        continue;
      }
      enc.push_back(tae::induce_document(run.ckpt.params, run.mcfg, doc.sentences).doc_h);
      labels.push_back(*doc.label);
    }
    return skipped;
  };
  std::vector<tae::Tensor> train_enc, eval_enc;
  std::vector<int> train_labels, eval_labels;
  std::size_t skipped = gather(train_run, train_enc, train_labels);
  skipped += gather(eval_run, eval_enc, eval_labels);
  if (train_labels.empty()) throw std::runtime_error("no labeled documents in " + train_corpus);
  if (eval_labels.empty()) throw std::runtime_error("no labeled documents in " + eval_corpus);

  tae::ProbeModel model = tae::probe_train(train_enc, train_labels, pcfg);
  double accuracy = tae::probe_eval(model, eval_enc, eval_labels);

  json report{{"command", "probe"},
              {"checkpoint", ckpt_path},
              {"train_corpus", train_corpus},
              {"eval_corpus", eval_corpus},
              {"embeddings", emb_path},
              {"learning_rate", pcfg.learning_rate},
              {"batch_size", pcfg.batch_size},
              {"epochs", pcfg.epochs},
              {"seed", pcfg.seed},
              {"train_documents", train_labels.size()},
              {"eval_documents", eval_labels.size()},
              {"skipped_unlabeled", skipped},
              {"probe_accuracy", accuracy},
              {"majority_class", tae::majority_class(eval_labels)},
              {"majority_accuracy", tae::majority_accuracy(eval_labels)}};
  write_report(out_path, report);
  return 0;
}

int run_nearest(const std::string& ckpt_path, const std::string& corpus_path,
                const std::string& emb_path, const std::string& query, std::size_t k,
                const std::string& out_path) {
  LoadedRun run = load_run(ckpt_path, corpus_path, emb_path);
  tae::RetrievalResult result = tae::nearest_documents(query, encode_all(run), k);

  auto to_json = [](const std::vector<tae::Neighbor>& side) {
    json arr = json::array();
    for (const auto& n : side)
      arr.push_back({{"doc_id", n.doc_id},
                     {"similarity", std::round(n.similarity * 1e4) / 1e4}});
    return arr;
  };
  json report{{"command", "nearest"},
              {"checkpoint", ckpt_path},
              {"corpus", corpus_path},
              {"embeddings", emb_path},
              {"query", query},
              {"k", k},
              {"most_similar", to_json(result.most_similar)},
              {"most_different", to_json(result.most_different)},
              {"warnings", result.warnings}};
  write_report(out_path, report);
  return 0;
}

// Finite-difference verification of the building blocks at small dimensions.
int run_grad_check(std::size_t hidden, std::size_t emb_dim, double tol, double step,
                   std::uint64_t seed) {
  tae::ModelConfig mcfg{hidden, emb_dim, true};
  tae::ParamStore store = tae::init_params(mcfg, seed);
  tae::SplitMix64 rng(tae::mix_seed(seed, 17));
  auto random_vec = [&](std::size_t n) {
    tae::Tensor t = tae::Tensor::zeros({n});
    for (double& x : t.data) x = rng.uniform(-1.0, 1.0);
    return t;
  };

  const std::size_t H = hidden, E = emb_dim;
  std::vector<std::pair<std::string, tae::GradCheckReport>> results;

  {
    // compose: parameters are [enc_W, enc_b, c_l, h_l, c_r, h_r].
    tae::Tensor target = random_vec(H);
    std::vector<tae::Tensor> params = {store.at("enc_W").value, store.at("enc_b").value,
                                       random_vec(H), random_vec(H), random_vec(H), random_vec(H)};
    auto f = [&](tae::Tape& tape, const std::vector<tae::Var>& p) {
      tae::LevelVars vars;
      vars.enc_W = p[0];
      vars.enc_b = p[1];
      tae::NodeState parent =
          tae::compose(tape, {p[2], p[3]}, {p[4], p[5]}, vars);
      return tape.mse(parent.h, tape.constant(target));
    };
    results.emplace_back("compose", tae::grad_check(f, params, tol, step));
  }
  {
    // split: parameters are [dec_W, dec_b, c_p, h_p].
    tae::Tensor t_l = random_vec(H), t_r = random_vec(H);
    std::vector<tae::Tensor> params = {store.at("dec_W").value, store.at("dec_b").value,
                                       random_vec(H), random_vec(H)};
    auto f = [&](tae::Tape& tape, const std::vector<tae::Var>& p) {
      tae::LevelVars vars;
      vars.dec_W = p[0];
      vars.dec_b = p[1];
      auto [l, r] = tae::split(tape, {p[2], p[3]}, vars);
      return tape.add(tape.mse(l.h, tape.constant(t_l)), tape.mse(r.h, tape.constant(t_r)));
    };
    results.emplace_back("split", tae::grad_check(f, params, tol, step));
  }
  {
    // leaf transform: parameters are [leaf_W, leaf_b, embedding].
    tae::Tensor t_c = random_vec(H), t_h = random_vec(H);
    std::vector<tae::Tensor> params = {store.at("leaf_W").value, store.at("leaf_b").value,
                                       random_vec(E)};
    auto f = [&](tae::Tape& tape, const std::vector<tae::Var>& p) {
      tae::ModelVars vars;
      vars.leaf_W = p[0];
      vars.leaf_b = p[1];
      tae::NodeState s = tae::leaf_transform(tape, p[2], vars);
      return tape.add(tape.mse(s.c, tape.constant(t_c)), tape.mse(s.h, tape.constant(t_h)));
    };
    results.emplace_back("leaf_transform", tae::grad_check(f, params, tol, step));
  }
  {
    // output projection + reconstruction loss: parameters are [proj_W, proj_b, h].
    tae::Tensor input = random_vec(E);
    std::vector<tae::Tensor> params = {store.at("proj_W").value, store.at("proj_b").value,
                                       random_vec(H)};
    auto f = [&](tae::Tape& tape, const std::vector<tae::Var>& p) {
      tae::Var out = tape.add(tape.matvec(p[0], p[2]), p[1]);
      std::vector<tae::Var> ins = {tape.constant(input)};
      std::vector<tae::Var> outs = {out};
      return tae::reconstruction_loss(tape, ins, outs);
    };
    results.emplace_back("projection_loss", tae::grad_check(f, params, tol, step));
  }
  {
    // Relaxed end-to-end pass: both selection levels, sentence decoding, and
    // projection, with the scorer receiving gradient through the softmax
    // weights (the straight-through surrogate's backward path). The
    // document-level reconstruction term is excluded here because its
    // targets are detached by design — a stop-gradient that central finite
    // differences cannot honor.
    std::vector<std::vector<tae::Tensor>> sents = {{random_vec(E), random_vec(E), random_vec(E)},
                                                   {random_vec(E), random_vec(E)}};
    tae::Tensor doc_target = random_vec(H);
    std::vector<tae::Tensor> params;
    for (const auto& e : store.entries) params.push_back(e.value);
    auto f = [&](tae::Tape& tape, const std::vector<tae::Var>& p) {
      tae::BoundParams bound;
      bound.all = p;
      bound.vars.leaf_W = p[0];
      bound.vars.leaf_b = p[1];
      bound.vars.sent = {p[2], p[3], p[4], p[5], p[6], p[7]};
      bound.vars.doc = bound.vars.sent;
      bound.vars.proj_W = p[8];
      bound.vars.proj_b = p[9];

      std::vector<tae::Var> clean;
      std::vector<std::vector<tae::NodeState>> leaves(sents.size());
      for (std::size_t s = 0; s < sents.size(); ++s)
        for (const tae::Tensor& emb : sents[s]) {
          tae::Var e = tape.constant(emb);
          clean.push_back(e);
          leaves[s].push_back(tae::leaf_transform(tape, e, bound.vars));
        }
      tae::GumbelConfig gcfg;
      gcfg.straight_through = false;
      tae::SplitMix64 noise(0);
      tae::DocumentEncoding enc = tae::encode_document(tape, leaves, bound.vars, gcfg, noise);

      std::vector<tae::Var> recon;
      for (std::size_t s = 0; s < enc.sentence_roots.size(); ++s)
        for (const tae::NodeState& leaf : tae::decode_tree(
                 tape, enc.sentence_roots[s], enc.sentence_traces[s], bound.vars.sent))
          recon.push_back(tape.add(tape.matvec(bound.vars.proj_W, leaf.h), bound.vars.proj_b));
      tae::Var loss = tae::reconstruction_loss(tape, clean, recon);
      return tape.add(loss, tape.mse(enc.doc_root.h, tape.constant(doc_target)));
    };
    results.emplace_back("relaxed_end_to_end", tae::grad_check(f, params, tol, step));
  }

  bool all_pass = true;
  for (const auto& [name, report] : results) {
    all_pass = all_pass && report.pass;
    std::cout << (report.pass ? "PASS" : "FAIL") << " " << name
              << " max_rel_error=" << report.max_rel_error << " tol=" << report.tol << "\n";
  }
  std::cout << (all_pass ? "all gradient checks passed" : "gradient checks FAILED") << "\n";
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tree-autoencoder discourse induction"};
  app.require_subcommand(1);
  int rc = 0;

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint + log");
  auto train_args = std::make_shared<TrainArgs>();
  auto train_overlay = std::make_shared<Overlay>(train_cmd);
  add_train_options(train_cmd, *train_overlay, *train_args);
  train_cmd->callback([&rc, train_args, train_overlay] {
    train_overlay->apply(train_args->config);
    rc = run_train(*train_args);
  });

  // induce
  auto* induce_cmd = app.add_subcommand("induce", "write induced trees for a corpus");
  auto induce_args = std::make_shared<std::array<std::string, 5>>();
  auto induce_overlay = std::make_shared<Overlay>(induce_cmd);
  {
    auto& a = *induce_args;
    induce_cmd->add_option("--checkpoint", a[0], "model checkpoint")->required();
    induce_cmd->add_option("--corpus", a[1], "corpus to parse")->required();
    induce_cmd->add_option("--embeddings", a[2], "word embedding file")->required();
    induce_cmd->add_option("--out", a[3], "output tree file")->required();
    induce_cmd->add_option("--config", a[4], "key=value config file (command line wins)");
    induce_overlay->bind("checkpoint", a[0]);
    induce_overlay->bind("corpus", a[1]);
    induce_overlay->bind("embeddings", a[2]);
    induce_overlay->bind("out", a[3]);
  }
  induce_cmd->callback([&rc, induce_args, induce_overlay] {
    const auto& a = *induce_args;
    induce_overlay->apply(a[4]);
    rc = run_induce(a[0], a[1], a[2], a[3]);
  });

  // eval-structure
  auto* eval_cmd = app.add_subcommand("eval-structure", "score a tree file against gold trees");
  struct EvalArgs {
    std::string pred, gold, out, config;
    bool drop_root = false;
  };
  auto eval_args = std::make_shared<EvalArgs>();
  auto eval_overlay = std::make_shared<Overlay>(eval_cmd);
  {
    auto& a = *eval_args;
    eval_cmd->add_option("--pred", a.pred, "predicted tree file")->required();
    eval_cmd->add_option("--gold", a.gold, "gold tree file")->required();
    eval_cmd->add_option("--out", a.out, "report path (default stdout)");
    eval_cmd->add_flag("--drop_root", a.drop_root, "exclude the root span from both sides");
    eval_cmd->add_option("--config", a.config, "key=value config file (command line wins)");
    eval_overlay->bind("pred", a.pred);
    eval_overlay->bind("gold", a.gold);
    eval_overlay->bind("out", a.out);
    eval_overlay->bind("drop_root", a.drop_root);
  }
  eval_cmd->callback([&rc, eval_args, eval_overlay] {
    const auto& a = *eval_args;
    eval_overlay->apply(a.config);
    rc = run_eval_structure(a.pred, a.gold, a.drop_root, a.out);
  });

  // baseline
  auto* base_cmd = app.add_subcommand("baseline", "write branching-baseline trees for a corpus");
  struct BaselineArgs {
    std::string corpus, kind, out, config;
    std::size_t max_edus = 150, max_words = 50;
  };
  auto base_args = std::make_shared<BaselineArgs>();
  auto base_overlay = std::make_shared<Overlay>(base_cmd);
  {
    auto& a = *base_args;
    base_cmd->add_option("--corpus", a.corpus, "corpus file")->required();
    base_cmd->add_option("--kind", a.kind, "left, right, hier-left, or hier-right")->required();
    base_cmd->add_option("--out", a.out, "output tree file")->required();
    base_cmd->add_option("--max_edus", a.max_edus, "EDU cap per document");
    base_cmd->add_option("--max_words", a.max_words, "token cap per EDU");
    base_cmd->add_option("--config", a.config, "key=value config file (command line wins)");
    base_overlay->bind("corpus", a.corpus);
    base_overlay->bind("kind", a.kind);
    base_overlay->bind("out", a.out);
    base_overlay->bind("max_edus", a.max_edus);
    base_overlay->bind("max_words", a.max_words);
  }
  base_cmd->callback([&rc, base_args, base_overlay] {
    const auto& a = *base_args;
    base_overlay->apply(a.config);
    rc = run_baseline(a.corpus, a.kind, a.max_edus, a.max_words, a.out);
  });

  // probe
  auto* probe_cmd =
      app.add_subcommand("probe", "train a sentiment probe on frozen document encodings");
  struct ProbeArgs {
    std::string checkpoint, train_corpus, eval_corpus, embeddings, out, config;
    tae::ProbeConfig pcfg;
  };
  auto probe_args = std::make_shared<ProbeArgs>();
  auto probe_overlay = std::make_shared<Overlay>(probe_cmd);
  {
    auto& a = *probe_args;
    probe_cmd->add_option("--checkpoint", a.checkpoint, "model checkpoint")->required();
    probe_cmd->add_option("--train_corpus", a.train_corpus, "labeled training corpus")->required();
    probe_cmd->add_option("--eval_corpus", a.eval_corpus, "labeled evaluation corpus")->required();
    probe_cmd->add_option("--embeddings", a.embeddings, "word embedding file")->required();
    probe_cmd->add_option("--out", a.out, "report path (default stdout)");
    probe_cmd->add_option("--learning_rate", a.pcfg.learning_rate, "probe Adam learning rate");
    probe_cmd->add_option("--batch_size", a.pcfg.batch_size, "probe mini-batch size");
    probe_cmd->add_option("--epochs", a.pcfg.epochs, "probe epochs");
    probe_cmd->add_option("--seed", a.pcfg.seed, "probe seed");
    probe_cmd->add_option("--config", a.config, "key=value config file (command line wins)");
    probe_overlay->bind("checkpoint", a.checkpoint);
    probe_overlay->bind("train_corpus", a.train_corpus);
    probe_overlay->bind("eval_corpus", a.eval_corpus);
    probe_overlay->bind("embeddings", a.embeddings);
    probe_overlay->bind("out", a.out);
    probe_overlay->bind("learning_rate", a.pcfg.learning_rate);
    probe_overlay->bind("batch_size", a.pcfg.batch_size);
    probe_overlay->bind("epochs", a.pcfg.epochs);
    probe_overlay->bind("seed", a.pcfg.seed);
  }
  probe_cmd->callback([&rc, probe_args, probe_overlay] {
    const auto& a = *probe_args;
    probe_overlay->apply(a.config);
    rc = run_probe(a.checkpoint, a.train_corpus, a.eval_corpus, a.embeddings, a.pcfg, a.out);
  });

  // nearest
  auto* near_cmd = app.add_subcommand("nearest", "cosine retrieval over document encodings");
  struct NearArgs {
    std::string checkpoint, corpus, embeddings, query, out, config;
    std::size_t k = 5;
  };
  auto near_args = std::make_shared<NearArgs>();
  auto near_overlay = std::make_shared<Overlay>(near_cmd);
  {
    auto& a = *near_args;
    near_cmd->add_option("--checkpoint", a.checkpoint, "model checkpoint")->required();
    near_cmd->add_option("--corpus", a.corpus, "corpus file")->required();
    near_cmd->add_option("--embeddings", a.embeddings, "word embedding file")->required();
    near_cmd->add_option("--query", a.query, "query doc_id")->required();
    near_cmd->add_option("--k", a.k, "results per direction");
    near_cmd->add_option("--out", a.out, "report path (default stdout)");
    near_cmd->add_option("--config", a.config, "key=value config file (command line wins)");
    near_overlay->bind("checkpoint", a.checkpoint);
    near_overlay->bind("corpus", a.corpus);
    near_overlay->bind("embeddings", a.embeddings);
    near_overlay->bind("query", a.query);
    near_overlay->bind("k", a.k);
    near_overlay->bind("out", a.out);
  }
  near_cmd->callback([&rc, near_args, near_overlay] {
    const auto& a = *near_args;
    near_overlay->apply(a.config);
    rc = run_nearest(a.checkpoint, a.corpus, a.embeddings, a.query, a.k, a.out);
  });

  // grad-check
  auto* grad_cmd = app.add_subcommand("grad-check", "finite-difference gradient verification");
  struct GradArgs {
    std::size_t hidden = 4, emb_dim = 6;
    double tol = 1e-4, step = 1e-5;
    std::uint64_t seed = 1;
    std::string config;
  };
  auto grad_args = std::make_shared<GradArgs>();
  auto grad_overlay = std::make_shared<Overlay>(grad_cmd);
  {
    auto& a = *grad_args;
    grad_cmd->add_option("--hidden", a.hidden, "hidden dimension for the checks");
    grad_cmd->add_option("--emb_dim", a.emb_dim, "embedding dimension for the checks");
    grad_cmd->add_option("--tol", a.tol, "relative-error tolerance");
    grad_cmd->add_option("--step", a.step, "finite-difference step");
    grad_cmd->add_option("--seed", a.seed, "random seed");
    grad_cmd->add_option("--config", a.config, "key=value config file (command line wins)");
    grad_overlay->bind("hidden", a.hidden);
    grad_overlay->bind("emb_dim", a.emb_dim);
    grad_overlay->bind("tol", a.tol);
    grad_overlay->bind("step", a.step);
    grad_overlay->bind("seed", a.seed);
  }
  grad_cmd->callback([&rc, grad_args, grad_overlay] {
    const auto& a = *grad_args;
    grad_overlay->apply(a.config);
    rc = run_grad_check(a.hidden, a.emb_dim, a.tol, a.step, a.seed);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
