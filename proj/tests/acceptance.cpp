// Acceptance suite: one self-contained check per shipping criterion, printed
// as a PASS/FAIL line with the measured numbers. Exit code is the number of
// failed criteria. Two checks consult optional licensed data through
// environment variables and fall back to exact synthetic fixtures:
//   TAE_RSTDT_CORPUS / TAE_RSTDT_GOLD  — discourse treebank in our formats
//   TAE_YELP_LABELS                    — one integer rating per line

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "support/synthetic.hpp"
#include "tae/corpus.hpp"
#include "tae/evaluation.hpp"
#include "tae/grad_check.hpp"
#include "tae/model.hpp"
#include "tae/training.hpp"
#include "tae/tree.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(TAE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

tae::EmbeddingTable table_of(const synth::Corpus& c) {
  tae::EmbeddingTable t;
  t.dim = c.emb_dim;
  t.unk.assign(c.emb_dim, 0.0);
  for (const auto& [tok, vec] : c.embeddings) t.vectors[tok] = vec;
  return t;
}

tae::Vocab vocab_of(const synth::Corpus& c) {
  std::vector<std::string> toks;
  for (const auto& [tok, vec] : c.embeddings) toks.push_back(tok);
  return tae::Vocab::from_tokens(toks);
}

bool entries_identical(const tae::ParamEntry& a, const tae::ParamEntry& b) {
  return a.name == b.name && a.value.data == b.value.data && a.m.data == b.m.data &&
         a.v.data == b.v.data && a.step == b.step;
}

tae::Tensor random_vec(std::size_t n, tae::SplitMix64& rng) {
  tae::Tensor t = tae::Tensor::zeros({n});
  for (double& x : t.data) x = rng.uniform(-1.0, 1.0);
  return t;
}

// --- criterion 1: analytic gradients vs central finite differences --------

Result criterion_gradients() {
  const std::size_t H = 8, E = 10;
  const double tol = 1e-4, step = 1e-5;
  tae::ModelConfig mcfg{H, E, true};
  tae::ParamStore store = tae::init_params(mcfg, 42);
  tae::SplitMix64 draw(4242);

  std::vector<std::pair<std::string, tae::GradCheckReport>> reports;

  {
    tae::Tensor target = random_vec(H, draw);
    std::vector<tae::Tensor> params = {store.at("enc_W").value, store.at("enc_b").value,
                                       random_vec(H, draw), random_vec(H, draw),
                                       random_vec(H, draw), random_vec(H, draw)};
    reports.emplace_back("compose", tae::grad_check(
        [&](tae::Tape& tape, const std::vector<tae::Var>& p) {
          tae::LevelVars vars;
          vars.enc_W = p[0];
          vars.enc_b = p[1];
          tae::NodeState parent = tae::compose(tape, {p[2], p[3]}, {p[4], p[5]}, vars);
          return tape.mse(parent.h, tape.constant(target));
        },
        params, tol, step));
  }
  {
    tae::Tensor t_l = random_vec(H, draw), t_r = random_vec(H, draw);
    std::vector<tae::Tensor> params = {store.at("dec_W").value, store.at("dec_b").value,
                                       random_vec(H, draw), random_vec(H, draw)};
    reports.emplace_back("split", tae::grad_check(
        [&](tae::Tape& tape, const std::vector<tae::Var>& p) {
          tae::LevelVars vars;
          vars.dec_W = p[0];
          vars.dec_b = p[1];
          auto [l, r] = tae::split(tape, {p[2], p[3]}, vars);
          return tape.add(tape.mse(l.h, tape.constant(t_l)), tape.mse(r.h, tape.constant(t_r)));
        },
        params, tol, step));
  }
  {
    tae::Tensor t_c = random_vec(H, draw), t_h = random_vec(H, draw);
    std::vector<tae::Tensor> params = {store.at("leaf_W").value, store.at("leaf_b").value,
                                       random_vec(E, draw)};
    reports.emplace_back("leaf_transform", tae::grad_check(
        [&](tae::Tape& tape, const std::vector<tae::Var>& p) {
          tae::ModelVars vars;
          vars.leaf_W = p[0];
          vars.leaf_b = p[1];
          tae::NodeState s = tae::leaf_transform(tape, p[2], vars);
          return tape.add(tape.mse(s.c, tape.constant(t_c)), tape.mse(s.h, tape.constant(t_h)));
        },
        params, tol, step));
  }
  {
    tae::Tensor target = random_vec(E, draw);
    std::vector<tae::Tensor> params = {store.at("proj_W").value, store.at("proj_b").value,
                                       random_vec(H, draw)};
    reports.emplace_back("projection", tae::grad_check(
        [&](tae::Tape& tape, const std::vector<tae::Var>& p) {
          tae::Var out = tape.add(tape.matvec(p[0], p[2]), p[1]);
          return tape.mse(out, tape.constant(target));
        },
        params, tol, step));
  }
  {
    // Reconstruction objective with gradient flowing into inputs and outputs.
    std::vector<tae::Tensor> params;
    for (int i = 0; i < 6; ++i) params.push_back(random_vec(E, draw));
    reports.emplace_back("reconstruction_loss", tae::grad_check(
        [&](tae::Tape& tape, const std::vector<tae::Var>& p) {
          std::vector<tae::Var> ins(p.begin(), p.begin() + 3);
          std::vector<tae::Var> outs(p.begin() + 3, p.end());
          return tae::reconstruction_loss(tape, ins, outs);
        },
        params, tol, step));
  }

  bool pass = true;
  double worst = 0.0;
  std::string worst_name = "-";
  for (const auto& [name, rep] : reports) {
    pass = pass && rep.pass;
    if (rep.max_rel_error > worst) {
      worst = rep.max_rel_error;
      worst_name = name;
    }
  }
  int cli = run_cli("grad-check --hidden 8 --emb_dim 10 --tol 1e-4 --step 1e-5 --seed 7");
  pass = pass && cli == 0;
  return {pass, fmt("5 blocks at H=%zu, worst rel err %.2e (%s), tol %.0e; cli grad-check exit %d",
                    H, worst, worst_name.c_str(), tol, cli)};
}

// --- criterion 2: span metric vs brute-force enumeration ------------------

Result criterion_metric_oracle() {
  std::size_t trees_checked = 0;
  for (int n = 2; n <= 6; ++n) {
    for (const auto& t : oracle::all_trees(n)) {
      ++trees_checked;
      tae::BinaryTree parsed = tae::parse_tree(tae::serialize_tree(t));
      if (tae::tree_spans(parsed, true) != oracle::spans(t, true)) return {false, "span mismatch"};
      if (tae::tree_spans(parsed, false) != oracle::spans(t, false))
        return {false, "span mismatch with root dropped"};
    }
  }

  tae::SplitMix64 rng(2024);
  for (int pair = 0; pair < 100; ++pair) {
    std::map<std::string, tae::BinaryTree> pred, gold;
    int docs = 1 + static_cast<int>(rng.below(5));
    for (int d = 0; d < docs; ++d) {
      int n = 2 + static_cast<int>(rng.below(5));
      pred.emplace("d" + std::to_string(d), oracle::random_tree(n, rng));
      gold.emplace("d" + std::to_string(d), oracle::random_tree(n, rng));
    }
    for (bool root : {true, false}) {
      double lib = tae::micro_precision(pred, gold, root).micro_precision;
      double ref = oracle::micro_precision(pred, gold, root);
      if (lib != ref)
        return {false, fmt("pair %d (root=%d): %.17g != %.17g", pair, int(root), lib, ref)};
    }
  }
  return {true, fmt("spans exact on all %zu trees with n <= 6; micro-precision exact on 100 "
                    "random pred/gold pairs, both root conventions",
                    trees_checked)};
}

// --- criterion 3: chain baselines ------------------------------------------

Result criterion_baselines() {
  const char* corpus_env = std::getenv("TAE_RSTDT_CORPUS");
  const char* gold_env = std::getenv("TAE_RSTDT_GOLD");
  if (corpus_env && gold_env) {
    std::vector<tae::Document> docs = tae::load_documents(corpus_env, {});
    tae::GoldLoadResult gold = tae::load_gold_trees(gold_env);
    const double targets[4] = {53.73, 54.64, 70.58, 74.37};
    const tae::BaselineKind kinds[4] = {tae::BaselineKind::kLeft, tae::BaselineKind::kRight,
                                        tae::BaselineKind::kHierLeft,
                                        tae::BaselineKind::kHierRight};
    for (bool root : {true, false}) {
      bool all_close = true;
      std::string scores;
      for (int i = 0; i < 4; ++i) {
        std::map<std::string, tae::BinaryTree> pred;
        for (const auto& doc : docs)
          pred.emplace(doc.doc_id, tae::baseline_tree(kinds[i], doc.sentence_sizes()));
        double got = tae::micro_precision(pred, gold.trees, root).micro_precision;
        scores += fmt("%s%.2f/%.2f", i ? " " : "", got, targets[i]);
        all_close = all_close && std::abs(got - targets[i]) <= 0.5;
      }
      if (all_close)
        return {true, fmt("licensed treebank, root %s: %s (each within 0.5)",
                          root ? "counted" : "dropped", scores.c_str())};
      if (!root) return {false, "licensed treebank: no root convention puts all four within 0.5"};
    }
  }

  synth::BaselineFixture fx = synth::baseline_fixture();
  auto score = [&](tae::BaselineKind kind) {
    std::map<std::string, tae::BinaryTree> pred;
    for (const auto& doc : fx.docs)
      pred.emplace(doc.doc_id, tae::baseline_tree(kind, doc.sentence_sizes()));
    return tae::micro_precision(pred, fx.gold).micro_precision;
  };
  double lb = score(tae::BaselineKind::kLeft), rb = score(tae::BaselineKind::kRight);
  double hl = score(tae::BaselineKind::kHierLeft), hr = score(tae::BaselineKind::kHierRight);
  bool pass = lb == fx.left && rb == fx.right && hl == fx.hier_left && hr == fx.hier_right;
  return {pass, fmt("synthetic treebank (licensed corpus not provided): LB %.4f RB %.4f "
                    "HierLB %.4f HierRB %.4f, all equal to hand-derived values exactly",
                    lb, rb, hl, hr)};
}

// --- criterion 4: induction beats random trees on a planted corpus --------

Result criterion_planted_induction() {
  auto start = std::chrono::steady_clock::now();
  synth::Corpus corpus = synth::planted_corpus(500, 8101, 16);
  std::vector<tae::EmbeddedDoc> all =
      tae::embed_corpus(corpus.docs, table_of(corpus), vocab_of(corpus));

  tae::TrainConfig cfg;
  cfg.hidden = 16;
  cfg.threads = 1;
  tae::ModelConfig mcfg{cfg.hidden, corpus.emb_dim, cfg.share_levels};

  double expected = tae::expected_random_micro_precision(corpus.gold);
  std::vector<double> scores;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    cfg.seed = seed;
    // Hold out a slice for model selection, induce over the full corpus.
    tae::FitResult fit = tae::fit(std::span(all).subspan(36), std::span(all).first(36), cfg, mcfg);
    std::map<std::string, tae::BinaryTree> pred;
    for (const tae::EmbeddedDoc& doc : all)
      pred.emplace(doc.doc_id, tae::induce_document(fit.best_params, mcfg, doc.sentences).tree);
    scores.push_back(tae::micro_precision(pred, corpus.gold).micro_precision);
  }
  double mean = (scores[0] + scores[1] + scores[2]) / 3.0;
  double elapsed = seconds_since(start);
  bool pass = mean >= expected + 10.0 && elapsed <= 1800.0;
  return {pass, fmt("500 docs, 3 seeds: micro %.2f/%.2f/%.2f (mean %.2f) vs expected random "
                    "%.2f, margin %.2f (need >= 10); %.0f s",
                    scores[0], scores[1], scores[2], mean, expected, mean - expected, elapsed)};
}

// --- criterion 5: loss halves under the phase-masked, clipped trainer -----

Result criterion_training_sanity() {
  synth::Corpus corpus = synth::planted_corpus(50, 515, 16);
  tae::SplitResult split = tae::stratified_dev_split(corpus.docs, 10);
  tae::EmbeddingTable table = table_of(corpus);
  tae::Vocab vocab = vocab_of(corpus);
  std::vector<tae::EmbeddedDoc> train = tae::embed_corpus(split.train, table, vocab);
  std::vector<tae::EmbeddedDoc> dev = tae::embed_corpus(split.dev, table, vocab);

  tae::TrainConfig cfg;
  cfg.hidden = 12;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 5;
  cfg.dropout = 0.0;
  cfg.seed = 7;
  tae::ModelConfig mcfg{cfg.hidden, corpus.emb_dim, cfg.share_levels};

  // Drive the epochs by hand, mirroring fit's schedule, so the masking and
  // clipping invariants can be asserted against a snapshot every epoch.
  tae::ParamStore params = tae::init_params(mcfg, cfg.seed);
  double init_dev = tae::eval_loss(dev, params, mcfg);
  double best_dev = init_dev;
  std::size_t structure_epochs = 0;
  double tau = cfg.tau_start;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    bool structure = (epoch % 2 == 1) == cfg.structure_first;
    tae::Phase phase = structure ? tae::Phase::kStructure : tae::Phase::kRepresentation;
    if (structure) tau = tae::anneal_tau(structure_epochs++, cfg);

    std::vector<tae::ParamEntry> before = params.entries;
    tae::EpochStats stats = tae::train_epoch(train, params, phase, tau, epoch - 1, cfg, mcfg);

    if (stats.max_clipped_grad_norm > cfg.grad_clip_norm + 1e-9)
      return {false, fmt("epoch %zu: clipped grad norm %.12f exceeds %.1f", epoch,
                         stats.max_clipped_grad_norm, cfg.grad_clip_norm)};
    for (std::size_t i = 0; i < params.entries.size(); ++i) {
      const tae::ParamEntry& now = params.entries[i];
      bool active = tae::is_structure_param(now.name) == structure;
      if (!active && !entries_identical(now, before[i]))
        return {false, fmt("epoch %zu (%s): frozen parameter %s changed", epoch,
                           tae::phase_name(phase), now.name.c_str())};
      if (active && now.step != before[i].step + stats.steps)
        return {false, fmt("epoch %zu: %s stepped %llu times, expected %zu", epoch,
                           now.name.c_str(),
                           static_cast<unsigned long long>(now.step - before[i].step),
                           stats.steps)};
    }
    best_dev = std::min(best_dev, tae::eval_loss(dev, params, mcfg));
  }

  bool pass = best_dev <= 0.5 * init_dev;
  return {pass, fmt("50-doc corpus, 40 epochs: dev loss %.6f -> best %.6f (%.1f%% of start, "
                    "need <= 50%%); masking and clip bound held every epoch",
                    init_dev, best_dev, 100.0 * best_dev / init_dev)};
}

// --- criterion 6: exact temperature schedule -------------------------------

Result criterion_annealing() {
  tae::TrainConfig cfg;  // tau 5 -> 1 over 3 steps
  const double want[4] = {5.0, 11.0 / 3.0, 7.0 / 3.0, 1.0};
  for (std::size_t k = 0; k < 4; ++k)
    if (tae::anneal_tau(k, cfg) != want[k])
      return {false, fmt("anneal_tau(%zu) = %.17g, want %.17g", k, tae::anneal_tau(k, cfg),
                         want[k])};
  if (tae::anneal_tau(9, cfg) != 1.0) return {false, "tau does not hold at tau_end"};

  // The same doubles must come out of a real training run's Structure epochs.
  synth::Corpus corpus = synth::planted_corpus(6, 33, 8);
  std::vector<tae::EmbeddedDoc> docs =
      tae::embed_corpus(corpus.docs, table_of(corpus), vocab_of(corpus));
  tae::TrainConfig run = cfg;
  run.hidden = 4;
  run.epochs = 8;
  tae::ModelConfig mcfg{run.hidden, corpus.emb_dim, run.share_levels};
  tae::FitResult fit = tae::fit(docs, {}, run, mcfg);
  std::vector<double> taus;
  for (const tae::EpochRecord& rec : fit.log)
    if (rec.phase == tae::Phase::kStructure) taus.push_back(rec.tau);
  if (taus.size() != 4) return {false, fmt("expected 4 structure epochs, saw %zu", taus.size())};
  for (std::size_t k = 0; k < 4; ++k)
    if (taus[k] != want[k])
      return {false, fmt("structure epoch %zu ran at tau %.17g, want %.17g", k + 1, taus[k],
                         want[k])};
  return {true, "tau exactly 5, 11/3, 7/3, 1 over the first four structure epochs, "
                "from the formula and from a live fit log"};
}

// --- criterion 7: byte-identical reruns ------------------------------------

Result criterion_determinism() {
  synth::Corpus corpus = synth::planted_corpus(20, 881, 10);
  fs::path dir = synth::temp_dir("acceptance_determinism");
  fs::path corpus_path = dir / "corpus.jsonl", emb_path = dir / "vectors.txt";
  synth::write_corpus_file(corpus_path, corpus.docs);
  synth::write_embeddings_file(emb_path, corpus.embeddings);
  fs::path cfg = dir / "run.cfg";
  std::ofstream(cfg) << "hidden = 8\nepochs = 4\nseed = 13\nbatch_size = 5\nthreads = 2\n";

  // Logs and checkpoints embed the resolved config (output paths included),
  // so identical invocations reuse one --out; artifacts are moved aside
  // between runs.
  fs::path out = dir / "run";
  auto train_once = [&](const std::string& tag) {
    if (run_cli("train --corpus " + corpus_path.string() + " --embeddings " + emb_path.string() +
                " --config " + cfg.string() + " --out " + out.string()) != 0)
      throw std::runtime_error("train failed");
    fs::rename(out / "model.ckpt", dir / (tag + ".ckpt"));
    fs::rename(out / "train_log.jsonl", dir / (tag + ".jsonl"));
  };
  train_once("first");
  train_once("second");
  bool ckpt_same = slurp(dir / "first.ckpt") == slurp(dir / "second.ckpt");
  bool log_same = slurp(dir / "first.jsonl") == slurp(dir / "second.jsonl");

  fs::path trees = dir / "trees.txt";
  auto induce_once = [&](const std::string& tag) {
    if (run_cli("induce --checkpoint " + (dir / "first.ckpt").string() + " --corpus " +
                corpus_path.string() + " --embeddings " + emb_path.string() + " --out " +
                trees.string()) != 0)
      throw std::runtime_error("induce failed");
    fs::rename(trees, dir / (tag + ".trees"));
  };
  induce_once("t1");
  induce_once("t2");
  bool trees_same = slurp(dir / "t1.trees") == slurp(dir / "t2.trees");

  bool pass = ckpt_same && log_same && trees_same;
  return {pass, fmt("repeated train/induce runs: checkpoint %s, log %s, trees %s",
                    ckpt_same ? "identical" : "DIFFER", log_same ? "identical" : "DIFFER",
                    trees_same ? "identical" : "DIFFER")};
}

// --- criterion 8: probe protocol --------------------------------------------

Result criterion_probe() {
  std::string majority_note;
  if (const char* labels_env = std::getenv("TAE_YELP_LABELS")) {
    std::ifstream in(labels_env);
    if (!in) return {false, std::string("cannot read ") + labels_env};
    std::vector<int> labels;
    for (int v; in >> v;) labels.push_back(v);
    double acc = 100.0 * tae::majority_accuracy(labels);
    if (std::abs(acc - 35.63) > 0.005)
      return {false, fmt("licensed test labels: majority accuracy %.4f%%, want 35.63%%", acc)};
    majority_note = fmt("licensed labels: majority %.2f%%", acc);
  } else {
    std::vector<int> labels;
    auto push = [&](int cls, int n) { labels.insert(labels.end(), n, cls); };
    push(1, 2000);
    push(2, 3563);
    push(3, 2000);
    push(4, 1800);
    push(5, 637);
    double acc = 100.0 * tae::majority_accuracy(labels);
    if (acc != 100.0 * (3563.0 / 10000.0) || tae::majority_class(labels) != 2)
      return {false, fmt("constructed 10000-label multiset scored %.4f%%", acc)};
    majority_note = fmt("constructed label multiset: majority exactly %.2f%%", acc);
  }

  synth::SeparableEncodings data = synth::separable_encodings(200, 40, 16, 9);
  std::vector<tae::Tensor> train_x, eval_x;
  std::vector<int> train_y, eval_y;
  for (const auto& [x, y] : data.train) {
    train_x.push_back(x);
    train_y.push_back(y);
  }
  for (const auto& [x, y] : data.eval) {
    eval_x.push_back(x);
    eval_y.push_back(y);
  }

  // The probe must not touch encoder parameters: snapshot a full store and
  // compare bit for bit afterwards.
  tae::ModelConfig mcfg{16, 16, true};
  tae::ParamStore encoder = tae::init_params(mcfg, 5);
  std::vector<tae::ParamEntry> snapshot = encoder.entries;

  tae::ProbeConfig pcfg;
  tae::ProbeModel probe = tae::probe_train(train_x, train_y, pcfg);
  double acc = tae::probe_eval(probe, eval_x, eval_y);

  bool untouched = encoder.entries.size() == snapshot.size();
  for (std::size_t i = 0; untouched && i < snapshot.size(); ++i)
    untouched = entries_identical(encoder.entries[i], snapshot[i]);

  bool pass = acc >= 0.9 && untouched;
  return {pass, fmt("%s; separable probe eval accuracy %.1f%% (need >= 90%%), encoder "
                    "parameters %s",
                    majority_note.c_str(), 100.0 * acc,
                    untouched ? "bit-unchanged" : "MODIFIED")};
}

// --- criterion 9: structural invariants over random documents --------------

Result criterion_structure_invariants() {
  const std::size_t H = 6, E = 8;
  tae::ModelConfig mcfg{H, E, true};
  tae::SplitMix64 rng(99);
  tae::ParamStore store = tae::init_params(mcfg, 1);

  std::size_t docs_checked = 0, spans_checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    if (trial % 100 == 0) store = tae::init_params(mcfg, 1 + trial);
    std::vector<std::vector<tae::Tensor>> sents(1 + rng.below(4));
    for (auto& sent : sents) {
      sent.resize(1 + rng.below(4));
      for (tae::Tensor& e : sent) e = random_vec(E, rng);
    }

    tae::InducedDocument induced = tae::induce_document(store, mcfg, sents);

    // Re-run the encoder on a tape to get the traces behind that tree.
    tae::Tape tape;
    tae::BoundParams bound = tae::bind_params(tape, store, mcfg);
    std::vector<std::vector<tae::NodeState>> states(sents.size());
    for (std::size_t s = 0; s < sents.size(); ++s)
      for (const tae::Tensor& e : sents[s])
        states[s].push_back(tae::leaf_transform(tape, tape.constant(e), bound.vars));
    tae::GumbelConfig gcfg;  // noise off, straight-through argmax
    tae::DocumentEncoding enc =
        tae::encode_document(tape, states, bound.vars, gcfg, rng);

    tae::BinaryTree full = tae::full_document_tree(enc.sentence_traces, enc.doc_trace);
    if (!tae::trees_equal(full, induced.tree))
      return {false, fmt("trial %d: induced tree differs from encoder trace replay", trial)};

    // Every sentence span must be a constituent of the document tree.
    auto spans = tae::tree_spans(full, true);
    int offset = 0;
    for (const auto& sent : sents) {
      int len = static_cast<int>(sent.size());
      if (len >= 2 && !spans.count({offset, offset + len - 1}))
        return {false, fmt("trial %d: sentence span [%d,%d] is not a constituent", trial, offset,
                           offset + len - 1)};
      offset += len;
    }

    // The decoder replays each trace in reverse; its split tree must carry
    // exactly the encoder's span set.
    std::vector<tae::MergeTrace> traces = enc.sentence_traces;
    traces.push_back(enc.doc_trace);
    for (const tae::MergeTrace& trace : traces) {
      int n = static_cast<int>(trace.leaf_count());
      auto enc_spans = tae::tree_spans(tae::tree_from_trace(trace, n), true);
      auto dec_spans = oracle::spans(oracle::decode_tree_shape(trace), true);
      if (enc_spans != dec_spans)
        return {false, fmt("trial %d: decoder spans differ from encoder spans", trial)};
      spans_checked += enc_spans.size();
    }
    ++docs_checked;
  }
  return {true, fmt("%zu random documents: sentence spans always constituents; decoder and "
                    "encoder span sets identical (%zu spans compared)",
                    docs_checked, spans_checked)};
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* title;
    std::function<Result()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", criterion_gradients},
      {2, "metric oracle equivalence", criterion_metric_oracle},
      {3, "baseline reproduction", criterion_baselines},
      {4, "planted-corpus induction", criterion_planted_induction},
      {5, "training sanity", criterion_training_sanity},
      {6, "annealing exactness", criterion_annealing},
      {7, "determinism", criterion_determinism},
      {8, "probe protocol", criterion_probe},
      {9, "structural invariants", criterion_structure_invariants},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    Result r;
    auto start = std::chrono::steady_clock::now();
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    if (!r.pass) ++failures;
    std::printf("CRITERION %d: %s — %s (%s) [%.1fs]\n", c.number, r.pass ? "PASS" : "FAIL",
                c.title, r.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures;
}
