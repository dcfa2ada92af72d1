#include "tae/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"

namespace tae {

int Document::edu_count() const {
  int n = 0;
  for (const auto& s : sentences) n += static_cast<int>(s.size());
  return n;
}

std::vector<int> Document::sentence_sizes() const {
  std::vector<int> sizes;
  sizes.reserve(sentences.size());
  for (const auto& s : sentences) sizes.push_back(static_cast<int>(s.size()));
  return sizes;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

namespace {

[[noreturn]] void record_error(const std::string& path, std::size_t line_no, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::vector<Document> load_documents(const std::string& path, const CorpusLimits& limits,
                                     LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);

  std::vector<Document> docs;
  std::unordered_set<std::string> seen_ids;
  LoadStats local;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      record_error(path, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) record_error(path, line_no, "record is not a JSON object");
    if (!rec.contains("doc_id") || !rec["doc_id"].is_string())
      record_error(path, line_no, "missing or non-string \"doc_id\"");
    if (!rec.contains("sentences") || !rec["sentences"].is_array())
      record_error(path, line_no, "missing or non-array \"sentences\"");

    Document doc;
    doc.doc_id = rec["doc_id"].get<std::string>();
    if (doc.doc_id.empty()) record_error(path, line_no, "empty \"doc_id\"");
    if (!seen_ids.insert(doc.doc_id).second)
      record_error(path, line_no, "duplicate doc_id \"" + doc.doc_id + "\"");

    std::size_t edus = 0;
    for (const auto& sent : rec["sentences"]) {
      if (!sent.is_array()) record_error(path, line_no, "sentence is not an array of strings");
      std::vector<std::string> edu_list;
      for (const auto& edu : sent) {
        if (!edu.is_string()) record_error(path, line_no, "EDU is not a string");
        if (edus >= limits.max_edus) break;  // truncate: drop EDUs past the cap
        std::string text = edu.get<std::string>();
        std::vector<std::string> tokens = tokenize(text);
        if (tokens.size() > limits.max_words) {  // truncate: keep the first max_words tokens
          text = tokens[0];
          for (std::size_t t = 1; t < limits.max_words; ++t) text += " " + tokens[t];
        }
        edu_list.push_back(std::move(text));
        ++edus;
      }
      if (!edu_list.empty()) doc.sentences.push_back(std::move(edu_list));
      if (edus >= limits.max_edus) break;
    }

    if (rec.contains("label") && !rec["label"].is_null()) {
      if (!rec["label"].is_number_integer())
        record_error(path, line_no, "\"label\" must be an integer or null");
      int label = rec["label"].get<int>();
      if (label < 1 || label > 5)
        record_error(path, line_no, "\"label\" out of range 1..5: " + std::to_string(label));
      doc.label = label;
    }

    if (doc.edu_count() == 0) {
      ++local.skipped_empty;
      continue;
    }
    docs.push_back(std::move(doc));
    ++local.loaded;
  }
  if (stats) *stats = local;
  return docs;
}

int Vocab::lookup(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnkId : it->second;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& ranked_tokens) {
  Vocab v;
  v.id_to_token.reserve(ranked_tokens.size() + 1);
  v.id_to_token.push_back(kUnkToken);
  for (const auto& tok : ranked_tokens) {
    int id = static_cast<int>(v.id_to_token.size());
    if (!v.token_to_id.emplace(tok, id).second)
      throw std::invalid_argument("duplicate token in vocabulary: " + tok);
    v.id_to_token.push_back(tok);
  }
  return v;
}

Vocab build_vocab(std::span<const Document> docs, std::size_t max_size, std::size_t min_freq) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& doc : docs)
    for (const auto& sent : doc.sentences)
      for (const auto& edu : sent)
        for (const auto& tok : tokenize(edu)) ++counts[tok];

  std::vector<std::pair<std::string, std::size_t>> ranked;
  ranked.reserve(counts.size());
  for (auto& [tok, n] : counts)
    if (n >= min_freq) ranked.emplace_back(tok, n);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);

  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, n] : ranked) tokens.push_back(std::move(tok));
  return Vocab::from_tokens(tokens);
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
  auto it = vectors.find(token);
  return it == vectors.end() ? nullptr : &it->second;
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);

  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    std::vector<double> vec;
    double x = 0.0;
    while (ls >> x) vec.push_back(x);
    if (!ls.eof())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": non-numeric vector entry");
    if (vec.empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": no vector values");
    if (table.dim == 0) {
      table.dim = vec.size();
      table.unk.assign(table.dim, 0.0);
    } else if (vec.size() != table.dim) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": dimension mismatch (got " +
                               std::to_string(vec.size()) + ", expected " +
                               std::to_string(table.dim) + ")");
    }
    table.vectors[token] = std::move(vec);
  }
  if (table.dim == 0) throw std::runtime_error("embedding file is empty: " + path);
  return table;
}

Tensor embed_edu(std::span<const std::string> tokens, const EmbeddingTable& table,
                 const Vocab& vocab, std::size_t max_words) {
  Tensor out = Tensor::zeros({table.dim});
  std::size_t used = std::min(tokens.size(), max_words);
  if (used == 0) return out;
  for (std::size_t t = 0; t < used; ++t) {
    const std::vector<double>* vec = &table.unk;
    if (vocab.lookup(tokens[t]) != Vocab::kUnkId) {
      if (const auto* found = table.find(tokens[t])) vec = found;
    }
    for (std::size_t i = 0; i < table.dim; ++i) out.data[i] += (*vec)[i];
  }
  for (double& x : out.data) x /= static_cast<double>(used);
  return out;
}

GoldLoadResult load_gold_trees(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tree file: " + path);

  GoldLoadResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      result.errors.push_back(path + ":" + std::to_string(line_no) + ": missing tab separator");
      continue;
    }
    std::string doc_id = line.substr(0, tab);
    std::string sexpr = line.substr(tab + 1);
    if (!sexpr.empty() && sexpr.back() == '\r') sexpr.pop_back();
    if (result.trees.count(doc_id)) {
      result.errors.push_back(path + ":" + std::to_string(line_no) + ": duplicate doc_id \"" +
                              doc_id + "\"");
      continue;
    }
    try {
      NaryTree nary = parse_nary_tree(sexpr);
      result.trees.emplace(doc_id, right_binarize(nary));
    } catch (const std::exception& e) {
      result.errors.push_back(path + ":" + std::to_string(line_no) + " (" + doc_id + "): " +
                              e.what());
    }
  }
  return result;
}

void save_trees(const std::string& path, const std::vector<std::pair<std::string, BinaryTree>>& trees,
                const std::string& header_comment) {
  std::ofstream out(path, std::ios::binary);  // binary: byte-identical across platforms
  if (!out) throw std::runtime_error("cannot write tree file: " + path);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  for (const auto& [doc_id, tree] : trees) out << doc_id << "\t" << serialize_tree(tree) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

SplitResult stratified_dev_split(std::vector<Document> docs, std::size_t dev_target) {
  if (dev_target == 0 || docs.size() <= dev_target) {
    SplitResult r;
    r.train = std::move(docs);
    return r;
  }
  std::vector<std::size_t> order(docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    int na = docs[a].edu_count(), nb = docs[b].edu_count();
    if (na != nb) return na < nb;
    return docs[a].doc_id < docs[b].doc_id;
  });
  std::size_t stride = (docs.size() + dev_target - 1) / dev_target;

  std::vector<char> is_dev(docs.size(), 0);
  for (std::size_t k = 0; k < order.size(); k += stride) is_dev[order[k]] = 1;

  SplitResult r;
  for (std::size_t i = 0; i < docs.size(); ++i)
    (is_dev[i] ? r.dev : r.train).push_back(std::move(docs[i]));
  return r;
}

}  // namespace tae
