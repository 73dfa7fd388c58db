#include "graymatch/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "graymatch/errors.hpp"

namespace graymatch {

namespace {

// %.17g round-trips IEEE doubles exactly through text.
std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Unique query terms in first-appearance order. Both score() and retrieve()
// accumulate per-term contributions in this order, so their floating-point
// sums are identical.
std::vector<std::string> unique_terms(std::span<const std::string> query) {
  std::vector<std::string> terms;
  for (const auto& t : query)
    if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
  return terms;
}

}  // namespace

Bm25Index Bm25Index::build(const std::vector<TurnPair>& pairs, double k1, double b) {
  if (pairs.empty()) throw DataError("bm25: cannot build an index from zero pairs");
  if (k1 < 0.0) throw ConfigError("bm25: k1 must be >= 0");
  if (b < 0.0 || b > 1.0) throw ConfigError("bm25: b must be in [0, 1]");

  Bm25Index index;
  index.k1_ = k1;
  index.b_ = b;
  index.doc_len_.reserve(pairs.size());
  index.response_ids_.reserve(pairs.size());

  std::uint64_t total_len = 0;
  for (std::uint32_t pair_id = 0; pair_id < pairs.size(); ++pair_id) {
    const auto& input = pairs[pair_id].input.tokens;
    index.doc_len_.push_back(static_cast<std::uint32_t>(input.size()));
    index.response_ids_.push_back(pairs[pair_id].response_id);
    total_len += input.size();

    std::map<std::string, std::uint32_t> tf;
    for (const auto& tok : input) ++tf[tok];
    for (const auto& [term, freq] : tf) index.postings_[term].emplace_back(pair_id, freq);
  }
  index.avgdl_ = static_cast<double>(total_len) / static_cast<double>(pairs.size());
  return index;
}

double Bm25Index::idf(const std::string& term) const {
  double n_t = static_cast<double>(doc_freq(term));
  double n = static_cast<double>(doc_count());
  return std::log((n - n_t + 0.5) / (n_t + 0.5) + 1.0);
}

std::size_t Bm25Index::doc_freq(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

std::uint32_t Bm25Index::doc_len(std::uint32_t pair_id) const {
  if (pair_id >= doc_len_.size()) throw DataError("bm25: unknown pair_id " + std::to_string(pair_id));
  return doc_len_[pair_id];
}

std::uint32_t Bm25Index::response_id(std::uint32_t pair_id) const {
  if (pair_id >= response_ids_.size())
    throw DataError("bm25: unknown pair_id " + std::to_string(pair_id));
  return response_ids_[pair_id];
}

double Bm25Index::score(std::span<const std::string> query, std::uint32_t pair_id) const {
  if (pair_id >= doc_len_.size()) throw DataError("bm25: unknown pair_id " + std::to_string(pair_id));
  const double dl = static_cast<double>(doc_len_[pair_id]);
  const double norm = k1_ * (1.0 - b_ + b_ * dl / avgdl_);
  double total = 0.0;
  for (const auto& term : unique_terms(query)) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const auto& list = it->second;
    auto pos = std::lower_bound(list.begin(), list.end(), pair_id,
                                [](const auto& entry, std::uint32_t id) { return entry.first < id; });
    if (pos == list.end() || pos->first != pair_id) continue;
    const double tf = static_cast<double>(pos->second);
    total += idf(term) * tf * (k1_ + 1.0) / (tf + norm);
  }
  return total;
}

std::vector<RetrievalHit> Bm25Index::retrieve(const std::vector<Utterance>& context,
                                              std::size_t k) const {
  if (k < 1) throw ConfigError("bm25: retrieve requires k >= 1");
  if (context.empty()) throw DataError("bm25: retrieve requires a nonempty context");
  const auto& query = context.back().tokens;
  if (query.empty()) return {};

  std::vector<double> scores(doc_len_.size(), 0.0);
  std::vector<std::uint32_t> touched;
  for (const auto& term : unique_terms(query)) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double term_idf = idf(term);
    for (const auto& [pair_id, freq] : it->second) {
      const double dl = static_cast<double>(doc_len_[pair_id]);
      const double norm = k1_ * (1.0 - b_ + b_ * dl / avgdl_);
      const double tf = static_cast<double>(freq);
      if (scores[pair_id] == 0.0) touched.push_back(pair_id);
      scores[pair_id] += term_idf * tf * (k1_ + 1.0) / (tf + norm);
    }
  }

  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  std::vector<RetrievalHit> hits;
  hits.reserve(touched.size());
  for (std::uint32_t pair_id : touched)
    if (scores[pair_id] > 0.0) hits.push_back({pair_id, response_ids_[pair_id], scores[pair_id]});
  std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.pair_id < b.pair_id;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

void Bm25Index::save(std::ostream& out) const {
  out << "graymatch-bm25 v1\n";
  out << "N " << doc_len_.size() << " k1 " << format_double(k1_) << " b " << format_double(b_)
      << " avgdl " << format_double(avgdl_) << '\n';
  out << "lens";
  for (auto len : doc_len_) out << ' ' << len;
  out << '\n';
  out << "resp";
  for (auto rid : response_ids_) out << ' ' << rid;
  out << '\n';
  std::vector<std::string> terms;
  terms.reserve(postings_.size());
  for (const auto& [term, list] : postings_) terms.push_back(term);
  std::sort(terms.begin(), terms.end());
  for (const auto& term : terms) {
    out << "t " << term;
    for (const auto& [pair_id, freq] : postings_.at(term)) out << ' ' << pair_id << ':' << freq;
    out << '\n';
  }
}

Bm25Index Bm25Index::load(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header != "graymatch-bm25 v1")
    throw ArtifactError("bm25: bad or version-mismatched index header: '" + header + "'");

  Bm25Index index;
  std::string line;
  if (!std::getline(in, line)) throw ArtifactError("bm25: truncated index (stats line)");
  {
    std::istringstream ss(line);
    std::string key;
    std::size_t n = 0;
    ss >> key >> n;
    if (key != "N") throw ArtifactError("bm25: malformed stats line");
    ss >> key >> index.k1_ >> key >> index.b_ >> key >> index.avgdl_;
    if (!ss) throw ArtifactError("bm25: malformed stats line");
    index.doc_len_.reserve(n);
    index.response_ids_.reserve(n);
  }
  if (!std::getline(in, line)) throw ArtifactError("bm25: truncated index (lens line)");
  {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key != "lens") throw ArtifactError("bm25: malformed lens line");
    std::uint32_t len;
    while (ss >> len) index.doc_len_.push_back(len);
  }
  if (!std::getline(in, line)) throw ArtifactError("bm25: truncated index (resp line)");
  {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key != "resp") throw ArtifactError("bm25: malformed resp line");
    std::uint32_t rid;
    while (ss >> rid) index.response_ids_.push_back(rid);
  }
  if (index.response_ids_.size() != index.doc_len_.size())
    throw ArtifactError("bm25: doc/response count mismatch");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key, term;
    ss >> key >> term;
    if (key != "t") throw ArtifactError("bm25: malformed postings line");
    auto& list = index.postings_[term];
    std::string entry;
    while (ss >> entry) {
      auto colon = entry.find(':');
      if (colon == std::string::npos) throw ArtifactError("bm25: malformed posting entry");
      list.emplace_back(static_cast<std::uint32_t>(std::stoul(entry.substr(0, colon))),
                        static_cast<std::uint32_t>(std::stoul(entry.substr(colon + 1))));
    }
  }
  return index;
}

bool Bm25Index::operator==(const Bm25Index& other) const {
  return postings_ == other.postings_ && doc_len_ == other.doc_len_ &&
         response_ids_ == other.response_ids_ && avgdl_ == other.avgdl_ && k1_ == other.k1_ &&
         b_ == other.b_;
}

void save_index(const std::string& path, const Bm25Index& index) {
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write index file: " + path);
  index.save(out);
}

Bm25Index load_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open index file: " + path);
  return Bm25Index::load(in);
}

}  // namespace graymatch
