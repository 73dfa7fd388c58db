#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "graymatch/corpus.hpp"

namespace graymatch {

struct RetrievalHit {
  std::uint32_t pair_id = 0;
  std::uint32_t response_id = 0;
  double score = 0.0;

  bool operator==(const RetrievalHit&) const = default;
};

// Inverted index over the input side of TurnPairs. Uses the nonnegative
// "+1 inside the log" IDF: idf = ln((N - n_t + 0.5)/(n_t + 0.5) + 1).
class Bm25Index {
 public:
  static Bm25Index build(const std::vector<TurnPair>& pairs, double k1 = 1.2, double b = 0.75);

  double idf(const std::string& term) const;

  // Full BM25 score of one indexed document against a token query.
  double score(std::span<const std::string> query, std::uint32_t pair_id) const;

  // Query = tokens of the last context utterance. Hits sorted by score
  // descending, ties by pair_id ascending; zero-score documents excluded.
  std::vector<RetrievalHit> retrieve(const std::vector<Utterance>& context, std::size_t k) const;

  std::size_t doc_count() const { return doc_len_.size(); }
  double avgdl() const { return avgdl_; }
  double k1() const { return k1_; }
  double b() const { return b_; }
  std::uint32_t doc_len(std::uint32_t pair_id) const;
  std::uint32_t response_id(std::uint32_t pair_id) const;
  std::size_t doc_freq(const std::string& term) const;

  void save(std::ostream& out) const;
  static Bm25Index load(std::istream& in);
  bool operator==(const Bm25Index& other) const;

 private:
  Bm25Index() = default;

  // postings lists are (pair_id, term frequency), pair_id ascending
  std::unordered_map<std::string, std::vector<std::pair<std::uint32_t, std::uint32_t>>> postings_;
  std::vector<std::uint32_t> doc_len_;
  std::vector<std::uint32_t> response_ids_;
  double avgdl_ = 0.0;
  double k1_ = 1.2;
  double b_ = 0.75;
};

void save_index(const std::string& path, const Bm25Index& index);
Bm25Index load_index(const std::string& path);

}  // namespace graymatch
