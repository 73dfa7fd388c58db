#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "graymatch/corpus.hpp"

namespace graymatch {

struct GeneratedResponse {
  Utterance tokens;
  double log_prob = 0.0;

  bool operator==(const GeneratedResponse&) const = default;
};

// Add-delta smoothed n-gram language model over the response side of
// TurnPairs, with a context-biased decoding rule:
//   step score = log[(1-lambda) P_lm(w|h) + lambda P_ctx(w)]
// where P_ctx is the normalized unigram distribution of the context tokens.
//
// The event space is every non-special vocab token plus </s>; positions whose
// target maps to <oov> are not counted as prediction events (the oov id still
// advances the history), which keeps each conditional normalized to 1.
class NGramModel {
 public:
  static NGramModel train(const std::vector<TurnPair>& pairs, const Vocab& vocab, int order = 3,
                          double delta = 0.1, double lambda = 0.5);

  // P(next | history); history is the last order-1 ids, <s>-padded.
  double prob(std::span<const int> history, int next) const;

  // Up to top_k completed hypotheses, best first; fully deterministic
  // (ties by token-id sequence, lexicographic). If fewer than top_k complete
  // within max_len steps, force-terminated hypotheses (accumulated score,
  // no end term) fill the remainder.
  std::vector<GeneratedResponse> beam_generate(const std::vector<Utterance>& context,
                                               int beam_width = 10, int max_len = 20,
                                               int top_k = 5) const;

  int order() const { return order_; }
  double delta() const { return delta_; }
  double lambda() const { return lambda_; }
  const Vocab& vocab() const { return vocab_; }
  std::size_t event_space_size() const { return event_ids_.size(); }
  std::span<const int> event_ids() const { return event_ids_; }

  void save(std::ostream& out) const;  // self-contained (embeds the vocab)
  static NGramModel load(std::istream& in);
  bool operator==(const NGramModel& other) const;

 private:
  NGramModel() = default;
  void rebuild_event_ids();

  int order_ = 3;
  double delta_ = 0.1;
  double lambda_ = 0.5;
  Vocab vocab_;
  std::vector<int> event_ids_;  // sorted candidate next-token ids
  // history (order-1 ids) -> { next id -> count, total }
  struct Node {
    std::map<int, std::uint32_t> next;
    std::uint64_t total = 0;
    bool operator==(const Node&) const = default;
  };
  std::map<std::vector<int>, Node> counts_;
};

// Interchange file for generated responses, one record per line:
//   context_id<TAB>log_prob<TAB>response text
// Responses are grouped per context and sorted by log_prob descending
// (stable on ties). This is also what the built-in generator emits, so an
// external generator can be swapped in by replacing the file.
std::map<std::uint64_t, std::vector<GeneratedResponse>> load_generated(const std::string& path);
void append_generated(std::ostream& out, std::uint64_t context_id,
                      std::span<const GeneratedResponse> responses);

void save_lm(const std::string& path, const NGramModel& model);
NGramModel load_lm(const std::string& path);

}  // namespace graymatch
