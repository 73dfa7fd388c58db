#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "graymatch/bm25.hpp"
#include "graymatch/corpus.hpp"
#include "graymatch/generator.hpp"

namespace graymatch {

// Quality tiers; training enforces Tier1 > Tier2_* > Tier3. The two Tier2
// kinds are not comparable to each other.
enum class Tier {
  Tier1_GroundTruth,
  Tier2_Retrieval,
  Tier2_Generation,
  Tier3_Random,
};

struct ScoredResponse {
  Utterance text;
  double score = 0.0;  // bm25 score (retrieval) or log_prob (generation)

  bool operator==(const ScoredResponse&) const = default;
};

// Per-context bundle of tiered responses. active_retrieval is runtime state
// that the trainer refreshes each epoch; it is not part of the export.
struct GrayscaleSet {
  std::uint64_t context_id = 0;
  std::vector<Utterance> context;
  Utterance ground_truth;
  std::vector<ScoredResponse> retrieval_pool;  // <= pool_size, bm25 order
  std::vector<ScoredResponse> generation;      // <= 5, log_prob order
  std::vector<Utterance> random_pool;
  std::vector<std::size_t> active_retrieval;   // indices into retrieval_pool
};

// n distinct ground-truth responses of other relevant train dialogues,
// uniform without replacement, never token-identical to this context's own
// ground truth. Deterministic given (seed, context_index).
std::vector<Utterance> sample_random(const Corpus& train, std::size_t context_index, int n,
                                     std::uint64_t seed);

// Builds one GrayscaleSet: drops candidates token-identical to the ground
// truth, deduplicates identical response texts (first occurrence kept),
// truncates the retrieval pool to pool_size and generations to 5.
// active_retrieval starts as the first min(5, pool) indices.
GrayscaleSet assemble(std::uint64_t context_id, const std::vector<Utterance>& context,
                      const Utterance& ground_truth, std::span<const RetrievalHit> hits,
                      const std::vector<TurnPair>& pairs,
                      std::span<const GeneratedResponse> generations,
                      std::vector<Utterance> randoms, std::size_t pool_size = 100);

// Indices of the m highest scores, descending, ties by pool index ascending.
std::vector<std::size_t> adaptive_select(std::span<const double> model_scores, std::size_t m = 5);

struct GrayscaleBuildConfig {
  std::size_t pool_size = 100;
  int n_random = 5;
  std::uint64_t seed = 1;
};

// Full assembly for every relevant train dialogue: retrieval from the index,
// generations from the interchange map (keyed by context id), randoms sampled
// from other contexts.
std::vector<GrayscaleSet> build_grayscale(
    const Corpus& train, const Bm25Index& index, const std::vector<TurnPair>& pairs,
    const std::map<std::uint64_t, std::vector<GeneratedResponse>>& generated,
    const GrayscaleBuildConfig& config);

// Line-delimited JSON export/import (one object per context).
void write_grayscale(const std::string& path, std::span<const GrayscaleSet> sets);
std::vector<GrayscaleSet> read_grayscale(const std::string& path);

}  // namespace graymatch
