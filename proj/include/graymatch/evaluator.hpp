#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graymatch/corpus.hpp"
#include "graymatch/matcher.hpp"

namespace graymatch {

struct Candidate {
  Utterance response;
  Label label = Label::irrelevant;
};

struct CandidateGroup {
  std::vector<Utterance> context;
  std::vector<Candidate> candidates;  // file order

  bool has_relevant() const;
};

// Groups consecutive examples that share the same context.
std::vector<CandidateGroup> groups_from_corpus(const Corpus& corpus);

enum class TieMode {
  by_index,     // ties keep original candidate order (default, reproducible)
  pessimistic,  // relevant candidates rank last among ties (lower bound)
};

// Permutation of candidate indices, best first.
std::vector<std::size_t> rank_group(std::span<const double> scores, std::span<const Label> labels,
                                    TieMode mode = TieMode::by_index);

// Labels in ranked order for one group.
std::vector<Label> ranked_labels(const Scorer& scorer, const CandidateGroup& group,
                                 TieMode mode = TieMode::by_index);

// All of these require at least one relevant label and throw DataError otherwise;
// callers exclude (and count) such groups.
double recall_at_k(std::span<const Label> ranked, std::size_t k);
double average_precision(std::span<const Label> ranked);
double reciprocal_rank(std::span<const Label> ranked);
double precision_at_1(std::span<const Label> ranked);

struct MetricConfig {
  std::vector<std::pair<int, int>> recall_pairs = {{10, 1}, {10, 2}, {10, 5}};  // (n, k)
  TieMode tie_mode = TieMode::by_index;
};

struct MetricsReport {
  double map = 0.0;
  double mrr = 0.0;
  double p_at_1 = 0.0;
  // R_n@k, aggregated over included groups with exactly n candidates. Pairs
  // with no matching group are omitted.
  std::map<std::pair<int, int>, double> recall;
  std::size_t group_count = 0;     // included groups
  std::size_t excluded_groups = 0; // groups with zero relevant candidates
};

MetricsReport evaluate(const Scorer& scorer, std::span<const CandidateGroup> groups,
                       const MetricConfig& config = {});

// Mean recall@1 over included groups, used for per-epoch model selection.
double mean_recall_at_1(const Scorer& scorer, std::span<const CandidateGroup> groups,
                        TieMode mode = TieMode::by_index);

void write_report_csv(std::ostream& out, const MetricsReport& report);
void print_report_table(std::ostream& out, const MetricsReport& report);

// Per-group score dump for error analysis, one JSON object per line.
void dump_group_scores(std::ostream& out, const Scorer& scorer,
                       std::span<const CandidateGroup> groups, TieMode mode = TieMode::by_index);

}  // namespace graymatch
