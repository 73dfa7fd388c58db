#include "graymatch/evaluator.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "graymatch/errors.hpp"

namespace graymatch {

bool CandidateGroup::has_relevant() const {
  return std::any_of(candidates.begin(), candidates.end(),
                     [](const Candidate& c) { return c.label == Label::relevant; });
}

std::vector<CandidateGroup> groups_from_corpus(const Corpus& corpus) {
  std::vector<CandidateGroup> groups;
  for (const auto& example : corpus.examples) {
    if (groups.empty() || groups.back().context != example.context) {
      groups.push_back(CandidateGroup{example.context, {}});
    }
    groups.back().candidates.push_back(Candidate{example.response, example.label});
  }
  return groups;
}

std::vector<std::size_t> rank_group(std::span<const double> scores, std::span<const Label> labels,
                                    TieMode mode) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (mode == TieMode::pessimistic && labels[a] != labels[b])
      return labels[a] == Label::irrelevant;  // relevant last among ties
    return a < b;
  });
  return order;
}

std::vector<Label> ranked_labels(const Scorer& scorer, const CandidateGroup& group, TieMode mode) {
  std::vector<double> scores;
  std::vector<Label> labels;
  scores.reserve(group.candidates.size());
  labels.reserve(group.candidates.size());
  for (const auto& candidate : group.candidates) {
    scores.push_back(scorer.score(group.context, candidate.response));
    labels.push_back(candidate.label);
  }
  std::vector<Label> ranked;
  ranked.reserve(labels.size());
  for (std::size_t idx : rank_group(scores, labels, mode)) ranked.push_back(labels[idx]);
  return ranked;
}

namespace {

std::size_t count_relevant(std::span<const Label> ranked) {
  return static_cast<std::size_t>(
      std::count(ranked.begin(), ranked.end(), Label::relevant));
}

void require_relevant(std::span<const Label> ranked, const char* what) {
  if (count_relevant(ranked) == 0)
    throw DataError(std::string(what) + ": group has no relevant candidate");
}

}  // namespace

double recall_at_k(std::span<const Label> ranked, std::size_t k) {
  require_relevant(ranked, "recall_at_k");
  if (k < 1 || k > ranked.size()) throw DataError("recall_at_k: k out of range");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i)
    if (ranked[i] == Label::relevant) ++hits;
  return static_cast<double>(hits) / static_cast<double>(count_relevant(ranked));
}

double average_precision(std::span<const Label> ranked) {
  require_relevant(ranked, "average_precision");
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i] != Label::relevant) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(hits);
}

double reciprocal_rank(std::span<const Label> ranked) {
  require_relevant(ranked, "reciprocal_rank");
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (ranked[i] == Label::relevant) return 1.0 / static_cast<double>(i + 1);
  return 0.0;  // unreachable
}

double precision_at_1(std::span<const Label> ranked) {
  require_relevant(ranked, "precision_at_1");
  return ranked.front() == Label::relevant ? 1.0 : 0.0;
}

MetricsReport evaluate(const Scorer& scorer, std::span<const CandidateGroup> groups,
                       const MetricConfig& config) {
  if (groups.empty()) throw DataError("evaluate: no candidate groups");

  MetricsReport report;
  double ap_sum = 0.0, rr_sum = 0.0, p1_sum = 0.0;
  std::map<std::pair<int, int>, std::pair<double, std::size_t>> recall_acc;  // sum, count

  for (const auto& group : groups) {
    if (!group.has_relevant()) {
      ++report.excluded_groups;
      continue;
    }
    ++report.group_count;
    const auto ranked = ranked_labels(scorer, group, config.tie_mode);
    ap_sum += average_precision(ranked);
    rr_sum += reciprocal_rank(ranked);
    p1_sum += precision_at_1(ranked);
    for (const auto& [n, k] : config.recall_pairs) {
      if (static_cast<std::size_t>(n) != ranked.size()) continue;
      auto& [sum, count] = recall_acc[{n, k}];
      sum += recall_at_k(ranked, static_cast<std::size_t>(k));
      ++count;
    }
  }
  if (report.group_count == 0) throw DataError("evaluate: every group lacks a relevant candidate");

  const double n_groups = static_cast<double>(report.group_count);
  report.map = ap_sum / n_groups;
  report.mrr = rr_sum / n_groups;
  report.p_at_1 = p1_sum / n_groups;
  for (const auto& [pair, acc] : recall_acc)
    report.recall[pair] = acc.first / static_cast<double>(acc.second);
  return report;
}

double mean_recall_at_1(const Scorer& scorer, std::span<const CandidateGroup> groups, TieMode mode) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& group : groups) {
    if (!group.has_relevant()) continue;
    sum += recall_at_k(ranked_labels(scorer, group, mode), 1);
    ++count;
  }
  if (count == 0) throw DataError("mean_recall_at_1: every group lacks a relevant candidate");
  return sum / static_cast<double>(count);
}

namespace {

std::string metric_csv_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  out << "metric,value\n";
  out << "MAP," << metric_csv_value(report.map) << '\n';
  out << "MRR," << metric_csv_value(report.mrr) << '\n';
  out << "P@1," << metric_csv_value(report.p_at_1) << '\n';
  for (const auto& [pair, value] : report.recall)
    out << 'R' << pair.first << '@' << pair.second << ',' << metric_csv_value(value) << '\n';
  out << "groups," << report.group_count << '\n';
  out << "excluded_groups," << report.excluded_groups << '\n';
}

void print_report_table(std::ostream& out, const MetricsReport& report) {
  out << "  MAP    " << metric_csv_value(report.map) << '\n';
  out << "  MRR    " << metric_csv_value(report.mrr) << '\n';
  out << "  P@1    " << metric_csv_value(report.p_at_1) << '\n';
  for (const auto& [pair, value] : report.recall)
    out << "  R" << pair.first << '@' << pair.second << "  " << metric_csv_value(value) << '\n';
  out << "  groups " << report.group_count << " (+" << report.excluded_groups << " excluded)\n";
}

void dump_group_scores(std::ostream& out, const Scorer& scorer,
                       std::span<const CandidateGroup> groups, TieMode mode) {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    std::vector<double> scores;
    std::vector<Label> labels;
    for (const auto& candidate : group.candidates) {
      scores.push_back(scorer.score(group.context, candidate.response));
      labels.push_back(candidate.label);
    }
    nlohmann::json record;
    record["group"] = g;
    record["context"] = nlohmann::json::array();
    for (const auto& turn : group.context) record["context"].push_back(turn.joined());
    auto order = rank_group(scores, labels, mode);
    record["ranking"] = nlohmann::json::array();
    for (std::size_t idx : order) {
      record["ranking"].push_back({{"candidate", idx},
                                   {"score", scores[idx]},
                                   {"label", labels[idx] == Label::relevant ? 1 : 0},
                                   {"response", group.candidates[idx].response.joined()}});
    }
    out << record.dump() << '\n';
  }
}

}  // namespace graymatch
