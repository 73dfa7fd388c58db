#include "graymatch/grayscale.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "graymatch/errors.hpp"
#include "graymatch/rng.hpp"

namespace graymatch {

std::vector<Utterance> sample_random(const Corpus& train, std::size_t context_index, int n,
                                     std::uint64_t seed) {
  if (n < 1) throw ConfigError("grayscale: n_random must be >= 1");
  if (context_index >= train.examples.size())
    throw DataError("grayscale: context index out of range");
  const Utterance& own_gt = train.examples[context_index].response;

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < train.examples.size(); ++i) {
    if (i == context_index) continue;
    const auto& example = train.examples[i];
    if (example.label != Label::relevant) continue;
    if (example.response == own_gt) continue;
    pool.push_back(i);
  }
  if (pool.size() < static_cast<std::size_t>(n))
    throw DataError("grayscale: not enough distinct responses to sample " + std::to_string(n) +
                    " random negatives for context " + std::to_string(context_index));

  // Partial Fisher-Yates over the candidate pool, seeded per context.
  Rng rng(mix_seed(seed, 0x5a11 + context_index));
  std::vector<Utterance> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int picked = 0; picked < n; ++picked) {
    const std::size_t j = picked + static_cast<std::size_t>(
                                       rng.below(pool.size() - static_cast<std::size_t>(picked)));
    std::swap(pool[static_cast<std::size_t>(picked)], pool[j]);
    out.push_back(train.examples[pool[static_cast<std::size_t>(picked)]].response);
  }
  return out;
}

GrayscaleSet assemble(std::uint64_t context_id, const std::vector<Utterance>& context,
                      const Utterance& ground_truth, std::span<const RetrievalHit> hits,
                      const std::vector<TurnPair>& pairs,
                      std::span<const GeneratedResponse> generations,
                      std::vector<Utterance> randoms, std::size_t pool_size) {
  GrayscaleSet set;
  set.context_id = context_id;
  set.context = context;
  set.ground_truth = ground_truth;

  std::set<std::vector<std::string>> seen;
  for (const auto& hit : hits) {
    if (set.retrieval_pool.size() >= pool_size) break;
    if (hit.pair_id >= pairs.size())
      throw DataError("grayscale: retrieval hit references unknown pair " +
                      std::to_string(hit.pair_id));
    const Utterance& response = pairs[hit.pair_id].response;
    if (response == ground_truth) continue;
    if (!seen.insert(response.tokens).second) continue;
    set.retrieval_pool.push_back(ScoredResponse{response, hit.score});
  }

  seen.clear();
  for (const auto& gen : generations) {
    if (set.generation.size() >= 5) break;
    if (gen.tokens == ground_truth) continue;
    if (!seen.insert(gen.tokens.tokens).second) continue;
    set.generation.push_back(ScoredResponse{gen.tokens, gen.log_prob});
  }

  for (auto& r : randoms) {
    if (r == ground_truth) continue;
    set.random_pool.push_back(std::move(r));
  }

  const std::size_t m = std::min<std::size_t>(5, set.retrieval_pool.size());
  for (std::size_t i = 0; i < m; ++i) set.active_retrieval.push_back(i);
  return set;
}

std::vector<std::size_t> adaptive_select(std::span<const double> model_scores, std::size_t m) {
  if (m < 1) throw ConfigError("grayscale: adaptive_select requires m >= 1");
  std::vector<std::size_t> order(model_scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (model_scores[a] != model_scores[b]) return model_scores[a] > model_scores[b];
    return a < b;
  });
  if (order.size() > m) order.resize(m);
  return order;
}

std::vector<GrayscaleSet> build_grayscale(
    const Corpus& train, const Bm25Index& index, const std::vector<TurnPair>& pairs,
    const std::map<std::uint64_t, std::vector<GeneratedResponse>>& generated,
    const GrayscaleBuildConfig& config) {
  std::vector<GrayscaleSet> sets;
  static const std::vector<GeneratedResponse> kNoGenerations;
  for (std::size_t i = 0; i < train.examples.size(); ++i) {
    const auto& example = train.examples[i];
    if (example.label != Label::relevant) continue;
    const auto hits = index.retrieve(example.context, config.pool_size);
    auto gen_it = generated.find(static_cast<std::uint64_t>(i));
    const auto& gens = gen_it == generated.end() ? kNoGenerations : gen_it->second;
    auto randoms = sample_random(train, i, config.n_random, config.seed);
    sets.push_back(assemble(static_cast<std::uint64_t>(i), example.context, example.response, hits,
                            pairs, gens, std::move(randoms), config.pool_size));
  }
  return sets;
}

namespace {

nlohmann::json utterance_json(const Utterance& u) { return u.joined(); }

Utterance utterance_from_json(const nlohmann::json& j) {
  return Utterance{tokenize(j.get<std::string>())};
}

}  // namespace

void write_grayscale(const std::string& path, std::span<const GrayscaleSet> sets) {
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write grayscale file: " + path);
  for (const auto& set : sets) {
    nlohmann::json record;
    record["context_id"] = set.context_id;
    record["context"] = nlohmann::json::array();
    for (const auto& turn : set.context) record["context"].push_back(utterance_json(turn));
    record["ground_truth"] = utterance_json(set.ground_truth);
    record["retrieval"] = nlohmann::json::array();
    for (const auto& r : set.retrieval_pool)
      record["retrieval"].push_back({{"text", utterance_json(r.text)}, {"bm25_score", r.score}});
    record["generation"] = nlohmann::json::array();
    for (const auto& g : set.generation)
      record["generation"].push_back({{"text", utterance_json(g.text)}, {"log_prob", g.score}});
    record["random"] = nlohmann::json::array();
    for (const auto& r : set.random_pool) record["random"].push_back(utterance_json(r));
    out << record.dump() << '\n';
  }
}

std::vector<GrayscaleSet> read_grayscale(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open grayscale file: " + path);
  std::vector<GrayscaleSet> sets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("grayscale line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      GrayscaleSet set;
      set.context_id = record.at("context_id").get<std::uint64_t>();
      for (const auto& turn : record.at("context")) set.context.push_back(utterance_from_json(turn));
      set.ground_truth = utterance_from_json(record.at("ground_truth"));
      for (const auto& r : record.at("retrieval"))
        set.retrieval_pool.push_back(
            ScoredResponse{utterance_from_json(r.at("text")), r.at("bm25_score").get<double>()});
      for (const auto& g : record.at("generation"))
        set.generation.push_back(
            ScoredResponse{utterance_from_json(g.at("text")), g.at("log_prob").get<double>()});
      for (const auto& r : record.at("random")) set.random_pool.push_back(utterance_from_json(r));
      const std::size_t m = std::min<std::size_t>(5, set.retrieval_pool.size());
      for (std::size_t i = 0; i < m; ++i) set.active_retrieval.push_back(i);
      sets.push_back(std::move(set));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("grayscale line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return sets;
}

}  // namespace graymatch
