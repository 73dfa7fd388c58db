#include "graymatch/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "graymatch/errors.hpp"
#include "graymatch/objectives.hpp"
#include "graymatch/rng.hpp"

namespace graymatch {

const char* mode_name(ObjectiveMode mode) {
  switch (mode) {
    case ObjectiveMode::bce: return "bce";
    case ObjectiveMode::ran_only: return "ran_only";
    case ObjectiveMode::ran_ret: return "ran_ret";
    case ObjectiveMode::ran_gen: return "ran_gen";
    case ObjectiveMode::uni: return "uni";
    case ObjectiveMode::flat_negatives: return "flat_negatives";
  }
  return "unknown";
}

ObjectiveMode mode_from_name(const std::string& name) {
  if (name == "bce") return ObjectiveMode::bce;
  if (name == "ran_only") return ObjectiveMode::ran_only;
  if (name == "ran_ret") return ObjectiveMode::ran_ret;
  if (name == "ran_gen") return ObjectiveMode::ran_gen;
  if (name == "uni") return ObjectiveMode::uni;
  if (name == "flat_negatives") return ObjectiveMode::flat_negatives;
  throw ConfigError("unknown objective mode: '" + name + "'");
}

void TrainConfig::validate() const {
  if (margin < 0.0 || margin >= 1.0) throw ConfigError("train: margin must be in [0, 1)");
  if (learning_rate < 0.0) throw ConfigError("train: learning rate must be >= 0");
  if (pretrain_epochs < 0) throw ConfigError("train: pretrain_epochs must be >= 0");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (epochs < pretrain_epochs) throw ConfigError("train: epochs must be >= pretrain_epochs");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (adaptive_m < 1) throw ConfigError("train: adaptive_m must be >= 1");
  if (n_random < 1) throw ConfigError("train: n_random must be >= 1");
  if (embedding_dim < 1) throw ConfigError("train: embedding_dim must be >= 1");
  if (recency_decay <= 0.0 || recency_decay > 1.0)
    throw ConfigError("train: recency_decay must be in (0, 1]");
  if (interaction_weight_init <= 0.0)
    throw ConfigError("train: interaction_weight_init must be > 0");
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Token-id projections of one grayscale record, computed once up front.
struct PreparedRecord {
  IdContext context;
  IdUtterance ground_truth;
  std::vector<IdUtterance> retrieval_pool;
  std::vector<IdUtterance> generation;
  std::vector<IdUtterance> random_pool;
};

enum class TierTag { ground_truth, retrieval, generation, random, bce_negative };

struct BackwardItem {
  const ScoreCache* cache;
  double partial;
  TierTag tag;
};

}  // namespace

TrainLog train(const TrainConfig& config, std::vector<GrayscaleSet>& data,
               std::span<const CandidateGroup> valid_groups, DualEncoderScorer& scorer,
               TrainObserver* observer) {
  config.validate();
  if (data.empty()) throw DataError("train: empty train split");
  if (valid_groups.empty()) throw DataError("train: no validation groups");

  const Vocab& vocab = scorer.vocab();
  std::vector<PreparedRecord> prepared;
  prepared.reserve(data.size());
  for (const auto& set : data) {
    PreparedRecord rec;
    rec.context = to_ids(set.context, vocab);
    rec.ground_truth = to_ids(set.ground_truth, vocab);
    for (const auto& r : set.retrieval_pool) rec.retrieval_pool.push_back(to_ids(r.text, vocab));
    for (const auto& g : set.generation) rec.generation.push_back(to_ids(g.text, vocab));
    for (const auto& r : set.random_pool) rec.random_pool.push_back(to_ids(r, vocab));
    prepared.push_back(std::move(rec));
  }

  TrainLog log;
  std::string best_snapshot;
  double best_recall = -1.0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const bool pretrain = epoch <= config.pretrain_epochs;
    const ObjectiveMode mode = pretrain ? ObjectiveMode::ran_only : config.mode;
    const bool uses_retrieval = mode == ObjectiveMode::ran_ret || mode == ObjectiveMode::uni ||
                                mode == ObjectiveMode::flat_negatives;
    const bool uses_generation = mode == ObjectiveMode::ran_gen || mode == ObjectiveMode::uni ||
                                 mode == ObjectiveMode::flat_negatives;

    // Refresh the active retrieval sets against the epoch's starting model.
    if (!pretrain) {
      for (std::size_t i = 0; i < data.size(); ++i) {
        std::vector<double> pool_scores;
        pool_scores.reserve(prepared[i].retrieval_pool.size());
        for (const auto& response : prepared[i].retrieval_pool)
          pool_scores.push_back(scorer.score_cached(prepared[i].context, response).score);
        data[i].active_retrieval =
            pool_scores.empty()
                ? std::vector<std::size_t>{}
                : adaptive_select(pool_scores, static_cast<std::size_t>(config.adaptive_m));
      }
    }
    if (observer) observer->on_epoch_start(epoch, scorer, data);

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    {
      Rng rng(mix_seed(config.seed, 0xe90c0000ULL + static_cast<std::uint64_t>(epoch)));
      rng.shuffle(order);
    }

    EpochStats stats;
    stats.epoch = epoch;
    std::size_t processed = 0;

    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + static_cast<std::size_t>(config.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(batch_end - batch_start);

      for (std::size_t pos = batch_start; pos < batch_end; ++pos) {
        const std::size_t i = order[pos];
        const auto& rec = prepared[i];
        if (rec.random_pool.empty()) continue;  // no tier to anchor the hinges
        ++processed;

        const std::size_t rand_idx =
            static_cast<std::size_t>(epoch - 1) % rec.random_pool.size();
        const ScoreCache gt_cache = scorer.score_cached(rec.context, rec.ground_truth);
        const ScoreCache rand_cache = scorer.score_cached(rec.context, rec.random_pool[rand_idx]);
        stats.mean_score_gt += gt_cache.score;
        stats.mean_score_rand += rand_cache.score;

        std::vector<ScoreCache> ret_caches;
        std::vector<double> ret_scores;
        if (uses_retrieval) {
          for (std::size_t idx : data[i].active_retrieval) {
            ret_caches.push_back(scorer.score_cached(rec.context, rec.retrieval_pool[idx]));
            ret_scores.push_back(ret_caches.back().score);
            stats.mean_score_ret += ret_caches.back().score / std::max<std::size_t>(1, data[i].active_retrieval.size());
          }
        }
        std::vector<ScoreCache> gen_caches;
        std::vector<double> gen_scores;
        if (uses_generation) {
          for (const auto& response : rec.generation) {
            gen_caches.push_back(scorer.score_cached(rec.context, response));
            gen_scores.push_back(gen_caches.back().score);
            stats.mean_score_gen += gen_caches.back().score / std::max<std::size_t>(1, rec.generation.size());
          }
        }
        std::vector<ScoreCache> bce_caches;

        std::vector<BackwardItem> backward;
        switch (mode) {
          case ObjectiveMode::ran_only: {
            const PairLoss loss = loss_ran(config.margin, gt_cache.score, rand_cache.score);
            stats.mean_loss_ran += loss.value;
            backward.push_back({&gt_cache, loss.d_gt, TierTag::ground_truth});
            backward.push_back({&rand_cache, loss.d_rand, TierTag::random});
            break;
          }
          case ObjectiveMode::ran_ret:
          case ObjectiveMode::ran_gen:
          case ObjectiveMode::uni: {
            // One backward item per loss component so every L_Ret / L_Gen
            // gradient contribution (including those flowing into the
            // ground-truth and random scores) is attributable to its tier.
            const PairLoss ran = loss_ran(config.margin, gt_cache.score, rand_cache.score);
            stats.mean_loss_ran += ran.value;
            backward.push_back({&gt_cache, ran.d_gt, TierTag::ground_truth});
            backward.push_back({&rand_cache, ran.d_rand, TierTag::random});
            if (uses_retrieval) {
              const ChainLoss ret =
                  loss_ret(config.margin, gt_cache.score, ret_scores, rand_cache.score);
              stats.mean_loss_ret += ret.value;
              backward.push_back({&gt_cache, ret.d_gt, TierTag::retrieval});
              for (std::size_t k = 0; k < ret_caches.size(); ++k)
                backward.push_back({&ret_caches[k], ret.d_mid[k], TierTag::retrieval});
              backward.push_back({&rand_cache, ret.d_rand, TierTag::retrieval});
            }
            if (uses_generation) {
              const ChainLoss gen =
                  loss_gen(config.margin, gt_cache.score, gen_scores, rand_cache.score);
              stats.mean_loss_gen += gen.value;
              backward.push_back({&gt_cache, gen.d_gt, TierTag::generation});
              for (std::size_t k = 0; k < gen_caches.size(); ++k)
                backward.push_back({&gen_caches[k], gen.d_mid[k], TierTag::generation});
              backward.push_back({&rand_cache, gen.d_rand, TierTag::generation});
            }
            break;
          }
          case ObjectiveMode::flat_negatives: {
            // L_Ran with every active grayscale response treated as a random
            // sample, averaged over the enlarged negative set.
            const double inv_n =
                1.0 / static_cast<double>(ret_caches.size() + gen_caches.size() + 1);
            double d_gt = 0.0;
            double value = 0.0;
            auto add_negative = [&](const ScoreCache& cache, TierTag tag) {
              const PairLoss loss = loss_ran(config.margin, gt_cache.score, cache.score);
              value += inv_n * loss.value;
              d_gt += inv_n * loss.d_gt;
              backward.push_back({&cache, inv_n * loss.d_rand, tag});
            };
            for (const auto& cache : ret_caches) add_negative(cache, TierTag::retrieval);
            for (const auto& cache : gen_caches) add_negative(cache, TierTag::generation);
            add_negative(rand_cache, TierTag::random);
            stats.mean_loss_ran += value;
            backward.push_back({&gt_cache, d_gt, TierTag::ground_truth});
            break;
          }
          case ObjectiveMode::bce: {
            std::vector<double> neg_scores;
            bce_caches.reserve(rec.random_pool.size());
            for (const auto& response : rec.random_pool) {
              bce_caches.push_back(scorer.score_cached(rec.context, response));
              neg_scores.push_back(bce_caches.back().score);
            }
            const BceLoss loss = loss_bce(gt_cache.score, neg_scores);
            stats.mean_loss_bce += loss.value;
            backward.push_back({&gt_cache, loss.d_pos, TierTag::ground_truth});
            for (std::size_t k = 0; k < bce_caches.size(); ++k)
              backward.push_back({&bce_caches[k], loss.d_negs[k], TierTag::bce_negative});
            break;
          }
        }

        for (const auto& item : backward) {
          if (item.partial != 0.0) {
            if (item.tag == TierTag::retrieval) ++stats.ret_backward_calls;
            if (item.tag == TierTag::generation) ++stats.gen_backward_calls;
          }
          scorer.accumulate_backward(*item.cache, item.partial * inv_batch);
        }
      }
      scorer.apply_sgd(config.learning_rate);
    }

    if (processed > 0) {
      const double inv = 1.0 / static_cast<double>(processed);
      stats.mean_loss_ran *= inv;
      stats.mean_loss_ret *= inv;
      stats.mean_loss_gen *= inv;
      stats.mean_loss_bce *= inv;
      stats.mean_score_gt *= inv;
      stats.mean_score_ret *= inv;
      stats.mean_score_gen *= inv;
      stats.mean_score_rand *= inv;
    }
    stats.valid_recall_at_1 = mean_recall_at_1(scorer, valid_groups);
    stats.timestamp = utc_timestamp();
    log.epochs.push_back(stats);

    if (stats.valid_recall_at_1 > best_recall) {
      best_recall = stats.valid_recall_at_1;
      log.selected_epoch = epoch;
      std::ostringstream snapshot;
      scorer.save(snapshot);
      best_snapshot = snapshot.str();
    }
  }

  {
    std::istringstream snapshot(best_snapshot);
    scorer = DualEncoderScorer::load(snapshot, vocab);
  }
  return log;
}

std::vector<AblationRow> run_ablation_grid(const TrainConfig& base_config,
                                           const std::vector<GrayscaleSet>& data,
                                           std::span<const CandidateGroup> valid_groups,
                                           std::span<const CandidateGroup> test_groups,
                                           const Vocab& vocab,
                                           std::span<const ObjectiveMode> modes,
                                           const MetricConfig& metric_config) {
  if (modes.empty()) throw ConfigError("ablation: empty mode list");
  std::vector<AblationRow> rows;
  for (ObjectiveMode mode : modes) {
    TrainConfig config = base_config;
    config.mode = mode;
    std::vector<GrayscaleSet> working = data;
    DualEncoderScorer scorer(vocab, config.embedding_dim, config.recency_decay, config.seed,
                             config.interaction_weight_init);
    TrainLog log = train(config, working, valid_groups, scorer);
    rows.push_back(AblationRow{mode, evaluate(scorer, test_groups, metric_config),
                               log.selected_epoch});
  }
  return rows;
}

void write_train_log_csv(std::ostream& out, const TrainLog& log) {
  out << "epoch,loss_ran,loss_ret,loss_gen,valid_R10@1\n";
  char buf[160];
  for (const auto& e : log.epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%.9f,%.9f,%.9f,%.9f\n", e.epoch, e.mean_loss_ran,
                  e.mean_loss_ret, e.mean_loss_gen, e.valid_recall_at_1);
    out << buf;
  }
}

void write_train_log_jsonl(std::ostream& out, const TrainLog& log) {
  for (const auto& e : log.epochs) {
    nlohmann::json record;
    record["epoch"] = e.epoch;
    record["loss_ran"] = e.mean_loss_ran;
    record["loss_ret"] = e.mean_loss_ret;
    record["loss_gen"] = e.mean_loss_gen;
    record["loss_bce"] = e.mean_loss_bce;
    record["valid_R10@1"] = e.valid_recall_at_1;
    record["score_gt"] = e.mean_score_gt;
    record["score_ret"] = e.mean_score_ret;
    record["score_gen"] = e.mean_score_gen;
    record["score_rand"] = e.mean_score_rand;
    record["ret_backward_calls"] = e.ret_backward_calls;
    record["gen_backward_calls"] = e.gen_backward_calls;
    record["timestamp"] = e.timestamp;
    out << record.dump() << '\n';
  }
  out << nlohmann::json{{"selected_epoch", log.selected_epoch}}.dump() << '\n';
}

}  // namespace graymatch
