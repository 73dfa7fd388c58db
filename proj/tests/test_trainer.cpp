#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "graymatch/errors.hpp"
#include "graymatch/trainer.hpp"

using namespace graymatch;

namespace {

Utterance utt(const std::string& text) { return Utterance{tokenize(text)}; }

// A tiny linearly separable setup: context i pairs with key token "p<i>";
// negatives come from other contexts' keys.
struct MicroData {
  std::vector<GrayscaleSet> sets;
  std::vector<CandidateGroup> valid;
  Vocab vocab;
};

MicroData micro_data(int contexts, int n_random, bool with_tiers) {
  MicroData data;
  Corpus corpus;
  for (int i = 0; i < contexts; ++i) {
    corpus.examples.push_back(LabeledExample{
        {utt("q" + std::to_string(i))}, utt("p" + std::to_string(i)), Label::relevant});
  }
  data.vocab = build_vocab(corpus, 1);

  for (int i = 0; i < contexts; ++i) {
    GrayscaleSet set;
    set.context_id = static_cast<std::uint64_t>(i);
    set.context = {utt("q" + std::to_string(i))};
    set.ground_truth = utt("p" + std::to_string(i));
    for (int r = 0; r < n_random; ++r)
      set.random_pool.push_back(utt("p" + std::to_string((i + 1 + r) % contexts)));
    if (with_tiers) {
      set.retrieval_pool.push_back(
          ScoredResponse{utt("p" + std::to_string(i) + " p" + std::to_string((i + 1) % contexts)), 3.0});
      set.retrieval_pool.push_back(
          ScoredResponse{utt("p" + std::to_string((i + 2) % contexts)), 2.0});
      set.active_retrieval = {0, 1};
      set.generation.push_back(ScoredResponse{utt("p" + std::to_string(i) + " q0"), -0.7});
    }
    data.sets.push_back(std::move(set));
  }

  for (int g = 0; g < contexts; ++g) {
    CandidateGroup group;
    group.context = {utt("q" + std::to_string(g))};
    for (int c = 0; c < 4; ++c) {
      const int idx = (g + c) % contexts;
      group.candidates.push_back(Candidate{utt("p" + std::to_string(idx)),
                                           c == 0 ? Label::relevant : Label::irrelevant});
    }
    data.valid.push_back(std::move(group));
  }
  return data;
}

TrainConfig micro_config() {
  TrainConfig config;
  config.mode = ObjectiveMode::ran_only;
  config.margin = 0.3;
  config.learning_rate = 0.05;
  config.pretrain_epochs = 0;
  config.epochs = 6;
  config.batch_size = 4;
  config.seed = 3;
  config.n_random = 2;
  config.embedding_dim = 8;
  return config;
}

}  // namespace

TEST_CASE("config validation rejects bad values but allows a zero learning rate") {
  TrainConfig config = micro_config();
  config.learning_rate = 0.0;
  CHECK_NOTHROW(config.validate());
  config.learning_rate = -0.1;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = micro_config();
  config.epochs = 1;
  config.pretrain_epochs = 2;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = micro_config();
  config.margin = 1.0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("training is deterministic given config and seed") {
  auto data = micro_data(8, 2, true);
  TrainConfig config = micro_config();
  config.mode = ObjectiveMode::uni;
  config.pretrain_epochs = 2;

  auto run = [&](TrainLog& log) {
    auto sets = data.sets;
    DualEncoderScorer scorer(data.vocab, config.embedding_dim, config.recency_decay, config.seed);
    log = train(config, sets, data.valid, scorer);
    std::ostringstream snapshot;
    scorer.save(snapshot);
    return snapshot.str();
  };
  TrainLog log_a, log_b;
  const std::string params_a = run(log_a);
  const std::string params_b = run(log_b);
  CHECK(params_a == params_b);
  REQUIRE(log_a.epochs.size() == log_b.epochs.size());
  CHECK(log_a.selected_epoch == log_b.selected_epoch);
  for (std::size_t e = 0; e < log_a.epochs.size(); ++e) {
    CHECK(log_a.epochs[e].mean_loss_ran == log_b.epochs[e].mean_loss_ran);
    CHECK(log_a.epochs[e].mean_loss_ret == log_b.epochs[e].mean_loss_ret);
    CHECK(log_a.epochs[e].mean_loss_gen == log_b.epochs[e].mean_loss_gen);
    CHECK(log_a.epochs[e].valid_recall_at_1 == log_b.epochs[e].valid_recall_at_1);
  }
  std::ostringstream csv_a, csv_b;
  write_train_log_csv(csv_a, log_a);
  write_train_log_csv(csv_b, log_b);
  CHECK(csv_a.str() == csv_b.str());
}

TEST_CASE("uni with pretrain_epochs == epochs behaves exactly like ran_only") {
  auto data = micro_data(6, 2, true);
  TrainConfig config = micro_config();
  config.epochs = 4;

  auto run = [&](ObjectiveMode mode, int pretrain) {
    TrainConfig c = config;
    c.mode = mode;
    c.pretrain_epochs = pretrain;
    auto sets = data.sets;
    DualEncoderScorer scorer(data.vocab, c.embedding_dim, c.recency_decay, c.seed);
    train(c, sets, data.valid, scorer);
    std::ostringstream snapshot;
    scorer.save(snapshot);
    return snapshot.str();
  };
  CHECK(run(ObjectiveMode::uni, 4) == run(ObjectiveMode::ran_only, 0));
}

TEST_CASE("zero learning rate leaves parameters untouched but logs epochs") {
  auto data = micro_data(6, 2, false);
  TrainConfig config = micro_config();
  config.learning_rate = 0.0;
  auto sets = data.sets;
  DualEncoderScorer scorer(data.vocab, config.embedding_dim, config.recency_decay, config.seed);
  DualEncoderScorer initial = scorer;
  TrainLog log = train(config, sets, data.valid, scorer);
  CHECK(log.epochs.size() == static_cast<std::size_t>(config.epochs));
  CHECK(scorer == initial);
  CHECK(log.epochs.front().mean_loss_ran > 0.0);
}

TEST_CASE("no retrieval or generation gradients flow during pretraining") {
  auto data = micro_data(8, 2, true);
  TrainConfig config = micro_config();
  config.mode = ObjectiveMode::uni;
  config.pretrain_epochs = 3;
  config.epochs = 6;
  auto sets = data.sets;
  DualEncoderScorer scorer(data.vocab, config.embedding_dim, config.recency_decay, config.seed);
  TrainLog log = train(config, sets, data.valid, scorer);
  for (const auto& epoch : log.epochs) {
    if (epoch.epoch <= config.pretrain_epochs) {
      CHECK(epoch.ret_backward_calls == 0);
      CHECK(epoch.gen_backward_calls == 0);
      CHECK(epoch.mean_loss_ret == 0.0);
      CHECK(epoch.mean_loss_gen == 0.0);
    }
  }
  // after the switch the tier losses engage on this data
  std::uint64_t post_switch_calls = 0;
  for (const auto& epoch : log.epochs)
    if (epoch.epoch > config.pretrain_epochs)
      post_switch_calls += epoch.ret_backward_calls + epoch.gen_backward_calls;
  CHECK(post_switch_calls > 0);
}

namespace {

// Re-scores every pool inside on_epoch_start; the scorer still holds the
// epoch's starting parameters there, so this verifies the refresh invariant.
struct RefreshChecker final : TrainObserver {
  const Vocab* vocab = nullptr;
  int pretrain_epochs = 0;
  int adaptive_m = 5;
  std::size_t checked = 0;

  void on_epoch_start(int epoch, const DualEncoderScorer& scorer,
                      std::span<const GrayscaleSet> data) override {
    if (epoch <= pretrain_epochs) return;
    for (const auto& set : data) {
      std::vector<double> scores;
      for (const auto& r : set.retrieval_pool)
        scores.push_back(scorer.score(set.context, r.text));
      const auto expected =
          scores.empty() ? std::vector<std::size_t>{}
                         : adaptive_select(scores, static_cast<std::size_t>(adaptive_m));
      CHECK(set.active_retrieval == expected);
      ++checked;
    }
  }
};

}  // namespace

TEST_CASE("active retrieval equals top-m under the epoch's starting snapshot") {
  auto data = micro_data(8, 2, true);
  TrainConfig config = micro_config();
  config.mode = ObjectiveMode::uni;
  config.pretrain_epochs = 1;
  config.epochs = 5;
  config.adaptive_m = 1;

  RefreshChecker checker;
  checker.vocab = &data.vocab;
  checker.pretrain_epochs = config.pretrain_epochs;
  checker.adaptive_m = config.adaptive_m;
  auto sets = data.sets;
  DualEncoderScorer scorer(data.vocab, config.embedding_dim, config.recency_decay, config.seed);
  train(config, sets, data.valid, scorer, &checker);
  CHECK(checker.checked == sets.size() * static_cast<std::size_t>(config.epochs - 1));
}

TEST_CASE("training loss is non-increasing on a separable micro-corpus") {
  auto data = micro_data(10, 1, false);  // n_random=1 keeps the objective static
  TrainConfig config = micro_config();
  config.mode = ObjectiveMode::ran_only;
  config.learning_rate = 0.01;
  config.epochs = 15;
  config.batch_size = 10;  // full batch
  config.n_random = 1;
  auto sets = data.sets;
  DualEncoderScorer scorer(data.vocab, config.embedding_dim, config.recency_decay, 5);
  TrainLog log = train(config, sets, data.valid, scorer);
  for (std::size_t e = 1; e < log.epochs.size(); ++e)
    CHECK(log.epochs[e].mean_loss_ran <= log.epochs[e - 1].mean_loss_ran + 1e-6);
}

TEST_CASE("model selection returns the best validation epoch, earliest on ties") {
  auto data = micro_data(8, 2, false);
  TrainConfig config = micro_config();
  config.epochs = 8;
  auto sets = data.sets;
  DualEncoderScorer scorer(data.vocab, config.embedding_dim, config.recency_decay, config.seed);
  TrainLog log = train(config, sets, data.valid, scorer);

  double best = -1.0;
  int best_epoch = 0;
  for (const auto& e : log.epochs) {
    if (e.valid_recall_at_1 > best) {
      best = e.valid_recall_at_1;
      best_epoch = e.epoch;
    }
  }
  CHECK(log.selected_epoch == best_epoch);

  // the returned parameters evaluate exactly to the selected epoch's metric
  CHECK(mean_recall_at_1(scorer, data.valid) ==
        log.epochs[static_cast<std::size_t>(log.selected_epoch - 1)].valid_recall_at_1);
}

TEST_CASE("bce and flat_negatives modes train and log their components") {
  auto data = micro_data(8, 3, true);
  TrainConfig config = micro_config();
  config.n_random = 3;
  config.pretrain_epochs = 1;

  config.mode = ObjectiveMode::bce;
  {
    auto sets = data.sets;
    DualEncoderScorer scorer(data.vocab, config.embedding_dim, config.recency_decay, config.seed);
    TrainLog log = train(config, sets, data.valid, scorer);
    CHECK(log.epochs.back().mean_loss_bce > 0.0);
    CHECK(log.epochs.front().mean_loss_bce == 0.0);  // pretrain epoch uses L_Ran
    CHECK(log.epochs.front().mean_loss_ran > 0.0);
  }
  config.mode = ObjectiveMode::flat_negatives;
  {
    auto sets = data.sets;
    DualEncoderScorer scorer(data.vocab, config.embedding_dim, config.recency_decay, config.seed);
    TrainLog log = train(config, sets, data.valid, scorer);
    CHECK(log.epochs.back().mean_loss_ran > 0.0);
    CHECK(log.epochs.back().ret_backward_calls > 0);  // grayscale used as negatives
    CHECK(log.epochs.back().mean_loss_ret == 0.0);    // but no tier-chain loss
  }
}

TEST_CASE("train rejects empty data and missing validation groups") {
  auto data = micro_data(4, 2, false);
  TrainConfig config = micro_config();
  std::vector<GrayscaleSet> empty;
  DualEncoderScorer scorer(data.vocab, config.embedding_dim, config.recency_decay, 1);
  CHECK_THROWS_AS(train(config, empty, data.valid, scorer), DataError);
  auto sets = data.sets;
  CHECK_THROWS_AS(train(config, sets, std::vector<CandidateGroup>{}, scorer), DataError);
}

TEST_CASE("ablation grid shares data and seed across modes") {
  auto data = micro_data(8, 2, true);
  TrainConfig config = micro_config();
  config.mode = ObjectiveMode::uni;
  config.pretrain_epochs = 1;
  config.epochs = 4;

  MetricConfig metric_config;
  metric_config.recall_pairs = {{4, 1}};
  const std::vector<ObjectiveMode> modes = {ObjectiveMode::ran_only, ObjectiveMode::uni};
  auto rows = run_ablation_grid(config, data.sets, data.valid, data.valid, data.vocab, modes,
                                metric_config);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].mode == ObjectiveMode::ran_only);
  CHECK(rows[1].mode == ObjectiveMode::uni);
  for (const auto& row : rows) {
    CHECK(row.report.group_count == data.valid.size());
    CHECK(row.report.recall.count({4, 1}) == 1);
  }

  const std::vector<ObjectiveMode> with_flat = {ObjectiveMode::flat_negatives};
  CHECK_NOTHROW(run_ablation_grid(config, data.sets, data.valid, data.valid, data.vocab, with_flat,
                                  metric_config));
  CHECK_THROWS_AS(run_ablation_grid(config, data.sets, data.valid, data.valid, data.vocab,
                                    std::vector<ObjectiveMode>{}, metric_config),
                  ConfigError);
}

TEST_CASE("mode names round-trip") {
  for (ObjectiveMode mode : {ObjectiveMode::bce, ObjectiveMode::ran_only, ObjectiveMode::ran_ret,
                             ObjectiveMode::ran_gen, ObjectiveMode::uni,
                             ObjectiveMode::flat_negatives})
    CHECK(mode_from_name(mode_name(mode)) == mode);
  CHECK_THROWS_AS(mode_from_name("nonsense"), ConfigError);
}
