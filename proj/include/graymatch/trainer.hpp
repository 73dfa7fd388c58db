#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "graymatch/evaluator.hpp"
#include "graymatch/grayscale.hpp"
#include "graymatch/matcher.hpp"

namespace graymatch {

enum class ObjectiveMode { bce, ran_only, ran_ret, ran_gen, uni, flat_negatives };

const char* mode_name(ObjectiveMode mode);
ObjectiveMode mode_from_name(const std::string& name);

struct TrainConfig {
  ObjectiveMode mode = ObjectiveMode::uni;
  double margin = 0.3;
  double learning_rate = 0.1;
  int pretrain_epochs = 2;  // L_Ran-only curriculum prefix
  int epochs = 20;
  int batch_size = 32;
  std::uint64_t seed = 1;
  int adaptive_m = 5;   // retrieval members re-selected per epoch
  int n_random = 5;     // random negatives sampled per context
  int embedding_dim = 64;
  double recency_decay = 0.7;
  double interaction_weight_init = 1.0;

  void validate() const;  // throws ConfigError
};

struct EpochStats {
  int epoch = 0;
  double mean_loss_ran = 0.0;
  double mean_loss_ret = 0.0;
  double mean_loss_gen = 0.0;
  double mean_loss_bce = 0.0;
  double valid_recall_at_1 = 0.0;
  // mean tier scores over the epoch's processed contexts (diagnostics)
  double mean_score_gt = 0.0;
  double mean_score_ret = 0.0;
  double mean_score_gen = 0.0;
  double mean_score_rand = 0.0;
  std::string timestamp;  // wall clock; excluded from determinism comparisons
  std::uint64_t ret_backward_calls = 0;
  std::uint64_t gen_backward_calls = 0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
  int selected_epoch = 0;  // max validation recall@1, ties -> earliest
};

// Instrumentation hook. on_epoch_start fires after the adaptive refresh and
// before any parameter update of that epoch, so the scorer still holds the
// epoch's starting snapshot.
class TrainObserver {
 public:
  virtual ~TrainObserver() = default;
  virtual void on_epoch_start(int /*epoch*/, const DualEncoderScorer& /*scorer*/,
                              std::span<const GrayscaleSet> /*data*/) {}
};

// Epochs 1..pretrain_epochs use L_Ran only; later epochs use the configured
// mode. At the start of every post-pretrain epoch the active retrieval set of
// each context is re-selected by the current model. Updates are plain SGD on
// the batch-mean gradient. On return the scorer holds the selected epoch's
// parameters. Active retrieval indices in `data` are mutated in place.
TrainLog train(const TrainConfig& config, std::vector<GrayscaleSet>& data,
               std::span<const CandidateGroup> valid_groups, DualEncoderScorer& scorer,
               TrainObserver* observer = nullptr);

struct AblationRow {
  ObjectiveMode mode;
  MetricsReport report;
  int selected_epoch = 0;
};

// One row per mode; every row shares seed, data, and schedule. Throws
// ConfigError on an empty mode list.
std::vector<AblationRow> run_ablation_grid(const TrainConfig& base_config,
                                           const std::vector<GrayscaleSet>& data,
                                           std::span<const CandidateGroup> valid_groups,
                                           std::span<const CandidateGroup> test_groups,
                                           const Vocab& vocab,
                                           std::span<const ObjectiveMode> modes,
                                           const MetricConfig& metric_config = {});

// CSV summary: epoch,loss_ran,loss_ret,loss_gen,valid_R10@1
void write_train_log_csv(std::ostream& out, const TrainLog& log);
// Structured per-epoch records plus a trailing selected-epoch marker record.
void write_train_log_jsonl(std::ostream& out, const TrainLog& log);

}  // namespace graymatch
