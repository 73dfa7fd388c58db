#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "graymatch/evaluator.hpp"
#include "graymatch/grayscale.hpp"
#include "graymatch/synthetic.hpp"
#include "graymatch/trainer.hpp"

namespace graymatch {

// Fully resolved run configuration. One top-level seed is inherited by the
// synthetic/grayscale/train stages unless a stage-level "seed" key overrides
// it. Unknown keys anywhere in the tree are rejected.
struct PipelineConfig {
  std::uint64_t seed = 7;
  std::string run_dir;

  std::string input_train;
  std::string input_valid;
  std::string input_test;
  std::string generated_override;  // external generator output, if any

  int min_count = 2;

  double bm25_k1 = 1.2;
  double bm25_b = 0.75;

  int lm_order = 3;
  double lm_delta = 0.1;
  double lm_lambda = 0.5;
  int beam_width = 10;
  int max_len = 20;
  int top_k = 5;

  GrayscaleBuildConfig grayscale;
  TrainConfig train;

  MetricConfig metrics;
  bool dump_groups = false;

  std::vector<double> sweep_margins = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<ObjectiveMode> ablate_modes = {
      ObjectiveMode::ran_only, ObjectiveMode::ran_ret, ObjectiveMode::ran_gen, ObjectiveMode::uni,
      ObjectiveMode::flat_negatives};

  SyntheticConfig synthetic;
  bool make_synthetic = false;

  static PipelineConfig from_json(const nlohmann::json& root);  // throws ConfigError
  static PipelineConfig from_file(const std::string& path);
  nlohmann::json to_json() const;

  // Applies a dotted-path override such as "train.margin=0.4" or "seed=3".
  void apply_override(const std::string& assignment);
};

// Artifact names inside run_dir.
namespace artifact {
inline constexpr const char* kTrainCorpus = "corpus.train.txt";
inline constexpr const char* kValidCorpus = "corpus.valid.txt";
inline constexpr const char* kTestCorpus = "corpus.test.txt";
inline constexpr const char* kVocab = "vocab.tsv";
inline constexpr const char* kIndex = "bm25.idx";
inline constexpr const char* kLm = "lm.model";
inline constexpr const char* kGenerated = "generated.tsv";
inline constexpr const char* kGrayscale = "grayscale.jsonl";
inline constexpr const char* kCheckpoint = "checkpoint.bin";
inline constexpr const char* kTrainLogCsv = "train_log.csv";
inline constexpr const char* kTrainLogJsonl = "train_log.jsonl";
inline constexpr const char* kReport = "report.csv";
inline constexpr const char* kReportGroups = "report_groups.jsonl";
inline constexpr const char* kSweep = "sweep.csv";
inline constexpr const char* kAblate = "ablate.csv";
}  // namespace artifact

// FNV-1a 64 over the file bytes, as "fnv1a:<16 hex digits>".
std::string hash_file(const std::string& path);

// Each stage validates its inputs (ArtifactError names the missing artifact
// and the stage that produces it), writes its outputs, a manifest per primary
// artifact, and echoes the resolved config to <stage>.resolved.json.
void run_ingest(const PipelineConfig& config);
void run_build_index(const PipelineConfig& config);
void run_train_lm(const PipelineConfig& config);
void run_generate(const PipelineConfig& config);
void run_build_grayscale(const PipelineConfig& config);
void run_train(const PipelineConfig& config);
void run_evaluate(const PipelineConfig& config);
void run_sweep_margin(const PipelineConfig& config);
void run_ablate(const PipelineConfig& config);

}  // namespace graymatch
