#include "graymatch/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "graymatch/errors.hpp"

namespace graymatch {

namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "graymatch 0.1.0";

void check_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("config: unknown key '" + where + (where.empty() ? "" : ".") + key + "'");
}

template <typename T>
void read_field(const nlohmann::json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: bad value for '" + where + "." + key + "'");
  }
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& root) {
  PipelineConfig config;
  check_keys(root, {"seed", "run_dir", "paths", "corpus", "bm25", "generator", "grayscale",
                    "train", "metrics", "sweep", "ablate", "synthetic"},
             "");
  read_field(root, "seed", config.seed, "");
  read_field(root, "run_dir", config.run_dir, "");

  if (root.contains("paths")) {
    const auto& paths = root.at("paths");
    check_keys(paths, {"input_train", "input_valid", "input_test", "generated_override"}, "paths");
    read_field(paths, "input_train", config.input_train, "paths");
    read_field(paths, "input_valid", config.input_valid, "paths");
    read_field(paths, "input_test", config.input_test, "paths");
    read_field(paths, "generated_override", config.generated_override, "paths");
  }
  if (root.contains("corpus")) {
    const auto& corpus = root.at("corpus");
    check_keys(corpus, {"min_count"}, "corpus");
    read_field(corpus, "min_count", config.min_count, "corpus");
  }
  if (root.contains("bm25")) {
    const auto& bm25 = root.at("bm25");
    check_keys(bm25, {"k1", "b"}, "bm25");
    read_field(bm25, "k1", config.bm25_k1, "bm25");
    read_field(bm25, "b", config.bm25_b, "bm25");
  }
  if (root.contains("generator")) {
    const auto& gen = root.at("generator");
    check_keys(gen, {"order", "delta", "lambda", "beam_width", "max_len", "top_k"}, "generator");
    read_field(gen, "order", config.lm_order, "generator");
    read_field(gen, "delta", config.lm_delta, "generator");
    read_field(gen, "lambda", config.lm_lambda, "generator");
    read_field(gen, "beam_width", config.beam_width, "generator");
    read_field(gen, "max_len", config.max_len, "generator");
    read_field(gen, "top_k", config.top_k, "generator");
  }
  config.grayscale.seed = config.seed;
  if (root.contains("grayscale")) {
    const auto& gray = root.at("grayscale");
    check_keys(gray, {"pool_size", "n_random", "seed"}, "grayscale");
    read_field(gray, "pool_size", config.grayscale.pool_size, "grayscale");
    read_field(gray, "n_random", config.grayscale.n_random, "grayscale");
    read_field(gray, "seed", config.grayscale.seed, "grayscale");
  }
  config.train.seed = config.seed;
  if (root.contains("train")) {
    const auto& train = root.at("train");
    check_keys(train,
               {"mode", "margin", "learning_rate", "pretrain_epochs", "epochs", "batch_size",
                "seed", "adaptive_m", "n_random", "embedding_dim", "recency_decay",
                "interaction_weight_init"},
               "train");
    if (train.contains("mode")) config.train.mode = mode_from_name(train.at("mode").get<std::string>());
    read_field(train, "margin", config.train.margin, "train");
    read_field(train, "learning_rate", config.train.learning_rate, "train");
    read_field(train, "pretrain_epochs", config.train.pretrain_epochs, "train");
    read_field(train, "epochs", config.train.epochs, "train");
    read_field(train, "batch_size", config.train.batch_size, "train");
    read_field(train, "seed", config.train.seed, "train");
    read_field(train, "adaptive_m", config.train.adaptive_m, "train");
    read_field(train, "n_random", config.train.n_random, "train");
    read_field(train, "embedding_dim", config.train.embedding_dim, "train");
    read_field(train, "recency_decay", config.train.recency_decay, "train");
    read_field(train, "interaction_weight_init", config.train.interaction_weight_init, "train");
  }
  config.grayscale.n_random = config.train.n_random;
  if (root.contains("grayscale") && root.at("grayscale").contains("n_random"))
    read_field(root.at("grayscale"), "n_random", config.grayscale.n_random, "grayscale");
  if (root.contains("metrics")) {
    const auto& metrics = root.at("metrics");
    check_keys(metrics, {"recall", "ties", "dump_groups"}, "metrics");
    if (metrics.contains("recall")) {
      config.metrics.recall_pairs.clear();
      for (const auto& pair : metrics.at("recall")) {
        if (!pair.is_array() || pair.size() != 2)
          throw ConfigError("config: metrics.recall entries must be [n, k] pairs");
        config.metrics.recall_pairs.emplace_back(pair[0].get<int>(), pair[1].get<int>());
      }
    }
    if (metrics.contains("ties")) {
      const std::string ties = metrics.at("ties").get<std::string>();
      if (ties == "by_index") config.metrics.tie_mode = TieMode::by_index;
      else if (ties == "pessimistic") config.metrics.tie_mode = TieMode::pessimistic;
      else throw ConfigError("config: metrics.ties must be by_index or pessimistic");
    }
    read_field(metrics, "dump_groups", config.dump_groups, "metrics");
  }
  if (root.contains("sweep")) {
    const auto& sweep = root.at("sweep");
    check_keys(sweep, {"margins"}, "sweep");
    if (sweep.contains("margins"))
      config.sweep_margins = sweep.at("margins").get<std::vector<double>>();
  }
  if (root.contains("ablate")) {
    const auto& ablate = root.at("ablate");
    check_keys(ablate, {"modes"}, "ablate");
    if (ablate.contains("modes")) {
      config.ablate_modes.clear();
      for (const auto& name : ablate.at("modes"))
        config.ablate_modes.push_back(mode_from_name(name.get<std::string>()));
    }
  }
  config.synthetic.seed = config.seed;
  if (root.contains("synthetic")) {
    const auto& synth = root.at("synthetic");
    check_keys(synth,
               {"topics", "entities_per_topic", "topic_vocab", "common_vocab", "train_dialogues",
                "valid_groups", "test_groups", "group_size", "strong_distractors", "min_turns",
                "max_turns", "topic_words_per_turn", "common_words_per_turn",
                "response_entity_mentions", "seed"},
               "synthetic");
    read_field(synth, "topics", config.synthetic.topics, "synthetic");
    read_field(synth, "entities_per_topic", config.synthetic.entities_per_topic, "synthetic");
    read_field(synth, "topic_vocab", config.synthetic.topic_vocab, "synthetic");
    read_field(synth, "common_vocab", config.synthetic.common_vocab, "synthetic");
    read_field(synth, "train_dialogues", config.synthetic.train_dialogues, "synthetic");
    read_field(synth, "valid_groups", config.synthetic.valid_groups, "synthetic");
    read_field(synth, "test_groups", config.synthetic.test_groups, "synthetic");
    read_field(synth, "group_size", config.synthetic.group_size, "synthetic");
    read_field(synth, "strong_distractors", config.synthetic.strong_distractors, "synthetic");
    read_field(synth, "min_turns", config.synthetic.min_turns, "synthetic");
    read_field(synth, "max_turns", config.synthetic.max_turns, "synthetic");
    read_field(synth, "topic_words_per_turn", config.synthetic.topic_words_per_turn, "synthetic");
    read_field(synth, "common_words_per_turn", config.synthetic.common_words_per_turn, "synthetic");
    read_field(synth, "response_entity_mentions", config.synthetic.response_entity_mentions,
               "synthetic");
    read_field(synth, "seed", config.synthetic.seed, "synthetic");
  }
  if (config.run_dir.empty()) throw ConfigError("config: run_dir is required");
  return config;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return from_json(root);
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json root;
  root["seed"] = seed;
  root["run_dir"] = run_dir;
  root["paths"] = {{"input_train", input_train},
                   {"input_valid", input_valid},
                   {"input_test", input_test},
                   {"generated_override", generated_override}};
  root["corpus"] = {{"min_count", min_count}};
  root["bm25"] = {{"k1", bm25_k1}, {"b", bm25_b}};
  root["generator"] = {{"order", lm_order},     {"delta", lm_delta}, {"lambda", lm_lambda},
                       {"beam_width", beam_width}, {"max_len", max_len}, {"top_k", top_k}};
  root["grayscale"] = {{"pool_size", grayscale.pool_size},
                       {"n_random", grayscale.n_random},
                       {"seed", grayscale.seed}};
  root["train"] = {{"mode", mode_name(train.mode)},
                   {"margin", train.margin},
                   {"learning_rate", train.learning_rate},
                   {"pretrain_epochs", train.pretrain_epochs},
                   {"epochs", train.epochs},
                   {"batch_size", train.batch_size},
                   {"seed", train.seed},
                   {"adaptive_m", train.adaptive_m},
                   {"n_random", train.n_random},
                   {"embedding_dim", train.embedding_dim},
                   {"recency_decay", train.recency_decay},
                   {"interaction_weight_init", train.interaction_weight_init}};
  nlohmann::json recall = nlohmann::json::array();
  for (const auto& [n, k] : metrics.recall_pairs) recall.push_back({n, k});
  root["metrics"] = {{"recall", recall},
                     {"ties", metrics.tie_mode == TieMode::by_index ? "by_index" : "pessimistic"},
                     {"dump_groups", dump_groups}};
  root["sweep"] = {{"margins", sweep_margins}};
  nlohmann::json modes = nlohmann::json::array();
  for (ObjectiveMode mode : ablate_modes) modes.push_back(mode_name(mode));
  root["ablate"] = {{"modes", modes}};
  root["synthetic"] = {{"topics", synthetic.topics},
                       {"entities_per_topic", synthetic.entities_per_topic},
                       {"topic_vocab", synthetic.topic_vocab},
                       {"common_vocab", synthetic.common_vocab},
                       {"train_dialogues", synthetic.train_dialogues},
                       {"valid_groups", synthetic.valid_groups},
                       {"test_groups", synthetic.test_groups},
                       {"group_size", synthetic.group_size},
                       {"strong_distractors", synthetic.strong_distractors},
                       {"min_turns", synthetic.min_turns},
                       {"max_turns", synthetic.max_turns},
                       {"topic_words_per_turn", synthetic.topic_words_per_turn},
                       {"common_words_per_turn", synthetic.common_words_per_turn},
                       {"response_entity_mentions", synthetic.response_entity_mentions},
                       {"seed", synthetic.seed}};
  return root;
}

void PipelineConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like section.key=value: '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  nlohmann::json root = to_json();
  nlohmann::json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("override has an empty key segment: '" + assignment + "'");
    if (!node->contains(key)) throw ConfigError("override targets unknown key '" + path + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    *node = nlohmann::json::parse(value);
  } catch (const nlohmann::json::exception&) {
    *node = value;  // bare strings need no quoting
  }
  *this = from_json(root);
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot hash missing file: " + path);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buffer[1 << 15];
  while (in) {
    in.read(buffer, sizeof(buffer));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 0x100000001b3ULL;
    }
  }
  char out[32];
  std::snprintf(out, sizeof(out), "fnv1a:%016llx", static_cast<unsigned long long>(hash));
  return out;
}

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void require_artifact(const std::string& path, const std::string& producing_stage) {
  if (!fs::exists(path))
    throw ArtifactError("missing artifact '" + path + "' (produced by stage '" + producing_stage +
                        "')");
}

void ensure_run_dir(const PipelineConfig& config) {
  std::error_code ec;
  fs::create_directories(config.run_dir, ec);
  if (ec) throw ArtifactError("cannot create run dir '" + config.run_dir + "': " + ec.message());
}

void echo_config(const PipelineConfig& config, const std::string& stage) {
  std::ofstream out(join_path(config.run_dir, stage + ".resolved.json"));
  if (!out) throw ArtifactError("cannot write resolved config for stage " + stage);
  out << config.to_json().dump(2) << '\n';
}

void write_manifest(const PipelineConfig& config, const std::string& stage,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  nlohmann::json manifest;
  manifest["stage"] = stage;
  manifest["version"] = kToolVersion;
  {
    std::ostringstream cfg;
    cfg << config.to_json().dump();
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : cfg.str()) {
      hash ^= c;
      hash *= 0x100000001b3ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a:%016llx", static_cast<unsigned long long>(hash));
    manifest["config_hash"] = buf;
  }
  manifest["inputs"] = nlohmann::json::object();
  for (const auto& input : inputs) manifest["inputs"][input] = hash_file(input);
  manifest["outputs"] = outputs;

  for (const auto& output : outputs) {
    std::ofstream out(output + ".manifest.json");
    if (!out) throw ArtifactError("cannot write manifest for " + output);
    out << manifest.dump(2) << '\n';
  }
}

struct StagePaths {
  explicit StagePaths(const PipelineConfig& config) : dir(config.run_dir) {}
  std::string operator()(const char* name) const { return join_path(dir, name); }
  std::string dir;
};

}  // namespace

void run_ingest(const PipelineConfig& config) {
  ensure_run_dir(config);
  const StagePaths path(config);
  std::vector<std::string> inputs;

  Corpus train, valid, test;
  if (config.make_synthetic) {
    SyntheticCorpus synth = make_synthetic(config.synthetic);
    train = std::move(synth.train);
    valid = std::move(synth.valid);
    test = std::move(synth.test);
  } else {
    if (config.input_train.empty() || config.input_valid.empty() || config.input_test.empty())
      throw ConfigError("ingest: paths.input_{train,valid,test} are required without --make-synthetic");
    require_artifact(config.input_train, "external data");
    require_artifact(config.input_valid, "external data");
    require_artifact(config.input_test, "external data");
    inputs = {config.input_train, config.input_valid, config.input_test};
    train = read_corpus(config.input_train, Split::train);
    valid = read_corpus(config.input_valid, Split::valid);
    test = read_corpus(config.input_test, Split::test);
  }

  write_corpus(path(artifact::kTrainCorpus), train);
  write_corpus(path(artifact::kValidCorpus), valid);
  write_corpus(path(artifact::kTestCorpus), test);
  save_vocab(path(artifact::kVocab), build_vocab(train, config.min_count));

  write_manifest(config, "ingest", inputs,
                 {path(artifact::kTrainCorpus), path(artifact::kValidCorpus),
                  path(artifact::kTestCorpus), path(artifact::kVocab)});
  echo_config(config, "ingest");
}

void run_build_index(const PipelineConfig& config) {
  ensure_run_dir(config);
  const StagePaths path(config);
  require_artifact(path(artifact::kTrainCorpus), "ingest");

  const Corpus train = read_corpus(path(artifact::kTrainCorpus), Split::train);
  if (train.examples.empty()) throw DataError("build-index: train corpus is empty");
  const auto pairs = split_to_pairs(train);
  const Bm25Index index = Bm25Index::build(pairs, config.bm25_k1, config.bm25_b);
  save_index(path(artifact::kIndex), index);

  write_manifest(config, "build-index", {path(artifact::kTrainCorpus)}, {path(artifact::kIndex)});
  echo_config(config, "build-index");
}

void run_train_lm(const PipelineConfig& config) {
  ensure_run_dir(config);
  const StagePaths path(config);
  require_artifact(path(artifact::kTrainCorpus), "ingest");
  require_artifact(path(artifact::kVocab), "ingest");

  const Corpus train = read_corpus(path(artifact::kTrainCorpus), Split::train);
  const Vocab vocab = load_vocab(path(artifact::kVocab));
  const auto pairs = split_to_pairs(train);
  const NGramModel model =
      NGramModel::train(pairs, vocab, config.lm_order, config.lm_delta, config.lm_lambda);
  save_lm(path(artifact::kLm), model);

  write_manifest(config, "train-lm", {path(artifact::kTrainCorpus), path(artifact::kVocab)},
                 {path(artifact::kLm)});
  echo_config(config, "train-lm");
}

void run_generate(const PipelineConfig& config) {
  ensure_run_dir(config);
  const StagePaths path(config);
  require_artifact(path(artifact::kTrainCorpus), "ingest");
  require_artifact(path(artifact::kLm), "train-lm");

  const Corpus train = read_corpus(path(artifact::kTrainCorpus), Split::train);
  const NGramModel model = load_lm(path(artifact::kLm));

  std::ofstream out(path(artifact::kGenerated));
  if (!out) throw ArtifactError("cannot write generated-responses file");
  for (std::size_t i = 0; i < train.examples.size(); ++i) {
    const auto& example = train.examples[i];
    if (example.label != Label::relevant) continue;
    const auto responses =
        model.beam_generate(example.context, config.beam_width, config.max_len, config.top_k);
    append_generated(out, static_cast<std::uint64_t>(i), responses);
  }
  out.close();

  write_manifest(config, "generate", {path(artifact::kTrainCorpus), path(artifact::kLm)},
                 {path(artifact::kGenerated)});
  echo_config(config, "generate");
}

void run_build_grayscale(const PipelineConfig& config) {
  ensure_run_dir(config);
  const StagePaths path(config);
  require_artifact(path(artifact::kTrainCorpus), "ingest");
  require_artifact(path(artifact::kIndex), "build-index");
  const std::string generated_path =
      config.generated_override.empty() ? path(artifact::kGenerated) : config.generated_override;
  require_artifact(generated_path, "generate");

  const Corpus train = read_corpus(path(artifact::kTrainCorpus), Split::train);
  const Bm25Index index = load_index(path(artifact::kIndex));
  const auto pairs = split_to_pairs(train);
  const auto generated = load_generated(generated_path);
  const auto sets = build_grayscale(train, index, pairs, generated, config.grayscale);
  write_grayscale(path(artifact::kGrayscale), sets);

  write_manifest(config, "build-grayscale",
                 {path(artifact::kTrainCorpus), path(artifact::kIndex), generated_path},
                 {path(artifact::kGrayscale)});
  echo_config(config, "build-grayscale");
}

void run_train(const PipelineConfig& config) {
  ensure_run_dir(config);
  const StagePaths path(config);
  require_artifact(path(artifact::kGrayscale), "build-grayscale");
  require_artifact(path(artifact::kValidCorpus), "ingest");
  require_artifact(path(artifact::kVocab), "ingest");

  auto sets = read_grayscale(path(artifact::kGrayscale));
  const Corpus valid = read_corpus(path(artifact::kValidCorpus), Split::valid);
  const auto valid_groups = groups_from_corpus(valid);
  const Vocab vocab = load_vocab(path(artifact::kVocab));

  DualEncoderScorer scorer(vocab, config.train.embedding_dim, config.train.recency_decay,
                           config.train.seed, config.train.interaction_weight_init);
  const TrainLog log = train(config.train, sets, valid_groups, scorer);

  save_checkpoint(path(artifact::kCheckpoint), scorer);
  {
    std::ofstream out(path(artifact::kTrainLogCsv));
    write_train_log_csv(out, log);
  }
  {
    std::ofstream out(path(artifact::kTrainLogJsonl));
    write_train_log_jsonl(out, log);
  }

  write_manifest(config, "train",
                 {path(artifact::kGrayscale), path(artifact::kValidCorpus), path(artifact::kVocab)},
                 {path(artifact::kCheckpoint), path(artifact::kTrainLogCsv),
                  path(artifact::kTrainLogJsonl)});
  echo_config(config, "train");
}

void run_evaluate(const PipelineConfig& config) {
  ensure_run_dir(config);
  const StagePaths path(config);
  require_artifact(path(artifact::kCheckpoint), "train");
  require_artifact(path(artifact::kTestCorpus), "ingest");
  require_artifact(path(artifact::kVocab), "ingest");

  const Vocab vocab = load_vocab(path(artifact::kVocab));
  const DualEncoderScorer scorer = load_checkpoint(path(artifact::kCheckpoint), vocab);
  const Corpus test = read_corpus(path(artifact::kTestCorpus), Split::test);
  const auto groups = groups_from_corpus(test);

  const MetricsReport report = evaluate(scorer, groups, config.metrics);
  {
    std::ofstream out(path(artifact::kReport));
    write_report_csv(out, report);
  }
  print_report_table(std::cout, report);

  std::vector<std::string> outputs = {path(artifact::kReport)};
  if (config.dump_groups) {
    std::ofstream out(path(artifact::kReportGroups));
    dump_group_scores(out, scorer, groups, config.metrics.tie_mode);
    outputs.push_back(path(artifact::kReportGroups));
  }
  write_manifest(config, "evaluate",
                 {path(artifact::kCheckpoint), path(artifact::kTestCorpus), path(artifact::kVocab)},
                 outputs);
  echo_config(config, "evaluate");
}

namespace {

std::string csv_metrics_header(const MetricConfig& metrics) {
  std::string header = "MAP,MRR,P@1";
  for (const auto& [n, k] : metrics.recall_pairs)
    header += ",R" + std::to_string(n) + "@" + std::to_string(k);
  return header;
}

std::string csv_metrics_row(const MetricsReport& report, const MetricConfig& metrics) {
  char buf[32];
  std::string row;
  auto append = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    row += buf;
  };
  append(report.map);
  row += ',';
  append(report.mrr);
  row += ',';
  append(report.p_at_1);
  for (const auto& pair : metrics.recall_pairs) {
    row += ',';
    auto it = report.recall.find(pair);
    append(it == report.recall.end() ? 0.0 : it->second);
  }
  return row;
}

}  // namespace

void run_sweep_margin(const PipelineConfig& config) {
  ensure_run_dir(config);
  const StagePaths path(config);
  require_artifact(path(artifact::kGrayscale), "build-grayscale");
  require_artifact(path(artifact::kValidCorpus), "ingest");
  require_artifact(path(artifact::kTestCorpus), "ingest");
  require_artifact(path(artifact::kVocab), "ingest");
  if (config.sweep_margins.empty()) throw ConfigError("sweep-margin: empty margin list");

  const auto sets = read_grayscale(path(artifact::kGrayscale));
  const Corpus valid = read_corpus(path(artifact::kValidCorpus), Split::valid);
  const Corpus test = read_corpus(path(artifact::kTestCorpus), Split::test);
  const auto valid_groups = groups_from_corpus(valid);
  const auto test_groups = groups_from_corpus(test);
  const Vocab vocab = load_vocab(path(artifact::kVocab));

  std::ofstream out(path(artifact::kSweep));
  if (!out) throw ArtifactError("cannot write sweep file");
  out << "margin," << csv_metrics_header(config.metrics) << '\n';
  for (double margin : config.sweep_margins) {
    TrainConfig train_config = config.train;
    train_config.margin = margin;
    std::vector<GrayscaleSet> working = sets;
    DualEncoderScorer scorer(vocab, train_config.embedding_dim, train_config.recency_decay,
                             train_config.seed, train_config.interaction_weight_init);
    train(train_config, working, valid_groups, scorer);
    const MetricsReport report = evaluate(scorer, test_groups, config.metrics);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", margin);
    out << buf << ',' << csv_metrics_row(report, config.metrics) << '\n';
  }
  out.close();

  write_manifest(config, "sweep-margin",
                 {path(artifact::kGrayscale), path(artifact::kValidCorpus),
                  path(artifact::kTestCorpus), path(artifact::kVocab)},
                 {path(artifact::kSweep)});
  echo_config(config, "sweep-margin");
}

void run_ablate(const PipelineConfig& config) {
  ensure_run_dir(config);
  const StagePaths path(config);
  require_artifact(path(artifact::kGrayscale), "build-grayscale");
  require_artifact(path(artifact::kValidCorpus), "ingest");
  require_artifact(path(artifact::kTestCorpus), "ingest");
  require_artifact(path(artifact::kVocab), "ingest");

  const auto sets = read_grayscale(path(artifact::kGrayscale));
  const Corpus valid = read_corpus(path(artifact::kValidCorpus), Split::valid);
  const Corpus test = read_corpus(path(artifact::kTestCorpus), Split::test);
  const auto valid_groups = groups_from_corpus(valid);
  const auto test_groups = groups_from_corpus(test);
  const Vocab vocab = load_vocab(path(artifact::kVocab));

  const auto rows = run_ablation_grid(config.train, sets, valid_groups, test_groups, vocab,
                                      config.ablate_modes, config.metrics);
  std::ofstream out(path(artifact::kAblate));
  if (!out) throw ArtifactError("cannot write ablation file");
  out << "mode," << csv_metrics_header(config.metrics) << '\n';
  for (const auto& row : rows)
    out << mode_name(row.mode) << ',' << csv_metrics_row(row.report, config.metrics) << '\n';
  out.close();

  write_manifest(config, "ablate",
                 {path(artifact::kGrayscale), path(artifact::kValidCorpus),
                  path(artifact::kTestCorpus), path(artifact::kVocab)},
                 {path(artifact::kAblate)});
  echo_config(config, "ablate");
}

}  // namespace graymatch
