#include <exception>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "graymatch/errors.hpp"
#include "graymatch/pipeline.hpp"

namespace {

using graymatch::PipelineConfig;

struct CommonOptions {
  std::string config_path;
  std::string run_dir;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_path, "JSON configuration file");
  cmd->add_option("--run-dir", opts.run_dir, "run directory (overrides the config value)");
  cmd->add_option("--set", opts.overrides,
                  "override a config value, e.g. --set train.margin=0.4 --set seed=3");
}

PipelineConfig resolve(const CommonOptions& opts) {
  PipelineConfig config;
  if (!opts.config_path.empty()) {
    config = PipelineConfig::from_file(opts.config_path);
  } else if (!opts.run_dir.empty()) {
    config.run_dir = opts.run_dir;
  } else {
    throw graymatch::ConfigError("either --config or --run-dir is required");
  }
  if (!opts.run_dir.empty()) config.run_dir = opts.run_dir;
  for (const auto& assignment : opts.overrides) config.apply_override(assignment);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graymatch: grayscale training data and multi-level ranking objectives\n"
               "for dialogue response selection"};
  app.require_subcommand(1);

  struct Stage {
    const char* name;
    const char* help;
    std::function<void(const PipelineConfig&)> run;
    CommonOptions opts;
    bool make_synthetic = false;
  };
  std::vector<Stage> stages = {
      {"ingest", "tokenize raw corpora (or synthesize one) and build the vocabulary",
       graymatch::run_ingest, {}, false},
      {"build-index", "build the BM25 index over single-turn pairs", graymatch::run_build_index,
       {}, false},
      {"train-lm", "train the n-gram generation model", graymatch::run_train_lm, {}, false},
      {"generate", "decode tier-2 generation responses for every train context",
       graymatch::run_generate, {}, false},
      {"build-grayscale", "assemble tiered grayscale sets per context",
       graymatch::run_build_grayscale, {}, false},
      {"train", "train the matching model", graymatch::run_train, {}, false},
      {"evaluate", "rank the test candidate groups and report metrics", graymatch::run_evaluate,
       {}, false},
      {"sweep-margin", "train/evaluate across the configured margin grid",
       graymatch::run_sweep_margin, {}, false},
      {"ablate", "run the objective-mode ablation grid", graymatch::run_ablate, {}, false},
  };

  for (auto& stage : stages) {
    CLI::App* cmd = app.add_subcommand(stage.name, stage.help);
    add_common(cmd, stage.opts);
    if (std::string(stage.name) == "ingest")
      cmd->add_flag("--make-synthetic", stage.make_synthetic,
                    "generate the bundled topic/entity synthetic corpus instead of reading input files");
    cmd->callback([&stage]() {
      PipelineConfig config = resolve(stage.opts);
      config.make_synthetic = stage.make_synthetic;
      stage.run(config);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const graymatch::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const graymatch::ArtifactError& e) {
    std::cerr << "artifact error: " << e.what() << '\n';
    return 3;
  } catch (const graymatch::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
