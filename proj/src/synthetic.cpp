#include "graymatch/synthetic.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "graymatch/errors.hpp"
#include "graymatch/rng.hpp"

namespace graymatch {

void SyntheticConfig::validate() const {
  if (topics < 2) throw ConfigError("synthetic: need at least 2 topics");
  if (entities_per_topic < 2) throw ConfigError("synthetic: need at least 2 entities per topic");
  if (topic_vocab < topic_words_per_turn)
    throw ConfigError("synthetic: topic_vocab must be >= topic_words_per_turn");
  if (common_vocab < common_words_per_turn)
    throw ConfigError("synthetic: common_vocab must be >= common_words_per_turn");
  if (train_dialogues < topics) throw ConfigError("synthetic: need >= 1 dialogue per topic");
  if (min_turns < 1 || max_turns < min_turns) throw ConfigError("synthetic: bad turn bounds");
  if (group_size < 2) throw ConfigError("synthetic: group_size must be >= 2");
  if (strong_distractors + 1 > group_size)
    throw ConfigError("synthetic: strong_distractors must leave room for the rest of the group");
}

namespace {

struct WordBank {
  std::vector<std::vector<std::string>> topic_words;   // [topic][word]
  std::vector<std::vector<std::string>> entity_words;  // [topic][entity]
  std::vector<std::string> common_words;
};

WordBank make_bank(const SyntheticConfig& cfg) {
  WordBank bank;
  bank.topic_words.resize(static_cast<std::size_t>(cfg.topics));
  bank.entity_words.resize(static_cast<std::size_t>(cfg.topics));
  for (int t = 0; t < cfg.topics; ++t) {
    for (int w = 0; w < cfg.topic_vocab; ++w)
      bank.topic_words[static_cast<std::size_t>(t)].push_back(
          "t" + std::to_string(t) + "w" + std::to_string(w));
    for (int e = 0; e < cfg.entities_per_topic; ++e)
      bank.entity_words[static_cast<std::size_t>(t)].push_back(
          "t" + std::to_string(t) + "e" + std::to_string(e));
  }
  for (int c = 0; c < cfg.common_vocab; ++c) bank.common_words.push_back("c" + std::to_string(c));
  return bank;
}

// Distinct sample of `count` items from `words`.
std::vector<std::string> pick(const std::vector<std::string>& words, int count, Rng& rng) {
  std::vector<std::size_t> idx(words.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<std::string> out;
  for (int k = 0; k < count; ++k) {
    const std::size_t j =
        static_cast<std::size_t>(k) + static_cast<std::size_t>(rng.below(idx.size() - static_cast<std::size_t>(k)));
    std::swap(idx[static_cast<std::size_t>(k)], idx[j]);
    out.push_back(words[idx[static_cast<std::size_t>(k)]]);
  }
  return out;
}

Utterance make_utterance(const WordBank& bank, const SyntheticConfig& cfg, int topic, int entity,
                         int entity_mentions, Rng& rng) {
  std::vector<std::string> tokens =
      pick(bank.topic_words[static_cast<std::size_t>(topic)], cfg.topic_words_per_turn, rng);
  for (auto& w : pick(bank.common_words, cfg.common_words_per_turn, rng)) tokens.push_back(w);
  for (int m = 0; m < entity_mentions; ++m)
    tokens.push_back(
        bank.entity_words[static_cast<std::size_t>(topic)][static_cast<std::size_t>(entity)]);
  rng.shuffle(tokens);
  return Utterance{std::move(tokens)};
}

// The entity word appears in the first context turn and in the response,
// nowhere else. Later turns stay entity-free so that the single-turn pairs
// cut out of the dialogue never expose the entity as a retrievable response:
// the retrieval pool stays topic-matched (strong but wrong-entity), which is
// what makes it a usable middle tier.
LabeledExample make_dialogue(const WordBank& bank, const SyntheticConfig& cfg, int topic,
                             int entity, Rng& rng) {
  LabeledExample example;
  example.label = Label::relevant;
  const int turns = rng.range(cfg.min_turns, cfg.max_turns);
  for (int j = 0; j < turns; ++j)
    example.context.push_back(
        make_utterance(bank, cfg, topic, entity, j == 0 ? cfg.response_entity_mentions : 0, rng));
  example.response =
      make_utterance(bank, cfg, topic, entity, cfg.response_entity_mentions, rng);
  return example;
}

Corpus make_group_split(const WordBank& bank, const SyntheticConfig& cfg, int groups, Split split,
                        Rng& rng) {
  Corpus corpus;
  corpus.split = split;
  for (int g = 0; g < groups; ++g) {
    const int topic = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.topics)));
    const int entity = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.entities_per_topic)));
    const LabeledExample dialogue = make_dialogue(bank, cfg, topic, entity, rng);

    std::vector<LabeledExample> group;
    group.push_back(dialogue);
    for (int s = 0; s < cfg.strong_distractors; ++s) {
      int other_entity =
          static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.entities_per_topic - 1)));
      if (other_entity >= entity) ++other_entity;
      LabeledExample distractor;
      distractor.label = Label::irrelevant;
      distractor.context = dialogue.context;
      distractor.response = make_utterance(bank, cfg, topic, other_entity, cfg.response_entity_mentions, rng);
      group.push_back(std::move(distractor));
    }
    for (int r = cfg.strong_distractors + 1; r < cfg.group_size; ++r) {
      int other_topic = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.topics - 1)));
      if (other_topic >= topic) ++other_topic;
      const int other_entity =
          static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.entities_per_topic)));
      LabeledExample distractor;
      distractor.label = Label::irrelevant;
      distractor.context = dialogue.context;
      distractor.response = make_utterance(bank, cfg, other_topic, other_entity, cfg.response_entity_mentions, rng);
      group.push_back(std::move(distractor));
    }
    rng.shuffle(group);
    for (auto& example : group) corpus.examples.push_back(std::move(example));
  }
  return corpus;
}

}  // namespace

SyntheticCorpus make_synthetic(const SyntheticConfig& config) {
  config.validate();
  const WordBank bank = make_bank(config);
  SyntheticCorpus corpus;

  Rng train_rng(mix_seed(config.seed, 0x7a13));
  corpus.train.split = Split::train;
  for (int d = 0; d < config.train_dialogues; ++d) {
    const int topic = d % config.topics;  // even coverage
    const int entity =
        static_cast<int>(train_rng.below(static_cast<std::uint64_t>(config.entities_per_topic)));
    corpus.train.examples.push_back(make_dialogue(bank, config, topic, entity, train_rng));
  }

  Rng valid_rng(mix_seed(config.seed, 0x7a14));
  corpus.valid = make_group_split(bank, config, config.valid_groups, Split::valid, valid_rng);
  Rng test_rng(mix_seed(config.seed, 0x7a15));
  corpus.test = make_group_split(bank, config, config.test_groups, Split::test, test_rng);
  return corpus;
}

}  // namespace graymatch
