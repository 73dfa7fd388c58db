#pragma once

#include <cstdint>

#include "graymatch/corpus.hpp"

namespace graymatch {

// Topic-structured synthetic dialogues. A dialogue draws one topic and one
// entity of that topic; every utterance mixes topic words, common words and
// the entity word. Test/valid groups pair the ground truth with same-topic
// strong distractors (different entity) and cross-topic random distractors,
// mirroring the train/test distractor-strength gap the toolkit targets.
struct SyntheticConfig {
  int topics = 200;
  int entities_per_topic = 4;
  int topic_vocab = 8;    // topic words per topic
  int common_vocab = 40;
  int train_dialogues = 2000;
  int valid_groups = 200;
  int test_groups = 500;
  int group_size = 10;
  int strong_distractors = 5;  // same topic, different entity
  int min_turns = 2;
  int max_turns = 4;
  int topic_words_per_turn = 3;
  int common_words_per_turn = 2;
  int response_entity_mentions = 2;
  std::uint64_t seed = 7;

  void validate() const;  // throws ConfigError
};

struct SyntheticCorpus {
  Corpus train;
  Corpus valid;
  Corpus test;
};

SyntheticCorpus make_synthetic(const SyntheticConfig& config);

}  // namespace graymatch
