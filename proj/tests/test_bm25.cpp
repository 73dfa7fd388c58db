#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "graymatch/bm25.hpp"
#include "graymatch/errors.hpp"
#include "graymatch/rng.hpp"

using namespace graymatch;

namespace {

TurnPair turn_pair(const std::string& input, std::uint32_t id) {
  return TurnPair{Utterance{tokenize(input)}, Utterance{tokenize("resp " + std::to_string(id))},
                  id, id};
}

std::vector<TurnPair> abc_corpus() {
  return {turn_pair("a b", 0), turn_pair("b c", 1), turn_pair("c d", 2)};
}

// Top-k of brute-force scoring every indexed document.
std::vector<RetrievalHit> brute_force_topk(const Bm25Index& index,
                                           const std::vector<std::string>& query, std::size_t k) {
  std::vector<RetrievalHit> hits;
  for (std::uint32_t pid = 0; pid < index.doc_count(); ++pid) {
    const double s = index.score(query, pid);
    if (s > 0.0) hits.push_back({pid, index.response_id(pid), s});
  }
  std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.pair_id < b.pair_id;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

std::vector<TurnPair> random_pairs(Rng& rng, int max_docs = 30, int vocab = 8) {
  const int docs = rng.range(1, max_docs);
  std::vector<TurnPair> pairs;
  for (int d = 0; d < docs; ++d) {
    std::string input;
    const int len = rng.range(1, 6);
    for (int j = 0; j < len; ++j) {
      if (j) input += ' ';
      input += static_cast<char>('a' + rng.below(static_cast<std::uint64_t>(vocab)));
    }
    pairs.push_back(turn_pair(input, static_cast<std::uint32_t>(d)));
  }
  return pairs;
}

}  // namespace

TEST_CASE("build_index counts documents, lengths and postings") {
  auto index = Bm25Index::build(abc_corpus(), 1.2, 0.75);
  CHECK(index.doc_count() == 3);
  CHECK(index.avgdl() == doctest::Approx(2.0));
  CHECK(index.doc_freq("b") == 2);
  CHECK(index.doc_freq("z") == 0);

  auto single = Bm25Index::build({turn_pair("a a", 0)});
  CHECK(single.doc_count() == 1);
  CHECK(single.avgdl() == doctest::Approx(2.0));
  CHECK(single.doc_freq("a") == 1);

  CHECK_THROWS_AS(Bm25Index::build({}), DataError);
}

TEST_CASE("idf follows the +1 log variant") {
  auto index = Bm25Index::build(abc_corpus());
  // hand evaluation: ln((N - n_t + 0.5)/(n_t + 0.5) + 1)
  CHECK(index.idf("a") == doctest::Approx(std::log(2.5 / 1.5 + 1.0)).epsilon(1e-12));
  CHECK(index.idf("a") == doctest::Approx(0.98083).epsilon(1e-5));
  CHECK(index.idf("z") == doctest::Approx(std::log(3.5 / 0.5 + 1.0)).epsilon(1e-12));
  CHECK(index.idf("z") == doctest::Approx(2.07944).epsilon(1e-5));

  auto all = Bm25Index::build({turn_pair("a", 0), turn_pair("a", 1), turn_pair("a b", 2)});
  CHECK(all.idf("a") == doctest::Approx(std::log(0.5 / 3.5 + 1.0)).epsilon(1e-12));
  CHECK(all.idf("a") == doctest::Approx(0.13353).epsilon(1e-4));
}

TEST_CASE("bm25_score matches the hand-computed fixture") {
  auto index = Bm25Index::build(abc_corpus(), 1.2, 0.75);
  const std::vector<std::string> query = {"a"};
  // idf(a) * (1 * 2.2) / (1 + 1.2 * (0.25 + 0.75 * (2/2))) = idf(a)
  CHECK(index.score(query, 0) == doctest::Approx(0.98083).epsilon(1e-6));

  const std::vector<std::string> zq = {"z"};
  CHECK(index.score(zq, 0) == 0.0);
  CHECK(index.score(zq, 1) == 0.0);

  const std::vector<std::string> az = {"a", "z"};
  CHECK(index.score(az, 0) == index.score(query, 0));

  CHECK_THROWS_AS(index.score(query, 99), DataError);
}

TEST_CASE("retrieve queries the last utterance and ranks deterministically") {
  auto index = Bm25Index::build(abc_corpus(), 1.2, 0.75);
  std::vector<Utterance> context = {Utterance{tokenize("unused turn")}, Utterance{tokenize("a b")}};
  auto hits = index.retrieve(context, 2);
  REQUIRE(!hits.empty());
  CHECK(hits[0].pair_id == 0);  // d1 matches both query terms
  CHECK(hits.size() <= 2);

  auto broad = index.retrieve(context, 100);
  CHECK(broad.size() <= 3);

  std::vector<Utterance> no_overlap = {Utterance{tokenize("z z")}};
  CHECK(index.retrieve(no_overlap, 5).empty());

  std::vector<Utterance> empty_last = {Utterance{tokenize("a")}, Utterance{}};
  CHECK(index.retrieve(empty_last, 5).empty());
}

TEST_CASE("retrieve equals brute-force top-k on randomized micro-corpora") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    auto pairs = random_pairs(rng);
    auto index = Bm25Index::build(pairs, 1.2, 0.75);
    std::string query_text;
    const int qlen = rng.range(1, 4);
    for (int j = 0; j < qlen; ++j) {
      if (j) query_text += ' ';
      query_text += static_cast<char>('a' + rng.below(8));
    }
    const std::size_t k = static_cast<std::size_t>(rng.range(1, 10));
    std::vector<Utterance> context = {Utterance{tokenize(query_text)}};
    auto got = index.retrieve(context, k);
    auto expected = brute_force_topk(index, tokenize(query_text), k);
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].pair_id == expected[i].pair_id);
      CHECK(got[i].score == expected[i].score);  // identical accumulation order
    }
  }
}

TEST_CASE("score nonnegativity and tf/idf monotonicity over random corpora") {
  Rng rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    auto pairs = random_pairs(rng, 15, 6);
    auto index = Bm25Index::build(pairs, 1.2, 0.75);

    // idf strictly decreasing in document frequency
    const std::size_t n = index.doc_count();
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t df = 0; df <= n; ++df) {
      const double nd = static_cast<double>(n), nt = static_cast<double>(df);
      const double idf = std::log((nd - nt + 0.5) / (nt + 0.5) + 1.0);
      CHECK(idf >= 0.0);
      CHECK(idf < prev);
      prev = idf;
    }

    // every score nonnegative; term contribution strictly increasing in tf
    for (std::uint32_t pid = 0; pid < index.doc_count(); ++pid) {
      const auto& doc = pairs[pid].input.tokens;
      CHECK(index.score(doc, pid) >= 0.0);
      const double dl = static_cast<double>(doc.size());
      const double norm = 1.2 * (1.0 - 0.75 + 0.75 * dl / index.avgdl());
      double prev_contrib = 0.0;
      for (int tf = 1; tf <= 4; ++tf) {
        const double contrib = static_cast<double>(tf) * 2.2 / (static_cast<double>(tf) + norm);
        CHECK(contrib > prev_contrib);
        prev_contrib = contrib;
      }
    }
  }
}

TEST_CASE("index save/load round-trips exactly") {
  Rng rng(5);
  auto pairs = random_pairs(rng);
  auto index = Bm25Index::build(pairs, 0.9, 0.4);
  std::stringstream ss;
  index.save(ss);
  auto loaded = Bm25Index::load(ss);
  CHECK(loaded == index);

  std::stringstream again;
  loaded.save(again);
  CHECK(again.str() == ss.str());
}

TEST_CASE("index load rejects version mismatches") {
  std::stringstream ss("graymatch-bm25 v999\n");
  CHECK_THROWS_AS(Bm25Index::load(ss), ArtifactError);
}
