#include <doctest.h>

#include <cmath>
#include <sstream>

#include "graymatch/corpus.hpp"
#include "graymatch/errors.hpp"
#include "graymatch/matcher.hpp"
#include "graymatch/objectives.hpp"
#include "graymatch/rng.hpp"

using namespace graymatch;

namespace {

Vocab vocab_of(const std::vector<std::string>& tokens) {
  Vocab vocab;
  for (const auto& t : tokens) vocab.add(t);
  return vocab;
}

IdContext random_context(Rng& rng, int vocab_size, int max_turns = 4, int max_tokens = 5) {
  IdContext context(static_cast<std::size_t>(rng.range(1, max_turns)));
  for (auto& turn : context)
    for (int j = rng.range(0, max_tokens); j > 0; --j)
      turn.push_back(rng.range(0, vocab_size - 1));
  return context;
}

IdUtterance random_response(Rng& rng, int vocab_size, int max_tokens = 5) {
  IdUtterance response;
  for (int j = rng.range(1, max_tokens); j > 0; --j)
    response.push_back(rng.range(0, vocab_size - 1));
  return response;
}

void randomize_params(DualEncoderScorer& scorer, Rng& rng) {
  for (auto& e : scorer.embeddings()) e = rng.uniform(-1.0, 1.0);
  for (auto& w : scorer.interaction_weights()) w = rng.uniform(-1.0, 1.0);
  scorer.bias() = rng.uniform(-0.5, 0.5);
}

}  // namespace

TEST_CASE("encode_context: single turn is a plain token mean") {
  Vocab vocab = vocab_of({"x", "y"});
  DualEncoderScorer scorer(vocab, 3, 0.7, 42);
  const int x = vocab.lookup("x"), y = vocab.lookup("y");

  IdContext context = {{x, y}};
  auto u = scorer.encode_context(context);
  for (int t = 0; t < 3; ++t) {
    const double expect = 0.5 * (scorer.embeddings()[static_cast<std::size_t>(x * 3 + t)] +
                                 scorer.embeddings()[static_cast<std::size_t>(y * 3 + t)]);
    CHECK(u[static_cast<std::size_t>(t)] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("encode_context: duplicated turn with gamma=1 equals the single turn") {
  Vocab vocab = vocab_of({"x", "y"});
  DualEncoderScorer scorer(vocab, 4, 1.0, 3);
  IdContext one = {{vocab.lookup("x"), vocab.lookup("y")}};
  IdContext two = {one[0], one[0]};
  auto u1 = scorer.encode_context(one);
  auto u2 = scorer.encode_context(two);
  for (std::size_t t = 0; t < u1.size(); ++t) CHECK(u1[t] == doctest::Approx(u2[t]).epsilon(1e-12));
}

TEST_CASE("encode_context: tiny gamma collapses onto the last turn") {
  Vocab vocab = vocab_of({"x", "y"});
  DualEncoderScorer scorer(vocab, 4, 1e-9, 9);
  IdContext ctx = {{vocab.lookup("x")}, {vocab.lookup("y")}};
  IdContext last_only = {{vocab.lookup("y")}};
  auto u = scorer.encode_context(ctx);
  auto expect = scorer.encode_context(last_only);
  for (std::size_t t = 0; t < u.size(); ++t) CHECK(u[t] == doctest::Approx(expect[t]).epsilon(1e-6));
}

TEST_CASE("encode_context: empty turns contribute zero vectors, all-empty gives zero") {
  Vocab vocab = vocab_of({"x"});
  DualEncoderScorer scorer(vocab, 2, 0.7, 4);
  IdContext all_empty = {{}, {}};
  auto u = scorer.encode_context(all_empty);
  CHECK(u[0] == 0.0);
  CHECK(u[1] == 0.0);
}

TEST_CASE("score: zero embeddings and zero bias give exactly 0.5") {
  Vocab vocab = vocab_of({"x", "y"});
  DualEncoderScorer scorer(vocab, 4, 0.7, 1);
  for (auto& e : scorer.embeddings()) e = 0.0;
  scorer.bias() = 0.0;
  IdContext ctx = {{vocab.lookup("x")}};
  CHECK(scorer.score_cached(ctx, {vocab.lookup("y")}).score == 0.5);
}

TEST_CASE("score: large bias saturates toward 1, and the d=1 fixture holds") {
  Vocab vocab = vocab_of({"c", "r"});
  DualEncoderScorer scorer(vocab, 1, 0.7, 1);
  scorer.bias() = 30.0;
  IdContext ctx = {{vocab.lookup("c")}};
  CHECK(scorer.score_cached(ctx, {vocab.lookup("r")}).score > 0.999999);

  // u = [2], v = [1], w = [0.5], bias = 0 -> sigma(1)
  scorer.embeddings()[static_cast<std::size_t>(vocab.lookup("c"))] = 2.0;
  scorer.embeddings()[static_cast<std::size_t>(vocab.lookup("r"))] = 1.0;
  scorer.interaction_weights()[0] = 0.5;
  scorer.bias() = 0.0;
  CHECK(scorer.score_cached(ctx, {vocab.lookup("r")}).score ==
        doctest::Approx(0.7310585786300049).epsilon(1e-12));
}

TEST_CASE("score stays strictly inside (0,1) and forward is reproducible bit-for-bit") {
  Rng rng(1234);
  Vocab vocab = vocab_of({"a", "b", "c", "d", "e"});
  DualEncoderScorer scorer(vocab, 6, 0.7, 99);
  randomize_params(scorer, rng);
  for (int trial = 0; trial < 200; ++trial) {
    auto ctx = random_context(rng, vocab.size());
    auto resp = random_response(rng, vocab.size());
    const auto a = scorer.score_cached(ctx, resp);
    const auto b = scorer.score_cached(ctx, resp);
    CHECK(a.score > 0.0);
    CHECK(a.score < 1.0);
    CHECK(a.score == b.score);
    CHECK(a.raw == b.raw);
  }
}

TEST_CASE("backward: zero upstream leaves no gradient, bias partial is s(1-s)") {
  Vocab vocab = vocab_of({"a", "b"});
  DualEncoderScorer scorer(vocab, 3, 0.7, 5);
  IdContext ctx = {{vocab.lookup("a")}};
  IdUtterance resp = {vocab.lookup("b")};

  auto cache = scorer.score_cached(ctx, resp);
  scorer.accumulate_backward(cache, 0.0);
  CHECK(scorer.accumulated().embedding_rows.empty());
  CHECK(scorer.accumulated().bias == 0.0);

  scorer.accumulate_backward(cache, 2.0);
  CHECK(scorer.accumulated().bias ==
        doctest::Approx(cache.score * (1.0 - cache.score) * 2.0).epsilon(1e-12));
  scorer.clear_gradients();
}

TEST_CASE("backward rejects a stale cache after an update") {
  Vocab vocab = vocab_of({"a", "b"});
  DualEncoderScorer scorer(vocab, 2, 0.7, 5);
  IdContext ctx = {{vocab.lookup("a")}};
  auto cache = scorer.score_cached(ctx, {vocab.lookup("b")});
  scorer.accumulate_backward(cache, 1.0);
  scorer.apply_sgd(0.1);
  CHECK_THROWS_AS(scorer.accumulate_backward(cache, 1.0), DataError);
}

TEST_CASE("analytic score gradients match central finite differences") {
  Rng rng(777);
  const double h = 1e-5;
  int done = 0;
  while (done < 120) {
    const int vocab_tokens = rng.range(3, 8);
    std::vector<std::string> names;
    for (int i = 0; i < vocab_tokens; ++i) names.push_back("tok" + std::to_string(i));
    Vocab vocab = vocab_of(names);
    const int dim = rng.range(1, 6);
    DualEncoderScorer scorer(vocab, dim, rng.uniform(0.3, 1.0), rng.next());
    randomize_params(scorer, rng);

    auto ctx = random_context(rng, vocab.size());
    auto resp = random_response(rng, vocab.size());
    auto cache = scorer.score_cached(ctx, resp);
    scorer.accumulate_backward(cache, 1.0);
    const auto& grads = scorer.accumulated();

    auto check_param = [&](double& slot, double analytic) {
      const double saved = slot;
      slot = saved + h;
      const double up = scorer.score_cached(ctx, resp).score;
      slot = saved - h;
      const double down = scorer.score_cached(ctx, resp).score;
      slot = saved;
      const double fd = (up - down) / (2 * h);
      const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-6});
      CHECK(std::abs(analytic - fd) / denom < 1e-4);
    };

    check_param(scorer.bias(), grads.bias);
    for (int t = 0; t < dim; ++t)
      check_param(scorer.interaction_weights()[static_cast<std::size_t>(t)],
                  grads.w.empty() ? 0.0 : grads.w[static_cast<std::size_t>(t)]);
    // touched rows carry exact partials, untouched rows must be absent
    for (int row = 0; row < vocab.size(); ++row) {
      auto it = grads.embedding_rows.find(row);
      for (int t = 0; t < dim; ++t) {
        const double analytic =
            it == grads.embedding_rows.end() ? 0.0 : it->second[static_cast<std::size_t>(t)];
        check_param(scorer.embeddings()[static_cast<std::size_t>(row * dim + t)], analytic);
      }
    }
    scorer.clear_gradients();
    ++done;
  }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Rng rng(808);
  Vocab vocab = vocab_of({"a", "b", "c"});
  DualEncoderScorer scorer(vocab, 5, 0.6, 11);
  randomize_params(scorer, rng);

  std::stringstream ss;
  scorer.save(ss);
  auto loaded = DualEncoderScorer::load(ss, vocab);
  CHECK(loaded == scorer);

  std::stringstream again;
  loaded.save(again);
  CHECK(again.str() == ss.str());
}

TEST_CASE("checkpoint load rejects bad headers and vocab mismatches") {
  Vocab vocab = vocab_of({"a"});
  DualEncoderScorer scorer(vocab, 2, 0.7, 1);
  std::stringstream ss;
  scorer.save(ss);
  Vocab bigger = vocab_of({"a", "b"});
  CHECK_THROWS_AS(DualEncoderScorer::load(ss, bigger), ArtifactError);

  std::stringstream junk("not a checkpoint at all, truly");
  CHECK_THROWS_AS(DualEncoderScorer::load(junk, vocab), ArtifactError);
}

TEST_CASE("string-based scoring goes through vocab lookup with OOV fallback") {
  Vocab vocab = vocab_of({"hello"});
  DualEncoderScorer scorer(vocab, 3, 0.7, 2);
  std::vector<Utterance> ctx = {Utterance{{"hello"}}};
  const double known = scorer.score(ctx, Utterance{{"hello"}});
  const double unknown = scorer.score(ctx, Utterance{{"zzz"}});  // maps to <oov>
  CHECK(known > 0.0);
  CHECK(unknown > 0.0);
  CHECK(known < 1.0);
  CHECK(unknown < 1.0);
}
