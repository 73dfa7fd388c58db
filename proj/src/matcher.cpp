#include "graymatch/matcher.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "graymatch/errors.hpp"
#include "graymatch/rng.hpp"

namespace graymatch {

IdUtterance to_ids(const Utterance& utterance, const Vocab& vocab) {
  IdUtterance ids;
  ids.reserve(utterance.tokens.size());
  for (const auto& tok : utterance.tokens) ids.push_back(vocab.lookup(tok));
  return ids;
}

IdContext to_ids(std::span<const Utterance> context, const Vocab& vocab) {
  IdContext ids;
  ids.reserve(context.size());
  for (const auto& turn : context) ids.push_back(to_ids(turn, vocab));
  return ids;
}

DualEncoderScorer::DualEncoderScorer(const Vocab& vocab, int dim, double recency_decay,
                                     std::uint64_t seed, double interaction_weight_init)
    : vocab_(vocab), dim_(dim), recency_decay_(recency_decay) {
  if (dim < 1) throw ConfigError("matcher: embedding dim must be >= 1");
  if (recency_decay <= 0.0 || recency_decay > 1.0)
    throw ConfigError("matcher: recency decay must be in (0, 1]");
  Rng rng(mix_seed(seed, 0xd0a1));
  embeddings_.resize(static_cast<std::size_t>(vocab.size()) * static_cast<std::size_t>(dim));
  for (auto& e : embeddings_) e = rng.uniform(-0.05, 0.05);
  // constant positive interaction weights make the initial scorer a scaled
  // dot product: shared tokens contribute positive self-products from the
  // first step, and the scale sets the gradient magnitude into the embeddings
  w_.assign(static_cast<std::size_t>(dim), interaction_weight_init);
  bias_ = 0.0;
}

std::vector<double> DualEncoderScorer::encode_context(const IdContext& context) const {
  std::vector<double> u(static_cast<std::size_t>(dim_), 0.0);
  if (context.empty()) return u;
  const std::size_t turns = context.size();
  double weight_sum = 0.0;
  for (std::size_t j = 0; j < turns; ++j) {
    const double weight = std::pow(recency_decay_, static_cast<double>(turns - 1 - j));
    weight_sum += weight;
    const auto& turn = context[j];
    if (turn.empty()) continue;
    const double scale = weight / static_cast<double>(turn.size());
    for (int id : turn) {
      const double* row = embeddings_.data() + static_cast<std::size_t>(id) * dim_;
      for (int t = 0; t < dim_; ++t) u[static_cast<std::size_t>(t)] += scale * row[t];
    }
  }
  for (auto& x : u) x /= weight_sum;
  return u;
}

ScoreCache DualEncoderScorer::score_cached(const IdContext& context,
                                           const IdUtterance& response) const {
  ScoreCache cache;
  cache.context_vec = encode_context(context);
  cache.response_vec.assign(static_cast<std::size_t>(dim_), 0.0);
  if (!response.empty()) {
    const double scale = 1.0 / static_cast<double>(response.size());
    for (int id : response) {
      const double* row = embeddings_.data() + static_cast<std::size_t>(id) * dim_;
      for (int t = 0; t < dim_; ++t) cache.response_vec[static_cast<std::size_t>(t)] += scale * row[t];
      cache.response_row_weights[id] += scale;
    }
  }

  // Per-row context coefficients: gamma^(T-j) / (Z * |turn_j|), summed over occurrences.
  if (!context.empty()) {
    const std::size_t turns = context.size();
    double weight_sum = 0.0;
    for (std::size_t j = 0; j < turns; ++j)
      weight_sum += std::pow(recency_decay_, static_cast<double>(turns - 1 - j));
    for (std::size_t j = 0; j < turns; ++j) {
      const auto& turn = context[j];
      if (turn.empty()) continue;
      const double coeff = std::pow(recency_decay_, static_cast<double>(turns - 1 - j)) /
                           (weight_sum * static_cast<double>(turn.size()));
      for (int id : turn) cache.context_row_weights[id] += coeff;
    }
  }

  double raw = bias_;
  for (int t = 0; t < dim_; ++t)
    raw += w_[static_cast<std::size_t>(t)] * cache.context_vec[static_cast<std::size_t>(t)] *
           cache.response_vec[static_cast<std::size_t>(t)];
  cache.raw = raw;
  cache.score = 1.0 / (1.0 + std::exp(-raw));
  cache.revision = revision_;
  return cache;
}

double DualEncoderScorer::score(std::span<const Utterance> context, const Utterance& response) const {
  return score_cached(to_ids(context, vocab_), to_ids(response, vocab_)).score;
}

void DualEncoderScorer::accumulate_backward(const ScoreCache& cache, double upstream_grad) {
  if (cache.revision != revision_)
    throw DataError("matcher: stale score cache (parameters changed since forward pass)");
  if (upstream_grad == 0.0) return;
  if (grads_.w.empty()) grads_.w.assign(static_cast<std::size_t>(dim_), 0.0);

  // d score / d raw = s(1-s)
  const double d_raw = cache.score * (1.0 - cache.score) * upstream_grad;
  grads_.bias += d_raw;
  for (int t = 0; t < dim_; ++t)
    grads_.w[static_cast<std::size_t>(t)] += d_raw * cache.context_vec[static_cast<std::size_t>(t)] *
                                             cache.response_vec[static_cast<std::size_t>(t)];

  for (const auto& [row, coeff] : cache.context_row_weights) {
    auto& g = grads_.embedding_rows[row];
    if (g.empty()) g.assign(static_cast<std::size_t>(dim_), 0.0);
    for (int t = 0; t < dim_; ++t)
      g[static_cast<std::size_t>(t)] += d_raw * coeff * w_[static_cast<std::size_t>(t)] *
                                        cache.response_vec[static_cast<std::size_t>(t)];
  }
  for (const auto& [row, coeff] : cache.response_row_weights) {
    auto& g = grads_.embedding_rows[row];
    if (g.empty()) g.assign(static_cast<std::size_t>(dim_), 0.0);
    for (int t = 0; t < dim_; ++t)
      g[static_cast<std::size_t>(t)] += d_raw * coeff * w_[static_cast<std::size_t>(t)] *
                                        cache.context_vec[static_cast<std::size_t>(t)];
  }
}

void DualEncoderScorer::apply_sgd(double step) {
  for (const auto& [row, g] : grads_.embedding_rows) {
    double* dst = embeddings_.data() + static_cast<std::size_t>(row) * dim_;
    for (int t = 0; t < dim_; ++t) dst[t] -= step * g[static_cast<std::size_t>(t)];
  }
  if (!grads_.w.empty())
    for (int t = 0; t < dim_; ++t) w_[static_cast<std::size_t>(t)] -= step * grads_.w[static_cast<std::size_t>(t)];
  bias_ -= step * grads_.bias;
  clear_gradients();
  ++revision_;
}

void DualEncoderScorer::clear_gradients() {
  grads_.embedding_rows.clear();
  grads_.w.clear();
  grads_.bias = 0.0;
}

namespace {

constexpr char kCheckpointMagic[] = "graymatch-checkpoint v1\n";

void write_doubles(std::ostream& out, const std::vector<double>& values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

void read_doubles(std::istream& in, std::vector<double>& values) {
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw ArtifactError("checkpoint: truncated parameter block");
}

}  // namespace

void DualEncoderScorer::save(std::ostream& out) const {
  out.write(kCheckpointMagic, static_cast<std::streamsize>(std::strlen(kCheckpointMagic)));
  std::uint64_t vocab_size = static_cast<std::uint64_t>(vocab_.size());
  std::uint64_t dim = static_cast<std::uint64_t>(dim_);
  out.write(reinterpret_cast<const char*>(&vocab_size), sizeof(vocab_size));
  out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  out.write(reinterpret_cast<const char*>(&recency_decay_), sizeof(recency_decay_));
  out.write(reinterpret_cast<const char*>(&bias_), sizeof(bias_));
  write_doubles(out, embeddings_);
  write_doubles(out, w_);
}

DualEncoderScorer DualEncoderScorer::load(std::istream& in, const Vocab& vocab) {
  std::string magic(std::strlen(kCheckpointMagic), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kCheckpointMagic)
    throw ArtifactError("checkpoint: bad or version-mismatched header");
  std::uint64_t vocab_size = 0, dim = 0;
  double recency_decay = 0.0, bias = 0.0;
  in.read(reinterpret_cast<char*>(&vocab_size), sizeof(vocab_size));
  in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  in.read(reinterpret_cast<char*>(&recency_decay), sizeof(recency_decay));
  in.read(reinterpret_cast<char*>(&bias), sizeof(bias));
  if (!in) throw ArtifactError("checkpoint: truncated header");
  if (vocab_size != static_cast<std::uint64_t>(vocab.size()))
    throw ArtifactError("checkpoint: vocab size mismatch (checkpoint " + std::to_string(vocab_size) +
                        ", vocab " + std::to_string(vocab.size()) + ")");

  DualEncoderScorer scorer(vocab, static_cast<int>(dim), recency_decay, 0);
  scorer.bias_ = bias;
  read_doubles(in, scorer.embeddings_);
  read_doubles(in, scorer.w_);
  return scorer;
}

bool DualEncoderScorer::operator==(const DualEncoderScorer& other) const {
  return vocab_ == other.vocab_ && dim_ == other.dim_ && recency_decay_ == other.recency_decay_ &&
         embeddings_ == other.embeddings_ && w_ == other.w_ && bias_ == other.bias_;
}

void save_checkpoint(const std::string& path, const DualEncoderScorer& scorer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write checkpoint file: " + path);
  scorer.save(out);
}

DualEncoderScorer load_checkpoint(const std::string& path, const Vocab& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open checkpoint file: " + path);
  return DualEncoderScorer::load(in, vocab);
}

}  // namespace graymatch
