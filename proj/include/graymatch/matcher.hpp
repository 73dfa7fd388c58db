#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "graymatch/corpus.hpp"

namespace graymatch {

// Scoring-only contract: everything that ranks candidates (evaluator,
// adaptive retrieval refresh) talks to the model through this interface,
// so any conforming scorer is pluggable.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(std::span<const Utterance> context, const Utterance& response) const = 0;
};

// Token-id views used on the training hot path to avoid re-tokenizing.
using IdUtterance = std::vector<int>;
using IdContext = std::vector<IdUtterance>;

IdUtterance to_ids(const Utterance& utterance, const Vocab& vocab);
IdContext to_ids(std::span<const Utterance> context, const Vocab& vocab);

// Forward-pass intermediates sufficient for an exact backward pass.
struct ScoreCache {
  double score = 0.0;  // sigma(raw), strictly in (0,1)
  double raw = 0.0;
  std::vector<double> context_vec;             // u
  std::vector<double> response_vec;            // v
  std::map<int, double> context_row_weights;   // embedding row -> d raw coefficient weight
  std::map<int, double> response_row_weights;  // embedding row -> 1/|response| (summed)
  std::uint64_t revision = 0;                  // parameter revision the cache was taken at
};

// Full training contract used by the trainer: cached scoring, gradient
// accumulation and plain-SGD application, checkpointing.
class TrainableScorer : public Scorer {
 public:
  virtual ScoreCache score_cached(const IdContext& context, const IdUtterance& response) const = 0;
  // Accumulates d(upstream * score)/d(params) into the internal gradient sink.
  virtual void accumulate_backward(const ScoreCache& cache, double upstream_grad) = 0;
  // theta <- theta - step * accumulated gradient; clears the sink.
  virtual void apply_sgd(double step) = 0;
  virtual void save(std::ostream& out) const = 0;
};

// Recency-weighted dual encoder with a diagonal bilinear interaction:
//   u = sum_j gamma^(T-j) mean(turn_j embeddings) / sum_j gamma^(T-j)
//   v = mean(response embeddings)
//   score = sigma(sum_t w_t u_t v_t + bias)
class DualEncoderScorer final : public TrainableScorer {
 public:
  DualEncoderScorer(const Vocab& vocab, int dim, double recency_decay, std::uint64_t seed,
                    double interaction_weight_init = 1.0);

  double score(std::span<const Utterance> context, const Utterance& response) const override;
  ScoreCache score_cached(const IdContext& context, const IdUtterance& response) const override;
  void accumulate_backward(const ScoreCache& cache, double upstream_grad) override;
  void apply_sgd(double step) override;

  std::vector<double> encode_context(const IdContext& context) const;

  void save(std::ostream& out) const override;
  static DualEncoderScorer load(std::istream& in, const Vocab& vocab);

  const Vocab& vocab() const { return vocab_; }
  int dim() const { return dim_; }
  double recency_decay() const { return recency_decay_; }
  std::uint64_t revision() const { return revision_; }

  // Direct parameter access (tests, finite-difference checks).
  std::vector<double>& embeddings() { return embeddings_; }
  const std::vector<double>& embeddings() const { return embeddings_; }
  std::vector<double>& interaction_weights() { return w_; }
  const std::vector<double>& interaction_weights() const { return w_; }
  double& bias() { return bias_; }
  double bias() const { return bias_; }

  struct Gradients {
    std::map<int, std::vector<double>> embedding_rows;
    std::vector<double> w;
    double bias = 0.0;
  };
  const Gradients& accumulated() const { return grads_; }
  void clear_gradients();

  bool operator==(const DualEncoderScorer& other) const;

 private:
  Vocab vocab_;
  int dim_;
  double recency_decay_;
  std::vector<double> embeddings_;  // row-major vocab_size x dim
  std::vector<double> w_;
  double bias_ = 0.0;
  std::uint64_t revision_ = 0;
  Gradients grads_;
};

void save_checkpoint(const std::string& path, const DualEncoderScorer& scorer);
DualEncoderScorer load_checkpoint(const std::string& path, const Vocab& vocab);

}  // namespace graymatch
