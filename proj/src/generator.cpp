#include "graymatch/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "graymatch/errors.hpp"

namespace graymatch {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void NGramModel::rebuild_event_ids() {
  event_ids_.clear();
  event_ids_.push_back(Vocab::kEosId);
  for (int id = Vocab::kNumSpecials; id < vocab_.size(); ++id) event_ids_.push_back(id);
}

NGramModel NGramModel::train(const std::vector<TurnPair>& pairs, const Vocab& vocab, int order,
                             double delta, double lambda) {
  if (pairs.empty()) throw DataError("generator: cannot train on zero pairs");
  if (order < 2) throw ConfigError("generator: order must be >= 2");
  if (delta <= 0.0) throw ConfigError("generator: delta must be > 0");
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("generator: lambda must be in [0, 1]");

  NGramModel model;
  model.order_ = order;
  model.delta_ = delta;
  model.lambda_ = lambda;
  model.vocab_ = vocab;
  model.rebuild_event_ids();

  const std::size_t hist_len = static_cast<std::size_t>(order - 1);
  for (const auto& pair : pairs) {
    std::vector<int> history(hist_len, Vocab::kBosId);
    auto step = [&](int target) {
      if (target != Vocab::kOovId) {  // oov positions are not prediction events
        auto& node = model.counts_[history];
        ++node.next[target];
        ++node.total;
      }
      history.erase(history.begin());
      history.push_back(target);
    };
    for (const auto& tok : pair.response.tokens) step(vocab.lookup(tok));
    step(Vocab::kEosId);
  }
  return model;
}

double NGramModel::prob(std::span<const int> history, int next) const {
  std::uint64_t count = 0, total = 0;
  auto it = counts_.find(std::vector<int>(history.begin(), history.end()));
  if (it != counts_.end()) {
    total = it->second.total;
    auto nt = it->second.next.find(next);
    if (nt != it->second.next.end()) count = nt->second;
  }
  const double v = static_cast<double>(event_ids_.size());
  return (static_cast<double>(count) + delta_) / (static_cast<double>(total) + delta_ * v);
}

namespace {

struct Hypothesis {
  std::vector<int> tokens;
  double score = 0.0;
};

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace

std::vector<GeneratedResponse> NGramModel::beam_generate(const std::vector<Utterance>& context,
                                                         int beam_width, int max_len,
                                                         int top_k) const {
  if (top_k < 1) throw ConfigError("generator: top_k must be >= 1");
  if (beam_width < top_k) throw ConfigError("generator: beam_width must be >= top_k");
  if (max_len < 1) throw ConfigError("generator: max_len must be >= 1");

  // Normalized unigram distribution of in-event-space context tokens.
  std::vector<double> ctx_prob(static_cast<std::size_t>(vocab_.size()), 0.0);
  std::vector<int> ctx_ids;
  {
    std::uint64_t total = 0;
    for (const auto& turn : context) {
      for (const auto& tok : turn.tokens) {
        const int id = vocab_.lookup(tok);
        if (id == Vocab::kOovId) continue;
        if (ctx_prob[static_cast<std::size_t>(id)] == 0.0) ctx_ids.push_back(id);
        ctx_prob[static_cast<std::size_t>(id)] += 1.0;
        ++total;
      }
    }
    if (total > 0)
      for (int id : ctx_ids) ctx_prob[static_cast<std::size_t>(id)] /= static_cast<double>(total);
    std::sort(ctx_ids.begin(), ctx_ids.end());
  }

  const std::size_t hist_len = static_cast<std::size_t>(order_ - 1);
  auto history_of = [&](const std::vector<int>& tokens) {
    std::vector<int> history(hist_len, Vocab::kBosId);
    const std::size_t take = std::min(tokens.size(), hist_len);
    for (std::size_t i = 0; i < take; ++i)
      history[hist_len - take + i] = tokens[tokens.size() - take + i];
    return history;
  };

  auto step_score = [&](std::uint64_t node_count, std::uint64_t node_total, int id) {
    const double v = static_cast<double>(event_ids_.size());
    const double p_lm = (static_cast<double>(node_count) + delta_) /
                        (static_cast<double>(node_total) + delta_ * v);
    return std::log((1.0 - lambda_) * p_lm + lambda_ * ctx_prob[static_cast<std::size_t>(id)]);
  };

  std::vector<Hypothesis> active{Hypothesis{}};
  std::vector<Hypothesis> completed;

  // End-of-sequence competes inside the beam: the step's extensions (token
  // or end) are ranked together and the best beam_width survive; surviving
  // end-extensions leave the beam as completed hypotheses.
  for (int step = 0; step < max_len && !active.empty(); ++step) {
    // Parents sorted lexicographically so (parent index, candidate id) is
    // the lexicographic order of the extended sequences.
    std::sort(active.begin(), active.end(),
              [](const Hypothesis& a, const Hypothesis& b) { return a.tokens < b.tokens; });

    struct Extension {
      std::size_t parent;
      int token;  // kEosId completes
      double score;
    };
    std::vector<Extension> extensions;

    for (std::size_t h = 0; h < active.size(); ++h) {
      const auto history = history_of(active[h].tokens);
      auto node_it = counts_.find(history);
      std::uint64_t node_total = node_it == counts_.end() ? 0 : node_it->second.total;

      // Candidate ids: observed next tokens, context tokens, and the
      // beam_width smallest remaining ids. All unlisted ids share one
      // (lower) score and lose lexicographic ties to the listed ones, so
      // this reproduces the full expansion exactly.
      std::vector<int> candidates;
      if (node_it != counts_.end())
        for (const auto& [id, cnt] : node_it->second.next) candidates.push_back(id);
      candidates.insert(candidates.end(), ctx_ids.begin(), ctx_ids.end());
      std::sort(candidates.begin(), candidates.end());
      candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
      {
        std::vector<int> fillers;
        auto listed = [&](int id) {
          return std::binary_search(candidates.begin(), candidates.end(), id);
        };
        for (int id : event_ids_) {
          if (static_cast<int>(fillers.size()) >= beam_width) break;
          if (!listed(id)) fillers.push_back(id);
        }
        candidates.insert(candidates.end(), fillers.begin(), fillers.end());
      }

      for (int id : candidates) {
        std::uint64_t count = 0;
        if (node_it != counts_.end()) {
          auto nt = node_it->second.next.find(id);
          if (nt != node_it->second.next.end()) count = nt->second;
        }
        extensions.push_back(Extension{h, id, active[h].score + step_score(count, node_total, id)});
      }
    }

    std::sort(extensions.begin(), extensions.end(), [](const Extension& a, const Extension& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent != b.parent) return a.parent < b.parent;
      // an end-extension is the parent sequence itself: lexicographically
      // smaller than any same-parent token extension
      if ((a.token == Vocab::kEosId) != (b.token == Vocab::kEosId))
        return a.token == Vocab::kEosId;
      return a.token < b.token;
    });
    if (static_cast<int>(extensions.size()) > beam_width)
      extensions.resize(static_cast<std::size_t>(beam_width));

    std::vector<Hypothesis> survivors;
    for (const auto& ext : extensions) {
      Hypothesis hyp{active[ext.parent].tokens, ext.score};
      if (ext.token == Vocab::kEosId) {
        completed.push_back(std::move(hyp));
      } else {
        hyp.tokens.push_back(ext.token);
        survivors.push_back(std::move(hyp));
      }
    }
    active = std::move(survivors);
  }

  std::sort(completed.begin(), completed.end(), better);
  if (completed.empty()) {
    // nothing completed within max_len: return force-terminated hypotheses
    // with their accumulated scores
    std::sort(active.begin(), active.end(), better);
    completed = std::move(active);
  }
  if (static_cast<int>(completed.size()) > top_k) completed.resize(static_cast<std::size_t>(top_k));

  std::vector<GeneratedResponse> results;
  results.reserve(completed.size());
  for (const auto& hyp : completed) {
    GeneratedResponse response;
    response.log_prob = hyp.score;
    for (int id : hyp.tokens) response.tokens.tokens.push_back(vocab_.token(id));
    results.push_back(std::move(response));
  }
  return results;
}

void NGramModel::save(std::ostream& out) const {
  out << "graymatch-lm v1\n";
  out << "order " << order_ << " delta " << format_double(delta_) << " lambda "
      << format_double(lambda_) << '\n';
  out << "vocab " << vocab_.size() << '\n';
  vocab_.save(out);
  out << "counts " << counts_.size() << '\n';
  for (const auto& [history, node] : counts_) {
    out << 'h';
    for (int id : history) out << ' ' << id;
    out << " :";
    for (const auto& [next, count] : node.next) out << ' ' << next << ':' << count;
    out << '\n';
  }
}

NGramModel NGramModel::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "graymatch-lm v1")
    throw ArtifactError("generator: bad or version-mismatched model header: '" + line + "'");

  NGramModel model;
  if (!std::getline(in, line)) throw ArtifactError("generator: truncated model (params)");
  {
    std::istringstream ss(line);
    std::string key;
    ss >> key >> model.order_ >> key >> model.delta_ >> key >> model.lambda_;
    if (!ss) throw ArtifactError("generator: malformed params line");
  }
  std::size_t vocab_size = 0;
  if (!std::getline(in, line)) throw ArtifactError("generator: truncated model (vocab)");
  {
    std::istringstream ss(line);
    std::string key;
    ss >> key >> vocab_size;
    if (key != "vocab" || !ss) throw ArtifactError("generator: malformed vocab line");
  }
  std::string vocab_block;
  for (std::size_t i = 0; i < vocab_size; ++i) {
    if (!std::getline(in, line)) throw ArtifactError("generator: truncated vocab block");
    vocab_block += line;
    vocab_block += '\n';
  }
  {
    std::istringstream ss(vocab_block);
    model.vocab_ = Vocab::load(ss);
  }
  model.rebuild_event_ids();

  std::size_t num_histories = 0;
  if (!std::getline(in, line)) throw ArtifactError("generator: truncated model (counts)");
  {
    std::istringstream ss(line);
    std::string key;
    ss >> key >> num_histories;
    if (key != "counts" || !ss) throw ArtifactError("generator: malformed counts line");
  }
  for (std::size_t i = 0; i < num_histories; ++i) {
    if (!std::getline(in, line)) throw ArtifactError("generator: truncated counts block");
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok != "h") throw ArtifactError("generator: malformed history line");
    std::vector<int> history;
    while (ss >> tok && tok != ":") history.push_back(std::stoi(tok));
    Node node;
    while (ss >> tok) {
      auto colon = tok.find(':');
      if (colon == std::string::npos) throw ArtifactError("generator: malformed count entry");
      const int next = std::stoi(tok.substr(0, colon));
      const auto count = static_cast<std::uint32_t>(std::stoul(tok.substr(colon + 1)));
      node.next[next] = count;
      node.total += count;
    }
    model.counts_.emplace(std::move(history), std::move(node));
  }
  return model;
}

bool NGramModel::operator==(const NGramModel& other) const {
  return order_ == other.order_ && delta_ == other.delta_ && lambda_ == other.lambda_ &&
         vocab_ == other.vocab_ && counts_ == other.counts_;
}

std::map<std::uint64_t, std::vector<GeneratedResponse>> load_generated(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open generated-responses file: " + path);

  std::map<std::uint64_t, std::vector<GeneratedResponse>> result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos)
      throw DataError("generated line " + std::to_string(line_no) + ": expected 3 tab-separated fields");

    std::uint64_t context_id = 0;
    {
      const std::string field = line.substr(0, tab1);
      char* end = nullptr;
      context_id = std::strtoull(field.c_str(), &end, 10);
      if (field.empty() || end != field.c_str() + field.size())
        throw DataError("generated line " + std::to_string(line_no) + ": bad context id '" + field + "'");
    }
    double log_prob = 0.0;
    {
      const std::string field = line.substr(tab1 + 1, tab2 - tab1 - 1);
      char* end = nullptr;
      log_prob = std::strtod(field.c_str(), &end);
      if (field.empty() || end != field.c_str() + field.size() || !std::isfinite(log_prob))
        throw DataError("generated line " + std::to_string(line_no) + ": bad log_prob '" + field + "'");
    }
    GeneratedResponse response;
    response.log_prob = log_prob;
    response.tokens = Utterance{tokenize(line.substr(tab2 + 1))};
    result[context_id].push_back(std::move(response));
  }
  for (auto& [id, list] : result)
    std::stable_sort(list.begin(), list.end(),
                     [](const GeneratedResponse& a, const GeneratedResponse& b) {
                       return a.log_prob > b.log_prob;
                     });
  return result;
}

void append_generated(std::ostream& out, std::uint64_t context_id,
                      std::span<const GeneratedResponse> responses) {
  for (const auto& response : responses)
    out << context_id << '\t' << format_double(response.log_prob) << '\t'
        << response.tokens.joined() << '\n';
}

void save_lm(const std::string& path, const NGramModel& model) {
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write language model file: " + path);
  model.save(out);
}

NGramModel load_lm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open language model file: " + path);
  return NGramModel::load(in);
}

}  // namespace graymatch
