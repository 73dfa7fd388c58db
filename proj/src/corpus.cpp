#include "graymatch/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "graymatch/errors.hpp"

namespace graymatch {

std::string Utterance::joined() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Vocab::Vocab() {
  add("<oov>");
  add("<s>");
  add("</s>");
}

void Vocab::add(const std::string& token) {
  if (token_to_id_.count(token)) return;
  int id = static_cast<int>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(token);
}

int Vocab::lookup(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kOovId : it->second;
}

bool Vocab::contains(const std::string& token) const { return token_to_id_.count(token) > 0; }

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw DataError("vocab id out of range: " + std::to_string(id));
  return id_to_token_[static_cast<std::size_t>(id)];
}

void Vocab::save(std::ostream& out) const {
  for (std::size_t id = 0; id < id_to_token_.size(); ++id)
    out << id_to_token_[id] << '\t' << id << '\n';
}

Vocab Vocab::load(std::istream& in) {
  Vocab vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("vocab line " + std::to_string(line_no) + ": missing tab");
    std::string token = line.substr(0, tab);
    int id = 0;
    try {
      id = std::stoi(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw DataError("vocab line " + std::to_string(line_no) + ": bad id");
    }
    if (id < kNumSpecials) {
      if (id >= vocab.size() || vocab.id_to_token_[static_cast<std::size_t>(id)] != token)
        throw DataError("vocab line " + std::to_string(line_no) + ": special id mismatch");
      continue;
    }
    if (id != vocab.size())
      throw DataError("vocab line " + std::to_string(line_no) + ": ids not dense");
    vocab.add(token);
  }
  return vocab;
}

namespace {

bool is_punct(unsigned char c) { return std::ispunct(c) != 0; }

char lower(unsigned char c) { return static_cast<char>(std::tolower(c)); }

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    std::string tok;
    bool punct_run = is_punct(c);
    while (i < n) {
      c = static_cast<unsigned char>(text[i]);
      if (std::isspace(c) || is_punct(c) != punct_run) break;
      tok += punct_run ? static_cast<char>(c) : lower(c);
      ++i;
    }
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

LabeledExample parse_example_line(const std::string& line, std::size_t line_number) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  if (fields.size() < 3)
    throw DataError("line " + std::to_string(line_number) + ": expected >= 3 tab-separated fields, got " +
                    std::to_string(fields.size()));

  LabeledExample example;
  if (fields[0] == "1") {
    example.label = Label::relevant;
  } else if (fields[0] == "0") {
    example.label = Label::irrelevant;
  } else {
    throw DataError("line " + std::to_string(line_number) + ": label must be 0 or 1, got '" + fields[0] + "'");
  }
  for (std::size_t i = 1; i + 1 < fields.size(); ++i)
    example.context.push_back(Utterance{tokenize(fields[i])});
  example.response = Utterance{tokenize(fields.back())};
  return example;
}

std::string serialize_example(const LabeledExample& example) {
  std::string out = example.label == Label::relevant ? "1" : "0";
  for (const auto& turn : example.context) {
    out += '\t';
    out += turn.joined();
  }
  out += '\t';
  out += example.response.joined();
  return out;
}

Corpus read_corpus(const std::string& path, Split split) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open corpus file: " + path);
  Corpus corpus;
  corpus.split = split;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    corpus.examples.push_back(parse_example_line(line, line_no));
  }
  return corpus;
}

void write_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write corpus file: " + path);
  for (const auto& example : corpus.examples) out << serialize_example(example) << '\n';
}

std::vector<TurnPair> split_to_pairs(const Corpus& corpus) {
  std::vector<TurnPair> pairs;
  std::uint32_t next_response_id = 0;
  for (std::size_t d = 0; d < corpus.examples.size(); ++d) {
    const auto& example = corpus.examples[d];
    if (example.label != Label::relevant) continue;
    const auto& turns = example.context;
    for (std::size_t j = 0; j + 1 < turns.size(); ++j)
      pairs.push_back(TurnPair{turns[j], turns[j + 1], static_cast<std::uint32_t>(d), next_response_id++});
    pairs.push_back(
        TurnPair{turns.back(), example.response, static_cast<std::uint32_t>(d), next_response_id++});
  }
  return pairs;
}

Vocab build_vocab(const Corpus& corpus, int min_count) {
  std::map<std::string, std::uint64_t> counts;
  auto count_utterance = [&counts](const Utterance& u) {
    for (const auto& tok : u.tokens) ++counts[tok];
  };
  for (const auto& example : corpus.examples) {
    for (const auto& turn : example.context) count_utterance(turn);
    count_utterance(example.response);
  }
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (const auto& [tok, cnt] : counts)
    if (cnt >= static_cast<std::uint64_t>(min_count)) kept.emplace_back(tok, cnt);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab vocab;
  for (const auto& [tok, cnt] : kept) vocab.add(tok);
  return vocab;
}

void save_vocab(const std::string& path, const Vocab& vocab) {
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write vocab file: " + path);
  vocab.save(out);
}

Vocab load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open vocab file: " + path);
  return Vocab::load(in);
}

}  // namespace graymatch
