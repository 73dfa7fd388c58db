#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace graymatch {

struct Utterance {
  std::vector<std::string> tokens;

  bool operator==(const Utterance&) const = default;
  bool empty() const { return tokens.empty(); }
  std::string joined() const;  // tokens joined by single spaces
};

enum class Label { relevant, irrelevant };

struct LabeledExample {
  std::vector<Utterance> context;  // >= 1 turn
  Utterance response;
  Label label = Label::irrelevant;
};

enum class Split { train, valid, test };

struct Corpus {
  std::vector<LabeledExample> examples;
  Split split = Split::train;
};

// A single-turn (input, response) pair cut out of a multi-turn dialogue.
// The input side is what gets indexed; the response is the retrieval payload.
struct TurnPair {
  Utterance input;
  Utterance response;
  std::uint32_t source_dialogue = 0;  // index of the originating example
  std::uint32_t response_id = 0;      // unique corpus-wide
};

// Token ids are dense. Ids 0..2 are reserved for <oov>, <s>, </s>; regular
// tokens follow in descending-frequency order (ties lexicographic).
class Vocab {
 public:
  static constexpr int kOovId = 0;
  static constexpr int kBosId = 1;
  static constexpr int kEosId = 2;
  static constexpr int kNumSpecials = 3;

  Vocab();

  void add(const std::string& token);  // appends with the next dense id
  int lookup(const std::string& token) const;  // total: unknown -> kOovId
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }

  void save(std::ostream& out) const;  // token<TAB>id, one line per entry
  static Vocab load(std::istream& in);

  bool operator==(const Vocab& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Lowercases, splits on whitespace, and detaches each maximal run of
// punctuation as its own token. "Hello, World!" -> [hello , world !]
std::vector<std::string> tokenize(const std::string& text);

// One example per line: label<TAB>turn_1<TAB>...<TAB>turn_k<TAB>response.
// line_number is used in error messages only (1-based).
LabeledExample parse_example_line(const std::string& line, std::size_t line_number);

std::string serialize_example(const LabeledExample& example);

Corpus read_corpus(const std::string& path, Split split);
void write_corpus(const std::string& path, const Corpus& corpus);

// For each relevant train dialogue with turns u_1..u_k and response r, emits
// (u_1,u_2), ..., (u_{k-1},u_k), (u_k,r). Response ids are assigned 0,1,2,...
std::vector<TurnPair> split_to_pairs(const Corpus& corpus);

Vocab build_vocab(const Corpus& corpus, int min_count = 2);

void save_vocab(const std::string& path, const Vocab& vocab);
Vocab load_vocab(const std::string& path);

}  // namespace graymatch
