#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace claimlab::text {

// ASCII lowercasing; bytes >= 0x80 pass through untouched.
std::string lowercase(std::string_view s);

extern const std::unordered_set<std::string> kDefaultAbbreviations;

// Rule-based segmentation: a sentence ends at '.', '!' or '?' followed by
// whitespace and then an uppercase letter, a digit or an opening quote.
// Tokens in the abbreviation list never end a sentence. The returned
// sentences are trimmed and together cover all non-whitespace content.
std::vector<std::string> split_sentences(std::string_view body);
std::vector<std::string> split_sentences(std::string_view body,
                                         const std::unordered_set<std::string>& abbreviations);

// Whitespace split, then punctuation characters become their own tokens.
// An apostrophe between letters starts a new token, so contractions split
// as "that's" -> "that", "'s". Bytes >= 0x80 are treated as word characters.
std::vector<std::string> tokenize(std::string_view sentence);

// A word token carries at least one alphanumeric (or non-ASCII) byte.
bool is_word_token(std::string_view token);
int count_word_tokens(const std::vector<std::string>& tokens);

// Corpus lines may be plain sentences or TSV rows whose last column is the
// sentence; this returns the text either way.
std::string last_tab_field(const std::string& line);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kNumReserved = 4;

  Vocabulary();

  // Non-reserved tokens are ranked by descending frequency, ties broken
  // lexicographically; tokens below min_freq or beyond max_size (total size,
  // reserved included) are dropped. max_size must be >= 4, min_freq >= 1.
  static Vocabulary build(const std::unordered_map<std::string, std::int64_t>& counts,
                          std::size_t max_size = 30000, std::int64_t min_freq = 2);

  std::size_t size() const { return id_to_token_.size(); }
  const std::string& token(int id) const { return id_to_token_[static_cast<std::size_t>(id)]; }
  std::int64_t frequency(int id) const { return frequency_[static_cast<std::size_t>(id)]; }

  // kUnk for out-of-vocabulary tokens.
  int id_or_unk(const std::string& token) const;
  bool contains(const std::string& token) const;

  // TSV `token<TAB>id<TAB>frequency`, reserved tokens first.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  // Hash of the token<->id mapping; checkpoints use it to detect mismatched
  // vocabularies.
  std::uint64_t content_hash() const;

 private:
  std::vector<std::string> id_to_token_;
  std::vector<std::int64_t> frequency_;
  std::unordered_map<std::string, int> token_to_id_;

  void push(std::string token, std::int64_t freq);
};

// Tokens are lowercased before lookup when lowercase_tokens is set (the
// default for every model-facing path).
std::vector<int> numericalize(const std::vector<std::string>& tokens,
                              const Vocabulary& vocab, bool lowercase_tokens = true);

void count_tokens(const std::vector<std::string>& tokens,
                  std::unordered_map<std::string, std::int64_t>& counts,
                  bool lowercase_tokens = true);

struct LmBatch {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<int> inputs;   // row-major batch x steps
  std::vector<int> targets;  // same shape; stream successor of inputs
};

// Splits the stream into batch_size contiguous strips and walks them in
// windows of bptt_len; trailing remainder is dropped. Throws
// std::invalid_argument when the stream is shorter than batch_size * 2.
std::vector<LmBatch> make_lm_batches(const std::vector<int>& stream,
                                     std::size_t batch_size, std::size_t bptt_len);

struct ClassifierBatch {
  std::size_t batch = 0;
  std::size_t steps = 0;           // padded length
  std::vector<int> ids;            // row-major batch x steps
  std::vector<int> lengths;        // true lengths
  std::vector<int> labels;
  std::vector<std::size_t> source_index;
};

// Buckets by descending length (stable) to limit padding. Throws
// std::invalid_argument on an empty dataset; sequences must be non-empty.
std::vector<ClassifierBatch> make_classifier_batches(
    const std::vector<std::vector<int>>& sequences, const std::vector<int>& labels,
    std::size_t batch_size, int pad_id = Vocabulary::kPad);

}  // namespace claimlab::text
