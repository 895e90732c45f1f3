#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace claimlab::miner {

struct CommentRecord {
  std::string id;
  std::string body;
  std::int64_t created_utc = 0;
  std::optional<std::string> subreddit;
};

enum class SkipReason { malformed, missing_body };

// One NDJSON object per line: `id` (string), `body` (string), `created_utc`
// (integer), optional `subreddit`. Malformed lines never abort the stream.
std::variant<CommentRecord, SkipReason> parse_comment_line(std::string_view line);

enum class Acronym { imo, imho };
const char* to_string(Acronym a);

struct MatchedSentence {
  std::string text;      // raw sentence, acronym still present
  Acronym acronym;       // first acronym found in the sentence
  int sentence_index;    // 0-based position within the comment body
};

// Sentence-segments the body and keeps exactly the sentences containing a
// whole token (case-folded, adjacent punctuation stripped) equal to "imo"
// or "imho".
std::vector<MatchedSentence> extract_opinion_sentences(const CommentRecord& record);

// Removes every acronym token and repairs punctuation: a sentence-initial
// acronym followed by a comma drops the comma; an acronym comma-delimited on
// both sides drops one comma; a punctuation-only remainder re-attaches to the
// neighbouring word; whitespace is collapsed and trimmed. Returns nullopt
// when fewer than min_word_tokens word tokens remain.
std::optional<std::string> strip_acronym(std::string_view sentence, int min_word_tokens = 3);

struct OpinionSentence {
  std::string source_id;
  std::string text;
  Acronym acronym;
  int sentence_index = 0;
};

struct MiningStats {
  std::uint64_t lines_read = 0;
  std::uint64_t parse_failures = 0;
  std::uint64_t comments_matched = 0;
  std::uint64_t sentences_emitted = 0;
  std::uint64_t sentences_discarded_short = 0;
};

struct MineOptions {
  bool dedupe = false;
  int min_tokens = 3;
  bool plain = false;  // emit `text` only instead of source_id/acronym/text
  int jobs = 0;        // 0 = OpenMP default
};

// Streams the dumps, writes one opinion sentence per line (TSV
// `source_id<TAB>acronym<TAB>text`, LF endings) and returns the counters.
// Output is byte-identical for identical inputs and options regardless of
// jobs: lines are processed in parallel chunks and merged in input order.
MiningStats mine_corpus(const std::vector<std::string>& input_paths,
                        const std::string& output_path, const MineOptions& options);

}  // namespace claimlab::miner
