#include "claimlab/miner.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "claimlab/io.hpp"
#include "claimlab/text.hpp"

namespace claimlab::miner {

namespace {

using json = nlohmann::json;

inline bool is_ws(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_punct_byte(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return u < 0x80 && !std::isalnum(u) && !is_ws(c);
}

struct Chunk {
  std::string pre;   // leading punctuation
  std::string core;  // everything between
  std::string suf;   // trailing punctuation
};

Chunk decompose(std::string_view token) {
  std::size_t lo = 0;
  std::size_t hi = token.size();
  while (lo < hi && is_punct_byte(token[lo])) ++lo;
  while (hi > lo && is_punct_byte(token[hi - 1])) --hi;
  Chunk c;
  c.pre = std::string(token.substr(0, lo));
  c.core = std::string(token.substr(lo, hi - lo));
  c.suf = std::string(token.substr(hi));
  return c;
}

std::optional<Acronym> acronym_of(std::string_view core) {
  std::string folded = text::lowercase(core);
  if (folded == "imo") return Acronym::imo;
  if (folded == "imho") return Acronym::imho;
  return std::nullopt;
}

std::vector<std::string> whitespace_split(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    while (i < n && is_ws(s[i])) ++i;
    std::size_t start = i;
    while (i < n && !is_ws(s[i])) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

bool trimmed_empty(const std::string& s) {
  for (char c : s) {
    if (!is_ws(c)) return false;
  }
  return true;
}

}  // namespace

const char* to_string(Acronym a) {
  return a == Acronym::imo ? "IMO" : "IMHO";
}

std::variant<CommentRecord, SkipReason> parse_comment_line(std::string_view line) {
  json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (obj.is_discarded() || !obj.is_object()) return SkipReason::malformed;

  auto id_it = obj.find("id");
  if (id_it == obj.end() || !id_it->is_string()) return SkipReason::malformed;

  auto body_it = obj.find("body");
  if (body_it == obj.end() || !body_it->is_string()) return SkipReason::missing_body;

  CommentRecord record;
  record.id = id_it->get<std::string>();
  record.body = body_it->get<std::string>();
  if (record.id.empty()) return SkipReason::malformed;
  if (trimmed_empty(record.body)) return SkipReason::missing_body;

  auto ts_it = obj.find("created_utc");
  if (ts_it == obj.end() || !ts_it->is_number_integer()) return SkipReason::malformed;
  record.created_utc = ts_it->get<std::int64_t>();
  if (record.created_utc < 0) return SkipReason::malformed;

  auto sub_it = obj.find("subreddit");
  if (sub_it != obj.end() && sub_it->is_string()) {
    record.subreddit = sub_it->get<std::string>();
  }
  return record;
}

std::vector<MatchedSentence> extract_opinion_sentences(const CommentRecord& record) {
  std::vector<MatchedSentence> matches;
  const std::vector<std::string> sentences = text::split_sentences(record.body);
  for (std::size_t idx = 0; idx < sentences.size(); ++idx) {
    std::optional<Acronym> first;
    for (const auto& token : whitespace_split(sentences[idx])) {
      if (auto a = acronym_of(decompose(token).core)) {
        first = *a;
        break;
      }
    }
    if (first) {
      matches.push_back({sentences[idx], *first, static_cast<int>(idx)});
    }
  }
  return matches;
}

std::optional<std::string> strip_acronym(std::string_view sentence, int min_word_tokens) {
  std::vector<std::string> tokens = whitespace_split(sentence);
  std::string out;
  std::string glue;  // leading punctuation waiting to attach to the next token

  auto append_token = [&](const std::string& token) {
    std::string piece = glue + token;
    glue.clear();
    if (piece.empty()) return;
    if (!out.empty()) out += ' ';
    out += piece;
  };

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    Chunk chunk = decompose(tokens[i]);
    if (!acronym_of(chunk.core)) {
      append_token(tokens[i]);
      continue;
    }

    std::string suf = chunk.suf;
    const bool sentence_initial = out.empty() && glue.empty();
    const bool after_comma = !out.empty() && out.back() == ',';
    if (sentence_initial || after_comma) {
      // drop the comma following the acronym (attached or next token)
      if (!suf.empty() && suf.front() == ',') {
        suf.erase(suf.begin());
      } else if (suf.empty() && i + 1 < tokens.size() && tokens[i + 1].front() == ',') {
        tokens[i + 1].erase(tokens[i + 1].begin());
        if (tokens[i + 1].empty()) tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(i) + 1);
      }
    }
    if (!suf.empty()) {
      // punctuation remainder binds left: "there IMHO." -> "there."
      if (out.empty()) {
        out = suf;
      } else {
        out += suf;
      }
    }
    if (!chunk.pre.empty()) glue += chunk.pre;  // binds right
  }
  if (!glue.empty()) {
    out += glue;  // dangling opener at the very end
  }

  if (text::count_word_tokens(text::tokenize(out)) < min_word_tokens) return std::nullopt;
  return out;
}

namespace {

struct LineOutcome {
  bool well_formed = false;
  bool matched = false;
  int discarded_short = 0;
  std::vector<OpinionSentence> sentences;
};

LineOutcome process_line(const std::string& line, int min_tokens) {
  LineOutcome outcome;
  auto parsed = parse_comment_line(line);
  if (std::holds_alternative<SkipReason>(parsed)) return outcome;
  outcome.well_formed = true;

  const CommentRecord& record = std::get<CommentRecord>(parsed);
  for (const MatchedSentence& match : extract_opinion_sentences(record)) {
    outcome.matched = true;
    if (auto cleaned = strip_acronym(match.text, min_tokens)) {
      outcome.sentences.push_back({record.id, std::move(*cleaned), match.acronym,
                                   match.sentence_index});
    } else {
      ++outcome.discarded_short;
    }
  }
  return outcome;
}

constexpr std::size_t kLinesPerChunk = 2048;

}  // namespace

MiningStats mine_corpus(const std::vector<std::string>& input_paths,
                        const std::string& output_path, const MineOptions& options) {
  std::ofstream out(output_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + output_path);

  MiningStats stats;
  std::unordered_set<std::string> seen;

  for (const auto& path : input_paths) {
    io::LineReader reader(path);
    std::vector<std::string> lines;
    lines.reserve(kLinesPerChunk);
    bool more = true;
    while (more) {
      lines.clear();
      std::string line;
      while (lines.size() < kLinesPerChunk && (more = reader.next(line))) {
        lines.push_back(std::move(line));
      }
      if (lines.empty()) break;

      std::vector<LineOutcome> outcomes(lines.size());
      const int min_tokens = options.min_tokens;
#ifdef _OPENMP
      if (options.jobs > 0) {
#pragma omp parallel for schedule(static) num_threads(options.jobs)
        for (std::size_t i = 0; i < lines.size(); ++i) {
          outcomes[i] = process_line(lines[i], min_tokens);
        }
      } else {
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < lines.size(); ++i) {
          outcomes[i] = process_line(lines[i], min_tokens);
        }
      }
#else
      for (std::size_t i = 0; i < lines.size(); ++i) {
        outcomes[i] = process_line(lines[i], min_tokens);
      }
#endif

      // ordered merge keeps output deterministic for any worker count
      for (const LineOutcome& outcome : outcomes) {
        ++stats.lines_read;
        if (!outcome.well_formed) {
          ++stats.parse_failures;
          continue;
        }
        if (outcome.matched) ++stats.comments_matched;
        stats.sentences_discarded_short += static_cast<std::uint64_t>(outcome.discarded_short);
        for (const OpinionSentence& sentence : outcome.sentences) {
          if (options.dedupe && !seen.insert(sentence.text).second) continue;
          if (options.plain) {
            out << sentence.text << '\n';
          } else {
            out << sentence.source_id << '\t' << to_string(sentence.acronym) << '\t'
                << sentence.text << '\n';
          }
          ++stats.sentences_emitted;
        }
      }
    }
  }
  out.flush();
  if (!out) throw std::runtime_error("write failure on " + output_path);
  return stats;
}

}  // namespace claimlab::miner
