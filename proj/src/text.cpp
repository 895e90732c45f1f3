#include "claimlab/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "claimlab/io.hpp"

namespace claimlab::text {

namespace {

inline bool is_ws(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Bytes >= 0x80 count as word characters so UTF-8 sequences stay intact.
inline bool is_word_char(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u);
}

inline bool is_upper(char c) {
  return c >= 'A' && c <= 'Z';
}

inline bool is_digit_c(char c) {
  return c >= '0' && c <= '9';
}

// ", ', ( plus the UTF-8 curly openers.
bool is_opening_quote(std::string_view s, std::size_t pos) {
  char c = s[pos];
  if (c == '"' || c == '\'' || c == '(') return true;
  if (pos + 2 < s.size() && static_cast<unsigned char>(c) == 0xE2 &&
      static_cast<unsigned char>(s[pos + 1]) == 0x80) {
    unsigned char b = static_cast<unsigned char>(s[pos + 2]);
    return b == 0x9C || b == 0x98;  // left double / single quotation mark
  }
  return false;
}

}  // namespace

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

const std::unordered_set<std::string> kDefaultAbbreviations = {
    "e.g.", "i.e.", "mr.", "mrs.", "dr.", "vs.", "etc.", "u.s."};

std::vector<std::string> split_sentences(std::string_view body) {
  return split_sentences(body, kDefaultAbbreviations);
}

std::vector<std::string> split_sentences(std::string_view body,
                                         const std::unordered_set<std::string>& abbreviations) {
  std::vector<std::string> sentences;
  const std::size_t n = body.size();
  std::size_t start = 0;
  while (start < n && is_ws(body[start])) ++start;
  if (start >= n) return sentences;

  auto flush = [&](std::size_t end_excl) {
    // [start, end_excl) trimmed
    std::size_t e = end_excl;
    while (e > start && is_ws(body[e - 1])) --e;
    if (e > start) sentences.emplace_back(body.substr(start, e - start));
  };

  for (std::size_t i = start; i < n; ++i) {
    char c = body[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    if (j >= n || !is_ws(body[j])) continue;
    while (j < n && is_ws(body[j])) ++j;
    if (j >= n) continue;  // trailing whitespace only; last span closes below
    if (!(is_upper(body[j]) || is_digit_c(body[j]) || is_opening_quote(body, j))) continue;
    if (c == '.') {
      // token ending here, e.g. "e.g." or "U.S."
      std::size_t t = i;
      while (t > start && !is_ws(body[t - 1])) --t;
      std::string token = lowercase(body.substr(t, i - t + 1));
      if (abbreviations.contains(token)) continue;
    }
    flush(i + 1);
    start = j;
    i = j - 1;
  }
  flush(n);
  return sentences;
}

std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  const std::size_t n = sentence.size();
  for (std::size_t i = 0; i < n; ++i) {
    char c = sentence[i];
    if (is_ws(c)) {
      flush();
      continue;
    }
    if (is_word_char(c)) {
      current += c;
      continue;
    }
    if (c == '\'' && i + 1 < n && is_word_char(sentence[i + 1]) && !current.empty() &&
        is_word_char(current.back())) {
      // contraction: "that's" -> "that", "'s"
      flush();
      current += c;
      continue;
    }
    flush();
    tokens.emplace_back(1, c);
  }
  flush();
  return tokens;
}

bool is_word_token(std::string_view token) {
  for (char c : token) {
    if (is_word_char(c)) return true;
  }
  return false;
}

int count_word_tokens(const std::vector<std::string>& tokens) {
  int count = 0;
  for (const auto& t : tokens) {
    if (is_word_token(t)) ++count;
  }
  return count;
}

std::string last_tab_field(const std::string& line) {
  std::size_t tab = line.rfind('\t');
  return tab == std::string::npos ? line : line.substr(tab + 1);
}

Vocabulary::Vocabulary() {
  push("<pad>", 0);
  push("<unk>", 0);
  push("<bos>", 0);
  push("<eos>", 0);
}

void Vocabulary::push(std::string token, std::int64_t freq) {
  token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
  id_to_token_.push_back(std::move(token));
  frequency_.push_back(freq);
}

Vocabulary Vocabulary::build(const std::unordered_map<std::string, std::int64_t>& counts,
                             std::size_t max_size, std::int64_t min_freq) {
  if (max_size < kNumReserved) throw std::invalid_argument("max_size must be >= 4");
  if (min_freq < 1) throw std::invalid_argument("min_freq must be >= 1");

  Vocabulary vocab;
  std::vector<std::pair<std::string, std::int64_t>> ranked;
  ranked.reserve(counts.size());
  for (const auto& [token, freq] : counts) {
    if (freq < min_freq) continue;
    if (vocab.token_to_id_.contains(token)) continue;  // literal reserved token
    ranked.emplace_back(token, freq);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const std::size_t limit = max_size - kNumReserved;
  if (ranked.size() > limit) ranked.resize(limit);
  for (auto& [token, freq] : ranked) vocab.push(std::move(token), freq);
  return vocab;
}

int Vocabulary::id_or_unk(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.contains(token);
}

void Vocabulary::save(const std::string& path) const {
  std::ostringstream out;
  for (std::size_t id = 0; id < id_to_token_.size(); ++id) {
    out << id_to_token_[id] << '\t' << id << '\t' << frequency_[id] << '\n';
  }
  io::atomic_write(path, out.str());
}

Vocabulary Vocabulary::load(const std::string& path) {
  Vocabulary vocab;
  vocab.id_to_token_.clear();
  vocab.frequency_.clear();
  vocab.token_to_id_.clear();

  io::LineReader reader(path);
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw std::runtime_error("bad vocabulary line: " + line);
    std::string token = line.substr(0, t1);
    int id = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
    std::int64_t freq = std::stoll(line.substr(t2 + 1));
    if (id != static_cast<int>(vocab.id_to_token_.size())) {
      throw std::runtime_error("non-dense vocabulary ids in " + path);
    }
    vocab.push(std::move(token), freq);
  }
  static const char* kReservedNames[] = {"<pad>", "<unk>", "<bos>", "<eos>"};
  if (vocab.size() < kNumReserved) throw std::runtime_error("vocabulary missing reserved tokens");
  for (int i = 0; i < kNumReserved; ++i) {
    if (vocab.id_to_token_[static_cast<std::size_t>(i)] != kReservedNames[i]) {
      throw std::runtime_error("vocabulary reserved tokens corrupted in " + path);
    }
  }
  return vocab;
}

std::uint64_t Vocabulary::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& token : id_to_token_) {
    h = io::fnv1a64(token, h);
    h = io::fnv1a64("\n", h);
  }
  return h;
}

std::vector<int> numericalize(const std::vector<std::string>& tokens,
                              const Vocabulary& vocab, bool lowercase_tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& token : tokens) {
    ids.push_back(vocab.id_or_unk(lowercase_tokens ? lowercase(token) : token));
  }
  return ids;
}

void count_tokens(const std::vector<std::string>& tokens,
                  std::unordered_map<std::string, std::int64_t>& counts,
                  bool lowercase_tokens) {
  for (const auto& token : tokens) {
    counts[lowercase_tokens ? lowercase(token) : token] += 1;
  }
}

std::vector<LmBatch> make_lm_batches(const std::vector<int>& stream,
                                     std::size_t batch_size, std::size_t bptt_len) {
  if (batch_size == 0 || bptt_len == 0) throw std::invalid_argument("batch and bptt must be > 0");
  if (stream.size() < batch_size * 2) {
    throw std::invalid_argument("stream too short: need at least batch_size*2 tokens");
  }
  const std::size_t strip_len = stream.size() / batch_size;
  std::vector<LmBatch> batches;
  for (std::size_t t0 = 0; t0 + 1 < strip_len; t0 += bptt_len) {
    const std::size_t steps = std::min(bptt_len, strip_len - 1 - t0);
    LmBatch batch;
    batch.batch = batch_size;
    batch.steps = steps;
    batch.inputs.resize(batch_size * steps);
    batch.targets.resize(batch_size * steps);
    for (std::size_t b = 0; b < batch_size; ++b) {
      const std::size_t base = b * strip_len + t0;
      for (std::size_t t = 0; t < steps; ++t) {
        batch.inputs[b * steps + t] = stream[base + t];
        batch.targets[b * steps + t] = stream[base + t + 1];
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<ClassifierBatch> make_classifier_batches(
    const std::vector<std::vector<int>>& sequences, const std::vector<int>& labels,
    std::size_t batch_size, int pad_id) {
  if (sequences.empty()) throw std::invalid_argument("empty dataset");
  if (sequences.size() != labels.size()) throw std::invalid_argument("labels/sequences mismatch");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be > 0");
  for (const auto& seq : sequences) {
    if (seq.empty()) throw std::invalid_argument("empty sequence");
  }

  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sequences[a].size() > sequences[b].size();
  });

  std::vector<ClassifierBatch> batches;
  for (std::size_t pos = 0; pos < order.size(); pos += batch_size) {
    const std::size_t count = std::min(batch_size, order.size() - pos);
    ClassifierBatch batch;
    batch.batch = count;
    batch.steps = sequences[order[pos]].size();  // longest first
    batch.ids.assign(count * batch.steps, pad_id);
    for (std::size_t r = 0; r < count; ++r) {
      const std::size_t src = order[pos + r];
      const auto& seq = sequences[src];
      std::copy(seq.begin(), seq.end(), batch.ids.begin() + static_cast<std::ptrdiff_t>(r * batch.steps));
      batch.lengths.push_back(static_cast<int>(seq.size()));
      batch.labels.push_back(labels[src]);
      batch.source_index.push_back(src);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace claimlab::text
