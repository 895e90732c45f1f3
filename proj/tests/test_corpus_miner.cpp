#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "claimlab/miner.hpp"
#include "claimlab/text.hpp"

using namespace claimlab;
using miner::Acronym;
using miner::SkipReason;

namespace {

const std::string kFixture = std::string(CLAIMLAB_TEST_DATA) + "/comments_fixture.ndjson";
const std::string kExpected = std::string(CLAIMLAB_TEST_DATA) + "/expected_corpus.tsv";

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("parse_comment_line handles well-formed and broken lines") {
  auto ok = miner::parse_comment_line(
      R"({"id":"c1","body":"IMO this rules.","created_utc":1500000000})");
  REQUIRE(std::holds_alternative<miner::CommentRecord>(ok));
  const auto& rec = std::get<miner::CommentRecord>(ok);
  CHECK(rec.id == "c1");
  CHECK(rec.body == "IMO this rules.");
  CHECK(rec.created_utc == 1500000000);
  CHECK_FALSE(rec.subreddit.has_value());

  auto sub = miner::parse_comment_line(
      R"({"id":"c2","body":"x y z","created_utc":0,"subreddit":"nba"})");
  CHECK(std::get<miner::CommentRecord>(sub).subreddit == "nba");

  auto malformed = miner::parse_comment_line("not structured text {{{");
  CHECK(std::get<SkipReason>(malformed) == SkipReason::malformed);

  auto missing = miner::parse_comment_line(R"({"id":"c2","created_utc":0})");
  CHECK(std::get<SkipReason>(missing) == SkipReason::missing_body);

  auto empty_body = miner::parse_comment_line(R"({"id":"c3","body":"  ","created_utc":0})");
  CHECK(std::get<SkipReason>(empty_body) == SkipReason::missing_body);

  auto no_ts = miner::parse_comment_line(R"({"id":"c4","body":"hello there"})");
  CHECK(std::get<SkipReason>(no_ts) == SkipReason::malformed);

  auto neg_ts = miner::parse_comment_line(R"({"id":"c5","body":"hi","created_utc":-4})");
  CHECK(std::get<SkipReason>(neg_ts) == SkipReason::malformed);

  auto bad_utf8 = miner::parse_comment_line("{\"id\":\"c6\",\"body\":\"\xff\xfe\",\"created_utc\":1}");
  CHECK(std::get<SkipReason>(bad_utf8) == SkipReason::malformed);
}

TEST_CASE("extract_opinion_sentences keeps only matching sentences") {
  miner::CommentRecord rec{"x", "I went there. IMO it was bad.", 1, {}};
  auto matches = miner::extract_opinion_sentences(rec);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].text == "IMO it was bad.");
  CHECK(matches[0].acronym == Acronym::imo);
  CHECK(matches[0].sentence_index == 1);

  rec.body = "Imogen sang well.";
  CHECK(miner::extract_opinion_sentences(rec).empty());

  rec.body = "Nothing here at all.";
  CHECK(miner::extract_opinion_sentences(rec).empty());

  rec.body = "IMO cats are great. Dogs drool a lot. IMHO birds win.";
  matches = miner::extract_opinion_sentences(rec);
  REQUIRE(matches.size() == 2);
  CHECK(matches[0].sentence_index == 0);
  CHECK(matches[0].acronym == Acronym::imo);
  CHECK(matches[1].sentence_index == 2);
  CHECK(matches[1].acronym == Acronym::imho);

  // punctuation-wrapped and case variants still match as whole tokens
  rec.body = "(imho) that works fine.";
  CHECK(miner::extract_opinion_sentences(rec).size() == 1);
  rec.body = "Strange token imof here.";
  CHECK(miner::extract_opinion_sentences(rec).empty());
}

TEST_CASE("strip_acronym removes the acronym and repairs punctuation") {
  CHECK(*miner::strip_acronym("IMO, Lakers are in big trouble next couple years") ==
        "Lakers are in big trouble next couple years");
  CHECK(*miner::strip_acronym("That's virtually the same as neglect right there IMHO.") ==
        "That's virtually the same as neglect right there.");
  CHECK_FALSE(miner::strip_acronym("IMHO.").has_value());

  // comma-delimited mid-sentence keeps one comma
  CHECK(*miner::strip_acronym("I think, IMO, this rocks.") == "I think, this rocks.");
  // leading punctuation binds to the next word
  CHECK(*miner::strip_acronym("(IMHO this helps a lot)") == "(this helps a lot)");
  // several acronym tokens all disappear
  CHECK(*miner::strip_acronym("IMO imho this sentence repeats itself") ==
        "this sentence repeats itself");
  // whitespace collapses
  CHECK(*miner::strip_acronym("spaces   IMO   get   collapsed") == "spaces get collapsed");

  // floor counts word tokens, not punctuation
  CHECK_FALSE(miner::strip_acronym("IMO nah.").has_value());
  CHECK(miner::strip_acronym("IMO nah.", 1).has_value());

  // no emitted token folds back to the acronym
  for (const char* raw : {"IMO IMHO imo ok then fine", "imho, IMO: yes really truly"}) {
    auto cleaned = miner::strip_acronym(raw);
    if (!cleaned) continue;
    for (const auto& token : text::tokenize(*cleaned)) {
      const std::string folded = text::lowercase(token);
      CHECK(folded != "imo");
      CHECK(folded != "imho");
    }
  }
}

TEST_CASE("mine_corpus reproduces the golden corpus with exact stats") {
  const std::string out = "mined_golden.tsv";
  miner::MineOptions options;
  auto stats = miner::mine_corpus({kFixture}, out, options);

  CHECK(stats.lines_read == 20);
  CHECK(stats.parse_failures == 1);
  CHECK(stats.comments_matched == 6);
  CHECK(stats.sentences_emitted == 6);
  CHECK(stats.sentences_discarded_short == 0);
  CHECK(slurp(out) == slurp(kExpected));
  std::remove(out.c_str());
}

TEST_CASE("mine_corpus output is byte-identical across runs and worker counts") {
  miner::MineOptions serial_opts;
  serial_opts.jobs = 1;
  miner::MineOptions parallel_opts;
  parallel_opts.jobs = 4;

  miner::mine_corpus({kFixture}, "mined_a.tsv", serial_opts);
  miner::mine_corpus({kFixture}, "mined_b.tsv", serial_opts);
  miner::mine_corpus({kFixture}, "mined_c.tsv", parallel_opts);

  const std::string a = slurp("mined_a.tsv");
  CHECK(a == slurp("mined_b.tsv"));
  CHECK(a == slurp("mined_c.tsv"));
  std::remove("mined_a.tsv");
  std::remove("mined_b.tsv");
  std::remove("mined_c.tsv");
}

TEST_CASE("mine_corpus reads gzip inputs by content") {
  const std::string gz_path = "fixture_copy.ndjson.gz";
  {
    const std::string raw = slurp(kFixture);
    gzFile gz = gzopen(gz_path.c_str(), "wb");
    REQUIRE(gz != nullptr);
    REQUIRE(gzwrite(gz, raw.data(), static_cast<unsigned>(raw.size())) ==
            static_cast<int>(raw.size()));
    gzclose(gz);
  }
  miner::MineOptions options;
  auto stats = miner::mine_corpus({gz_path}, "mined_gz.tsv", options);
  CHECK(stats.sentences_emitted == 6);
  CHECK(slurp("mined_gz.tsv") == slurp(kExpected));
  std::remove(gz_path.c_str());
  std::remove("mined_gz.tsv");
}

TEST_CASE("multiple inputs are processed in argument order") {
  {
    std::ofstream f("multi_a.ndjson", std::ios::binary);
    f << R"({"id":"m1","body":"IMO alpha beats beta.","created_utc":1})" << "\n";
  }
  {
    std::ofstream f("multi_b.ndjson", std::ios::binary);
    f << R"({"id":"m2","body":"IMO beta beats alpha.","created_utc":2})" << "\n";
  }
  miner::MineOptions options;
  auto stats = miner::mine_corpus({"multi_a.ndjson", "multi_b.ndjson"}, "multi_out.tsv", options);
  CHECK(stats.lines_read == 2);
  CHECK(slurp("multi_out.tsv") ==
        "m1\tIMO\talpha beats beta.\nm2\tIMO\tbeta beats alpha.\n");
  miner::mine_corpus({"multi_b.ndjson", "multi_a.ndjson"}, "multi_swapped.tsv", options);
  CHECK(slurp("multi_swapped.tsv") ==
        "m2\tIMO\tbeta beats alpha.\nm1\tIMO\talpha beats beta.\n");
  std::remove("multi_a.ndjson");
  std::remove("multi_b.ndjson");
  std::remove("multi_out.tsv");
  std::remove("multi_swapped.tsv");
}

TEST_CASE("dedupe collapses duplicate sentences to the first occurrence") {
  const std::string in = "dedupe_input.ndjson";
  {
    std::ofstream f(in, std::ios::binary);
    f << R"({"id":"a1","body":"IMO pizza beats burgers.","created_utc":1})" << "\n"
      << R"({"id":"a2","body":"IMO pizza beats burgers.","created_utc":2})" << "\n"
      << R"({"id":"a3","body":"IMO tacos beat both.","created_utc":3})" << "\n";
  }
  miner::MineOptions plain_opts;
  auto stats = miner::mine_corpus({in}, "dedupe_off.tsv", plain_opts);
  CHECK(stats.sentences_emitted == 3);

  miner::MineOptions dedupe_opts;
  dedupe_opts.dedupe = true;
  stats = miner::mine_corpus({in}, "dedupe_on.tsv", dedupe_opts);
  CHECK(stats.sentences_emitted == 2);
  CHECK(slurp("dedupe_on.tsv") ==
        "a1\tIMO\tpizza beats burgers.\na3\tIMO\ttacos beat both.\n");

  std::remove(in.c_str());
  std::remove("dedupe_off.tsv");
  std::remove("dedupe_on.tsv");
}

TEST_CASE("plain mode emits text only and min-tokens filters short results") {
  const std::string in = "plain_input.ndjson";
  {
    std::ofstream f(in, std::ios::binary);
    f << R"({"id":"b1","body":"IMHO sleep always helps.","created_utc":1})" << "\n"
      << R"({"id":"b2","body":"Total nonsense. IMHO.","created_utc":2})" << "\n";
  }
  miner::MineOptions options;
  options.plain = true;
  auto stats = miner::mine_corpus({in}, "plain_out.txt", options);
  CHECK(stats.sentences_emitted == 1);
  CHECK(stats.sentences_discarded_short == 1);
  CHECK(stats.comments_matched == 2);
  CHECK(slurp("plain_out.txt") == "sleep always helps.\n");

  options.min_tokens = 5;
  stats = miner::mine_corpus({in}, "plain_out5.txt", options);
  CHECK(stats.sentences_emitted == 0);
  CHECK(stats.sentences_discarded_short == 2);

  std::remove(in.c_str());
  std::remove("plain_out.txt");
  std::remove("plain_out5.txt");
}
