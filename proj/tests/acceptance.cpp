// Acceptance suite: one check per release criterion, one pass/fail line each.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "claimlab/checkpoint.hpp"
#include "claimlab/evalharness.hpp"
#include "claimlab/miner.hpp"
#include "claimlab/nn.hpp"
#include "claimlab/rng.hpp"
#include "claimlab/text.hpp"
#include "claimlab/tfidf.hpp"
#include "claimlab/ulmfit.hpp"

using namespace claimlab;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------- criterion 1

Outcome check_miner_golden() {
  Outcome out;
  const std::string fixture = std::string(CLAIMLAB_TEST_DATA) + "/comments_fixture.ndjson";
  const std::string expected = slurp(std::string(CLAIMLAB_TEST_DATA) + "/expected_corpus.tsv");

  miner::MineOptions serial;
  serial.jobs = 1;
  const auto stats = miner::mine_corpus({fixture}, "acc_mined_1.tsv", serial);
  miner::mine_corpus({fixture}, "acc_mined_2.tsv", serial);
  miner::MineOptions parallel;
  parallel.jobs = 4;
  miner::mine_corpus({fixture}, "acc_mined_4.tsv", parallel);

  const std::string run1 = slurp("acc_mined_1.tsv");
  out.require(run1 == expected, "mined corpus differs from the golden file");
  out.require(run1 == slurp("acc_mined_2.tsv"), "repeated run not byte-identical");
  out.require(run1 == slurp("acc_mined_4.tsv"), "jobs=4 run not byte-identical");
  out.require(stats.lines_read == 20, "lines_read != 20");
  out.require(stats.parse_failures == 1, "parse_failures != 1");
  out.require(stats.comments_matched == 6, "comments_matched != 6");
  out.require(stats.sentences_emitted == 6, "sentences_emitted != 6");
  out.require(stats.sentences_discarded_short == 0, "unexpected short discards");
  std::remove("acc_mined_1.tsv");
  std::remove("acc_mined_2.tsv");
  std::remove("acc_mined_4.tsv");
  return out;
}

// ---------------------------------------------------------------- criterion 2

std::vector<int> random_ids(std::size_t n, std::size_t vocab, Rng& rng) {
  std::vector<int> ids(n);
  for (int& id : ids) id = static_cast<int>(rng.below(vocab));
  return ids;
}

double lm_gradcheck(std::uint64_t seed) {
  Rng pick_cfg(seed);
  nn::StackConfig cfg;
  cfg.vocab = 7 + pick_cfg.below(9);
  cfg.hidden_dim = 3 + pick_cfg.below(5);
  cfg.num_layers = 1 + pick_cfg.below(3);
  const bool tied = pick_cfg.below(3) == 0;
  cfg.embed_dim = tied ? cfg.hidden_dim : 3 + pick_cfg.below(5);
  cfg.dropout = pick_cfg.below(2) == 0 ? 0.0 : 0.2;
  const std::size_t batch = 2 + pick_cfg.below(3);
  const std::size_t steps = 2 + pick_cfg.below(4);

  Rng init(seed + 1);
  nn::LanguageModel model = nn::LanguageModel::create(cfg, tied, init);
  Rng data(seed + 2);
  const auto inputs = random_ids(batch * steps, cfg.vocab, data);
  const auto targets = random_ids(batch * steps, cfg.vocab, data);
  nn::LmBatchView view{inputs.data(), targets.data(), batch, steps};
  const bool use_dropout = cfg.dropout > 0.0;

  auto loss_fn = [&]() {
    auto state = nn::RecurrentState::zeros(model.stack, batch);
    Rng drop(seed + 3);
    return nn::lm_loss(model, view, state, use_dropout, use_dropout ? &drop : nullptr);
  };
  auto grad_fn = [&]() {
    auto state = nn::RecurrentState::zeros(model.stack, batch);
    Rng drop(seed + 3);
    nn::lm_loss_and_grads(model, view, state, use_dropout ? &drop : nullptr);
  };
  Rng pick(seed + 4);
  return nn::gradient_check(model.parameters(), loss_fn, grad_fn, 1e-5, 200, pick)
      .max_rel_error;
}

double classifier_gradcheck(std::uint64_t seed) {
  Rng pick_cfg(seed);
  nn::StackConfig cfg;
  cfg.vocab = 8 + pick_cfg.below(8);
  cfg.embed_dim = 3 + pick_cfg.below(4);
  cfg.hidden_dim = 3 + pick_cfg.below(5);
  cfg.num_layers = 1 + pick_cfg.below(2);
  cfg.dropout = 0.0;
  const bool final_state_only = pick_cfg.below(4) == 0;

  Rng init(seed + 1);
  nn::LanguageModel lm = nn::LanguageModel::create(cfg, false, init);
  Rng head(seed + 2);
  auto clf = ulmfit::build_classifier(lm, head, 5 + pick_cfg.below(4), final_state_only);

  Rng data(seed + 3);
  text::ClassifierBatch batch;
  batch.batch = 3;
  batch.steps = 2 + data.below(4);
  batch.ids.resize(batch.batch * batch.steps);
  for (int& id : batch.ids) id = static_cast<int>(data.below(cfg.vocab));
  for (std::size_t b = 0; b < batch.batch; ++b) {
    batch.lengths.push_back(1 + static_cast<int>(data.below(batch.steps)));
    batch.labels.push_back(static_cast<int>(data.below(2)));
    batch.source_index.push_back(b);
  }

  auto loss_fn = [&]() {
    const Matrix logits = ulmfit::classifier_logits(clf, batch);
    return nn::softmax_cross_entropy(logits, batch.labels, nullptr);
  };
  auto grad_fn = [&]() { ulmfit::classifier_loss_and_grads(clf, batch); };
  Rng pick(seed + 4);
  return nn::gradient_check(clf.parameters(), loss_fn, grad_fn, 1e-5, 200, pick)
      .max_rel_error;
}

Outcome check_gradients() {
  Outcome out;
  double worst = 0.0;
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const double err = lm_gradcheck(seed);
    worst = std::max(worst, err);
    out.require(err < 1e-4, "LM config seed " + std::to_string(seed) + " err " + fmt(err));
  }
  for (std::uint64_t seed = 500; seed < 505; ++seed) {
    const double err = classifier_gradcheck(seed);
    worst = std::max(worst, err);
    out.require(err < 1e-4, "classifier config seed " + std::to_string(seed) + " err " + fmt(err));
  }
  out.note("max rel err " + fmt(worst) + " over 15 configs");
  return out;
}

// ---------------------------------------------------------------- criterion 3

Outcome check_perplexity() {
  Outcome out;

  nn::StackConfig cfg;
  cfg.vocab = 7;
  cfg.embed_dim = 4;
  cfg.hidden_dim = 4;
  cfg.num_layers = 2;
  Rng init(11);
  auto uniform = nn::LanguageModel::create(cfg, false, init);
  for (nn::Parameter* p : uniform.parameters()) p->value.zero();
  Rng data(12);
  const auto ids = random_ids(80, cfg.vocab, data);
  const double ppl = nn::perplexity(uniform, ids);
  out.require(std::abs(ppl - 7.0) < 1e-9, "uniform model ppl " + fmt(ppl) + " != 7");

  // fully predictable cyclic corpus
  std::vector<std::string> lines(600, "a b c d");
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& l : lines) text::count_tokens(text::tokenize(l), counts);
  auto vocab = text::Vocabulary::build(counts, 100, 1);
  auto stream = ulmfit::corpus_to_stream(lines, vocab);
  std::vector<int> train_ids, valid_ids;
  ulmfit::split_corpus(stream, 0.1, train_ids, valid_ids);

  nn::StackConfig cyc;
  cyc.vocab = vocab.size();
  cyc.embed_dim = 16;
  cyc.hidden_dim = 24;
  cyc.num_layers = 2;
  cyc.dropout = 0.1;
  Rng cyc_init(42);
  auto lm = nn::LanguageModel::create(cyc, false, cyc_init);
  auto stage = ulmfit::default_lm_config();
  stage.epochs = 30;
  stage.batch_size = 8;
  stage.bptt_len = 8;
  stage.seed = 42;
  const auto log = ulmfit::train_language_model(lm, train_ids, valid_ids, stage);
  const double best = *std::min_element(log.valid_ppl.begin(), log.valid_ppl.end());
  out.require(best < 2.0, "cyclic valid ppl " + fmt(best) + " >= 2.0");
  out.note("cyclic valid ppl " + fmt(log.valid_ppl.back()) + " after 30 epochs");
  return out;
}

// ---------------------------------------------------------------- criterion 4

template <typename A, typename B>
bool same_params(const std::vector<A>& a, const std::vector<B>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->name != b[i]->name || a[i]->value.data != b[i]->value.data) return false;
  }
  return true;
}

Outcome check_stage_handoff() {
  Outcome out;
  Rng corpus_rng(21);
  std::vector<std::string> lines;
  for (int i = 0; i < 300; ++i) {
    lines.push_back(i % 2 ? "the game was long and slow" : "we saw a fast game today");
  }
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& l : lines) text::count_tokens(text::tokenize(l), counts);
  auto vocab = text::Vocabulary::build(counts, 1000, 1);
  auto stream = ulmfit::corpus_to_stream(lines, vocab);
  std::vector<int> train_ids, valid_ids;
  ulmfit::split_corpus(stream, 0.1, train_ids, valid_ids);

  nn::StackConfig cfg;
  cfg.vocab = vocab.size();
  cfg.embed_dim = 8;
  cfg.hidden_dim = 10;
  cfg.num_layers = 2;
  Rng init(22);
  auto lm = nn::LanguageModel::create(cfg, false, init);
  auto stage = ulmfit::default_lm_config();
  stage.epochs = 2;
  stage.batch_size = 4;
  stage.bptt_len = 8;
  ulmfit::train_language_model(lm, train_ids, valid_ids, stage);

  // through the checkpoint file
  nn::save_checkpoint(lm, nn::Stage::general, vocab.content_hash(), "acc_general.ulmc");
  auto loaded = nn::load_lm_checkpoint("acc_general.ulmc", nullptr, vocab.content_hash());
  out.require(same_params(lm.parameters(), loaded.parameters()),
              "checkpoint load changed parameters");

  // zero-epoch fine-tuning after an identical-vocabulary transfer
  auto transferred = ulmfit::transfer_vocab(loaded, vocab, vocab);
  auto zero_cfg = stage;
  zero_cfg.epochs = 0;
  ulmfit::train_language_model(transferred, train_ids, valid_ids, zero_cfg);
  out.require(same_params(lm.parameters(), transferred.parameters()),
              "zero-epoch fine-tune changed parameters");

  // classifier construction keeps the whole stack bit-for-bit
  Rng head(23);
  auto clf = ulmfit::build_classifier(transferred, head);
  bool stack_ok = clf.stack.embedding.value.data == lm.stack.embedding.value.data;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    stack_ok = stack_ok && clf.stack.layers[l].w_x.value.data == lm.stack.layers[l].w_x.value.data;
    stack_ok = stack_ok && clf.stack.layers[l].w_h.value.data == lm.stack.layers[l].w_h.value.data;
    stack_ok = stack_ok && clf.stack.layers[l].b.value.data == lm.stack.layers[l].b.value.data;
  }
  out.require(stack_ok, "build_classifier did not preserve the LSTM stack");
  std::remove("acc_general.ulmc");
  return out;
}

// ---------------------------------------------------------------- criterion 5

struct SyntheticGen {
  Rng rng;
  std::vector<std::string> nouns = {"market", "school", "game",   "team",  "movie", "phone",
                                    "city",   "car",    "book",   "coach", "price", "player",
                                    "song",   "show",   "law",    "plan"};
  std::vector<std::string> adjs = {"good", "bad",  "great", "terrible", "fair",
                                   "slow", "fast", "cheap", "safe",     "strong"};
  explicit SyntheticGen(std::uint64_t seed) : rng(seed) {}
  const std::string& noun() { return nouns[rng.below(nouns.size())]; }
  const std::string& adj() { return adjs[rng.below(adjs.size())]; }

  std::string noise() {
    switch (rng.below(4)) {
      case 0: return "i saw the " + noun() + " near the " + noun() + " yesterday afternoon";
      case 1: return "we know the " + noun() + " was " + adj() + " today and yesterday";
      case 2: return "yesterday i saw the " + adj() + " " + noun() + " near the " + noun();
      default: return "i know we saw the " + adj() + " " + noun() + " today";
    }
  }
  // claim-marker phrases: should / must be / better than / clearly / best
  std::string claim() {
    switch (rng.below(4)) {
      case 0: return "the " + noun() + " should clearly be " + adj() + " and must be " + adj();
      case 1: return "the " + noun() + " must surely be better than the " + adj() + " " + noun();
      case 2: return "clearly the " + noun() + " should be the best " + noun();
      default: return "the " + noun() + " must be better than the " + noun() + " surely";
    }
  }
};

double benchmark_arm(const nn::LanguageModel* lm, const nn::StackConfig& arch,
                     const text::Vocabulary& vocab,
                     const std::vector<std::vector<int>>& train_seqs,
                     const std::vector<int>& train_labels,
                     const std::vector<std::vector<int>>& test_seqs,
                     const std::vector<int>& test_labels, std::uint64_t seed) {
  nn::LanguageModel base = [&] {
    if (lm) return *lm;
    Rng init(seed);
    return nn::LanguageModel::create(arch, false, init);
  }();
  Rng head = Rng::derive(seed, 2);
  auto clf = ulmfit::build_classifier(base, head);

  auto cfg = ulmfit::default_classifier_config();  // lr 0.0001, 5 epochs
  cfg.batch_size = ulmfit::resolve_classifier_batch_size(train_seqs.size());
  cfg.seed = seed;
  ulmfit::train_classifier(clf, train_seqs, train_labels, cfg);
  const auto preds = ulmfit::classifier_predict(clf, test_seqs);
  return eval::compute_metrics(preds, test_labels).claim.f1;
}

Outcome check_synthetic_transfer() {
  Outcome out;
  SyntheticGen gen(2024);
  std::vector<std::string> general, opinion;
  for (int i = 0; i < 2000; ++i) {
    general.push_back(gen.rng.below(10) == 0 ? gen.claim() : gen.noise());
  }
  for (int i = 0; i < 2000; ++i) opinion.push_back(gen.claim());

  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& s : general) text::count_tokens(text::tokenize(s), counts);
  for (const auto& s : opinion) text::count_tokens(text::tokenize(s), counts);
  auto vocab = text::Vocabulary::build(counts, 30000, 1);

  auto to_seq = [&](const std::string& s) {
    auto ids = text::numericalize(text::tokenize(s), vocab);
    if (ids.empty()) ids.push_back(text::Vocabulary::kUnk);
    return ids;
  };
  std::vector<std::vector<int>> train_seqs, test_seqs;
  std::vector<int> train_labels, test_labels;
  for (int i = 0; i < 200; ++i) {  // 200 labeled training sentences
    train_labels.push_back(i % 2);
    train_seqs.push_back(to_seq(i % 2 ? gen.claim() : gen.noise()));
  }
  for (int i = 0; i < 400; ++i) {
    test_labels.push_back(i % 2);
    test_seqs.push_back(to_seq(i % 2 ? gen.claim() : gen.noise()));
  }

  nn::StackConfig arch;
  arch.vocab = vocab.size();
  arch.embed_dim = 24;
  arch.hidden_dim = 32;
  arch.num_layers = 2;
  arch.dropout = 0.1;

  // stage 1: general-domain pretraining; stage 2: opinion-corpus fine-tuning
  Rng lm_init(7);
  auto lm = nn::LanguageModel::create(arch, false, lm_init);
  auto lm_cfg = ulmfit::default_lm_config();
  lm_cfg.epochs = 16;
  lm_cfg.batch_size = 16;
  lm_cfg.bptt_len = 12;
  lm_cfg.seed = 7;
  std::vector<int> tr, va;
  auto general_stream = ulmfit::corpus_to_stream(general, vocab);
  ulmfit::split_corpus(general_stream, 0.1, tr, va);
  ulmfit::train_language_model(lm, tr, va, lm_cfg);
  auto opinion_stream = ulmfit::corpus_to_stream(opinion, vocab);
  ulmfit::split_corpus(opinion_stream, 0.1, tr, va);
  const auto ft_log = ulmfit::train_language_model(lm, tr, va, lm_cfg);

  double mean_lm = 0.0, mean_random = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    mean_lm += benchmark_arm(&lm, arch, vocab, train_seqs, train_labels, test_seqs,
                             test_labels, 1000 + seed);
    mean_random += benchmark_arm(nullptr, arch, vocab, train_seqs, train_labels, test_seqs,
                                 test_labels, 1000 + seed);
  }
  mean_lm /= 10.0;
  mean_random /= 10.0;

  out.note("fine-tuned-init mean claim F1 " + fmt(mean_lm) + ", random-init " +
           fmt(mean_random) + ", margin " + fmt(mean_lm - mean_random) +
           ", opinion-LM valid ppl " + fmt(ft_log.valid_ppl.back()));
  out.require(mean_lm >= mean_random, "transfer margin is negative");
  out.require(mean_lm >= 0.95, "separable ceiling below 0.95");
  return out;
}

// ---------------------------------------------------------------- criterion 6

double chi2_sf_df1_oracle(double x) {
  if (x <= 0.0) return 1.0;
  const double upper = std::sqrt(x);
  const std::size_t intervals = 200000;
  const double h = upper / static_cast<double>(intervals);
  auto f = [](double s) { return std::exp(-0.5 * s * s); };
  double sum = f(0.0) + f(upper);
  for (std::size_t i = 1; i < intervals; ++i) {
    sum += f(h * static_cast<double>(i)) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return 1.0 - std::sqrt(2.0 / M_PI) * sum * h / 3.0;
}

Outcome check_evaluation_harness() {
  Outcome out;

  // metrics against a brute-force confusion oracle on 1000 random vectors
  Rng rng(61);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(120);
    std::vector<int> preds(n), golds(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = static_cast<int>(rng.below(2));
      golds[i] = static_cast<int>(rng.below(2));
    }
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (preds[i] == 1 && golds[i] == 1) ++tp;
      else if (preds[i] == 1) ++fp;
      else if (golds[i] == 1) ++fn;
      else ++tn;
    }
    auto prf = [](double tp_, double fp_, double fn_) {
      const double p = tp_ + fp_ == 0 ? 0 : tp_ / (tp_ + fp_);
      const double r = tp_ + fn_ == 0 ? 0 : tp_ / (tp_ + fn_);
      const double f = p + r == 0 ? 0 : 2 * p * r / (p + r);
      return std::array<double, 3>{p, r, f};
    };
    const auto claim = prf(tp, fp, fn);
    const auto non = prf(tn, fn, fp);
    const auto got = eval::compute_metrics(preds, golds);
    const bool same = got.claim.precision == claim[0] && got.claim.recall == claim[1] &&
                      got.claim.f1 == claim[2] && got.non_claim.precision == non[0] &&
                      got.non_claim.recall == non[1] && got.non_claim.f1 == non[2] &&
                      got.macro.f1 == 0.5 * (claim[2] + non[2]);
    if (!same) {
      out.require(false, "metrics oracle mismatch at trial " + std::to_string(trial));
      break;
    }
  }

  // fold invariants across the published dataset sizes
  const std::pair<std::size_t, std::size_t> sizes[] = {
      {449, 112}, {7116, 2108}, {3899, 211}, {3541, 1206}, {100, 50}, {57, 13}};
  for (const auto& [n, claims] : sizes) {
    for (std::uint64_t seed : {1ull, 2ull}) {
      std::vector<int> labels(n, 0);
      for (std::size_t i = 0; i < claims; ++i) labels[i] = 1;
      Rng shuffle_rng(seed * 17);
      shuffle_rng.shuffle(labels);
      const auto folds = eval::make_folds(labels, 10, seed);
      std::vector<int> fold_sizes(10, 0), fold_claims(10, 0);
      for (std::size_t i = 0; i < n; ++i) {
        if (folds.fold_of[i] < 0 || folds.fold_of[i] >= 10) {
          out.require(false, "fold id out of range");
          break;
        }
        fold_sizes[static_cast<std::size_t>(folds.fold_of[i])] += 1;
        fold_claims[static_cast<std::size_t>(folds.fold_of[i])] += labels[i];
      }
      const auto [smin, smax] = std::minmax_element(fold_sizes.begin(), fold_sizes.end());
      const auto [cmin, cmax] = std::minmax_element(fold_claims.begin(), fold_claims.end());
      out.require(*smax - *smin <= 1,
                  "fold sizes uneven for n=" + std::to_string(n));
      out.require(*cmax - *cmin <= 1,
                  "stratification broken for n=" + std::to_string(n));
    }
  }

  // chi-squared on the documented table, against an independent oracle
  const auto chi = eval::chi_squared_from_counts(90, 10, 70, 30);
  out.require(std::abs(chi.statistic - 12.5) < 1e-12,
              "statistic " + fmt(chi.statistic) + " != 12.5");
  const double oracle_p = chi2_sf_df1_oracle(12.5);
  out.require(std::abs(chi.p_value - oracle_p) < 1e-6,
              "p " + fmt(chi.p_value) + " vs oracle " + fmt(oracle_p));
  out.require(std::abs(chi.p_value - 4.07e-4) < 1e-5, "p not near 4.07e-4");
  out.note("chi2 " + fmt(chi.statistic) + ", p " + fmt(chi.p_value));
  return out;
}

// ---------------------------------------------------------------- criterion 7

Outcome check_tfidf_retrieval() {
  Outcome out;
  Rng rng(71);
  const std::vector<std::string> words = {"cat",    "dog",  "bird",   "should", "be",
                                          "market", "fish", "runs",   "big",    "small",
                                          "the",    "a",    "better", "than",   "best"};
  auto sentence = [&]() {
    std::string s;
    const std::size_t len = 3 + rng.below(9);
    for (std::size_t i = 0; i < len; ++i) {
      if (i) s += ' ';
      s += words[rng.below(words.size())];
    }
    return s;
  };
  std::vector<std::string> docs;
  for (int d = 0; d < 100; ++d) docs.push_back(sentence());

  const auto index = tfidf::TfIdfIndex::build(docs);

  // dense oracle
  auto feats = [](const std::string& s) {
    auto tokens = text::tokenize(s);
    for (auto& t : tokens) t = text::lowercase(t);
    std::vector<std::string> fs = tokens;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) fs.push_back(tokens[i] + " " + tokens[i + 1]);
    return fs;
  };
  std::map<std::string, int> df;
  for (const auto& d : docs) {
    auto fs = feats(d);
    std::sort(fs.begin(), fs.end());
    fs.erase(std::unique(fs.begin(), fs.end()), fs.end());
    for (const auto& f : fs) df[f] += 1;
  }
  std::map<std::string, double> idf;
  for (const auto& [f, c] : df) {
    idf[f] = std::log((1.0 + 100.0) / (1.0 + static_cast<double>(c))) + 1.0;
  }
  auto dense_vec = [&](const std::string& s) {
    std::map<std::string, double> v;
    for (const auto& f : feats(s)) {
      if (idf.count(f)) v[f] += 1.0;
    }
    double norm = 0.0;
    for (auto& [f, tf] : v) {
      tf *= idf.at(f);
      norm += tf * tf;
    }
    if (norm > 0) {
      norm = std::sqrt(norm);
      for (auto& [f, w] : v) w /= norm;
    }
    return v;
  };
  std::vector<std::map<std::string, double>> dense_docs;
  for (const auto& d : docs) dense_docs.push_back(dense_vec(d));

  for (int q = 0; q < 20; ++q) {
    const std::string query = sentence();
    const auto qv = dense_vec(query);
    std::vector<std::pair<int, double>> expect;
    for (int d = 0; d < 100; ++d) {
      double dot = 0.0;
      for (const auto& [f, w] : qv) {
        auto it = dense_docs[static_cast<std::size_t>(d)].find(f);
        if (it != dense_docs[static_cast<std::size_t>(d)].end()) dot += w * it->second;
      }
      if (dot > 0.0) expect.emplace_back(d, dot);
    }
    std::sort(expect.begin(), expect.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (expect.size() > 10) expect.resize(10);

    const auto got = index.nearest(query, 10);
    bool same = got.size() == expect.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      same = got[i].doc == expect[i].first && std::abs(got[i].score - expect[i].second) <= 1e-12;
    }
    out.require(same, "oracle mismatch on query " + std::to_string(q));
  }

  const auto self = index.nearest(docs[17], 1);
  out.require(!self.empty() && self[0].doc == 17 && std::abs(self[0].score - 1.0) <= 1e-12,
              "self-query score not 1.0");
  return out;
}

// ---------------------------------------------------------------- criterion 8

Outcome check_checkpoint() {
  Outcome out;
  nn::StackConfig cfg;
  cfg.vocab = 19;
  cfg.embed_dim = 6;
  cfg.hidden_dim = 5;
  cfg.num_layers = 2;
  Rng init(81);
  auto model = nn::LanguageModel::create(cfg, false, init);
  const std::uint64_t vocab_hash = 0x1122334455667788ULL;
  nn::save_checkpoint(model, nn::Stage::imho, vocab_hash, "acc_ckpt.ulmc");

  nn::Stage stage;
  auto loaded = nn::load_lm_checkpoint("acc_ckpt.ulmc", &stage, vocab_hash);
  out.require(stage == nn::Stage::imho, "stage tag lost");
  out.require(same_params(model.parameters(), loaded.parameters()), "roundtrip not bit-exact");

  const std::string blob = slurp("acc_ckpt.ulmc");
  auto expect_kind = [&](std::string bytes, std::size_t at, char to,
                         nn::CheckpointErrorKind kind, const std::string& label) {
    bytes[at] = to;
    std::ofstream f("acc_ckpt_bad.ulmc", std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.close();
    try {
      nn::load_lm_checkpoint("acc_ckpt_bad.ulmc");
      out.require(false, label + ": no error raised");
    } catch (const nn::CheckpointError& e) {
      out.require(e.kind() == kind, label + ": wrong error kind");
    }
  };
  expect_kind(blob, 0, 'Z', nn::CheckpointErrorKind::bad_magic, "magic");
  expect_kind(blob, 4, 7, nn::CheckpointErrorKind::bad_version, "version");
  try {
    nn::load_lm_checkpoint("acc_ckpt.ulmc", nullptr, vocab_hash ^ 1);
    out.require(false, "vocab-hash: no error raised");
  } catch (const nn::CheckpointError& e) {
    out.require(e.kind() == nn::CheckpointErrorKind::vocab_mismatch, "vocab-hash: wrong kind");
  }

  // classifier checkpoints roundtrip as well
  Rng head(82);
  auto clf = ulmfit::build_classifier(model, head);
  nn::save_checkpoint(clf, vocab_hash, "acc_clf.ulmc");
  auto clf_loaded = nn::load_classifier_checkpoint("acc_clf.ulmc", vocab_hash);
  std::vector<const nn::Parameter*> a, b;
  for (auto* p : clf.parameters()) a.push_back(p);
  for (auto* p : clf_loaded.parameters()) b.push_back(p);
  out.require(same_params(a, b), "classifier roundtrip not bit-exact");

  std::remove("acc_ckpt.ulmc");
  std::remove("acc_ckpt_bad.ulmc");
  std::remove("acc_clf.ulmc");
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"miner golden file", 1.0, check_miner_golden},
      {"gradient checks", 120.0, check_gradients},
      {"perplexity", 120.0, check_perplexity},
      {"stage handoff", 120.0, check_stage_handoff},
      {"synthetic transfer", 600.0, check_synthetic_transfer},
      {"evaluation harness", 120.0, check_evaluation_harness},
      {"tfidf retrieval", 120.0, check_tfidf_retrieval},
      {"checkpoint roundtrip", 120.0, check_checkpoint},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > criterion.budget_seconds) {
      outcome.pass = false;
      outcome.note("over runtime budget of " + fmt(criterion.budget_seconds) + "s");
    }
    std::printf("[%s] %-22s (%.2fs)%s%s\n", outcome.pass ? "PASS" : "FAIL", criterion.name,
                elapsed, outcome.detail.empty() ? "" : "  ", outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  return failures;
}
