#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "claimlab/nn.hpp"
#include "claimlab/text.hpp"

namespace claimlab::ulmfit {

enum class Schedule { constant, slanted_triangular };
const char* to_string(Schedule s);

// Slanted-triangular: lr ramps linearly from lr_max/ratio to lr_max over the
// first floor(T*cut_frac) steps, then decays back. p is clamped to [0,1] so
// the rate stays within [lr_max/ratio, lr_max] even when the cut rounds
// against the total. T must be > 0.
double lr_schedule(std::size_t t, std::size_t total, Schedule schedule, double lr_max,
                   double cut_frac = 0.1, double ratio = 32.0);

struct StageConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 64;
  std::size_t bptt_len = 32;          // LM stages only
  double lr_max = 0.004;
  Schedule schedule = Schedule::slanted_triangular;
  double cut_frac = 0.1;
  double ratio = 32.0;
  std::uint64_t seed = 42;
  // (epoch, LSTM layers unfrozen from the top); -1 = everything. The head is
  // always trainable. Empty plan = everything trainable from epoch 1.
  std::vector<std::pair<int, int>> freeze_plan;

  void validate() const;  // throws std::invalid_argument

  // JSON file with keys exactly {epochs, batch_size, bptt_len, lr_max,
  // schedule, cut_frac, ratio, seed, freeze_plan}; missing keys keep their
  // defaults, unknown keys are rejected.
  static StageConfig from_json_file(const std::string& path);
  std::string to_json() const;
};

StageConfig default_lm_config();
StageConfig default_classifier_config();

// Datasets under 1000 sentences train with batch 32, larger ones with 64.
std::size_t resolve_classifier_batch_size(std::size_t dataset_size);

// Concat pooling over non-padded positions: [last hidden, mean-pool,
// max-pool] -> linear(head_hidden) -> ReLU -> linear(2).
struct Classifier {
  nn::LstmStack stack;
  bool final_state_only = false;  // pool with the last hidden state only
  nn::Parameter w1;  // head_hidden x pooled_dim
  nn::Parameter b1;  // 1 x head_hidden
  nn::Parameter w2;  // 2 x head_hidden
  nn::Parameter b2;  // 1 x 2

  std::size_t pooled_dim() const {
    return (final_state_only ? 1 : 3) * stack.cfg.hidden_dim;
  }
  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
};

// LSTM stack copied bit-for-bit from the language model, fresh head.
Classifier build_classifier(const nn::LanguageModel& lm, Rng& rng,
                            std::size_t head_hidden = 50, bool final_state_only = false);

// Tokens present in both vocabularies keep their embedding (and decoder)
// rows; new tokens receive the mean of all old rows; new decoder biases get
// the mean old bias.
nn::LanguageModel transfer_vocab(const nn::LanguageModel& model,
                                 const text::Vocabulary& old_vocab,
                                 const text::Vocabulary& new_vocab);

struct LmTrainLog {
  std::vector<double> train_ppl;  // per epoch, exp(mean batch loss)
  std::vector<double> valid_ppl;  // per epoch
};

// One LM stage: epochs over BPTT batches with the configured schedule and
// Adam. Deterministic for a fixed (seed, corpus, config).
LmTrainLog train_language_model(nn::LanguageModel& model,
                                const std::vector<int>& train_ids,
                                const std::vector<int>& valid_ids,
                                const StageConfig& cfg);

// Splits a token stream into train/validation tails (valid_frac at the end).
void split_corpus(const std::vector<int>& ids, double valid_frac,
                  std::vector<int>& train_ids, std::vector<int>& valid_ids);

// Tokenizes (lowercased) and numericalizes one line per sentence, appending
// <eos> after each.
std::vector<int> corpus_to_stream(const std::vector<std::string>& lines,
                                  const text::Vocabulary& vocab);

// Logits for one padded batch; caches omitted. Exposed for tests.
Matrix classifier_logits(const Classifier& clf, const text::ClassifierBatch& batch,
                         bool training = false, Rng* dropout_rng = nullptr);

double classifier_loss_and_grads(Classifier& clf, const text::ClassifierBatch& batch,
                                 Rng* dropout_rng = nullptr);

std::vector<int> classifier_predict(const Classifier& clf,
                                    const std::vector<std::vector<int>>& sequences,
                                    std::size_t batch_size = 64);

struct ClfTrainLog {
  std::vector<double> train_loss;  // per epoch mean
};

// Softmax cross-entropy over claim/non-claim with gradual unfreezing per the
// freeze plan. Single-class data trains with a warning left to the caller
// (metrics handle it).
ClfTrainLog train_classifier(Classifier& clf,
                             const std::vector<std::vector<int>>& sequences,
                             const std::vector<int>& labels, const StageConfig& cfg);

struct LabeledExample {
  int label = 0;  // 1 = claim
  std::string text;
};

// UTF-8 TSV `label<TAB>text`, label in {0,1}.
std::vector<LabeledExample> load_labeled_tsv(const std::string& path);

struct DatasetStats {
  std::size_t sentences = 0;
  std::size_t claims = 0;
  double claim_pct = 0.0;
};

DatasetStats dataset_stats(const std::vector<LabeledExample>& data);

}  // namespace claimlab::ulmfit
