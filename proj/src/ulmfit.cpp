#include "claimlab/ulmfit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "claimlab/io.hpp"
#include "claimlab/kernels.hpp"

namespace claimlab::ulmfit {

using nn::Parameter;

const char* to_string(Schedule s) {
  return s == Schedule::constant ? "constant" : "slanted_triangular";
}

double lr_schedule(std::size_t t, std::size_t total, Schedule schedule, double lr_max,
                   double cut_frac, double ratio) {
  if (total == 0) throw std::invalid_argument("schedule needs total steps > 0");
  if (schedule == Schedule::constant) return lr_max;
  const double cut = std::max(1.0, std::floor(static_cast<double>(total) * cut_frac));
  const double td = static_cast<double>(t);
  double p;
  if (td < cut) {
    p = td / cut;
  } else {
    p = 1.0 - (td - cut) / (cut * (1.0 / cut_frac - 1.0));
  }
  p = std::clamp(p, 0.0, 1.0);
  return lr_max * (1.0 + p * (ratio - 1.0)) / ratio;
}

void StageConfig::validate() const {
  if (lr_max <= 0.0) throw std::invalid_argument("lr_max must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (bptt_len == 0) throw std::invalid_argument("bptt_len must be >= 1");
  if (schedule == Schedule::slanted_triangular) {
    if (cut_frac <= 0.0 || cut_frac >= 1.0) {
      throw std::invalid_argument("cut_frac must lie in (0, 1)");
    }
    if (ratio <= 1.0) throw std::invalid_argument("ratio must be > 1");
  }
  for (const auto& [epoch, layers] : freeze_plan) {
    if (epoch < 1) throw std::invalid_argument("freeze_plan epochs start at 1");
    if (layers < -1) throw std::invalid_argument("freeze_plan layer count must be >= -1");
  }
}

StageConfig StageConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  nlohmann::json obj = nlohmann::json::parse(in, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw std::runtime_error("config is not a JSON object: " + path);
  }
  static const std::unordered_set<std::string> kKeys = {
      "epochs", "batch_size", "bptt_len", "lr_max", "schedule",
      "cut_frac", "ratio", "seed", "freeze_plan"};
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!kKeys.contains(key)) {
      throw std::runtime_error("unknown config key '" + key + "' in " + path);
    }
  }
  StageConfig cfg;
  if (obj.contains("epochs")) cfg.epochs = obj["epochs"].get<std::size_t>();
  if (obj.contains("batch_size")) cfg.batch_size = obj["batch_size"].get<std::size_t>();
  if (obj.contains("bptt_len")) cfg.bptt_len = obj["bptt_len"].get<std::size_t>();
  if (obj.contains("lr_max")) cfg.lr_max = obj["lr_max"].get<double>();
  if (obj.contains("schedule")) {
    const std::string s = obj["schedule"].get<std::string>();
    if (s == "constant") {
      cfg.schedule = Schedule::constant;
    } else if (s == "slanted_triangular") {
      cfg.schedule = Schedule::slanted_triangular;
    } else {
      throw std::runtime_error("unknown schedule '" + s + "' in " + path);
    }
  }
  if (obj.contains("cut_frac")) cfg.cut_frac = obj["cut_frac"].get<double>();
  if (obj.contains("ratio")) cfg.ratio = obj["ratio"].get<double>();
  if (obj.contains("seed")) cfg.seed = obj["seed"].get<std::uint64_t>();
  if (obj.contains("freeze_plan")) {
    cfg.freeze_plan.clear();
    for (const auto& entry : obj["freeze_plan"]) {
      if (!entry.is_array() || entry.size() != 2) {
        throw std::runtime_error("freeze_plan entries must be [epoch, layers] in " + path);
      }
      cfg.freeze_plan.emplace_back(entry[0].get<int>(), entry[1].get<int>());
    }
  }
  cfg.validate();
  return cfg;
}

std::string StageConfig::to_json() const {
  nlohmann::json plan = nlohmann::json::array();
  for (const auto& [epoch, layers] : freeze_plan) {
    plan.push_back({epoch, layers});
  }
  nlohmann::json obj = {
      {"epochs", epochs},     {"batch_size", batch_size}, {"bptt_len", bptt_len},
      {"lr_max", lr_max},     {"schedule", to_string(schedule)},
      {"cut_frac", cut_frac}, {"ratio", ratio},           {"seed", seed},
      {"freeze_plan", plan}};
  return obj.dump();
}

StageConfig default_lm_config() {
  StageConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 64;
  cfg.bptt_len = 32;
  cfg.lr_max = 0.004;
  cfg.schedule = Schedule::slanted_triangular;
  return cfg;
}

StageConfig default_classifier_config() {
  StageConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 64;
  cfg.lr_max = 0.0001;
  cfg.schedule = Schedule::constant;  // the classifier rate is fixed, not ramped
  cfg.freeze_plan = {{1, 0}, {2, 1}, {3, -1}};
  return cfg;
}

std::size_t resolve_classifier_batch_size(std::size_t dataset_size) {
  return dataset_size < 1000 ? 32 : 64;
}

std::vector<Parameter*> Classifier::parameters() {
  std::vector<Parameter*> params = stack.parameters();
  params.push_back(&w1);
  params.push_back(&b1);
  params.push_back(&w2);
  params.push_back(&b2);
  return params;
}

std::vector<const Parameter*> Classifier::parameters() const {
  std::vector<const Parameter*> params = stack.parameters();
  params.push_back(&w1);
  params.push_back(&b1);
  params.push_back(&w2);
  params.push_back(&b2);
  return params;
}

Classifier build_classifier(const nn::LanguageModel& lm, Rng& rng, std::size_t head_hidden,
                            bool final_state_only) {
  Classifier clf;
  clf.stack.cfg = lm.stack.cfg;
  clf.stack.embedding = lm.stack.embedding;  // bit-for-bit copies
  clf.stack.layers = lm.stack.layers;
  clf.final_state_only = final_state_only;

  const std::size_t pooled = clf.pooled_dim();
  clf.w1 = Parameter("head.w1", head_hidden, pooled);
  clf.b1 = Parameter("head.b1", 1, head_hidden);
  clf.w2 = Parameter("head.w2", 2, head_hidden);
  clf.b2 = Parameter("head.b2", 1, 2);
  const double bound = 1.0 / std::sqrt(static_cast<double>(pooled));
  for (double& v : clf.w1.value.data) v = rng.uniform(-bound, bound);
  // small positive hidden bias keeps most ReLU units active at the start;
  // zero output layer so the first updates decide the predictions instead of
  // init noise, which matters at small fine-tuning rates
  clf.b1.value.fill(0.2);
  clf.w2.value.zero();
  return clf;
}

nn::LanguageModel transfer_vocab(const nn::LanguageModel& model,
                                 const text::Vocabulary& old_vocab,
                                 const text::Vocabulary& new_vocab) {
  if (old_vocab.size() != model.vocab()) {
    throw std::invalid_argument("old vocabulary does not match the model");
  }
  nn::StackConfig cfg = model.stack.cfg;
  cfg.vocab = new_vocab.size();

  nn::LanguageModel out;
  out.stack.cfg = cfg;
  out.tie_weights = model.tie_weights;
  out.stack.layers = model.stack.layers;  // copied unchanged
  out.stack.embedding = Parameter("embedding", cfg.vocab, cfg.embed_dim);
  if (!model.tie_weights) {
    out.decoder_w = Parameter("decoder.w", cfg.vocab, cfg.hidden_dim);
  }
  out.decoder_b = Parameter("decoder.b", 1, cfg.vocab);

  const std::size_t old_v = old_vocab.size();
  const Matrix& old_emb = model.stack.embedding.value;
  std::vector<double> mean_emb(cfg.embed_dim, 0.0);
  for (std::size_t r = 0; r < old_v; ++r) {
    for (std::size_t j = 0; j < cfg.embed_dim; ++j) mean_emb[j] += old_emb(r, j);
  }
  for (double& v : mean_emb) v /= static_cast<double>(old_v);

  std::vector<double> mean_dec(cfg.hidden_dim, 0.0);
  const Matrix& old_dec = model.decoder_weight().value;
  if (!model.tie_weights) {
    for (std::size_t r = 0; r < old_v; ++r) {
      for (std::size_t j = 0; j < cfg.hidden_dim; ++j) mean_dec[j] += old_dec(r, j);
    }
    for (double& v : mean_dec) v /= static_cast<double>(old_v);
  }
  double mean_bias = 0.0;
  for (double v : model.decoder_b.value.data) mean_bias += v;
  mean_bias /= static_cast<double>(old_v);

  for (std::size_t id = 0; id < cfg.vocab; ++id) {
    const std::string& token = new_vocab.token(static_cast<int>(id));
    if (old_vocab.contains(token)) {
      const int old_id = old_vocab.id_or_unk(token);
      std::memcpy(out.stack.embedding.value.row(id), old_emb.row(static_cast<std::size_t>(old_id)),
                  cfg.embed_dim * sizeof(double));
      if (!model.tie_weights) {
        std::memcpy(out.decoder_w.value.row(id), old_dec.row(static_cast<std::size_t>(old_id)),
                    cfg.hidden_dim * sizeof(double));
      }
      out.decoder_b.value.data[id] = model.decoder_b.value.data[static_cast<std::size_t>(old_id)];
    } else {
      std::memcpy(out.stack.embedding.value.row(id), mean_emb.data(),
                  cfg.embed_dim * sizeof(double));
      if (!model.tie_weights) {
        std::memcpy(out.decoder_w.value.row(id), mean_dec.data(),
                    cfg.hidden_dim * sizeof(double));
      }
      out.decoder_b.value.data[id] = mean_bias;
    }
  }
  return out;
}

std::vector<int> corpus_to_stream(const std::vector<std::string>& lines,
                                  const text::Vocabulary& vocab) {
  std::vector<int> stream;
  for (const auto& line : lines) {
    const auto tokens = text::tokenize(line);
    if (tokens.empty()) continue;
    const auto ids = text::numericalize(tokens, vocab);
    stream.insert(stream.end(), ids.begin(), ids.end());
    stream.push_back(text::Vocabulary::kEos);
  }
  return stream;
}

void split_corpus(const std::vector<int>& ids, double valid_frac,
                  std::vector<int>& train_ids, std::vector<int>& valid_ids) {
  std::size_t n_valid = static_cast<std::size_t>(static_cast<double>(ids.size()) * valid_frac);
  if (n_valid < 2) n_valid = 0;  // too small to score
  const std::size_t n_train = ids.size() - n_valid;
  train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  valid_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
}

LmTrainLog train_language_model(nn::LanguageModel& model, const std::vector<int>& train_ids,
                                const std::vector<int>& valid_ids, const StageConfig& cfg) {
  cfg.validate();
  LmTrainLog log;
  if (cfg.epochs == 0) return log;

  const auto batches = text::make_lm_batches(train_ids, cfg.batch_size, cfg.bptt_len);
  const std::size_t total_steps = batches.size() * cfg.epochs;
  auto params = model.parameters();
  nn::Optimizer opt(nn::Optimizer::Kind::adam);
  Rng dropout_rng = Rng::derive(cfg.seed, 1);

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    nn::RecurrentState state = nn::RecurrentState::zeros(model.stack, cfg.batch_size);
    double epoch_loss = 0.0;
    for (const auto& batch : batches) {
      nn::LmBatchView view{batch.inputs.data(), batch.targets.data(), batch.batch,
                           batch.steps};
      epoch_loss += nn::lm_loss_and_grads(model, view, state, &dropout_rng);
      const double lr =
          lr_schedule(step, total_steps, cfg.schedule, cfg.lr_max, cfg.cut_frac, cfg.ratio);
      opt.step(params, lr);
      ++step;
    }
    log.train_ppl.push_back(std::exp(epoch_loss / static_cast<double>(batches.size())));
    log.valid_ppl.push_back(valid_ids.size() >= 2 ? nn::perplexity(model, valid_ids)
                                                  : std::numeric_limits<double>::quiet_NaN());
  }
  return log;
}

namespace {

struct HeadCache {
  nn::StackCache stack_cache;
  Matrix pooled;                          // batch x pooled_dim
  std::vector<std::vector<int>> argmax;   // [b][j] within the max-pool block
  Matrix z1_pre;                          // batch x head_hidden
  Matrix z1;
};

Matrix head_forward(const Classifier& clf, const text::ClassifierBatch& batch,
                    bool training, Rng* dropout_rng, HeadCache& cache) {
  const std::size_t hidden = clf.stack.cfg.hidden_dim;
  const std::size_t batch_n = batch.batch;
  nn::RecurrentState state = nn::RecurrentState::zeros(clf.stack, batch_n);
  cache.stack_cache.ids.assign(batch.ids.begin(), batch.ids.end());
  nn::stack_forward(clf.stack, batch.ids.data(), batch_n, batch.steps, state, training,
                    dropout_rng, cache.stack_cache);
  const auto& top = cache.stack_cache.h.back();

  const std::size_t pooled_dim = clf.pooled_dim();
  cache.pooled = Matrix(batch_n, pooled_dim);
  cache.argmax.assign(batch_n, {});
  for (std::size_t b = 0; b < batch_n; ++b) {
    const std::size_t len = static_cast<std::size_t>(batch.lengths[b]);
    double* out = cache.pooled.row(b);
    const double* last = top[len - 1].row(b);
    std::memcpy(out, last, hidden * sizeof(double));
    if (clf.final_state_only) continue;
    auto& arg = cache.argmax[b];
    arg.assign(hidden, 0);
    for (std::size_t j = 0; j < hidden; ++j) {
      double sum = 0.0;
      double best = top[0](b, j);
      int best_t = 0;
      for (std::size_t t = 0; t < len; ++t) {
        const double v = top[t](b, j);
        sum += v;
        if (v > best) {
          best = v;
          best_t = static_cast<int>(t);
        }
      }
      out[hidden + j] = sum / static_cast<double>(len);
      out[2 * hidden + j] = best;
      arg[j] = best_t;
    }
  }

  const std::size_t head_hidden = clf.w1.value.rows;
  cache.z1_pre = Matrix(batch_n, head_hidden);
  kernels::matmul_nt(cache.pooled.data.data(), clf.w1.value.data.data(),
                     cache.z1_pre.data.data(), batch_n, pooled_dim, head_hidden);
  kernels::add_bias_rows(cache.z1_pre.data.data(), clf.b1.value.data.data(), batch_n,
                         head_hidden);
  cache.z1 = cache.z1_pre;
  for (double& v : cache.z1.data) {
    if (v < 0.0) v = 0.0;
  }

  Matrix logits(batch_n, 2);
  kernels::matmul_nt(cache.z1.data.data(), clf.w2.value.data.data(), logits.data.data(),
                     batch_n, head_hidden, 2);
  kernels::add_bias_rows(logits.data.data(), clf.b2.value.data.data(), batch_n, 2);
  return logits;
}

void head_backward(Classifier& clf, const text::ClassifierBatch& batch,
                   const Matrix& d_logits, HeadCache& cache) {
  const std::size_t hidden = clf.stack.cfg.hidden_dim;
  const std::size_t batch_n = batch.batch;
  const std::size_t head_hidden = clf.w1.value.rows;
  const std::size_t pooled_dim = clf.pooled_dim();

  kernels::matmul_tn_acc(d_logits.data.data(), cache.z1.data.data(),
                         clf.w2.grad.data.data(), batch_n, 2, head_hidden);
  kernels::col_sums_acc(d_logits.data.data(), clf.b2.grad.data.data(), batch_n, 2);

  Matrix d_z1(batch_n, head_hidden);
  kernels::matmul_nn(d_logits.data.data(), clf.w2.value.data.data(), d_z1.data.data(),
                     batch_n, 2, head_hidden);
  for (std::size_t i = 0; i < d_z1.data.size(); ++i) {
    if (cache.z1_pre.data[i] <= 0.0) d_z1.data[i] = 0.0;
  }

  kernels::matmul_tn_acc(d_z1.data.data(), cache.pooled.data.data(),
                         clf.w1.grad.data.data(), batch_n, head_hidden, pooled_dim);
  kernels::col_sums_acc(d_z1.data.data(), clf.b1.grad.data.data(), batch_n, head_hidden);

  Matrix d_pooled(batch_n, pooled_dim);
  kernels::matmul_nn(d_z1.data.data(), clf.w1.value.data.data(), d_pooled.data.data(),
                     batch_n, head_hidden, pooled_dim);

  std::vector<Matrix> d_h_top(batch.steps, Matrix(batch_n, hidden));
  for (std::size_t b = 0; b < batch_n; ++b) {
    const std::size_t len = static_cast<std::size_t>(batch.lengths[b]);
    const double* dp = d_pooled.row(b);
    double* d_last = d_h_top[len - 1].row(b);
    for (std::size_t j = 0; j < hidden; ++j) d_last[j] += dp[j];
    if (clf.final_state_only) continue;
    const double inv_len = 1.0 / static_cast<double>(len);
    for (std::size_t t = 0; t < len; ++t) {
      double* row = d_h_top[t].row(b);
      for (std::size_t j = 0; j < hidden; ++j) row[j] += dp[hidden + j] * inv_len;
    }
    for (std::size_t j = 0; j < hidden; ++j) {
      d_h_top[static_cast<std::size_t>(cache.argmax[b][j])](b, j) += dp[2 * hidden + j];
    }
  }
  nn::stack_backward(clf.stack, cache.stack_cache, d_h_top);
}

}  // namespace

Matrix classifier_logits(const Classifier& clf, const text::ClassifierBatch& batch,
                         bool training, Rng* dropout_rng) {
  HeadCache cache;
  return head_forward(clf, batch, training, dropout_rng, cache);
}

double classifier_loss_and_grads(Classifier& clf, const text::ClassifierBatch& batch,
                                 Rng* dropout_rng) {
  HeadCache cache;
  Matrix logits = head_forward(clf, batch, dropout_rng != nullptr, dropout_rng, cache);
  Matrix d_logits;
  const double loss = nn::softmax_cross_entropy(logits, batch.labels, &d_logits);
  if (!std::isfinite(loss)) throw nn::DivergenceError("non-finite classifier loss");
  head_backward(clf, batch, d_logits, cache);
  return loss;
}

std::vector<int> classifier_predict(const Classifier& clf,
                                    const std::vector<std::vector<int>>& sequences,
                                    std::size_t batch_size) {
  std::vector<int> predictions(sequences.size(), 0);
  if (sequences.empty()) return predictions;
  const std::vector<int> dummy_labels(sequences.size(), 0);
  for (const auto& batch : text::make_classifier_batches(sequences, dummy_labels, batch_size)) {
    const Matrix logits = classifier_logits(clf, batch);
    for (std::size_t r = 0; r < batch.batch; ++r) {
      const int pred = logits(r, 1) > logits(r, 0) ? 1 : 0;
      predictions[batch.source_index[r]] = pred;
    }
  }
  return predictions;
}

namespace {

// trainable mask for "k LSTM layers unfrozen from the top"; the head is
// always trainable, -1 unfreezes everything including the embedding.
std::vector<bool> trainable_mask(const Classifier& clf, int unfrozen_top_layers) {
  const std::size_t num_layers = clf.stack.layers.size();
  const std::size_t total = 1 + 3 * num_layers + 4;
  std::vector<bool> mask(total, false);
  mask[total - 1] = mask[total - 2] = mask[total - 3] = mask[total - 4] = true;
  if (unfrozen_top_layers < 0) {
    std::fill(mask.begin(), mask.end(), true);
    return mask;
  }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(unfrozen_top_layers),
                                              num_layers);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t layer = num_layers - 1 - i;
    mask[1 + 3 * layer + 0] = true;
    mask[1 + 3 * layer + 1] = true;
    mask[1 + 3 * layer + 2] = true;
  }
  return mask;
}

// Last plan entry with epoch <= current wins; entries are expected sorted.
int plan_layers_for_epoch(const std::vector<std::pair<int, int>>& plan, int epoch) {
  int layers = -1;  // no plan: everything trainable
  bool found = false;
  for (const auto& [e, k] : plan) {
    if (e <= epoch) {
      layers = k;
      found = true;
    }
  }
  if (!found && !plan.empty()) layers = plan.front().second;
  return layers;
}

}  // namespace

ClfTrainLog train_classifier(Classifier& clf, const std::vector<std::vector<int>>& sequences,
                             const std::vector<int>& labels, const StageConfig& cfg) {
  cfg.validate();
  if (sequences.empty()) throw std::invalid_argument("empty training data");
  for (int label : labels) {
    if (label != 0 && label != 1) throw std::invalid_argument("labels must be 0 or 1");
  }
  ClfTrainLog log;
  if (cfg.epochs == 0) return log;

  auto params = clf.parameters();
  nn::Optimizer opt(nn::Optimizer::Kind::adam);
  Rng shuffle_rng = Rng::derive(cfg.seed, 0);
  Rng dropout_rng = Rng::derive(cfg.seed, 1);

  const std::size_t per_epoch = (sequences.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = per_epoch * cfg.epochs;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const int unfrozen = plan_layers_for_epoch(cfg.freeze_plan, static_cast<int>(epoch));
    const std::vector<bool> mask = trainable_mask(clf, unfrozen);

    std::vector<std::size_t> order(sequences.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(order);
    std::vector<std::vector<int>> epoch_seqs;
    std::vector<int> epoch_labels;
    epoch_seqs.reserve(order.size());
    for (std::size_t idx : order) {
      epoch_seqs.push_back(sequences[idx]);
      epoch_labels.push_back(labels[idx]);
    }

    double epoch_loss = 0.0;
    std::size_t batch_count = 0;
    for (const auto& batch : text::make_classifier_batches(epoch_seqs, epoch_labels,
                                                           cfg.batch_size)) {
      epoch_loss += classifier_loss_and_grads(
          clf, batch, clf.stack.cfg.dropout > 0.0 ? &dropout_rng : nullptr);
      const double lr =
          lr_schedule(step, total_steps, cfg.schedule, cfg.lr_max, cfg.cut_frac, cfg.ratio);
      opt.step(params, mask, lr);
      ++step;
      ++batch_count;
    }
    log.train_loss.push_back(epoch_loss / static_cast<double>(batch_count));
  }
  return log;
}

DatasetStats dataset_stats(const std::vector<LabeledExample>& data) {
  DatasetStats stats;
  stats.sentences = data.size();
  for (const auto& ex : data) stats.claims += ex.label == 1 ? 1 : 0;
  if (!data.empty()) {
    stats.claim_pct = 100.0 * static_cast<double>(stats.claims) /
                      static_cast<double>(stats.sentences);
  }
  return stats;
}

std::vector<LabeledExample> load_labeled_tsv(const std::string& path) {
  std::vector<LabeledExample> examples;
  io::LineReader reader(path);
  std::string line;
  std::size_t line_no = 0;
  while (reader.next(line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected label<TAB>text");
    }
    const std::string label = line.substr(0, tab);
    if (label != "0" && label != "1") {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": label must be 0 or 1");
    }
    examples.push_back({label == "1" ? 1 : 0, line.substr(tab + 1)});
  }
  return examples;
}

}  // namespace claimlab::ulmfit
