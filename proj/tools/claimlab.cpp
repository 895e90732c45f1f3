// claimlab command-line driver: mine, vocab, pretrain, finetune-lm,
// train-clf, evaluate, significance, neighbors.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "claimlab/checkpoint.hpp"
#include "claimlab/evalharness.hpp"
#include "claimlab/io.hpp"
#include "claimlab/kernels.hpp"
#include "claimlab/manifest.hpp"
#include "claimlab/miner.hpp"
#include "claimlab/nn.hpp"
#include "claimlab/text.hpp"
#include "claimlab/tfidf.hpp"
#include "claimlab/ulmfit.hpp"

namespace {

using namespace claimlab;
using json = nlohmann::json;

struct GlobalOpts {
  std::uint64_t seed = 42;
  int jobs = 0;
  std::string format = "table";
};

std::vector<std::string> load_corpus_lines(const std::string& path) {
  std::vector<std::string> lines;
  io::LineReader reader(path);
  std::string line;
  while (reader.next(line)) {
    std::string sentence = text::last_tab_field(line);
    if (!sentence.empty()) lines.push_back(std::move(sentence));
  }
  return lines;
}

std::vector<int> to_sequence(const std::string& sentence, const text::Vocabulary& vocab) {
  auto ids = text::numericalize(text::tokenize(sentence), vocab);
  if (ids.empty()) ids.push_back(text::Vocabulary::kUnk);
  return ids;
}

json stats_json(const miner::MiningStats& stats) {
  return {{"lines_read", stats.lines_read},
          {"parse_failures", stats.parse_failures},
          {"comments_matched", stats.comments_matched},
          {"sentences_emitted", stats.sentences_emitted},
          {"sentences_discarded_short", stats.sentences_discarded_short}};
}

json scores_json(const eval::ClassScores& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

json report_json(const eval::AggregateReport& agg, int runs, int folds) {
  return {{"per_class",
           {{"claim", scores_json(agg.mean.claim)},
            {"non_claim", scores_json(agg.mean.non_claim)}}},
          {"macro", scores_json(agg.mean.macro)},
          {"sd",
           {{"claim", scores_json(agg.sd.claim)},
            {"non_claim", scores_json(agg.sd.non_claim)},
            {"macro", scores_json(agg.sd.macro)}}},
          {"runs", runs},
          {"folds", folds}};
}

void print_report_table(const eval::AggregateReport& agg) {
  auto line = [](const char* name, double claim, double claim_sd, double macro,
                 double macro_sd) {
    std::printf("%-2s  claim %6.4f (sd %6.4f)   macro %6.4f (sd %6.4f)\n", name, claim,
                claim_sd, macro, macro_sd);
  };
  line("P", agg.mean.claim.precision, agg.sd.claim.precision, agg.mean.macro.precision,
       agg.sd.macro.precision);
  line("R", agg.mean.claim.recall, agg.sd.claim.recall, agg.mean.macro.recall,
       agg.sd.macro.recall);
  line("F", agg.mean.claim.f1, agg.sd.claim.f1, agg.mean.macro.f1, agg.sd.macro.f1);
}

// config file first, then explicit CLI flags on top
struct StageFlagBindings {
  CLI::Option* epochs = nullptr;
  CLI::Option* batch = nullptr;
  CLI::Option* bptt = nullptr;
  CLI::Option* lr = nullptr;
  CLI::Option* schedule = nullptr;
  CLI::Option* cut_frac = nullptr;
  CLI::Option* ratio = nullptr;
  std::size_t epochs_v = 0, batch_v = 0, bptt_v = 0;
  double lr_v = 0, cut_v = 0, ratio_v = 0;
  std::string schedule_v;

  void add_to(CLI::App* cmd) {
    epochs = cmd->add_option("--epochs", epochs_v, "training epochs");
    batch = cmd->add_option("--batch-size", batch_v, "batch size");
    bptt = cmd->add_option("--bptt", bptt_v, "BPTT window length");
    lr = cmd->add_option("--lr", lr_v, "peak learning rate");
    schedule = cmd->add_option("--schedule", schedule_v, "constant|slanted_triangular");
    cut_frac = cmd->add_option("--cut-frac", cut_v, "warm-up fraction");
    ratio = cmd->add_option("--ratio", ratio_v, "peak/floor learning-rate ratio");
  }

  void apply(ulmfit::StageConfig& cfg) const {
    if (epochs->count()) cfg.epochs = epochs_v;
    if (batch->count()) cfg.batch_size = batch_v;
    if (bptt->count()) cfg.bptt_len = bptt_v;
    if (lr->count()) cfg.lr_max = lr_v;
    if (schedule->count()) {
      if (schedule_v == "constant") {
        cfg.schedule = ulmfit::Schedule::constant;
      } else if (schedule_v == "slanted_triangular") {
        cfg.schedule = ulmfit::Schedule::slanted_triangular;
      } else {
        throw std::runtime_error("--schedule must be constant or slanted_triangular");
      }
    }
    if (cut_frac->count()) cfg.cut_frac = cut_v;
    if (ratio->count()) cfg.ratio = ratio_v;
  }
};

ulmfit::StageConfig resolve_stage_config(const std::string& config_path,
                                         const ulmfit::StageConfig& defaults,
                                         const StageFlagBindings& flags,
                                         const GlobalOpts& global, bool seed_passed) {
  ulmfit::StageConfig cfg = defaults;
  bool config_has_seed = false;
  if (!config_path.empty()) {
    cfg = ulmfit::StageConfig::from_json_file(config_path);
    std::ifstream in(config_path);
    json raw = json::parse(in, nullptr, false);
    config_has_seed = raw.is_object() && raw.contains("seed");
    if (cfg.freeze_plan.empty()) cfg.freeze_plan = defaults.freeze_plan;
  }
  flags.apply(cfg);
  if (seed_passed || !config_has_seed) cfg.seed = global.seed;
  cfg.validate();
  return cfg;
}

void log_lm_training(const ulmfit::LmTrainLog& log) {
  for (std::size_t e = 0; e < log.train_ppl.size(); ++e) {
    std::printf("epoch %zu  train_ppl %.4f  valid_ppl ", e + 1, log.train_ppl[e]);
    if (std::isnan(log.valid_ppl[e])) {
      std::printf("-\n");
    } else {
      std::printf("%.4f\n", log.valid_ppl[e]);
    }
  }
}

struct PredRow {
  std::size_t index = 0;
  int gold = 0;
  int pred = 0;
};

std::vector<PredRow> load_preds(const std::string& path) {
  std::vector<PredRow> rows;
  io::LineReader reader(path);
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    PredRow row;
    if (!(ss >> row.index >> row.gold >> row.pred)) {
      throw std::runtime_error("bad predictions line in " + path + ": " + line);
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw std::runtime_error("no predictions in " + path);
  return rows;
}

struct ArchFlags {
  std::size_t embed = 100;
  std::size_t hidden = 256;
  std::size_t layers = 3;
  double dropout = 0.1;
  bool tie = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--embed-dim", embed, "embedding width");
    cmd->add_option("--hidden-dim", hidden, "LSTM hidden width");
    cmd->add_option("--layers", layers, "stacked LSTM depth");
    cmd->add_option("--dropout", dropout, "inter-layer dropout rate");
    cmd->add_flag("--tie-weights", tie, "share decoder and embedding weights");
  }

  nn::StackConfig stack_config(std::size_t vocab) const {
    nn::StackConfig cfg;
    cfg.vocab = vocab;
    cfg.embed_dim = embed;
    cfg.hidden_dim = hidden;
    cfg.num_layers = layers;
    cfg.dropout = dropout;
    return cfg;
  }
};

int cmd_mine(const GlobalOpts& global, const std::vector<std::string>& inputs,
             const std::string& out, bool plain, bool dedupe, int min_tokens) {
  miner::MineOptions options;
  options.plain = plain;
  options.dedupe = dedupe;
  options.min_tokens = min_tokens;
  options.jobs = global.jobs;
  const auto stats = miner::mine_corpus(inputs, out, options);

  if (global.format == "json") {
    std::cout << stats_json(stats).dump(2) << "\n";
  } else {
    std::printf("lines_read                %llu\n", (unsigned long long)stats.lines_read);
    std::printf("parse_failures            %llu\n", (unsigned long long)stats.parse_failures);
    std::printf("comments_matched          %llu\n", (unsigned long long)stats.comments_matched);
    std::printf("sentences_emitted         %llu\n", (unsigned long long)stats.sentences_emitted);
    std::printf("sentences_discarded_short %llu\n",
                (unsigned long long)stats.sentences_discarded_short);
  }

  RunManifest manifest;
  manifest.subcommand = "mine";
  manifest.seed = global.seed;
  manifest.jobs = global.jobs;
  for (const auto& path : inputs) manifest.add_input(path);
  manifest.outputs = {out};
  manifest.config_json =
      json{{"plain", plain}, {"dedupe", dedupe}, {"min_tokens", min_tokens}}.dump();
  manifest.write_for(out);
  return 0;
}

int cmd_vocab(const GlobalOpts& global, const std::string& corpus, const std::string& out,
              std::size_t max_size, std::int64_t min_freq) {
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& line : load_corpus_lines(corpus)) {
    text::count_tokens(text::tokenize(line), counts);
  }
  const auto vocab = text::Vocabulary::build(counts, max_size, min_freq);
  vocab.save(out);
  std::printf("vocabulary size %zu (distinct tokens seen %zu), hash %s\n", vocab.size(),
              counts.size(), io::hex64(vocab.content_hash()).c_str());

  RunManifest manifest;
  manifest.subcommand = "vocab";
  manifest.seed = global.seed;
  manifest.jobs = global.jobs;
  manifest.add_input(corpus);
  manifest.outputs = {out};
  manifest.config_json = json{{"max_size", max_size}, {"min_freq", min_freq}}.dump();
  manifest.write_for(out);
  return 0;
}

int run_lm_stage(const std::string& subcommand, const GlobalOpts& global,
                 const std::string& corpus_path, const text::Vocabulary& vocab,
                 nn::LanguageModel& model, const ulmfit::StageConfig& cfg, double valid_frac,
                 nn::Stage out_stage, const std::string& out, RunManifest manifest) {
  const auto lines = load_corpus_lines(corpus_path);
  const auto stream = ulmfit::corpus_to_stream(lines, vocab);
  std::vector<int> train_ids, valid_ids;
  ulmfit::split_corpus(stream, valid_frac, train_ids, valid_ids);
  std::printf("%s: %zu sentences, %zu train tokens, %zu valid tokens\n", subcommand.c_str(),
              lines.size(), train_ids.size(), valid_ids.size());

  const auto log = ulmfit::train_language_model(model, train_ids, valid_ids, cfg);
  log_lm_training(log);
  nn::save_checkpoint(model, out_stage, vocab.content_hash(), out);
  std::printf("checkpoint written to %s (stage %s)\n", out.c_str(), nn::to_string(out_stage));

  manifest.outputs = {out};
  manifest.config_json = cfg.to_json();
  manifest.write_for(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"claim-detection laboratory: opinion mining, LSTM language-model "
               "transfer and claim classifiers"};
  app.require_subcommand(1);

  GlobalOpts global;
  auto* seed_opt = app.add_option("--seed", global.seed, "global random seed");
  app.add_option("--jobs", global.jobs, "worker threads (0 = all cores)");
  app.add_option("--format", global.format, "report style: table|json")
      ->check(CLI::IsMember({"table", "json"}));

  // mine
  auto* mine = app.add_subcommand("mine", "mine IMO/IMHO opinion sentences from comment dumps");
  std::vector<std::string> mine_in;
  std::string mine_out;
  bool mine_plain = false, mine_dedupe = false;
  int mine_min_tokens = 3;
  mine->add_option("--in", mine_in, "input NDJSON dumps (.gz accepted)")
      ->required()
      ->expected(-1);
  mine->add_option("--out", mine_out, "output corpus path")->required();
  mine->add_flag("--plain", mine_plain, "emit sentence text only");
  mine->add_flag("--dedupe", mine_dedupe, "collapse duplicate sentences");
  mine->add_option("--min-tokens", mine_min_tokens, "minimum word tokens per sentence");

  // vocab
  auto* vocab_cmd = app.add_subcommand("vocab", "build a vocabulary from a corpus");
  std::string vocab_corpus, vocab_out;
  std::size_t vocab_max = 30000;
  std::int64_t vocab_min_freq = 2;
  vocab_cmd->add_option("--corpus", vocab_corpus, "corpus file")->required();
  vocab_cmd->add_option("--out", vocab_out, "vocabulary TSV path")->required();
  vocab_cmd->add_option("--max-size", vocab_max, "maximum vocabulary size");
  vocab_cmd->add_option("--min-freq", vocab_min_freq, "minimum token frequency");

  // pretrain
  auto* pretrain = app.add_subcommand("pretrain", "general-domain LM pretraining");
  std::string pre_corpus, pre_vocab, pre_out, pre_config;
  double pre_valid_frac = 0.1;
  ArchFlags pre_arch;
  StageFlagBindings pre_flags;
  pretrain->add_option("--corpus", pre_corpus, "general corpus")->required();
  pretrain->add_option("--vocab", pre_vocab, "vocabulary TSV")->required();
  pretrain->add_option("--out", pre_out, "checkpoint path")->required();
  pretrain->add_option("--config", pre_config, "stage config JSON");
  pretrain->add_option("--valid-frac", pre_valid_frac, "validation tail fraction");
  pre_arch.add_to(pretrain);
  pre_flags.add_to(pretrain);

  // finetune-lm
  auto* finetune =
      app.add_subcommand("finetune-lm", "fine-tune a general LM on an opinion corpus");
  std::string ft_ckpt, ft_vocab, ft_new_vocab, ft_corpus, ft_out, ft_config;
  double ft_valid_frac = 0.1;
  StageFlagBindings ft_flags;
  finetune->add_option("--ckpt", ft_ckpt, "general-stage checkpoint")->required();
  finetune->add_option("--vocab", ft_vocab, "vocabulary the checkpoint was trained with")
      ->required();
  finetune->add_option("--corpus", ft_corpus, "opinion corpus")->required();
  finetune->add_option("--out", ft_out, "checkpoint path")->required();
  finetune->add_option("--new-vocab", ft_new_vocab,
                       "optional target vocabulary (transfers embedding rows)");
  finetune->add_option("--config", ft_config, "stage config JSON");
  finetune->add_option("--valid-frac", ft_valid_frac, "validation tail fraction");
  ft_flags.add_to(finetune);

  // train-clf
  auto* trainclf = app.add_subcommand("train-clf", "train a claim classifier");
  std::string clf_data, clf_vocab, clf_out, clf_ckpt, clf_config;
  std::size_t clf_head_hidden = 50;
  bool clf_final_state = false;
  ArchFlags clf_arch;
  StageFlagBindings clf_flags;
  trainclf->add_option("--data", clf_data, "labeled TSV (label<TAB>text)")->required();
  trainclf->add_option("--vocab", clf_vocab, "vocabulary TSV")->required();
  trainclf->add_option("--out", clf_out, "classifier checkpoint path")->required();
  trainclf->add_option("--ckpt", clf_ckpt, "LM checkpoint to initialize from");
  trainclf->add_option("--config", clf_config, "stage config JSON");
  trainclf->add_option("--head-hidden", clf_head_hidden, "classifier hidden width");
  trainclf->add_flag("--final-state-only", clf_final_state,
                     "pool with the last hidden state instead of concat pooling");
  clf_arch.add_to(trainclf);
  clf_flags.add_to(trainclf);

  // evaluate
  auto* evaluate =
      app.add_subcommand("evaluate", "fixed-split cross-validation of a classifier");
  std::string ev_data, ev_vocab, ev_folds, ev_lm, ev_out, ev_preds, ev_config;
  int ev_runs = 10, ev_k = 10;
  std::size_t ev_head_hidden = 50;
  bool ev_final_state = false;
  ArchFlags ev_arch;
  StageFlagBindings ev_flags;
  evaluate->add_option("--data", ev_data, "labeled TSV")->required();
  evaluate->add_option("--vocab", ev_vocab, "vocabulary TSV")->required();
  evaluate->add_option("--folds", ev_folds, "folds file (created if missing)")->required();
  evaluate->add_option("--lm", ev_lm, "LM checkpoint to initialize classifiers from");
  evaluate->add_option("--runs", ev_runs, "number of repeated runs");
  evaluate->add_option("--k", ev_k, "fold count when creating folds");
  evaluate->add_option("--out", ev_out, "report JSON path");
  evaluate->add_option("--preds", ev_preds, "pooled run-0 predictions TSV path");
  evaluate->add_option("--config", ev_config, "stage config JSON");
  evaluate->add_option("--head-hidden", ev_head_hidden, "classifier hidden width");
  evaluate->add_flag("--final-state-only", ev_final_state, "last-hidden-state pooling");
  ev_arch.add_to(evaluate);
  ev_flags.add_to(evaluate);

  // significance
  auto* signif = app.add_subcommand("significance", "chi-squared test between two systems");
  std::string sig_a, sig_b;
  signif->add_option("--a", sig_a, "predictions TSV of system A")->required();
  signif->add_option("--b", sig_b, "predictions TSV of system B")->required();

  // neighbors
  auto* neighbors = app.add_subcommand("neighbors", "TF-IDF nearest neighbours in a corpus");
  std::string nb_index, nb_query;
  int nb_k = 5;
  int nb_min_df = 1;
  neighbors->add_option("--index", nb_index, "corpus to index")->required();
  neighbors->add_option("--query", nb_query, "query text, or a file of queries")->required();
  neighbors->add_option("-k,--k", nb_k, "neighbours per query");
  neighbors->add_option("--min-df", nb_min_df, "minimum document frequency");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  kernels::set_threads(global.jobs);

  try {
    if (*mine) {
      return cmd_mine(global, mine_in, mine_out, mine_plain, mine_dedupe, mine_min_tokens);
    }

    if (*vocab_cmd) {
      return cmd_vocab(global, vocab_corpus, vocab_out, vocab_max, vocab_min_freq);
    }

    if (*pretrain) {
      const auto vocab = text::Vocabulary::load(pre_vocab);
      const auto cfg = resolve_stage_config(pre_config, ulmfit::default_lm_config(), pre_flags,
                                            global, seed_opt->count() > 0);
      Rng init(cfg.seed);
      auto model =
          nn::LanguageModel::create(pre_arch.stack_config(vocab.size()), pre_arch.tie, init);
      RunManifest manifest;
      manifest.subcommand = "pretrain";
      manifest.seed = cfg.seed;
      manifest.jobs = global.jobs;
      manifest.add_input(pre_corpus);
      manifest.add_input(pre_vocab);
      return run_lm_stage("pretrain", global, pre_corpus, vocab, model, cfg, pre_valid_frac,
                          nn::Stage::general, pre_out, std::move(manifest));
    }

    if (*finetune) {
      const auto old_vocab = text::Vocabulary::load(ft_vocab);
      nn::Stage stage;
      auto model = nn::load_lm_checkpoint(ft_ckpt, &stage, old_vocab.content_hash());
      if (stage != nn::Stage::general) {
        throw nn::CheckpointError(nn::CheckpointErrorKind::stage_mismatch,
                                  "finetune-lm expects a general-stage checkpoint, got " +
                                      std::string(nn::to_string(stage)));
      }
      const auto cfg = resolve_stage_config(ft_config, ulmfit::default_lm_config(), ft_flags,
                                            global, seed_opt->count() > 0);
      text::Vocabulary vocab = old_vocab;
      if (!ft_new_vocab.empty()) {
        vocab = text::Vocabulary::load(ft_new_vocab);
        model = ulmfit::transfer_vocab(model, old_vocab, vocab);
      }
      RunManifest manifest;
      manifest.subcommand = "finetune-lm";
      manifest.seed = cfg.seed;
      manifest.jobs = global.jobs;
      manifest.add_input(ft_ckpt);
      manifest.add_input(ft_corpus);
      manifest.add_input(ft_vocab);
      if (!ft_new_vocab.empty()) manifest.add_input(ft_new_vocab);
      return run_lm_stage("finetune-lm", global, ft_corpus, vocab, model, cfg, ft_valid_frac,
                          nn::Stage::imho, ft_out, std::move(manifest));
    }

    if (*trainclf) {
      const auto vocab = text::Vocabulary::load(clf_vocab);
      const auto data = ulmfit::load_labeled_tsv(clf_data);
      if (data.empty()) throw std::runtime_error("no labeled examples in " + clf_data);

      auto defaults = ulmfit::default_classifier_config();
      defaults.batch_size = ulmfit::resolve_classifier_batch_size(data.size());
      auto cfg =
          resolve_stage_config(clf_config, defaults, clf_flags, global, seed_opt->count() > 0);

      const auto stats = ulmfit::dataset_stats(data);
      std::printf("dataset: %zu sentences, %zu claims (%.2f%%)\n", stats.sentences,
                  stats.claims, stats.claim_pct);
      if (stats.claims == 0 || stats.claims == stats.sentences) {
        std::cerr << "warning: training data contains a single class\n";
      }

      nn::LanguageModel lm = [&] {
        if (!clf_ckpt.empty()) {
          // rejects classifier checkpoints with a stage error
          return nn::load_lm_checkpoint(clf_ckpt, nullptr, vocab.content_hash());
        }
        Rng init(cfg.seed);
        return nn::LanguageModel::create(clf_arch.stack_config(vocab.size()), clf_arch.tie,
                                         init);
      }();

      Rng head_rng = Rng::derive(cfg.seed, 2);
      auto clf = ulmfit::build_classifier(lm, head_rng, clf_head_hidden, clf_final_state);

      std::vector<std::vector<int>> seqs;
      std::vector<int> labels;
      for (const auto& ex : data) {
        seqs.push_back(to_sequence(ex.text, vocab));
        labels.push_back(ex.label);
      }
      const auto log = ulmfit::train_classifier(clf, seqs, labels, cfg);
      for (std::size_t e = 0; e < log.train_loss.size(); ++e) {
        std::printf("epoch %zu  train_loss %.6f\n", e + 1, log.train_loss[e]);
      }
      nn::save_checkpoint(clf, vocab.content_hash(), clf_out);
      std::printf("classifier checkpoint written to %s\n", clf_out.c_str());

      RunManifest manifest;
      manifest.subcommand = "train-clf";
      manifest.seed = cfg.seed;
      manifest.jobs = global.jobs;
      manifest.add_input(clf_data);
      manifest.add_input(clf_vocab);
      if (!clf_ckpt.empty()) manifest.add_input(clf_ckpt);
      manifest.outputs = {clf_out};
      manifest.config_json = cfg.to_json();
      manifest.write_for(clf_out);
      return 0;
    }

    if (*evaluate) {
      const auto vocab = text::Vocabulary::load(ev_vocab);
      const auto data = ulmfit::load_labeled_tsv(ev_data);
      if (data.empty()) throw std::runtime_error("no labeled examples in " + ev_data);

      const auto stats = ulmfit::dataset_stats(data);
      std::printf("dataset: %zu sentences, %zu claims (%.2f%%)\n", stats.sentences,
                  stats.claims, stats.claim_pct);

      std::vector<int> labels;
      std::vector<std::vector<int>> seqs;
      for (const auto& ex : data) {
        labels.push_back(ex.label);
        seqs.push_back(to_sequence(ex.text, vocab));
      }

      eval::FoldAssignment folds;
      if (std::filesystem::exists(ev_folds)) {
        folds = eval::FoldAssignment::load(ev_folds);
        if (folds.fold_of.size() != labels.size()) {
          throw std::runtime_error("folds file does not match the dataset size");
        }
      } else {
        folds = eval::make_folds(labels, ev_k, global.seed);
        folds.save(ev_folds);
        std::printf("folds written to %s\n", ev_folds.c_str());
      }

      auto defaults = ulmfit::default_classifier_config();
      defaults.batch_size = ulmfit::resolve_classifier_batch_size(data.size());
      auto cfg =
          resolve_stage_config(ev_config, defaults, ev_flags, global, seed_opt->count() > 0);

      std::optional<nn::LanguageModel> lm;
      if (!ev_lm.empty()) {
        lm = nn::load_lm_checkpoint(ev_lm, nullptr, vocab.content_hash());
      }

      eval::SystemTrainFn system = [&](const std::vector<std::size_t>& train_idx,
                                       std::uint64_t seed) {
        nn::LanguageModel base = lm ? *lm : [&] {
          Rng init(seed);
          return nn::LanguageModel::create(ev_arch.stack_config(vocab.size()), ev_arch.tie,
                                           init);
        }();
        Rng head_rng = Rng::derive(seed, 2);
        auto clf = std::make_shared<ulmfit::Classifier>(
            ulmfit::build_classifier(base, head_rng, ev_head_hidden, ev_final_state));
        std::vector<std::vector<int>> train_seqs;
        std::vector<int> train_labels;
        for (std::size_t i : train_idx) {
          train_seqs.push_back(seqs[i]);
          train_labels.push_back(labels[i]);
        }
        ulmfit::StageConfig fold_cfg = cfg;
        fold_cfg.seed = seed;
        ulmfit::train_classifier(*clf, train_seqs, train_labels, fold_cfg);
        return [clf, &seqs](const std::vector<std::size_t>& test_idx) {
          std::vector<std::vector<int>> test_seqs;
          for (std::size_t i : test_idx) test_seqs.push_back(seqs[i]);
          return ulmfit::classifier_predict(*clf, test_seqs);
        };
      };

      const auto result = eval::cross_validate(system, labels, folds, ev_runs, global.seed);
      const json report = report_json(result.aggregate, ev_runs, folds.k);
      if (global.format == "json") {
        std::cout << report.dump(2) << "\n";
      } else {
        print_report_table(result.aggregate);
      }

      if (!ev_preds.empty()) {
        std::ostringstream out;
        for (std::size_t i = 0; i < result.pooled_pred.size(); ++i) {
          out << i << '\t' << result.pooled_gold[i] << '\t' << result.pooled_pred[i] << '\n';
        }
        io::atomic_write(ev_preds, out.str());
        std::printf("pooled run-0 predictions written to %s\n", ev_preds.c_str());
      }
      if (!ev_out.empty()) {
        io::atomic_write(ev_out, report.dump(2) + "\n");
        RunManifest manifest;
        manifest.subcommand = "evaluate";
        manifest.seed = global.seed;
        manifest.jobs = global.jobs;
        manifest.add_input(ev_data);
        manifest.add_input(ev_vocab);
        manifest.add_input(ev_folds);
        if (!ev_lm.empty()) manifest.add_input(ev_lm);
        manifest.outputs = {ev_out};
        if (!ev_preds.empty()) manifest.outputs.push_back(ev_preds);
        manifest.config_json = cfg.to_json();
        manifest.write_for(ev_out);
      }
      return 0;
    }

    if (*signif) {
      const auto rows_a = load_preds(sig_a);
      const auto rows_b = load_preds(sig_b);
      if (rows_a.size() != rows_b.size()) {
        throw std::runtime_error("prediction files cover different numbers of examples");
      }
      std::vector<bool> correct_a, correct_b;
      for (std::size_t i = 0; i < rows_a.size(); ++i) {
        if (rows_a[i].index != rows_b[i].index || rows_a[i].gold != rows_b[i].gold) {
          throw std::runtime_error("prediction files disagree on example " +
                                   std::to_string(rows_a[i].index));
        }
        correct_a.push_back(rows_a[i].pred == rows_a[i].gold);
        correct_b.push_back(rows_b[i].pred == rows_b[i].gold);
      }
      const auto result = eval::chi_squared_test(correct_a, correct_b);
      if (global.format == "json") {
        std::cout << json{{"statistic", result.statistic},
                          {"p_value", result.p_value},
                          {"significant_at_0.05", result.p_value < 0.05}}
                         .dump(2)
                  << "\n";
      } else {
        std::printf("chi-squared statistic %.6f\np-value %.6g\nsignificant at 0.05: %s\n",
                    result.statistic, result.p_value, result.p_value < 0.05 ? "yes" : "no");
      }
      return 0;
    }

    if (*neighbors) {
      const auto docs = load_corpus_lines(nb_index);
      const auto index = tfidf::TfIdfIndex::build(docs, nb_min_df);
      std::vector<std::string> queries;
      if (std::filesystem::exists(nb_query)) {
        for (const auto& line : io::read_lines(nb_query)) {
          if (!line.empty()) queries.push_back(line);
        }
      } else {
        queries.push_back(nb_query);
      }
      for (const auto& query : queries) {
        if (queries.size() > 1) std::printf("# query: %s\n", query.c_str());
        const auto hits = index.nearest(query, nb_k);
        for (std::size_t r = 0; r < hits.size(); ++r) {
          std::printf("%zu\t%.6f\t%s\n", r + 1, hits[r].score,
                      index.document(hits[r].doc).c_str());
        }
      }
      return 0;
    }
  } catch (const nn::CheckpointError& e) {
    std::cerr << "checkpoint error (" << nn::to_string(e.kind()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
