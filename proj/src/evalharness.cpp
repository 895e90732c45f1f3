#include "claimlab/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "claimlab/io.hpp"
#include "claimlab/rng.hpp"

namespace claimlab::eval {

void FoldAssignment::save(const std::string& path) const {
  std::ostringstream out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    out << i << '\t' << fold_of[i] << '\n';
  }
  io::atomic_write(path, out.str());
}

FoldAssignment FoldAssignment::load(const std::string& path) {
  FoldAssignment folds;
  folds.fold_of.clear();
  int max_fold = -1;
  io::LineReader reader(path);
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("bad folds line: " + line);
    const std::size_t index = std::stoull(line.substr(0, tab));
    const int fold = std::stoi(line.substr(tab + 1));
    if (index != folds.fold_of.size()) {
      throw std::runtime_error("folds file indices must be dense and ordered: " + path);
    }
    if (fold < 0) throw std::runtime_error("negative fold id in " + path);
    folds.fold_of.push_back(fold);
    max_fold = std::max(max_fold, fold);
  }
  if (folds.fold_of.empty()) throw std::runtime_error("empty folds file: " + path);
  folds.k = max_fold + 1;
  return folds;
}

FoldAssignment make_folds(const std::vector<int>& labels, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k must be >= 2");
  if (labels.size() < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("dataset smaller than fold count");
  }
  FoldAssignment folds;
  folds.k = k;
  folds.seed = seed;
  folds.fold_of.assign(labels.size(), -1);

  Rng rng(seed);
  int cursor = 0;  // carried across classes so fold sizes stay within one
  for (int label = 0; label <= 1; ++label) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) members.push_back(i);
    }
    rng.shuffle(members);
    for (std::size_t i = 0; i < members.size(); ++i) {
      folds.fold_of[members[i]] = cursor;
      cursor = (cursor + 1) % k;
    }
  }
  return folds;
}

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& golds) {
  if (predictions.size() != golds.size()) {
    throw std::invalid_argument("predictions/golds length mismatch");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred = predictions[i] == 1;
    const bool gold = golds[i] == 1;
    if (pred && gold) ++cm.tp;
    else if (pred && !gold) ++cm.fp;
    else if (!pred && gold) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

ClassScores scores_from(double tp, double fp, double fn) {
  ClassScores s;
  s.precision = safe_div(tp, tp + fp);
  s.recall = safe_div(tp, tp + fn);
  s.f1 = safe_div(2.0 * s.precision * s.recall, s.precision + s.recall);
  return s;
}

}  // namespace

EvalReport compute_metrics(const std::vector<int>& predictions, const std::vector<int>& golds) {
  if (predictions.empty()) throw std::invalid_argument("no predictions to score");
  const ConfusionMatrix cm = confusion(predictions, golds);
  EvalReport report;
  report.claim = scores_from(static_cast<double>(cm.tp), static_cast<double>(cm.fp),
                             static_cast<double>(cm.fn));
  // non-claim as positive: tn are its true positives, fn its false positives
  report.non_claim = scores_from(static_cast<double>(cm.tn), static_cast<double>(cm.fn),
                                 static_cast<double>(cm.fp));
  report.macro.precision = 0.5 * (report.claim.precision + report.non_claim.precision);
  report.macro.recall = 0.5 * (report.claim.recall + report.non_claim.recall);
  report.macro.f1 = 0.5 * (report.claim.f1 + report.non_claim.f1);
  return report;
}

namespace {

template <typename Get>
void mean_sd(const std::vector<EvalReport>& reports, const Get& get, double& mean_out,
             double& sd_out) {
  double mean = 0.0;
  for (const auto& r : reports) mean += get(r);
  mean /= static_cast<double>(reports.size());
  double var = 0.0;
  for (const auto& r : reports) {
    const double d = get(r) - mean;
    var += d * d;
  }
  var /= static_cast<double>(reports.size());  // population
  mean_out = mean;
  sd_out = std::sqrt(var);
}

}  // namespace

AggregateReport aggregate_runs(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("no reports to aggregate");
  AggregateReport agg;
  agg.count = reports.size();
  struct Field {
    ClassScores EvalReport::* block;
    double ClassScores::* member;
  };
  const Field fields[] = {
      {&EvalReport::claim, &ClassScores::precision},
      {&EvalReport::claim, &ClassScores::recall},
      {&EvalReport::claim, &ClassScores::f1},
      {&EvalReport::non_claim, &ClassScores::precision},
      {&EvalReport::non_claim, &ClassScores::recall},
      {&EvalReport::non_claim, &ClassScores::f1},
      {&EvalReport::macro, &ClassScores::precision},
      {&EvalReport::macro, &ClassScores::recall},
      {&EvalReport::macro, &ClassScores::f1},
  };
  for (const Field& f : fields) {
    double mean = 0.0, sd = 0.0;
    mean_sd(reports, [&](const EvalReport& r) { return (r.*(f.block)).*(f.member); }, mean, sd);
    (agg.mean.*(f.block)).*(f.member) = mean;
    (agg.sd.*(f.block)).*(f.member) = sd;
  }
  return agg;
}

CrossValResult cross_validate(const SystemTrainFn& system, const std::vector<int>& labels,
                              const FoldAssignment& folds, int runs,
                              std::uint64_t base_seed) {
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (folds.fold_of.size() != labels.size()) {
    throw std::invalid_argument("fold assignment does not match dataset");
  }
  CrossValResult result;
  result.pooled_pred.assign(labels.size(), 0);
  result.pooled_gold = labels;

  std::vector<EvalReport> flat;
  for (int run = 0; run < runs; ++run) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(run);
    for (int fold = 0; fold < folds.k; ++fold) {
      std::vector<std::size_t> train_idx, test_idx;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        (folds.fold_of[i] == fold ? test_idx : train_idx).push_back(i);
      }
      auto predictor = system(train_idx, seed + 7919ULL * static_cast<std::uint64_t>(fold));
      const std::vector<int> preds = predictor(test_idx);
      std::vector<int> golds;
      golds.reserve(test_idx.size());
      for (std::size_t i : test_idx) golds.push_back(labels[i]);
      const EvalReport report = compute_metrics(preds, golds);
      result.reports.push_back({run, fold, report});
      flat.push_back(report);
      if (run == 0) {
        for (std::size_t pos = 0; pos < test_idx.size(); ++pos) {
          result.pooled_pred[test_idx[pos]] = preds[pos];
        }
      }
    }
  }
  result.aggregate = aggregate_runs(flat);
  return result;
}

double chi2_sf_df1(double x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

Chi2Result chi_squared_from_counts(std::uint64_t correct_a, std::uint64_t incorrect_a,
                                   std::uint64_t correct_b, std::uint64_t incorrect_b) {
  const double a = static_cast<double>(correct_a);
  const double b = static_cast<double>(incorrect_a);
  const double c = static_cast<double>(correct_b);
  const double d = static_cast<double>(incorrect_b);
  const double n = a + b + c + d;
  const double r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
  Chi2Result result;
  if (r1 == 0.0 || r2 == 0.0 || c1 == 0.0 || c2 == 0.0) {
    return result;  // degenerate margins: statistic 0, p 1
  }
  const double diff = a * d - b * c;
  result.statistic = n * diff * diff / (r1 * r2 * c1 * c2);
  result.p_value = chi2_sf_df1(result.statistic);
  return result;
}

Chi2Result chi_squared_test(const std::vector<bool>& correct_a,
                            const std::vector<bool>& correct_b) {
  if (correct_a.size() != correct_b.size()) {
    throw std::invalid_argument("correctness vectors must cover the same examples");
  }
  std::uint64_t ca = 0, cb = 0;
  for (bool v : correct_a) ca += v ? 1 : 0;
  for (bool v : correct_b) cb += v ? 1 : 0;
  const std::uint64_t n = correct_a.size();
  return chi_squared_from_counts(ca, n - ca, cb, n - cb);
}

}  // namespace claimlab::eval
