#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "claimlab/ulmfit.hpp"

namespace claimlab::eval {

struct FoldAssignment {
  int k = 10;
  std::uint64_t seed = 0;
  std::vector<int> fold_of;  // example index -> fold id

  // TSV `example_index<TAB>fold_id`.
  void save(const std::string& path) const;
  static FoldAssignment load(const std::string& path);
};

// Stratified by label: seeded shuffle within each class, then round-robin
// assignment with a fold cursor carried across classes so fold sizes differ
// by at most one. Throws std::invalid_argument when labels.size() < k.
FoldAssignment make_folds(const std::vector<int>& labels, int k, std::uint64_t seed);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  ClassScores claim;      // label 1 as positive
  ClassScores non_claim;  // label 0 as positive
  ClassScores macro;      // unweighted mean over the two classes
};

struct ConfusionMatrix {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;  // claim = positive
};

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& golds);

// Zero denominators yield 0 by convention. Throws on empty input.
EvalReport compute_metrics(const std::vector<int>& predictions, const std::vector<int>& golds);

struct AggregateReport {
  EvalReport mean;
  EvalReport sd;  // population standard deviation
  std::size_t count = 0;
};

AggregateReport aggregate_runs(const std::vector<EvalReport>& reports);

// A system: train on a labeled subset with a seed, return a predictor over
// token sequences of the full dataset (indexed by example).
using SystemTrainFn = std::function<std::function<std::vector<int>(const std::vector<std::size_t>&)>(
    const std::vector<std::size_t>& train_indices, std::uint64_t seed)>;

struct RunFoldReport {
  int run = 0;
  int fold = 0;
  EvalReport report;
};

struct CrossValResult {
  std::vector<RunFoldReport> reports;  // sorted by (run, fold)
  AggregateReport aggregate;
  std::vector<int> pooled_pred;  // run 0, every example predicted on its held-out fold
  std::vector<int> pooled_gold;
};

// For each run (seed = base_seed + run) and fold: train on k-1 folds,
// evaluate on the held-out fold.
CrossValResult cross_validate(const SystemTrainFn& system, const std::vector<int>& labels,
                              const FoldAssignment& folds, int runs,
                              std::uint64_t base_seed);

struct Chi2Result {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Pearson chi-squared with 1 df on the 2x2 correct/incorrect table.
// Degenerate margins give statistic 0, p 1.
Chi2Result chi_squared_from_counts(std::uint64_t correct_a, std::uint64_t incorrect_a,
                                   std::uint64_t correct_b, std::uint64_t incorrect_b);
Chi2Result chi_squared_test(const std::vector<bool>& correct_a,
                            const std::vector<bool>& correct_b);

// Survival function of the df=1 chi-squared distribution: erfc(sqrt(x/2)).
double chi2_sf_df1(double x);

}  // namespace claimlab::eval
