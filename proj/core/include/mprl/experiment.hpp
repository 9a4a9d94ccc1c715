#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "mprl/data.hpp"
#include "mprl/eval.hpp"
#include "mprl/metrics.hpp"
#include "mprl/model.hpp"
#include "mprl/trainer.hpp"

namespace mprl {

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  /// Greedy accuracy on the train split is estimated on this many
  /// problems per epoch (full-split evaluation would dominate runtime).
  int train_accuracy_subset = 200;
};

/// Forward-only mean token CE and abstract CE per problem over a split.
std::pair<double, double> mean_ce_losses(const ModelParams& params, const Vocab& vocab,
                                         const std::vector<Problem>& problems);

struct TrainRunResult {
  ModelParams params;
  std::vector<MetricsRow> rows;  // per-epoch "train" and "val" rows
};

/// Train one mode for the configured number of epochs, logging one line
/// per epoch when log is non-null. The training rng stream is forked
/// from the seed and the mode so modes differ only in their loss.
TrainRunResult train_run(TrainMode mode, const std::vector<Problem>& train_set,
                         const std::vector<Problem>& val_set, const Vocab& vocab,
                         const ExperimentConfig& config, std::ostream* log);

struct CompareResult {
  std::vector<MetricsRow> rows;  // all modes; plus one "test" row per mode
  std::vector<std::pair<TrainMode, double>> test_accuracy;
};

/// The three-method comparison: ce, ce_rl and mixed trained from the same
/// initialization seed, each evaluated on the shared test set.
CompareResult compare_modes(const std::vector<Problem>& train_set,
                            const std::vector<Problem>& val_set,
                            const std::vector<Problem>& test_set, const Vocab& vocab,
                            const ExperimentConfig& config, std::ostream* log);

struct BenchmarkCorpora {
  std::vector<Problem> train;
  std::vector<Problem> validation;
  std::vector<Problem> test;
};

/// The fixed desk-scale benchmark: a 2200-problem pool split 2000/200,
/// plus a separately seeded 500-problem test set.
BenchmarkCorpora default_benchmark_corpora();

}  // namespace mprl
