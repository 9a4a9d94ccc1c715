#include "mprl/experiment.hpp"

#include <ostream>

#include "mprl/error.hpp"
#include "mprl/tape.hpp"

namespace mprl {

std::pair<double, double> mean_ce_losses(const ModelParams& params, const Vocab& vocab,
                                         const std::vector<Problem>& problems) {
  require(!problems.empty(), ErrorKind::Contract, "mean_ce_losses: empty split");
  double ce = 0.0, abs_ce = 0.0;
  for (const Problem& p : problems) {
    Tape tape;
    EncodedProblem ep = encode_problem(vocab, p, params.config.max_seq_len);
    ForwardOutput out = forward(tape, params, ep.sequence);
    ce += tape.cross_entropy(out.token_logits, ep.targets, ep.mask).item();
    std::vector<int> class_targets(ep.targets.size(), 0);
    for (size_t i = 0; i < ep.targets.size(); ++i)
      if (ep.mask[i]) class_targets[i] = static_cast<int>(vocab.to_abstract(ep.targets[i]));
    abs_ce += tape.cross_entropy(out.abstract_logits, class_targets, ep.mask).item();
  }
  double n = static_cast<double>(problems.size());
  return {ce / n, abs_ce / n};
}

namespace {

MetricsRow mean_report_row(const std::vector<StepReport>& reports, int epoch,
                           const std::string& mode) {
  MetricsRow row;
  row.epoch = epoch;
  row.mode = mode;
  row.split = "train";
  for (const StepReport& r : reports) {
    row.ce_loss += r.ce_loss;
    row.abstract_loss += r.abstract_ce_loss;
    row.rl_loss += r.rl_loss;
    row.baseline_loss += r.baseline_loss;
  }
  double n = static_cast<double>(reports.size());
  row.ce_loss /= n;
  row.abstract_loss /= n;
  row.rl_loss /= n;
  row.baseline_loss /= n;
  return row;
}

}  // namespace

TrainRunResult train_run(TrainMode mode, const std::vector<Problem>& train_set,
                         const std::vector<Problem>& val_set, const Vocab& vocab,
                         const ExperimentConfig& config, std::ostream* log) {
  TrainConfig tc = config.train;
  tc.mode = mode;
  tc.validate();
  const std::string mode_name = train_mode_name(mode);

  TrainRunResult result;
  result.params = init_model(config.model);
  AdamState adam = AdamState::for_params(result.params);
  Rng rng = Rng(tc.seed).fork(static_cast<uint64_t>(mode) + 1);

  int train_subset = std::min<int>(config.train_accuracy_subset,
                                   static_cast<int>(train_set.size()));
  std::vector<Problem> train_probe(train_set.begin(), train_set.begin() + train_subset);

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::vector<StepReport> reports = train_epoch(result.params, adam, train_set, vocab, tc, rng);

    MetricsRow train_row = mean_report_row(reports, epoch, mode_name);
    if (!train_probe.empty())
      train_row.accuracy =
          evaluate(result.params, vocab, train_probe, tc.max_new_tokens).accuracy;
    result.rows.push_back(train_row);

    MetricsRow val_row;
    val_row.epoch = epoch;
    val_row.mode = mode_name;
    val_row.split = "val";
    if (!val_set.empty()) {
      auto [ce, abs_ce] = mean_ce_losses(result.params, vocab, val_set);
      val_row.ce_loss = ce;
      val_row.abstract_loss = abs_ce;
      val_row.accuracy = evaluate(result.params, vocab, val_set, tc.max_new_tokens).accuracy;
      result.rows.push_back(val_row);
    }

    if (log) {
      (*log) << mode_name << " epoch " << epoch << "/" << tc.epochs
             << "  train ce " << train_row.ce_loss;
      if (mode == TrainMode::Mixed) (*log) << "  abs ce " << train_row.abstract_loss;
      if (mode != TrainMode::Ce) (*log) << "  rl " << train_row.rl_loss;
      (*log) << "  train acc " << train_row.accuracy << "%";
      if (!val_set.empty()) (*log) << "  val acc " << val_row.accuracy << "%";
      (*log) << std::endl;
    }
  }
  return result;
}

CompareResult compare_modes(const std::vector<Problem>& train_set,
                            const std::vector<Problem>& val_set,
                            const std::vector<Problem>& test_set, const Vocab& vocab,
                            const ExperimentConfig& config, std::ostream* log) {
  require(!test_set.empty(), ErrorKind::Contract, "compare_modes: empty test set");
  CompareResult result;
  for (TrainMode mode : {TrainMode::Ce, TrainMode::CeRl, TrainMode::Mixed}) {
    TrainRunResult run = train_run(mode, train_set, val_set, vocab, config, log);
    result.rows.insert(result.rows.end(), run.rows.begin(), run.rows.end());

    EvalReport test = evaluate(run.params, vocab, test_set, config.train.max_new_tokens);
    MetricsRow test_row;
    test_row.epoch = config.train.epochs;
    test_row.mode = train_mode_name(mode);
    test_row.split = "test";
    auto [ce, abs_ce] = mean_ce_losses(run.params, vocab, test_set);
    test_row.ce_loss = ce;
    test_row.abstract_loss = abs_ce;
    test_row.accuracy = test.accuracy;
    result.rows.push_back(test_row);
    result.test_accuracy.emplace_back(mode, test.accuracy);
    if (log)
      (*log) << train_mode_name(mode) << " test accuracy " << test.accuracy << "%" << std::endl;
  }
  return result;
}

BenchmarkCorpora default_benchmark_corpora() {
  CorpusSpec pool_spec;
  pool_spec.count = 2200;
  pool_spec.seed = 101;
  CorpusSpec test_spec;
  test_spec.count = 500;
  test_spec.seed = 303;

  BenchmarkCorpora corpora;
  Rng split_rng(202);
  CorpusSplit split = split_train_val(generate_synthetic(pool_spec), 2000, split_rng);
  corpora.train = std::move(split.train);
  corpora.validation = std::move(split.validation);
  corpora.test = generate_synthetic(test_spec);
  return corpora;
}

}  // namespace mprl
