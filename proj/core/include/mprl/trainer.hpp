#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mprl/data.hpp"
#include "mprl/model.hpp"
#include "mprl/policy.hpp"
#include "mprl/reward.hpp"
#include "mprl/rng.hpp"
#include "mprl/tape.hpp"

namespace mprl {

enum class TrainMode { Ce, CeRl, Mixed };

TrainMode parse_train_mode(const std::string& name);  // Config error on junk
std::string train_mode_name(TrainMode mode);

struct TrainConfig {
  TrainMode mode = TrainMode::Ce;
  double learning_rate = 1e-5;
  int batch_size = 1;
  double beta = 1.0;
  double lambda = 0.1;
  double gamma = 0.9;
  int epochs = 20;
  int max_new_tokens = 64;
  uint64_t seed = 0;
  double baseline_loss_weight = 1.0;

  void validate() const;
};

/// Adam accumulators mirroring the canonical parameter order.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m, v;

  static AdamState for_params(const ModelParams& params);
};

struct StepReport {
  double ce_loss = 0.0;
  double abstract_ce_loss = 0.0;
  double rl_loss = 0.0;
  double baseline_loss = 0.0;
  double reward = 0.0;
  int trajectory_len = 0;
};

/// Question and gold solution encoded for teacher forcing. The target
/// sequence is the solution plus EOS so the model learns to stop; the
/// loss mask covers exactly those target positions.
struct EncodedProblem {
  std::vector<int> sequence;    // question then targets
  std::vector<int> targets;     // per-row next-token target (dummy on unmasked rows)
  std::vector<uint8_t> mask;    // true on rows whose next token is a target
  int question_len = 0;
  int target_len = 0;
};

EncodedProblem encode_problem(const Vocab& vocab, const Problem& problem, int max_seq_len);

/// Token cross-entropy over the solution span (teacher-forced).
Tensor ce_loss(Tape& tape, const ModelParams& params, const Vocab& vocab, const Problem& problem);
/// 5-class cross-entropy of the abstract head against f(y_i) over the
/// same span.
Tensor abstract_ce_loss(Tape& tape, const ModelParams& params, const Vocab& vocab,
                        const Problem& problem);

/// max(0, -sum_i log p(o_i) * (R_i - b_i)) with the baselines treated as
/// constants; gradient reaches the log-probabilities only when the inner
/// sum is positive.
Tensor reinforce_hinge_loss(Tape& tape, const Tensor& class_logprobs, const ReturnVector& returns,
                            std::span<const double> baselines);

/// Mean squared error between selected baseline rows and the returns;
/// the targets are constants so gradient reaches the baseline head only.
Tensor baseline_loss(Tape& tape, const Tensor& baseline_column, std::span<const int> rows,
                     const ReturnVector& returns);

struct TotalLoss {
  Tensor loss;
  StepReport report;
};

/// Assemble the mode's loss on one tape:
///   ce      : token CE
///   ce_rl   : token CE + lambda * hinge (log pi over token log-probs)
///   mixed   : token CE + beta * abstract CE + lambda * hinge (log pi
///             over abstract class log-probs)
/// The policy-gradient block (hinge plus baseline regression) is active
/// only when lambda > 0, so zero-weight configurations reduce to the CE
/// loss bit for bit.
TotalLoss total_loss(Tape& tape, const ModelParams& params, const Vocab& vocab,
                     const Problem& problem, const Trajectory* trajectory,
                     const ReturnVector* returns, const TrainConfig& config);

/// Scale all parameter gradients so their global L2 norm is at most
/// max_norm.
void clip_global_norm(ModelParams& params, double max_norm);

/// Bias-corrected Adam update over every parameter; gradients are cleared
/// afterwards. Contract error if any gradient buffer is missing.
void adam_step(ModelParams& params, AdamState& state, double learning_rate);

constexpr double kGradClipNorm = 1.0;

/// One pass over the corpus in a seeded shuffle order: rollout (RL modes),
/// reward, combined backward, clipped Adam step; one report per problem.
std::vector<StepReport> train_epoch(ModelParams& params, AdamState& adam,
                                    const std::vector<Problem>& corpus, const Vocab& vocab,
                                    const TrainConfig& config, Rng& rng);

}  // namespace mprl
