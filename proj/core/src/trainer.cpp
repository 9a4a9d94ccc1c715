#include "mprl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mprl/error.hpp"

namespace mprl {

TrainMode parse_train_mode(const std::string& name) {
  if (name == "ce") return TrainMode::Ce;
  if (name == "ce_rl") return TrainMode::CeRl;
  if (name == "mixed") return TrainMode::Mixed;
  fail(ErrorKind::Config, "unknown training mode: " + name + " (expected ce, ce_rl or mixed)");
}

std::string train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::Ce: return "ce";
    case TrainMode::CeRl: return "ce_rl";
    case TrainMode::Mixed: return "mixed";
  }
  return "?";
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0, ErrorKind::Config, "train config: learning_rate must be positive");
  require(batch_size == 1, ErrorKind::Config, "train config: only batch_size 1 is supported");
  require(beta >= 0.0, ErrorKind::Config, "train config: beta must be non-negative");
  require(lambda >= 0.0, ErrorKind::Config, "train config: lambda must be non-negative");
  require(gamma > 0.0 && gamma <= 1.0, ErrorKind::Config, "train config: gamma must be in (0, 1]");
  require(epochs > 0, ErrorKind::Config, "train config: epochs must be positive");
  require(max_new_tokens >= 0, ErrorKind::Config, "train config: max_new_tokens negative");
  require(baseline_loss_weight >= 0.0, ErrorKind::Config,
          "train config: baseline_loss_weight must be non-negative");
}

AdamState AdamState::for_params(const ModelParams& params) {
  AdamState state;
  for (const Tensor* t : params.ordered()) {
    state.m.emplace_back(static_cast<size_t>(t->size()), 0.0);
    state.v.emplace_back(static_cast<size_t>(t->size()), 0.0);
  }
  return state;
}

EncodedProblem encode_problem(const Vocab& vocab, const Problem& problem, int max_seq_len) {
  EncodedProblem ep;
  std::vector<int> question = vocab.encode(problem.question);
  std::vector<int> target = vocab.encode(problem.solution);
  target.push_back(vocab.eos_id());

  ep.question_len = static_cast<int>(question.size());
  ep.target_len = static_cast<int>(target.size());
  require(ep.question_len >= 1, ErrorKind::Length, "encode_problem: empty question");
  int total = ep.question_len + ep.target_len;
  require(total <= max_seq_len, ErrorKind::Length,
          "encode_problem: sequence of length " + std::to_string(total) +
              " exceeds max_seq_len " + std::to_string(max_seq_len));

  ep.sequence = question;
  ep.sequence.insert(ep.sequence.end(), target.begin(), target.end());
  ep.targets.assign(ep.sequence.size(), 0);
  ep.mask.assign(ep.sequence.size(), 0);
  // Row i predicts sequence[i + 1]; rows question_len-1 .. total-2 carry
  // the solution tokens (and final EOS).
  for (int j = 0; j < ep.target_len; ++j) {
    int row = ep.question_len - 1 + j;
    ep.targets[static_cast<size_t>(row)] = target[static_cast<size_t>(j)];
    ep.mask[static_cast<size_t>(row)] = 1;
  }
  return ep;
}

namespace {

Tensor ce_from_output(Tape& tape, const ForwardOutput& out, const EncodedProblem& ep) {
  return tape.cross_entropy(out.token_logits, ep.targets, ep.mask);
}

Tensor abstract_ce_from_output(Tape& tape, const ForwardOutput& out, const EncodedProblem& ep,
                               const Vocab& vocab) {
  std::vector<int> class_targets(ep.targets.size(), 0);
  for (size_t i = 0; i < ep.targets.size(); ++i)
    if (ep.mask[i]) class_targets[i] = static_cast<int>(vocab.to_abstract(ep.targets[i]));
  return tape.cross_entropy(out.abstract_logits, class_targets, ep.mask);
}

}  // namespace

Tensor ce_loss(Tape& tape, const ModelParams& params, const Vocab& vocab, const Problem& problem) {
  EncodedProblem ep = encode_problem(vocab, problem, params.config.max_seq_len);
  ForwardOutput out = forward(tape, params, ep.sequence);
  return ce_from_output(tape, out, ep);
}

Tensor abstract_ce_loss(Tape& tape, const ModelParams& params, const Vocab& vocab,
                        const Problem& problem) {
  EncodedProblem ep = encode_problem(vocab, problem, params.config.max_seq_len);
  ForwardOutput out = forward(tape, params, ep.sequence);
  return abstract_ce_from_output(tape, out, ep, vocab);
}

Tensor reinforce_hinge_loss(Tape& tape, const Tensor& class_logprobs, const ReturnVector& returns,
                            std::span<const double> baselines) {
  int steps = returns.length();
  require(class_logprobs.rank() == 1 && class_logprobs.dim(0) == steps, ErrorKind::Contract,
          "reinforce_hinge_loss: log-probability count does not match returns");
  require(static_cast<int>(baselines.size()) == steps, ErrorKind::Contract,
          "reinforce_hinge_loss: baseline count does not match returns");
  std::vector<double> weights(static_cast<size_t>(steps));
  for (int i = 0; i < steps; ++i)
    weights[static_cast<size_t>(i)] =
        -(returns.values[static_cast<size_t>(i)] - baselines[static_cast<size_t>(i)]);
  Tensor inner = tape.weighted_sum(class_logprobs, weights);
  return tape.hinge(inner);
}

Tensor baseline_loss(Tape& tape, const Tensor& baseline_column, std::span<const int> rows,
                     const ReturnVector& returns) {
  require(static_cast<int>(rows.size()) == returns.length(), ErrorKind::Contract,
          "baseline_loss: row count does not match returns");
  return tape.mse_rows(baseline_column, rows, returns.values);
}

TotalLoss total_loss(Tape& tape, const ModelParams& params, const Vocab& vocab,
                     const Problem& problem, const Trajectory* trajectory,
                     const ReturnVector* returns, const TrainConfig& config) {
  TotalLoss result;
  EncodedProblem ep = encode_problem(vocab, problem, params.config.max_seq_len);
  ForwardOutput gold = forward(tape, params, ep.sequence);

  std::vector<std::pair<Tensor, double>> terms;
  Tensor ce = ce_from_output(tape, gold, ep);
  terms.emplace_back(ce, 1.0);
  result.report.ce_loss = ce.item();

  if (config.mode == TrainMode::Mixed && config.beta != 0.0) {
    Tensor abs_ce = abstract_ce_from_output(tape, gold, ep, vocab);
    terms.emplace_back(abs_ce, config.beta);
    result.report.abstract_ce_loss = abs_ce.item();
  }

  const bool rl_mode = config.mode != TrainMode::Ce;
  if (rl_mode && config.lambda > 0.0) {
    require(trajectory != nullptr && returns != nullptr, ErrorKind::Contract,
            "total_loss: RL mode needs a trajectory and returns");
    int steps = trajectory->length();
    require(returns->length() == steps, ErrorKind::Contract,
            "total_loss: returns length does not match the trajectory");
    result.report.trajectory_len = steps;
    if (steps > 0) {
      result.report.reward = returns->values.back();

      std::vector<int> sequence(ep.sequence.begin(), ep.sequence.begin() + ep.question_len);
      sequence.insert(sequence.end(), trajectory->tokens.begin(), trajectory->tokens.end());
      ForwardOutput sampled = forward(tape, params, sequence);

      std::vector<int> rows(static_cast<size_t>(steps));
      for (int i = 0; i < steps; ++i) rows[static_cast<size_t>(i)] = ep.question_len - 1 + i;

      Tensor logprobs;
      if (config.mode == TrainMode::Mixed) {
        std::vector<int> classes(static_cast<size_t>(steps));
        for (int i = 0; i < steps; ++i)
          classes[static_cast<size_t>(i)] = static_cast<int>(trajectory->classes[static_cast<size_t>(i)]);
        logprobs = tape.gather_logprobs(sampled.abstract_logits, rows, classes);
      } else {
        logprobs = tape.gather_logprobs(sampled.token_logits, rows, trajectory->tokens);
      }

      std::vector<double> baselines(static_cast<size_t>(steps));
      for (int i = 0; i < steps; ++i)
        baselines[static_cast<size_t>(i)] = sampled.baseline.data()[rows[static_cast<size_t>(i)]];

      Tensor hinge = reinforce_hinge_loss(tape, logprobs, *returns, baselines);
      terms.emplace_back(hinge, config.lambda);
      result.report.rl_loss = hinge.item();

      if (config.baseline_loss_weight > 0.0) {
        // The regression trains the baseline head alone: hidden states
        // enter as constants, so no gradient reaches the trunk from here.
        Tensor hidden_const =
            Tensor::from(sampled.hidden.shape(),
                         {sampled.hidden.values().begin(), sampled.hidden.values().end()});
        Tensor baseline_pred = tape.matmul(hidden_const, params.baseline_head);
        Tensor bl = baseline_loss(tape, baseline_pred, rows, *returns);
        terms.emplace_back(bl, config.baseline_loss_weight);
        result.report.baseline_loss = bl.item();
      }
    }
  }

  result.loss = tape.add_scaled(terms);
  return result;
}

void clip_global_norm(ModelParams& params, double max_norm) {
  require(max_norm > 0.0, ErrorKind::Contract, "clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (Tensor* t : params.ordered()) {
    require(t->has_grad(), ErrorKind::Contract, "clip_global_norm: missing gradient");
    for (double g : t->grad()) sq += g * g;
  }
  double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  double scale = max_norm / norm;
  for (Tensor* t : params.ordered())
    for (double& g : t->grad()) g *= scale;
}

void adam_step(ModelParams& params, AdamState& state, double learning_rate) {
  std::vector<Tensor*> tensors = params.ordered();
  require(state.m.size() == tensors.size() && state.v.size() == tensors.size(),
          ErrorKind::Contract, "adam_step: state does not mirror the parameters");
  ++state.step;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t p = 0; p < tensors.size(); ++p) {
    Tensor& t = *tensors[p];
    require(t.has_grad(), ErrorKind::Contract, "adam_step: gradients not populated");
    require(state.m[p].size() == static_cast<size_t>(t.size()), ErrorKind::Contract,
            "adam_step: state shape mismatch");
    double* values = t.data();
    std::span<double> grad = t.grad();
    double* m = state.m[p].data();
    double* v = state.v[p].data();
    for (size_t i = 0; i < grad.size(); ++i) {
      double g = grad[i];
      grad[i] = 0.0;  // cleared as part of the update pass
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      values[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

std::vector<StepReport> train_epoch(ModelParams& params, AdamState& adam,
                                    const std::vector<Problem>& corpus, const Vocab& vocab,
                                    const TrainConfig& config, Rng& rng) {
  config.validate();
  require(!corpus.empty(), ErrorKind::Contract, "train_epoch: empty corpus");
  params.ensure_grads();
  params.zero_grads();  // adam_step leaves gradients clear between steps

  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  const bool rl_mode = config.mode != TrainMode::Ce && config.lambda > 0.0;
  std::vector<StepReport> reports;
  reports.reserve(corpus.size());

  for (int idx : order) {
    const Problem& problem = corpus[static_cast<size_t>(idx)];
    Trajectory traj;
    ReturnVector returns;
    bool have_traj = false;

    if (rl_mode) {
      std::vector<int> prompt = vocab.encode(problem.question);
      int budget = std::min(config.max_new_tokens,
                            params.config.max_seq_len - static_cast<int>(prompt.size()));
      require(budget > 0, ErrorKind::Length, "train_epoch: no room to generate after the prompt");
      DecodeMode policy = config.mode == TrainMode::Mixed ? DecodeMode::Mixed : DecodeMode::Greedy;
      traj = rollout(params, vocab, prompt, budget, policy, rng);
      int r = outcome_reward_tokens(vocab, prompt, traj.tokens, problem.answer);
      returns = discounted_returns(static_cast<double>(r), traj.length(), config.gamma);
      have_traj = true;
    }

    Tape tape;
    TotalLoss tl = total_loss(tape, params, vocab, problem, have_traj ? &traj : nullptr,
                              have_traj ? &returns : nullptr, config);
    tape.backward(tl.loss);
    clip_global_norm(params, kGradClipNorm);
    adam_step(params, adam, config.learning_rate);
    reports.push_back(tl.report);
  }
  return reports;
}

}  // namespace mprl
