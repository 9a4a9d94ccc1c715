#include "mprl/policy.hpp"

#include <algorithm>
#include <cmath>

#include "mprl/error.hpp"
#include "mprl/kernels.hpp"

namespace mprl {

std::pair<AbstractClass, double> sample_abstract(std::span<const double> abstract_logits,
                                                 Rng& rng) {
  require(abstract_logits.size() == kNumAbstractClasses, ErrorKind::Contract,
          "sample_abstract: expected 5 logits");
  for (double v : abstract_logits)
    require(std::isfinite(v), ErrorKind::Numeric, "sample_abstract: non-finite logit");

  double lse = kernels::logsumexp(abstract_logits.data(), kNumAbstractClasses);
  double u = rng.uniform01();
  double cum = 0.0;
  int chosen = kNumAbstractClasses - 1;  // fp guard: fall through to the last class
  for (int c = 0; c < kNumAbstractClasses; ++c) {
    cum += std::exp(abstract_logits[static_cast<size_t>(c)] - lse);
    if (u < cum) {
      chosen = c;
      break;
    }
  }
  double logprob = abstract_logits[static_cast<size_t>(chosen)] - lse;
  return {static_cast<AbstractClass>(chosen), logprob};
}

int next_token_greedy(std::span<const double> token_logits) {
  require(!token_logits.empty(), ErrorKind::Contract, "next_token_greedy: empty logits");
  int best = 0;
  for (int i = 1; i < static_cast<int>(token_logits.size()); ++i)
    if (token_logits[static_cast<size_t>(i)] > token_logits[static_cast<size_t>(best)]) best = i;
  return best;
}

MixedChoice next_token_mixed(std::span<const double> token_logits,
                             std::span<const double> abstract_logits, const Vocab& vocab,
                             Rng& rng) {
  auto [cls, logprob] = sample_abstract(abstract_logits, rng);
  int token = cls == AbstractClass::Rest ? next_token_greedy(token_logits)
                                         : vocab.from_abstract(cls);
  return {token, cls, logprob};
}

namespace {

double logprob_of_class(std::span<const double> abstract_logits, AbstractClass cls) {
  double lse = kernels::logsumexp(abstract_logits.data(), kNumAbstractClasses);
  return abstract_logits[static_cast<size_t>(cls)] - lse;
}

Trajectory generate_from_view(Decoder& decoder, const Vocab& vocab, int max_new_tokens,
                              DecodeMode mode, Rng& rng, const RolloutOptions& options) {
  Trajectory traj;
  traj.terminated_by = Termination::MaxLen;
  if (max_new_tokens <= 0) return traj;
  traj.tokens.reserve(static_cast<size_t>(max_new_tokens));
  traj.classes.reserve(static_cast<size_t>(max_new_tokens));
  traj.class_logprobs.reserve(static_cast<size_t>(max_new_tokens));

  for (int step = 0; step < max_new_tokens; ++step) {
    const StepView& sv = decoder.view();
    std::span<const double> abstract = sv.abstract_logits;
    if (options.abstract_logits_override)
      abstract = std::span<const double>(options.abstract_logits_override->data(),
                                         kNumAbstractClasses);

    int token;
    AbstractClass cls;
    double logprob;
    if (mode == DecodeMode::Mixed) {
      MixedChoice choice = next_token_mixed(sv.token_logits, abstract, vocab, rng);
      token = choice.token;
      cls = choice.cls;
      logprob = choice.class_logprob;
    } else {
      token = next_token_greedy(sv.token_logits);
      cls = vocab.to_abstract(token);
      logprob = logprob_of_class(abstract, cls);
    }

    if (options.record_step_logits) {
      traj.step_token_logits.emplace_back(sv.token_logits.begin(), sv.token_logits.end());
      std::array<double, kNumAbstractClasses> arow{};
      std::copy_n(abstract.begin(), kNumAbstractClasses, arow.begin());
      traj.step_abstract_logits.push_back(arow);
    }
    traj.tokens.push_back(token);
    traj.classes.push_back(cls);
    traj.class_logprobs.push_back(logprob);

    if (token == vocab.eos_id()) {
      traj.terminated_by = Termination::Eos;
      break;
    }
    if (step + 1 < max_new_tokens) decoder.feed(token);
  }
  return traj;
}

}  // namespace

Trajectory rollout(const ModelParams& params, const Vocab& vocab, std::span<const int> prompt,
                   int max_new_tokens, DecodeMode mode, Rng& rng, const RolloutOptions& options) {
  require(!prompt.empty(), ErrorKind::Length, "rollout: empty prompt");
  require(max_new_tokens >= 0, ErrorKind::Contract, "rollout: negative max_new_tokens");
  require(static_cast<int>(prompt.size()) + max_new_tokens <= params.config.max_seq_len,
          ErrorKind::Length, "rollout: prompt plus budget exceeds max_seq_len");
  Decoder decoder(params);
  decoder.prefill(prompt);
  return generate_from_view(decoder, vocab, max_new_tokens, mode, rng, options);
}

Trajectory rollout_from(Decoder& decoder, const Vocab& vocab, std::span<const int> prompt,
                        int max_new_tokens, DecodeMode mode, Rng& rng,
                        const RolloutOptions& options) {
  require(!prompt.empty(), ErrorKind::Length, "rollout_from: empty prompt");
  require(decoder.length() >= static_cast<int>(prompt.size()), ErrorKind::Contract,
          "rollout_from: decoder does not contain the prompt");
  require(static_cast<int>(prompt.size()) + max_new_tokens <= decoder.capacity(),
          ErrorKind::Length, "rollout_from: prompt plus budget exceeds max_seq_len");
  // Re-run the last prompt position so the view matches the prompt end.
  decoder.truncate(static_cast<int>(prompt.size()) - 1);
  decoder.feed(prompt.back());
  return generate_from_view(decoder, vocab, max_new_tokens, mode, rng, options);
}

}  // namespace mprl
