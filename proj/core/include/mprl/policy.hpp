#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "mprl/decode.hpp"
#include "mprl/model.hpp"
#include "mprl/rng.hpp"
#include "mprl/vocab.hpp"

namespace mprl {

enum class DecodeMode { Mixed, Greedy };
enum class Termination { Eos, MaxLen };

/// One generated continuation: tokens, the per-step abstract classes, and
/// the class log-probabilities under the abstract head at generation
/// time. In greedy mode classes are f(token) and nothing is sampled; the
/// log-probabilities are recorded for diagnostics only.
struct Trajectory {
  std::vector<int> tokens;
  std::vector<AbstractClass> classes;
  std::vector<double> class_logprobs;
  Termination terminated_by = Termination::MaxLen;

  // filled only when RolloutOptions::record_step_logits is set
  std::vector<std::vector<double>> step_token_logits;
  std::vector<std::array<double, kNumAbstractClasses>> step_abstract_logits;

  int length() const { return static_cast<int>(tokens.size()); }
};

struct RolloutOptions {
  bool record_step_logits = false;
  /// Test seam: replace the abstract head's logits at every step, e.g. to
  /// force a one-hot Rest distribution.
  std::optional<std::array<double, kNumAbstractClasses>> abstract_logits_override;
};

/// Inverse-CDF sample from softmax(logits) using a single uniform draw.
/// Returns the class and its log-probability. Numeric error on
/// non-finite logits.
std::pair<AbstractClass, double> sample_abstract(std::span<const double> abstract_logits, Rng& rng);

/// Greedy argmax over a full token-logits row; ties break to the lowest id.
int next_token_greedy(std::span<const double> token_logits);

struct MixedChoice {
  int token;
  AbstractClass cls;
  double class_logprob;
};

/// Two-level rule: sample an abstract class; an operator class forces its
/// operator token, Rest falls through to the greedy argmax over the full
/// vocabulary.
MixedChoice next_token_mixed(std::span<const double> token_logits,
                             std::span<const double> abstract_logits, const Vocab& vocab,
                             Rng& rng);

/// Autoregressive extension of the prompt, one token at a time, stopping
/// at EOS or after max_new_tokens.
Trajectory rollout(const ModelParams& params, const Vocab& vocab, std::span<const int> prompt,
                   int max_new_tokens, DecodeMode mode, Rng& rng,
                   const RolloutOptions& options = {});

/// Same contract against a caller-owned decoder that was already fed
/// exactly `prompt`. The decoder is rolled back to the prompt's last
/// position first, so repeated calls restart cleanly without re-running
/// the whole prompt.
Trajectory rollout_from(Decoder& decoder, const Vocab& vocab, std::span<const int> prompt,
                        int max_new_tokens, DecodeMode mode, Rng& rng,
                        const RolloutOptions& options = {});

}  // namespace mprl
