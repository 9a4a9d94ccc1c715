#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "mprl/rational.hpp"
#include "mprl/vocab.hpp"

namespace mprl {

/// 1 iff the text carries a "#### <number>" answer equal to the gold
/// answer; 0 otherwise (no marker, malformed number, or a mismatch).
int outcome_reward(std::string_view generated_text, const Rational& gold_answer);

/// Reward of a generated continuation: the prompt and generation are
/// decoded together, so a marker begun in the prompt can be completed by
/// the generation. Questions never contain the marker, so for ordinary
/// problems this equals scoring the generation alone.
int outcome_reward_tokens(const Vocab& vocab, std::span<const int> prompt,
                          std::span<const int> generated, const Rational& gold_answer);

/// Per-step returns for a terminal-only reward: R_i = gamma^(T-i) * r,
/// built by the backward recurrence R_T = r, R_i = gamma * R_{i+1}, so
/// the recurrence holds exactly in floating point.
struct ReturnVector {
  std::vector<double> values;
  double gamma = 1.0;

  int length() const { return static_cast<int>(values.size()); }
};

ReturnVector discounted_returns(double r_terminal, int steps, double gamma);

}  // namespace mprl
