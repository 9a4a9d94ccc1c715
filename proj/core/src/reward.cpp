#include "mprl/reward.hpp"

#include "mprl/data.hpp"
#include "mprl/error.hpp"

namespace mprl {

int outcome_reward(std::string_view generated_text, const Rational& gold_answer) {
  std::optional<Rational> extracted = extract_final_answer(generated_text);
  return extracted && *extracted == gold_answer ? 1 : 0;
}

int outcome_reward_tokens(const Vocab& vocab, std::span<const int> prompt,
                          std::span<const int> generated, const Rational& gold_answer) {
  std::string text = vocab.decode(prompt);
  text += vocab.decode(generated);
  return outcome_reward(text, gold_answer);
}

ReturnVector discounted_returns(double r_terminal, int steps, double gamma) {
  require(steps >= 1, ErrorKind::Contract, "discounted_returns: need at least one step");
  require(gamma > 0.0 && gamma <= 1.0, ErrorKind::Contract,
          "discounted_returns: gamma must be in (0, 1]");
  ReturnVector rv;
  rv.gamma = gamma;
  rv.values.resize(static_cast<size_t>(steps));
  rv.values[static_cast<size_t>(steps - 1)] = r_terminal;
  for (int i = steps - 2; i >= 0; --i)
    rv.values[static_cast<size_t>(i)] = gamma * rv.values[static_cast<size_t>(i + 1)];
  return rv;
}

}  // namespace mprl
