#include "mprl/oracle.hpp"

#include <array>
#include <cmath>

#include "mprl/decode.hpp"
#include "mprl/error.hpp"
#include "mprl/kernels.hpp"
#include "mprl/policy.hpp"
#include "mprl/reward.hpp"

namespace mprl {

namespace {

struct Enumerator {
  const Vocab& vocab;
  Decoder& decoder;
  std::span<const int> prompt;
  const Rational& answer;
  int horizon;
  long branch_cap;
  long branches = 0;
  std::vector<int> generated;
  double total = 0.0;

  void leaf(double prob) {
    total += prob * outcome_reward_tokens(vocab, prompt, generated, answer);
  }

  // The decoder's view corresponds to the last fed position.
  void visit(int depth, double prob) {
    const StepView& sv = decoder.view();
    std::array<double, kNumAbstractClasses> class_probs{};
    std::copy_n(sv.abstract_logits.begin(), kNumAbstractClasses, class_probs.begin());
    kernels::softmax_inplace(class_probs.data(), kNumAbstractClasses);
    int greedy = next_token_greedy(sv.token_logits);

    // Merge classes that emit the same token; the reward depends on
    // tokens only, so subtrees with equal tokens are identical.
    std::array<std::pair<int, double>, kNumAbstractClasses> branches_by_token{};
    int n_branches = 0;
    auto add_branch = [&](int token, double p) {
      for (int i = 0; i < n_branches; ++i) {
        if (branches_by_token[static_cast<size_t>(i)].first == token) {
          branches_by_token[static_cast<size_t>(i)].second += p;
          return;
        }
      }
      branches_by_token[static_cast<size_t>(n_branches++)] = {token, p};
    };
    for (int c = 0; c < 4; ++c)
      add_branch(vocab.from_abstract(static_cast<AbstractClass>(c)),
                 class_probs[static_cast<size_t>(c)]);
    add_branch(greedy, class_probs[kNumAbstractClasses - 1]);

    int base_len = decoder.length();
    for (int i = 0; i < n_branches; ++i) {
      auto [token, p] = branches_by_token[static_cast<size_t>(i)];
      require(++branches <= branch_cap, ErrorKind::Resource,
              "exact_expected_reward: branch cap exceeded");
      double child_prob = prob * p;
      generated.push_back(token);
      if (token == vocab.eos_id() || depth + 1 >= horizon) {
        leaf(child_prob);
      } else {
        decoder.feed(token);
        visit(depth + 1, child_prob);
        decoder.truncate(base_len);
      }
      generated.pop_back();
    }
  }
};

}  // namespace

double exact_expected_reward(const ModelParams& params, const Vocab& vocab,
                             const Problem& problem, int max_new_tokens, long branch_cap) {
  require(max_new_tokens >= 0, ErrorKind::Contract, "exact_expected_reward: negative horizon");
  require(branch_cap > 0, ErrorKind::Contract, "exact_expected_reward: branch cap must be positive");
  std::vector<int> prompt = vocab.encode(problem.question);
  require(static_cast<int>(prompt.size()) + max_new_tokens <= params.config.max_seq_len,
          ErrorKind::Length, "exact_expected_reward: prompt plus horizon exceeds max_seq_len");

  if (max_new_tokens == 0)
    return outcome_reward_tokens(vocab, prompt, {}, problem.answer);

  Decoder decoder(params);
  decoder.prefill(prompt);
  Enumerator e{vocab, decoder, prompt, problem.answer, max_new_tokens, branch_cap};
  e.visit(0, 1.0);
  return e.total;
}

}  // namespace mprl
