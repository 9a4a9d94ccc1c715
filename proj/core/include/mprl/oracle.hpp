#pragma once

#include "mprl/data.hpp"
#include "mprl/model.hpp"
#include "mprl/vocab.hpp"

namespace mprl {

/// Exhaustively enumerate every trajectory the mixed policy can produce
/// from the problem's question within max_new_tokens steps (the four
/// operator branches plus the deterministic greedy branch; branches that
/// pick the same token are merged), multiply branch probabilities, and
/// return the exact expected terminal reward.
///
/// Resource error once more than branch_cap branches have been explored.
double exact_expected_reward(const ModelParams& params, const Vocab& vocab,
                             const Problem& problem, int max_new_tokens, long branch_cap);

}  // namespace mprl
