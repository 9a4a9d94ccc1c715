#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mprl/data.hpp"
#include "mprl/model.hpp"
#include "mprl/rational.hpp"

namespace mprl {

struct ProblemRecord {
  int index = 0;
  std::string generated;
  std::optional<Rational> extracted;
  Rational gold;
  bool correct = false;
};

struct EvalReport {
  int n_problems = 0;
  int n_correct = 0;
  double accuracy = 0.0;  // percent
  std::vector<ProblemRecord> records;
};

bool same_eval_report(const EvalReport& a, const EvalReport& b);

/// Greedy decode every problem and score by final-answer match. Pure
/// function of (params, problems); contract error on an empty list.
EvalReport evaluate(const ModelParams& params, const Vocab& vocab,
                    const std::vector<Problem>& problems, int max_new_tokens);

}  // namespace mprl
