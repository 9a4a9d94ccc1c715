#include "mprl/eval.hpp"

#include "mprl/error.hpp"
#include "mprl/policy.hpp"
#include "mprl/reward.hpp"

namespace mprl {

bool same_eval_report(const EvalReport& a, const EvalReport& b) {
  if (a.n_problems != b.n_problems || a.n_correct != b.n_correct) return false;
  if (a.records.size() != b.records.size()) return false;
  for (size_t i = 0; i < a.records.size(); ++i) {
    const ProblemRecord& x = a.records[i];
    const ProblemRecord& y = b.records[i];
    if (x.index != y.index || x.generated != y.generated || x.correct != y.correct ||
        x.extracted != y.extracted || !(x.gold == y.gold))
      return false;
  }
  return true;
}

EvalReport evaluate(const ModelParams& params, const Vocab& vocab,
                    const std::vector<Problem>& problems, int max_new_tokens) {
  require(!problems.empty(), ErrorKind::Contract,
          "evaluate: empty problem list leaves accuracy undefined");
  EvalReport report;
  report.n_problems = static_cast<int>(problems.size());

  Rng unused(0);  // greedy decoding draws nothing
  for (int i = 0; i < report.n_problems; ++i) {
    const Problem& problem = problems[static_cast<size_t>(i)];
    std::vector<int> prompt = vocab.encode(problem.question);
    int budget =
        std::min(max_new_tokens, params.config.max_seq_len - static_cast<int>(prompt.size()));
    require(budget > 0, ErrorKind::Length, "evaluate: no room to generate after the prompt");
    Trajectory traj = rollout(params, vocab, prompt, budget, DecodeMode::Greedy, unused);

    ProblemRecord rec;
    rec.index = i;
    rec.generated = vocab.decode(traj.tokens);
    std::string full = vocab.decode(prompt) + rec.generated;
    rec.extracted = extract_final_answer(full);
    rec.gold = problem.answer;
    rec.correct = rec.extracted && *rec.extracted == problem.answer;
    if (rec.correct) ++report.n_correct;
    report.records.push_back(std::move(rec));
  }
  report.accuracy = 100.0 * report.n_correct / report.n_problems;
  return report;
}

}  // namespace mprl
