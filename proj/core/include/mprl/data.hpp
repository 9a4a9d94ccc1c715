#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mprl/rational.hpp"
#include "mprl/rng.hpp"
#include "mprl/vocab.hpp"

namespace mprl {

/// One word problem: question text, gold reasoning text ending in the
/// "#### <number>" answer line, and the parsed numeric answer.
struct Problem {
  std::string question;
  std::string solution;
  Rational answer;
};

struct CorpusSpec {
  int count = 0;
  uint64_t seed = 0;
  int steps_min = 1;
  int steps_max = 3;
  int operand_min = 1;
  int operand_max = 20;
  std::vector<char> operators = {'+', '-', '*', '/'};

  void validate() const;
};

/// Deterministic templated corpus; a pure function of the spec.
/// Each problem is a 1..3 step chain over non-negative integers with
/// exact division only, solution lines "a op b = c" joined by spaces and
/// terminated by "#### <answer>".
std::vector<Problem> generate_synthetic(const CorpusSpec& spec);

struct LoadResult {
  std::vector<Problem> problems;
  int skipped = 0;
};

/// Line-delimited JSON records {"question": ..., "answer": ...} in the
/// GSM8K convention; the answer text must end with "#### <number>".
/// Records that fail to parse, lack the marker, or contain characters
/// outside the vocabulary are skipped and counted.
LoadResult load_gsm8k(const std::string& path);

/// Export in the same line-delimited format (round-trips through
/// load_gsm8k).
void save_corpus(const std::vector<Problem>& problems, const std::string& path);

/// Number after the last "####" marker: optional sign, digits, optional
/// fraction digits. Text after the number is ignored. nullopt when the
/// marker is missing or no number follows it.
std::optional<Rational> extract_final_answer(std::string_view text);

/// Right-pad with PAD to the requested length; the mask marks original
/// positions. Contract error when ids are longer than length.
std::pair<std::vector<int>, std::vector<uint8_t>> pad_to(const std::vector<int>& ids, int length,
                                                         const Vocab& vocab);

struct CorpusSplit {
  std::vector<Problem> train;
  std::vector<Problem> validation;
};

/// Shuffle the pool with the given rng and split off the first n_train
/// problems for training and the rest for validation.
CorpusSplit split_train_val(std::vector<Problem> pool, int n_train, Rng& rng);

}  // namespace mprl
