#include "mprl/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

#include "mprl/error.hpp"

namespace mprl {

void CorpusSpec::validate() const {
  require(count > 0, ErrorKind::Config, "corpus spec: count must be positive");
  require(steps_min >= 1 && steps_min <= steps_max, ErrorKind::Config,
          "corpus spec: bad step range");
  require(operand_min >= 1 && operand_min <= operand_max, ErrorKind::Config,
          "corpus spec: bad operand range");
  require(!operators.empty(), ErrorKind::Config, "corpus spec: no operators allowed");
  for (char op : operators)
    require(op == '+' || op == '-' || op == '*' || op == '/', ErrorKind::Config,
            std::string("corpus spec: unknown operator '") + op + "'");
}

namespace {

const char* kNames[] = {"Sam", "Tom", "Mia", "Ben", "Ava", "Leo", "Zoe", "Max", "Eli", "Ida"};
const char* kItems[] = {"pens", "cups", "hats", "bags", "cats", "maps", "keys", "jars", "fans",
                        "caps"};

// Two-digit cap on every running value. With the clause templates below,
// the worst-case encoded problem (3 steps, 2-digit numbers everywhere)
// is 157 tokens including EOS, inside the default 160-token window.
constexpr int64_t kResultCap = 99;

struct StepDraw {
  char op;
  int64_t operand;
  int64_t result;
};

// Operands valid for `op` applied to the running value `v`, honoring the
// configured operand range, exact division, and non-negative results.
std::vector<int64_t> valid_operands(char op, int64_t v, const CorpusSpec& spec) {
  std::vector<int64_t> out;
  for (int64_t a = spec.operand_min; a <= spec.operand_max; ++a) {
    switch (op) {
      case '+':
        if (v + a <= kResultCap) out.push_back(a);
        break;
      case '-':
        if (a <= v) out.push_back(a);
        break;
      case '*':
        if (a >= 2 && v * a <= kResultCap) out.push_back(a);
        break;
      case '/':
        if (a >= 2 && v % a == 0) out.push_back(a);
        break;
      default: break;
    }
  }
  return out;
}

std::string clause_for(const StepDraw& step, const std::string& name, const std::string& item) {
  std::string a = std::to_string(step.operand);
  switch (step.op) {
    case '+': return name + " gets " + a + " more " + item + ". ";
    case '-': return name + " gives " + a + " " + item + " away. ";
    case '*': return "Now " + a + " times as many. ";
    case '/': return "Split " + a + " ways, keep one. ";
  }
  return "";
}

std::optional<Problem> try_generate(const CorpusSpec& spec, Rng& rng) {
  std::string name = kNames[rng.below(std::size(kNames))];
  std::string item = kItems[rng.below(std::size(kItems))];
  int steps =
      spec.steps_min + static_cast<int>(rng.below(static_cast<uint64_t>(spec.steps_max - spec.steps_min + 1)));
  int64_t value =
      spec.operand_min +
      static_cast<int64_t>(rng.below(static_cast<uint64_t>(spec.operand_max - spec.operand_min + 1)));

  std::string question = name + " has " + std::to_string(value) + " " + item + ". ";
  std::string lines;
  for (int s = 0; s < steps; ++s) {
    char op = spec.operators[rng.below(spec.operators.size())];
    std::vector<int64_t> candidates = valid_operands(op, value, spec);
    if (candidates.empty()) return std::nullopt;  // caller redraws the problem
    int64_t a = candidates[rng.below(candidates.size())];
    int64_t result = 0;
    switch (op) {
      case '+': result = value + a; break;
      case '-': result = value - a; break;
      case '*': result = value * a; break;
      case '/': result = value / a; break;
    }
    StepDraw step{op, a, result};
    question += clause_for(step, name, item);
    lines += std::to_string(value) + " " + op + " " + std::to_string(a) + " = " +
             std::to_string(result) + " ";
    value = result;
  }
  question += "How many " + item + " now?";

  Problem p;
  p.question = question;
  p.solution = lines + "#### " + std::to_string(value);
  p.answer = Rational::from_int(value);
  return p;
}

}  // namespace

std::vector<Problem> generate_synthetic(const CorpusSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<Problem> out;
  out.reserve(static_cast<size_t>(spec.count));
  while (static_cast<int>(out.size()) < spec.count) {
    int attempts = 0;
    std::optional<Problem> p;
    while (!(p = try_generate(spec, rng))) {
      require(++attempts < 1000, ErrorKind::Contract,
              "corpus generation cannot satisfy the operator constraints");
    }
    out.push_back(std::move(*p));
  }
  return out;
}

std::optional<Rational> extract_final_answer(std::string_view text) {
  size_t marker = text.rfind("####");
  if (marker == std::string_view::npos) return std::nullopt;
  size_t i = marker + 4;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  size_t start = i;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) ++i;
  size_t digits_start = i;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
  if (i == digits_start) return std::nullopt;
  if (i < text.size() && text[i] == '.') {
    size_t j = i + 1;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i + 1) i = j;  // fraction only counts when digits follow the point
  }
  return Rational::parse_decimal(text.substr(start, i - start));
}

LoadResult load_gsm8k(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open dataset file: " + path);
  const Vocab& vocab = Vocab::standard();
  LoadResult result;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.contains("question") || !record.contains("answer") ||
        !record["question"].is_string() || !record["answer"].is_string()) {
      ++result.skipped;
      continue;
    }
    Problem p;
    p.question = record["question"].get<std::string>();
    p.solution = record["answer"].get<std::string>();
    std::optional<Rational> answer = extract_final_answer(p.solution);
    if (!answer || !vocab.encodable(p.question) || !vocab.encodable(p.solution)) {
      ++result.skipped;
      continue;
    }
    p.answer = *answer;
    result.problems.push_back(std::move(p));
  }
  return result;
}

void save_corpus(const std::vector<Problem>& problems, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write dataset file: " + path);
  for (const Problem& p : problems) {
    nlohmann::json record{{"question", p.question}, {"answer", p.solution}};
    out << record.dump() << "\n";
  }
  require(out.good(), ErrorKind::Io, "write failed: " + path);
}

std::pair<std::vector<int>, std::vector<uint8_t>> pad_to(const std::vector<int>& ids, int length,
                                                         const Vocab& vocab) {
  require(length >= static_cast<int>(ids.size()), ErrorKind::Contract,
          "pad_to: target length shorter than the sequence");
  std::vector<int> padded = ids;
  padded.resize(static_cast<size_t>(length), vocab.pad_id());
  std::vector<uint8_t> mask(static_cast<size_t>(length), 0);
  std::fill_n(mask.begin(), ids.size(), uint8_t{1});
  return {std::move(padded), std::move(mask)};
}

CorpusSplit split_train_val(std::vector<Problem> pool, int n_train, Rng& rng) {
  require(n_train >= 0 && n_train <= static_cast<int>(pool.size()), ErrorKind::Contract,
          "split_train_val: n_train exceeds the pool");
  rng.shuffle(pool);
  CorpusSplit split;
  split.train.assign(pool.begin(), pool.begin() + n_train);
  split.validation.assign(pool.begin() + n_train, pool.end());
  return split;
}

}  // namespace mprl
