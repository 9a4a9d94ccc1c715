#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mprl/checkpoint.hpp"
#include "mprl/cli.hpp"
#include "mprl/data.hpp"
#include "mprl/error.hpp"
#include "mprl/eval.hpp"
#include "mprl/experiment.hpp"
#include "mprl/kernels.hpp"
#include "mprl/metrics.hpp"
#include "mprl/oracle.hpp"
#include "mprl/policy.hpp"
#include "mprl/reward.hpp"

using namespace mprl;
namespace fs = std::filesystem;

namespace {

ModelConfig small_config(uint64_t seed) {
  ModelConfig cfg;
  cfg.n_layers = 1;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.d_ff = 32;
  cfg.vocab_size = 74;
  cfg.max_seq_len = 96;
  cfg.init_seed = seed;
  return cfg;
}

// A model whose final layer norm collapses to a constant hidden state
// (d_model = 1), making every head position-independent and analytically
// tractable: token logits equal lm_head's row, abstract logits equal
// abstract_head's row.
ModelParams constant_model(std::array<double, 5> abstract_logits) {
  ModelConfig cfg;
  cfg.n_layers = 1;
  cfg.d_model = 1;
  cfg.n_heads = 1;
  cfg.d_ff = 1;
  cfg.vocab_size = 74;
  cfg.max_seq_len = 64;
  ModelParams p = init_model(cfg);
  p.lnf_bias.values()[0] = 1.0;  // hidden == 1 everywhere
  for (double& v : p.lm_head.values()) v = 0.0;
  for (int c = 0; c < 5; ++c) p.abstract_head.values()[static_cast<size_t>(c)] = abstract_logits[static_cast<size_t>(c)];
  return p;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(std::vector<std::string> args) {
  std::vector<char*> argv;
  args.insert(args.begin(), "mprl");
  for (std::string& a : args) argv.push_back(a.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("evaluate: accuracy arithmetic, determinism, empty contract") {
  // greedy decoding of the constant model emits '0' forever, so a
  // question ending with the marker scores 1 against gold 0 and an
  // ordinary question scores 0.
  ModelParams p = constant_model({0, 0, 0, 0, 0});
  const Vocab& vocab = Vocab::standard();

  std::vector<Problem> problems;
  for (int i = 0; i < 25; ++i) {
    Problem prob;
    if (i < 2) {
      prob.question = "what is nothing? #### ";
      prob.answer = Rational::from_int(0);
    } else {
      prob.question = "count the pens.";
      prob.answer = Rational::from_int(7);
    }
    prob.solution = "#### " + prob.answer.to_string();
    problems.push_back(prob);
  }

  EvalReport report = evaluate(p, vocab, problems, 8);
  CHECK(report.n_problems == 25);
  CHECK(report.n_correct == 2);
  CHECK(report.accuracy == doctest::Approx(8.0).epsilon(1e-12));

  EvalReport again = evaluate(p, vocab, problems, 8);
  CHECK(same_eval_report(report, again));

  try {
    evaluate(p, vocab, {}, 8);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Contract);
  }
}

TEST_CASE("checkpoint: round trip preserves config, vocab, parameters, and evaluation") {
  TempDir dir("mprl_ckpt_test");
  ModelParams p = init_model(small_config(321));
  const Vocab& vocab = Vocab::standard();

  std::string path = dir.file("model.ckpt");
  save_checkpoint(p, vocab, path);
  LoadedCheckpoint loaded = load_checkpoint(path);

  CHECK(loaded.params.config.n_layers == p.config.n_layers);
  CHECK(loaded.params.config.d_model == p.config.d_model);
  CHECK(loaded.params.config.init_seed == p.config.init_seed);
  CHECK(loaded.vocab.size() == vocab.size());
  CHECK(loaded.vocab.symbols() == vocab.symbols());

  auto orig = p.ordered();
  auto back = loaded.params.ordered();
  REQUIRE(orig.size() == back.size());
  for (size_t i = 0; i < orig.size(); ++i)
    for (int64_t j = 0; j < orig[i]->size(); ++j)
      CHECK(back[i]->data()[j] ==
            static_cast<double>(static_cast<float>(orig[i]->data()[j])));

  CorpusSpec spec;
  spec.count = 10;
  spec.seed = 77;
  spec.steps_min = spec.steps_max = 1;
  std::vector<Problem> problems = generate_synthetic(spec);
  EvalReport before = evaluate(p, vocab, problems, 24);
  EvalReport after = evaluate(loaded.params, loaded.vocab, problems, 24);
  CHECK(same_eval_report(before, after));

  // a second save/load is byte-stable (f32 storage is idempotent)
  std::string path2 = dir.file("model2.ckpt");
  save_checkpoint(loaded.params, loaded.vocab, path2);
  LoadedCheckpoint twice = load_checkpoint(path2);
  std::string path3 = dir.file("model3.ckpt");
  save_checkpoint(twice.params, twice.vocab, path3);
  CHECK(read_bytes(path2) == read_bytes(path3));
}

TEST_CASE("checkpoint: corruption diagnostics name the failed check") {
  TempDir dir("mprl_ckpt_corrupt");
  ModelParams p = init_model(small_config(5));
  std::string path = dir.file("model.ckpt");
  save_checkpoint(p, Vocab::standard(), path);
  std::string bytes = read_bytes(path);

  SUBCASE("truncated file") {
    std::ofstream out(dir.file("trunc.ckpt"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    try {
      load_checkpoint(dir.file("trunc.ckpt"));
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Corrupt);
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
  }

  SUBCASE("flipped payload byte fails the checksum") {
    std::string flipped = bytes;
    flipped[flipped.size() / 2] = static_cast<char>(flipped[flipped.size() / 2] ^ 0x40);
    std::ofstream out(dir.file("flip.ckpt"), std::ios::binary);
    out.write(flipped.data(), static_cast<std::streamsize>(flipped.size()));
    out.close();
    try {
      load_checkpoint(dir.file("flip.ckpt"));
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Corrupt);
      CHECK(std::string(e.what()).find("checksum") != std::string::npos);
    }
  }

  SUBCASE("bad magic") {
    std::string wrong = bytes;
    wrong[0] = 'X';
    std::ofstream out(dir.file("magic.ckpt"), std::ios::binary);
    out.write(wrong.data(), static_cast<std::streamsize>(wrong.size()));
    out.close();
    try {
      load_checkpoint(dir.file("magic.ckpt"));
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Corrupt);
      CHECK(std::string(e.what()).find("magic") != std::string::npos);
    }
  }
}

TEST_CASE("metrics csv: header shape, decimal round trip, reload") {
  TempDir dir("mprl_metrics_test");
  std::vector<MetricsRow> rows;
  for (int epoch = 1; epoch <= 2; ++epoch)
    for (const char* split : {"train", "val"}) {
      MetricsRow r;
      r.epoch = epoch;
      r.mode = "mixed";
      r.split = split;
      r.ce_loss = 1.23456789012 * epoch;
      r.abstract_loss = 0.5 / epoch;
      r.rl_loss = 0.000123456789;
      r.baseline_loss = 7.0;
      r.accuracy = 33.3333333;
      rows.push_back(r);
    }

  std::string path = dir.file("metrics.csv");
  write_metrics_csv(rows, path);

  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 5);  // header + 2 epochs x 2 splits

  std::vector<MetricsRow> reloaded = read_metrics_csv(path);
  REQUIRE(reloaded.size() == rows.size());
  std::string path2 = dir.file("metrics2.csv");
  write_metrics_csv(reloaded, path2);
  CHECK(read_bytes(path) == read_bytes(path2));
}

TEST_CASE("accuracy svg has one polyline per mode") {
  TempDir dir("mprl_svg_test");
  std::vector<MetricsRow> rows;
  for (const char* mode : {"ce", "ce_rl", "mixed"})
    for (int epoch = 1; epoch <= 3; ++epoch) {
      MetricsRow r;
      r.epoch = epoch;
      r.mode = mode;
      r.split = "val";
      r.accuracy = 10.0 * epoch;
      rows.push_back(r);
    }
  std::string path = dir.file("acc.svg");
  write_accuracy_svg(rows, "val", path);
  std::string svg = read_bytes(path);
  size_t count = 0, pos = 0;
  while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
    ++count;
    pos += 9;
  }
  CHECK(count == 3);
}

TEST_CASE("exact_expected_reward: single-trajectory and closed-form cases") {
  const Vocab& vocab = Vocab::standard();

  SUBCASE("near one-hot Rest reduces to the greedy rollout's reward") {
    ModelParams p = constant_model({-50, -50, -50, -50, 50});
    Problem probe;
    probe.question = "x #### ";
    probe.answer = Rational::from_int(0);  // greedy emits '0' forever
    double expectation = exact_expected_reward(p, vocab, probe, 3, 100000);
    Rng rng(1);
    std::vector<int> prompt = vocab.encode(probe.question);
    Trajectory greedy = rollout(p, vocab, prompt, 3, DecodeMode::Greedy, rng);
    int r = outcome_reward_tokens(vocab, prompt, greedy.tokens, probe.answer);
    CHECK(expectation == doctest::Approx(static_cast<double>(r)).epsilon(1e-12));
  }

  SUBCASE("two-step closed form from the constant policy") {
    std::array<double, 5> logits{0.4, -0.3, 0.2, -1.0, 0.9};
    ModelParams p = constant_model(logits);
    std::array<double, 5> probs = logits;
    kernels::softmax_inplace(probs.data(), 5);
    double p_plus = probs[0], p_minus = probs[1], p_rest = probs[4];

    Problem probe;
    probe.question = "y #### ";
    probe.answer = Rational::from_int(0);
    // rewarded token pairs: "+0", "-0", and every "0?" (greedy '0' first)
    double expected = p_plus * p_rest + p_minus * p_rest + p_rest;
    double computed = exact_expected_reward(p, vocab, probe, 2, 100000);
    CHECK(computed == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("branch cap raises a resource error") {
    ModelParams p = constant_model({0, 0, 0, 0, 0});
    Problem probe;
    probe.question = "z #### ";
    probe.answer = Rational::from_int(0);
    try {
      exact_expected_reward(p, vocab, probe, 6, 10);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Resource);
    }
  }
}

TEST_CASE("exact_expected_reward agrees with monte-carlo sampling on a random model") {
  const Vocab& vocab = Vocab::standard();
  ModelParams p = init_model(small_config(2718));
  Problem probe;
  probe.question = "3 + 4 = 7 #### ";
  probe.answer = Rational::from_int(7);

  double exact = exact_expected_reward(p, vocab, probe, 3, 1000000);
  CHECK(exact >= 0.0);
  CHECK(exact <= 1.0);

  std::vector<int> prompt = vocab.encode(probe.question);
  Decoder decoder(p);
  decoder.prefill(prompt);
  Rng rng(31337);
  const int n = 20000;
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    Trajectory traj = rollout_from(decoder, vocab, prompt, 3, DecodeMode::Mixed, rng);
    mean += outcome_reward_tokens(vocab, prompt, traj.tokens, probe.answer);
  }
  mean /= n;
  double se = std::sqrt(exact * (1.0 - exact) / n);
  if (se > 0.0)
    CHECK(std::abs(mean - exact) <= 4.0 * se);  // generous at unit-test scale
  else
    CHECK(mean == exact);
}

TEST_CASE("train config files: parsing and precedence") {
  TempDir dir("mprl_cfg_test");
  std::string path = dir.file("train.cfg");
  {
    std::ofstream out(path);
    out << "# comment line\n";
    out << "learning_rate = 0.001\n";
    out << "beta=0.5\n";
    out << "lambda = 0.2  # trailing comment\n";
    out << "epochs = 3\n";
    out << "max_new_tokens=32\n";
  }
  TrainConfig cfg = load_train_config(path, TrainConfig{});
  CHECK(cfg.learning_rate == 0.001);
  CHECK(cfg.beta == 0.5);
  CHECK(cfg.lambda == 0.2);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.max_new_tokens == 32);
  CHECK(cfg.gamma == 0.9);  // untouched default

  {
    std::ofstream out(path);
    out << "unknown_key = 5\n";
  }
  try {
    load_train_config(path, TrainConfig{});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }

  try {
    load_train_config(dir.file("missing.cfg"), TrainConfig{});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
}

TEST_CASE("cli: gen-data, train, eval, checkpoints and exit codes") {
  TempDir dir("mprl_cli_test");
  std::string data = dir.file("train.jsonl");

  CHECK(run_cli({"gen-data", "--count", "8", "--seed", "5", "--steps", "1", "--out", data}) == 0);
  LoadResult loaded = load_gsm8k(data);
  CHECK(loaded.problems.size() == 8);

  std::string out_a = dir.file("run_a");
  std::string out_b = dir.file("run_b");
  std::vector<std::string> train_args{
      "train",      "--mode",  "mixed", "--data", data,  "--out-dir", out_a,
      "--epochs",   "2",       "--seed", "9",     "--lr", "0.001",
      "--layers",   "1",       "--d-model", "16", "--heads", "2",
      "--d-ff",     "32",      "--max-seq", "112", "--max-new", "24"};
  CHECK(run_cli(train_args) == 0);
  train_args[6] = out_b;
  CHECK(run_cli(train_args) == 0);

  // identical seeds produce identical metrics files
  CHECK(read_bytes(out_a + "/metrics.csv") == read_bytes(out_b + "/metrics.csv"));
  CHECK(read_bytes(out_a + "/mixed.ckpt") == read_bytes(out_b + "/mixed.ckpt"));

  std::string report = dir.file("report.json");
  CHECK(run_cli({"eval", "--checkpoint", out_a + "/mixed.ckpt", "--data", data, "--report",
                 report, "--max-new", "24"}) == 0);
  CHECK(fs::exists(report));

  // missing checkpoint: nonzero exit, no partial report
  std::string report2 = dir.file("report2.json");
  CHECK(run_cli({"eval", "--checkpoint", dir.file("nope.ckpt"), "--data", data, "--report",
                 report2}) != 0);
  CHECK_FALSE(fs::exists(report2));

  CHECK(run_cli({"no-such-command"}) == 2);
  CHECK(run_cli({"train", "--bogus-flag", "1"}) == 2);
  CHECK(run_cli({"gen-data", "--count", "4", "--seed", "1", "--steps", "junk", "--out",
                 dir.file("x.jsonl")}) != 0);
}

TEST_CASE("cli: oracle-check runs its probe end to end") {
  CHECK(run_cli({"oracle-check", "--horizon", "2", "--samples", "5000", "--seed", "11"}) == 0);
}

TEST_CASE("cli: compare runs end to end at toy scale and emits table, csv, svg") {
  TempDir dir("mprl_cli_compare");
  std::string data = dir.file("train.jsonl");
  std::string val = dir.file("val.jsonl");
  std::string test = dir.file("test.jsonl");
  CHECK(run_cli({"gen-data", "--count", "12", "--seed", "3", "--steps", "1", "--out", data}) == 0);
  CHECK(run_cli({"gen-data", "--count", "6", "--seed", "4", "--steps", "1", "--out", val}) == 0);
  CHECK(run_cli({"gen-data", "--count", "6", "--seed", "5", "--steps", "1", "--out", test}) == 0);

  std::string out_dir = dir.file("cmp");
  CHECK(run_cli({"compare", "--data", data,  "--val", val,    "--test", test,
                 "--out-dir", out_dir, "--epochs", "1",  "--seed", "2",
                 "--layers", "1",  "--d-model", "16", "--heads", "2",
                 "--d-ff", "32", "--max-seq", "112", "--max-new", "24",
                 "--train-subset", "4", "--svg"}) == 0);
  CHECK(fs::exists(out_dir + "/compare_metrics.csv"));
  CHECK(fs::exists(out_dir + "/accuracy_vs_epoch.svg"));

  std::vector<MetricsRow> rows = read_metrics_csv(out_dir + "/compare_metrics.csv");
  int test_rows = 0, val_rows = 0;
  for (const MetricsRow& r : rows) {
    if (r.split == "test") ++test_rows;
    if (r.split == "val") ++val_rows;
  }
  CHECK(test_rows == 3);  // one per mode
  CHECK(val_rows == 3);   // one epoch per mode
}
