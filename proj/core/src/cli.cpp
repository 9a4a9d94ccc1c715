#include "mprl/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mprl/checkpoint.hpp"
#include "mprl/data.hpp"
#include "mprl/decode.hpp"
#include "mprl/error.hpp"
#include "mprl/eval.hpp"
#include "mprl/experiment.hpp"
#include "mprl/oracle.hpp"
#include "mprl/policy.hpp"
#include "mprl/reward.hpp"

namespace mprl {

namespace {

namespace fs = std::filesystem;

TrainConfig apply_config_line(TrainConfig cfg, const std::string& key, const std::string& value) {
  try {
    if (key == "mode") cfg.mode = parse_train_mode(value);
    else if (key == "learning_rate") cfg.learning_rate = std::stod(value);
    else if (key == "batch_size") cfg.batch_size = std::stoi(value);
    else if (key == "beta") cfg.beta = std::stod(value);
    else if (key == "lambda") cfg.lambda = std::stod(value);
    else if (key == "gamma") cfg.gamma = std::stod(value);
    else if (key == "epochs") cfg.epochs = std::stoi(value);
    else if (key == "max_new_tokens") cfg.max_new_tokens = std::stoi(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "baseline_loss_weight") cfg.baseline_loss_weight = std::stod(value);
    else fail(ErrorKind::Config, "config file: unknown key '" + key + "'");
  } catch (const std::invalid_argument&) {
    fail(ErrorKind::Config, "config file: bad value for '" + key + "': " + value);
  } catch (const std::out_of_range&) {
    fail(ErrorKind::Config, "config file: value out of range for '" + key + "': " + value);
  }
  return cfg;
}

}  // namespace

TrainConfig load_train_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    size_t last = line.find_last_not_of(" \t\r");
    std::string trimmed = line.substr(first, last - first + 1);
    size_t eq = trimmed.find('=');
    require(eq != std::string::npos, ErrorKind::Config,
            "config file line " + std::to_string(lineno) + ": expected key=value");
    auto strip = [](std::string s) {
      size_t a = s.find_first_not_of(" \t");
      size_t b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    base = apply_config_line(base, strip(trimmed.substr(0, eq)), strip(trimmed.substr(eq + 1)));
  }
  return base;
}

namespace {

std::pair<int, int> parse_steps(const std::string& text) {
  size_t dash = text.find('-');
  try {
    if (dash == std::string::npos) {
      int k = std::stoi(text);
      return {k, k};
    }
    return {std::stoi(text.substr(0, dash)), std::stoi(text.substr(dash + 1))};
  } catch (const std::exception&) {
    fail(ErrorKind::Config, "bad --steps value '" + text + "' (expected K or MIN-MAX)");
  }
}

std::vector<Problem> load_problems(const std::string& path) {
  LoadResult loaded = load_gsm8k(path);
  if (loaded.skipped > 0)
    std::cerr << "note: skipped " << loaded.skipped << " unparseable record(s) in " << path
              << "\n";
  require(!loaded.problems.empty(), ErrorKind::Io, "no usable problems in " + path);
  return loaded.problems;
}

struct CommonModelFlags {
  int layers = 4, d_model = 128, heads = 4, d_ff = 512, max_seq = 160;

  void attach(CLI::App* cmd) {
    cmd->add_option("--layers", layers, "transformer layers");
    cmd->add_option("--d-model", d_model, "model width");
    cmd->add_option("--heads", heads, "attention heads");
    cmd->add_option("--d-ff", d_ff, "feed-forward width");
    cmd->add_option("--max-seq", max_seq, "maximum sequence length");
  }

  ModelConfig to_config(uint64_t init_seed) const {
    ModelConfig cfg;
    cfg.n_layers = layers;
    cfg.d_model = d_model;
    cfg.n_heads = heads;
    cfg.d_ff = d_ff;
    cfg.vocab_size = Vocab::standard().size();
    cfg.max_seq_len = max_seq;
    cfg.init_seed = init_seed;
    return cfg;
  }
};

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json records = nlohmann::json::array();
  for (const ProblemRecord& r : report.records) {
    nlohmann::json rec{{"index", r.index},
                       {"generated", r.generated},
                       {"gold", r.gold.to_string()},
                       {"correct", r.correct}};
    rec["extracted"] = r.extracted ? nlohmann::json(r.extracted->to_string()) : nlohmann::json();
    records.push_back(std::move(rec));
  }
  return nlohmann::json{{"n_problems", report.n_problems},
                        {"n_correct", report.n_correct},
                        {"accuracy", report.accuracy},
                        {"records", std::move(records)}};
}

int run_gen_data(int count, uint64_t seed, const std::string& steps, const std::string& out,
                 int operand_min, int operand_max, const std::string& operators) {
  CorpusSpec spec;
  spec.count = count;
  spec.seed = seed;
  std::tie(spec.steps_min, spec.steps_max) = parse_steps(steps);
  spec.operand_min = operand_min;
  spec.operand_max = operand_max;
  if (!operators.empty()) spec.operators.assign(operators.begin(), operators.end());
  std::vector<Problem> problems = generate_synthetic(spec);
  save_corpus(problems, out);
  std::cout << "wrote " << problems.size() << " problems to " << out << "\n";
  return 0;
}

int run_train(const std::string& mode_name, const std::string& data_path,
              const std::string& val_path, const std::string& out_dir,
              const CommonModelFlags& model_flags, const TrainConfig& train_cfg,
              int train_subset) {
  ExperimentConfig config;
  config.train = train_cfg;
  config.train.mode = parse_train_mode(mode_name);
  config.model = model_flags.to_config(train_cfg.seed);
  config.train_accuracy_subset = train_subset;

  std::vector<Problem> train_set = load_problems(data_path);
  std::vector<Problem> val_set;
  if (!val_path.empty()) val_set = load_problems(val_path);

  fs::create_directories(out_dir);
  TrainRunResult run =
      train_run(config.train.mode, train_set, val_set, Vocab::standard(), config, &std::cout);

  std::string ckpt_path = (fs::path(out_dir) / (mode_name + ".ckpt")).string();
  save_checkpoint(run.params, Vocab::standard(), ckpt_path);
  std::string metrics_path = (fs::path(out_dir) / "metrics.csv").string();
  write_metrics_csv(run.rows, metrics_path);
  std::cout << "checkpoint: " << ckpt_path << "\nmetrics: " << metrics_path << "\n";
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& report_path, int max_new_tokens) {
  LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
  std::vector<Problem> problems = load_problems(data_path);
  EvalReport report = evaluate(ckpt.params, ckpt.vocab, problems, max_new_tokens);
  std::printf("accuracy: %.2f%% (%d/%d)\n", report.accuracy, report.n_correct,
              report.n_problems);
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    require(out.good(), ErrorKind::Io, "cannot write report: " + report_path);
    out << report_to_json(report).dump(2) << "\n";
  }
  return 0;
}

int run_compare(const std::string& data_path, const std::string& val_path,
                const std::string& test_path, const std::string& out_dir,
                const CommonModelFlags& model_flags, const TrainConfig& train_cfg,
                int train_subset, int n_seeds, bool svg) {
  std::vector<Problem> train_set, val_set, test_set;
  if (data_path.empty()) {
    BenchmarkCorpora corpora = default_benchmark_corpora();
    train_set = std::move(corpora.train);
    val_set = std::move(corpora.validation);
    test_set = std::move(corpora.test);
    std::cout << "using the built-in synthetic benchmark (2000 train / 200 val / 500 test)\n";
  } else {
    train_set = load_problems(data_path);
    require(!val_path.empty() && !test_path.empty(), ErrorKind::Usage,
            "compare with --data also needs --val and --test");
    val_set = load_problems(val_path);
    test_set = load_problems(test_path);
  }

  fs::create_directories(out_dir);
  ExperimentConfig config;
  config.train = train_cfg;
  config.model = model_flags.to_config(train_cfg.seed);
  config.train_accuracy_subset = train_subset;

  std::vector<std::vector<double>> per_mode_accuracy(3);
  CompareResult first;
  for (int s = 0; s < n_seeds; ++s) {
    ExperimentConfig run_cfg = config;
    run_cfg.model.init_seed = train_cfg.seed + static_cast<uint64_t>(s);
    run_cfg.train.seed = train_cfg.seed + static_cast<uint64_t>(s);
    if (n_seeds > 1) std::cout << "--- seed " << run_cfg.train.seed << " ---\n";
    CompareResult result =
        compare_modes(train_set, val_set, test_set, Vocab::standard(), run_cfg, &std::cout);
    for (size_t m = 0; m < result.test_accuracy.size(); ++m)
      per_mode_accuracy[m].push_back(result.test_accuracy[m].second);
    if (s == 0) first = std::move(result);
  }

  std::string csv_path = (fs::path(out_dir) / "compare_metrics.csv").string();
  write_metrics_csv(first.rows, csv_path);
  if (svg)
    write_accuracy_svg(first.rows, "val", (fs::path(out_dir) / "accuracy_vs_epoch.svg").string());

  std::printf("\n%% problems solved (test set, greedy decoding)\n");
  std::printf("%-8s %10s", "mode", "accuracy");
  if (n_seeds > 1) std::printf(" %10s", "sd");
  std::printf("\n");
  const char* mode_names[] = {"ce", "ce_rl", "mixed"};
  std::vector<double> means(3, 0.0);
  for (int m = 0; m < 3; ++m) {
    const std::vector<double>& accs = per_mode_accuracy[static_cast<size_t>(m)];
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= static_cast<double>(accs.size());
    means[static_cast<size_t>(m)] = mean;
    std::printf("%-8s %10.2f", mode_names[m], mean);
    if (n_seeds > 1) {
      double var = 0.0;
      for (double a : accs) var += (a - mean) * (a - mean);
      var /= static_cast<double>(accs.size());
      std::printf(" %10.2f", std::sqrt(var));
    }
    std::printf("\n");
  }
  std::printf("mixed - ce gap: %+.2f points\n", means[2] - means[0]);
  std::cout << "metrics: " << csv_path << "\n";
  return 0;
}

int run_oracle_check(const std::string& ckpt_path, const std::string& question,
                     const std::string& answer_text, int horizon, long samples, long branch_cap,
                     uint64_t seed) {
  ModelParams params;
  Vocab vocab = Vocab::standard();
  if (!ckpt_path.empty()) {
    LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    params = std::move(ckpt.params);
    vocab = std::move(ckpt.vocab);
  } else {
    ModelConfig cfg;
    cfg.n_layers = 1;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.d_ff = 32;
    cfg.vocab_size = vocab.size();
    cfg.max_seq_len = 64;
    cfg.init_seed = seed;
    params = init_model(cfg);
    std::cout << "no checkpoint given; probing a random tiny model (seed " << seed << ")\n";
  }

  Problem probe;
  probe.question = question;
  std::optional<Rational> answer = Rational::parse_decimal(answer_text);
  require(answer.has_value(), ErrorKind::Usage, "--answer is not a number: " + answer_text);
  probe.answer = *answer;

  double exact = exact_expected_reward(params, vocab, probe, horizon, branch_cap);

  std::vector<int> prompt = vocab.encode(probe.question);
  Decoder decoder(params);
  decoder.prefill(prompt);
  Rng rng(seed + 1);
  double mean = 0.0;
  for (long i = 0; i < samples; ++i) {
    Trajectory traj = rollout_from(decoder, vocab, prompt, horizon, DecodeMode::Mixed, rng);
    mean += outcome_reward_tokens(vocab, prompt, traj.tokens, probe.answer);
  }
  mean /= static_cast<double>(samples);

  double se = std::sqrt(exact * (1.0 - exact) / static_cast<double>(samples));
  double diff = std::abs(mean - exact);
  bool pass = se > 0.0 ? diff <= 3.0 * se : diff == 0.0;
  std::printf("exact expected reward: %.6f\n", exact);
  std::printf("monte-carlo mean (%ld rollouts): %.6f\n", samples, mean);
  std::printf("|diff| = %.6f, 3*se = %.6f -> %s\n", diff, 3.0 * se, pass ? "PASS" : "FAIL");
  return pass ? 0 : 1;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"mixed-policy RL fine-tuning for arithmetic word problems"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic problem corpus");
  int gen_count = 100;
  uint64_t gen_seed = 1;
  std::string gen_steps = "1-3", gen_out;
  int gen_opmin = 1, gen_opmax = 20;
  std::string gen_operators;
  gen->add_option("--count", gen_count, "number of problems")->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--steps", gen_steps, "reasoning steps per problem (K or MIN-MAX)");
  gen->add_option("--out", gen_out, "output path (line-delimited records)")->required();
  gen->add_option("--operand-min", gen_opmin, "smallest operand");
  gen->add_option("--operand-max", gen_opmax, "largest operand");
  gen->add_option("--operators", gen_operators, "allowed operators, e.g. +-*/");

  // shared train/compare options
  auto add_train_options = [](CLI::App* cmd, TrainConfig& tc, std::string& config_path) {
    cmd->add_option("--config", config_path, "key=value config file");
    cmd->add_option("--epochs", tc.epochs, "training epochs");
    cmd->add_option("--seed", tc.seed, "seed for init, shuffling and sampling");
    cmd->add_option("--lr", tc.learning_rate, "Adam learning rate");
    cmd->add_option("--beta", tc.beta, "abstract cross-entropy weight");
    cmd->add_option("--lambda", tc.lambda, "policy-gradient weight");
    cmd->add_option("--gamma", tc.gamma, "reward discount");
    cmd->add_option("--max-new", tc.max_new_tokens, "generation budget per rollout");
    cmd->add_option("--baseline-weight", tc.baseline_loss_weight, "baseline regression weight");
  };

  // train
  auto* train = app.add_subcommand("train", "train one mode and write a checkpoint");
  std::string train_mode, train_data, train_val, train_config_path, train_out = "train_out";
  TrainConfig train_tc;
  CommonModelFlags train_model;
  int train_subset = 200;
  train->add_option("--mode", train_mode, "ce, ce_rl or mixed")->required();
  train->add_option("--data", train_data, "training corpus")->required();
  train->add_option("--val", train_val, "validation corpus");
  train->add_option("--out-dir", train_out, "output directory");
  train->add_option("--train-subset", train_subset, "train-split problems scored per epoch");
  add_train_options(train, train_tc, train_config_path);
  train_model.attach(train);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string eval_ckpt, eval_data, eval_report;
  int eval_max_new = 64;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--data", eval_data, "evaluation corpus")->required();
  eval_cmd->add_option("--report", eval_report, "write a JSON report here");
  eval_cmd->add_option("--max-new", eval_max_new, "generation budget");

  // compare
  auto* compare = app.add_subcommand("compare", "train ce, ce_rl and mixed from one init");
  std::string cmp_data, cmp_val, cmp_test, cmp_config_path, cmp_out = "compare_out";
  TrainConfig cmp_tc;
  CommonModelFlags cmp_model;
  int cmp_subset = 200, cmp_seeds = 1;
  bool cmp_svg = false;
  compare->add_option("--data", cmp_data, "training corpus (omit for the built-in benchmark)");
  compare->add_option("--val", cmp_val, "validation corpus");
  compare->add_option("--test", cmp_test, "test corpus");
  compare->add_option("--out-dir", cmp_out, "output directory");
  compare->add_option("--seeds", cmp_seeds, "seed sweep size (mean and sd over seeds)");
  compare->add_flag("--svg", cmp_svg, "emit an accuracy-vs-epoch chart");
  compare->add_option("--train-subset", cmp_subset, "train-split problems scored per epoch");
  add_train_options(compare, cmp_tc, cmp_config_path);
  cmp_model.attach(compare);

  // oracle-check
  auto* oracle = app.add_subcommand("oracle-check",
                                    "exhaustive expected reward vs monte-carlo sampling");
  std::string orc_ckpt, orc_question = "3 + 4 = 7 #### ", orc_answer = "7";
  int orc_horizon = 4;
  long orc_samples = 200000, orc_cap = 2000000;
  uint64_t orc_seed = 7;
  oracle->add_option("--checkpoint", orc_ckpt, "checkpoint path (omit for a tiny random model)");
  oracle->add_option("--horizon", orc_horizon, "generation horizon");
  oracle->add_option("--samples", orc_samples, "monte-carlo rollouts");
  oracle->add_option("--branch-cap", orc_cap, "enumeration branch cap");
  oracle->add_option("--question", orc_question, "probe question");
  oracle->add_option("--answer", orc_answer, "gold answer");
  oracle->add_option("--seed", orc_seed, "model/sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  // Config file values sit under explicitly passed flags.
  auto fold_config = [](CLI::App* cmd, TrainConfig flag_values, const std::string& path) {
    if (path.empty()) return flag_values;
    TrainConfig cfg = load_train_config(path, TrainConfig{});
    cfg.mode = flag_values.mode;
    if (cmd->count("--epochs")) cfg.epochs = flag_values.epochs;
    if (cmd->count("--seed")) cfg.seed = flag_values.seed;
    if (cmd->count("--lr")) cfg.learning_rate = flag_values.learning_rate;
    if (cmd->count("--beta")) cfg.beta = flag_values.beta;
    if (cmd->count("--lambda")) cfg.lambda = flag_values.lambda;
    if (cmd->count("--gamma")) cfg.gamma = flag_values.gamma;
    if (cmd->count("--max-new")) cfg.max_new_tokens = flag_values.max_new_tokens;
    if (cmd->count("--baseline-weight"))
      cfg.baseline_loss_weight = flag_values.baseline_loss_weight;
    return cfg;
  };

  try {
    if (gen->parsed())
      return run_gen_data(gen_count, gen_seed, gen_steps, gen_out, gen_opmin, gen_opmax,
                          gen_operators);
    if (train->parsed())
      return run_train(train_mode, train_data, train_val, train_out, train_model,
                       fold_config(train, train_tc, train_config_path), train_subset);
    if (eval_cmd->parsed()) return run_eval(eval_ckpt, eval_data, eval_report, eval_max_new);
    if (compare->parsed())
      return run_compare(cmp_data, cmp_val, cmp_test, cmp_out, cmp_model,
                         fold_config(compare, cmp_tc, cmp_config_path), cmp_subset, cmp_seeds,
                         cmp_svg);
    if (oracle->parsed())
      return run_oracle_check(orc_ckpt, orc_question, orc_answer, orc_horizon, orc_samples,
                              orc_cap, orc_seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::Usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace mprl
