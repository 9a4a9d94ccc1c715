#include "mprl/model.hpp"

#include <cmath>
#include <string>

#include "mprl/error.hpp"
#include "mprl/rng.hpp"

namespace mprl {

void ModelConfig::validate() const {
  require(n_layers > 0, ErrorKind::Config, "model config: n_layers must be positive");
  require(d_model > 0 && n_heads > 0, ErrorKind::Config, "model config: bad widths");
  require(d_model % n_heads == 0, ErrorKind::Config,
          "model config: d_model (" + std::to_string(d_model) + ") not divisible by n_heads (" +
              std::to_string(n_heads) + ")");
  require(d_ff > 0, ErrorKind::Config, "model config: d_ff must be positive");
  require(vocab_size > 0, ErrorKind::Config, "model config: vocab_size must be positive");
  require(max_seq_len > 0, ErrorKind::Config, "model config: max_seq_len must be positive");
}

std::vector<Tensor*> ModelParams::ordered() {
  std::vector<Tensor*> out{&tok_emb, &pos_emb};
  for (LayerParams& l : layers) {
    out.insert(out.end(), {&l.ln1_gain, &l.ln1_bias, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv,
                           &l.w_attn_out, &l.b_attn_out, &l.ln2_gain, &l.ln2_bias, &l.w_ff_in,
                           &l.b_ff_in, &l.w_ff_out, &l.b_ff_out});
  }
  out.insert(out.end(), {&lnf_gain, &lnf_bias, &lm_head, &abstract_head, &baseline_head});
  return out;
}

std::vector<const Tensor*> ModelParams::ordered() const {
  auto mutable_list = const_cast<ModelParams*>(this)->ordered();
  return {mutable_list.begin(), mutable_list.end()};
}

int64_t ModelParams::parameter_count() const {
  int64_t total = 0;
  for (const Tensor* t : ordered()) total += t->size();
  return total;
}

void ModelParams::ensure_grads() {
  for (Tensor* t : ordered()) t->ensure_grad();
}

void ModelParams::zero_grads() {
  for (Tensor* t : ordered()) t->zero_grad();
}

namespace {

void fill_gauss(Tensor& t, Rng& rng, double std_dev) {
  for (double& v : t.values()) v = std_dev * rng.gauss();
}

void fill_const(Tensor& t, double value) {
  for (double& v : t.values()) v = value;
}

}  // namespace

ModelParams make_param_layout(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  const int d = config.d_model, ff = config.d_ff, v = config.vocab_size;

  p.tok_emb = Tensor({v, d});
  p.pos_emb = Tensor({config.max_seq_len, d});
  p.layers.resize(static_cast<size_t>(config.n_layers));
  for (LayerParams& l : p.layers) {
    l.ln1_gain = Tensor({d});
    l.ln1_bias = Tensor({d});
    l.wq = Tensor({d, d});
    l.bq = Tensor({d});
    l.wk = Tensor({d, d});
    l.bk = Tensor({d});
    l.wv = Tensor({d, d});
    l.bv = Tensor({d});
    l.w_attn_out = Tensor({d, d});
    l.b_attn_out = Tensor({d});
    l.ln2_gain = Tensor({d});
    l.ln2_bias = Tensor({d});
    l.w_ff_in = Tensor({d, ff});
    l.b_ff_in = Tensor({ff});
    l.w_ff_out = Tensor({ff, d});
    l.b_ff_out = Tensor({d});
  }
  p.lnf_gain = Tensor({d});
  p.lnf_bias = Tensor({d});
  p.lm_head = Tensor({d, v});
  p.abstract_head = Tensor({d, kNumAbstractClasses});
  p.baseline_head = Tensor({d, 1});
  return p;
}

ModelParams init_model(const ModelConfig& config) {
  ModelParams p = make_param_layout(config);

  // Deterministic fill in canonical order. Rank-2 tensors are weights
  // (N(0, 0.02)), rank-1 tensors are biases (0) except layer-norm gains (1).
  Rng rng(config.init_seed);
  constexpr double kInitStd = 0.02;
  for (Tensor* t : p.ordered()) {
    if (t->rank() == 2) {
      fill_gauss(*t, rng, kInitStd);
    } else {
      fill_const(*t, 0.0);
    }
  }
  for (LayerParams& l : p.layers) {
    fill_const(l.ln1_gain, 1.0);
    fill_const(l.ln2_gain, 1.0);
  }
  fill_const(p.lnf_gain, 1.0);
  return p;
}

ForwardOutput forward(Tape& tape, const ModelParams& params, std::span<const int> tokens) {
  const ModelConfig& cfg = params.config;
  const int L = static_cast<int>(tokens.size());
  require(L > 0, ErrorKind::Length, "forward: empty input");
  require(L <= cfg.max_seq_len, ErrorKind::Length,
          "forward: input length " + std::to_string(L) + " exceeds max_seq_len " +
              std::to_string(cfg.max_seq_len));

  const int hd = cfg.head_dim();
  const double scores_scale = 1.0 / std::sqrt(static_cast<double>(hd));

  Tensor x = tape.add(tape.embedding(params.tok_emb, tokens),
                      tape.slice_rows(params.pos_emb, 0, L));

  for (const LayerParams& l : params.layers) {
    Tensor a = tape.layer_norm(x, l.ln1_gain, l.ln1_bias);
    Tensor q = tape.linear(a, l.wq, l.bq);
    Tensor k = tape.linear(a, l.wk, l.bk);
    Tensor v = tape.linear(a, l.wv, l.bv);

    std::vector<Tensor> head_outputs;
    head_outputs.reserve(static_cast<size_t>(cfg.n_heads));
    for (int h = 0; h < cfg.n_heads; ++h) {
      Tensor qh = tape.slice_cols(q, h * hd, (h + 1) * hd);
      Tensor kh = tape.slice_cols(k, h * hd, (h + 1) * hd);
      Tensor vh = tape.slice_cols(v, h * hd, (h + 1) * hd);
      Tensor scores = tape.scale(tape.matmul_transb(qh, kh), scores_scale);
      Tensor probs = tape.causal_softmax_rows(scores);
      head_outputs.push_back(tape.matmul(probs, vh));
    }
    Tensor attn = tape.concat_cols(head_outputs);
    attn = tape.linear(attn, l.w_attn_out, l.b_attn_out);
    x = tape.add(x, attn);

    Tensor m = tape.layer_norm(x, l.ln2_gain, l.ln2_bias);
    Tensor f = tape.gelu(tape.linear(m, l.w_ff_in, l.b_ff_in));
    Tensor proj = tape.linear(f, l.w_ff_out, l.b_ff_out);
    x = tape.add(x, proj);
  }

  ForwardOutput out;
  out.hidden = tape.layer_norm(x, params.lnf_gain, params.lnf_bias);
  out.token_logits = tape.matmul(out.hidden, params.lm_head);
  out.abstract_logits = tape.matmul(out.hidden, params.abstract_head);
  out.baseline = tape.matmul(out.hidden, params.baseline_head);
  out.seq_len = L;
  return out;
}

Tensor logprob_token(Tape& tape, const ForwardOutput& out, int row, int token) {
  require(row >= 0 && row < out.seq_len, ErrorKind::Index, "logprob_token: row out of range");
  const int rows[] = {row};
  const int classes[] = {token};
  return tape.gather_logprobs(out.token_logits, rows, classes);
}

Tensor logprob_abstract(Tape& tape, const ForwardOutput& out, int row, AbstractClass cls) {
  require(row >= 0 && row < out.seq_len, ErrorKind::Index, "logprob_abstract: row out of range");
  const int rows[] = {row};
  const int classes[] = {static_cast<int>(cls)};
  return tape.gather_logprobs(out.abstract_logits, rows, classes);
}

}  // namespace mprl
