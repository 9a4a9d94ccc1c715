#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mprl/tape.hpp"
#include "mprl/tensor.hpp"
#include "mprl/vocab.hpp"

namespace mprl {

struct ModelConfig {
  int n_layers = 4;
  int d_model = 128;
  int n_heads = 4;
  int d_ff = 512;
  int vocab_size = 74;
  int max_seq_len = 160;
  uint64_t init_seed = 0;

  int head_dim() const { return d_model / n_heads; }
  void validate() const;
};

struct LayerParams {
  Tensor ln1_gain, ln1_bias;
  Tensor wq, bq, wk, bk, wv, bv;
  Tensor w_attn_out, b_attn_out;
  Tensor ln2_gain, ln2_bias;
  Tensor w_ff_in, b_ff_in, w_ff_out, b_ff_out;
};

/// Decoder-only transformer weights plus the two extra linear heads: a
/// 5-way operator-class head and a scalar per-step baseline head, both
/// reading the same final hidden states as the LM head and both without
/// bias terms.
struct ModelParams {
  ModelConfig config;
  Tensor tok_emb;   // [vocab, d_model]
  Tensor pos_emb;   // [max_seq_len, d_model]
  std::vector<LayerParams> layers;
  Tensor lnf_gain, lnf_bias;
  Tensor lm_head;        // [d_model, vocab]
  Tensor abstract_head;  // [d_model, 5]
  Tensor baseline_head;  // [d_model, 1]

  /// Canonical parameter order shared by the optimizer, the checkpoint
  /// layout, and gradient checks.
  std::vector<Tensor*> ordered();
  std::vector<const Tensor*> ordered() const;

  int64_t parameter_count() const;
  void ensure_grads();
  void zero_grads();
};

/// Parameter tensors of the configured shapes, zero-filled (the
/// checkpoint loader overwrites them).
ModelParams make_param_layout(const ModelConfig& config);

/// Deterministic initialization: every weight matrix and embedding is
/// N(0, 0.02^2) from the config seed, biases zero, layer-norm gains one.
ModelParams init_model(const ModelConfig& config);

struct ForwardOutput {
  Tensor hidden;           // [L, d_model], the trunk output all heads read
  Tensor token_logits;     // [L, vocab]
  Tensor abstract_logits;  // [L, 5]
  Tensor baseline;         // [L, 1]
  int seq_len = 0;
};

/// Full causal forward pass on the tape. Row i of every output depends
/// only on tokens 0..i and predicts position i+1.
ForwardOutput forward(Tape& tape, const ModelParams& params, std::span<const int> tokens);

/// log softmax(token_logits[row])[token], differentiable.
Tensor logprob_token(Tape& tape, const ForwardOutput& out, int row, int token);
/// log softmax(abstract_logits[row])[class], differentiable.
Tensor logprob_abstract(Tape& tape, const ForwardOutput& out, int row, AbstractClass cls);

}  // namespace mprl
