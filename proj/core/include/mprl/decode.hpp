#pragma once

#include <span>
#include <vector>

#include "mprl/model.hpp"

namespace mprl {

/// Head outputs for the most recently fed position. Spans point into
/// decoder-owned buffers and are invalidated by the next feed().
struct StepView {
  std::span<const double> token_logits;
  std::span<const double> abstract_logits;  // 5 entries
  double baseline = 0.0;
};

/// Gradient-free autoregressive evaluator. Keys and values are kept per
/// layer so extending a sequence by one token costs one position, not a
/// full re-run; truncate() rolls back to an earlier length, which makes
/// rollout restarts and trajectory enumeration cheap.
///
/// Matches the tape forward: feeding tokens t_0..t_i leaves the decoder
/// reporting the same head outputs at position i as forward() row i (up
/// to reduction-order rounding).
class Decoder {
 public:
  explicit Decoder(const ModelParams& params);

  void reset() { length_ = 0; }
  /// Roll back to a previous prefix length.
  void truncate(int len);
  int length() const { return length_; }
  int capacity() const;

  /// Append one token and compute its position's outputs.
  const StepView& feed(int token);
  /// Feed a whole prompt; returns the last position's outputs.
  const StepView& prefill(std::span<const int> tokens);

  const StepView& view() const { return view_; }

 private:
  const ModelParams* params_;
  int length_ = 0;

  // per layer: cached K and V, each [max_seq_len, d_model]
  std::vector<std::vector<double>> key_cache_, value_cache_;

  // scratch, reused across feeds
  std::vector<double> x_, normed_, q_, k_, v_, attn_, ff_, probs_, hidden_;
  std::vector<double> token_logits_, abstract_logits_;
  double baseline_ = 0.0;
  StepView view_;
};

}  // namespace mprl
