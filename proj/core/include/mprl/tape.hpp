#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "mprl/tensor.hpp"

namespace mprl {

enum class OpKind : uint8_t {
  MatMul,
  MatMulTransB,
  Linear,
  Add,
  AddRowwise,
  Mul,
  Scale,
  Sum,
  LayerNorm,
  Gelu,
  Embedding,
  SliceRows,
  SliceCols,
  ConcatCols,
  SoftmaxRows,
  CausalSoftmaxRows,
  CrossEntropy,
  GatherLogProbs,
  WeightedSum,
  Hinge,
  MseRows,
  AddScaled,
};

/// Dynamic reverse-mode tape. Ops execute eagerly and append a node;
/// creation order is the valid backward order, so backward() is a single
/// reverse sweep. A tape lives for one training step and is then dropped.
///
/// backward() accumulates into leaf gradients (parameters, inputs) and
/// resets tape-produced intermediates first, so calling it twice doubles
/// the leaf gradients.
class Tape {
 public:
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor matmul_transb(const Tensor& a, const Tensor& b);  // a . b^T
  /// x.w with the bias broadcast over rows; one op instead of
  /// matmul + add_rowwise on the hot path.
  Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor add_rowwise(const Tensor& a, const Tensor& bias);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double c);
  Tensor sum(const Tensor& a);
  Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
  Tensor gelu(const Tensor& x);
  Tensor embedding(const Tensor& table, std::span<const int> ids);
  Tensor slice_rows(const Tensor& x, int r0, int r1);
  Tensor slice_cols(const Tensor& x, int c0, int c1);
  Tensor concat_cols(const std::vector<Tensor>& parts);
  Tensor softmax_rows(const Tensor& x);
  /// Softmax where row i is normalized over columns 0..i; columns above
  /// the diagonal come out exactly 0. Input must be square.
  Tensor causal_softmax_rows(const Tensor& scores);
  /// -sum over unmasked positions of log softmax(logits[i])[targets[i]].
  /// An empty mask means every position counts.
  Tensor cross_entropy(const Tensor& logits, std::span<const int> targets,
                       std::span<const uint8_t> mask = {});
  /// out[t] = log softmax(logits[rows[t]])[classes[t]]
  Tensor gather_logprobs(const Tensor& logits, std::span<const int> rows,
                         std::span<const int> classes);
  /// Scalar sum of weights[t] * x[t]; weights are constants.
  Tensor weighted_sum(const Tensor& x, std::span<const double> weights);
  /// max(0, s). Gradient passes through only when s > 0.
  Tensor hinge(const Tensor& s);
  /// Mean squared error between pred[rows[t]] and targets[t]; targets are
  /// constants, so gradient reaches pred only.
  Tensor mse_rows(const Tensor& pred, std::span<const int> rows, std::span<const double> targets);
  /// Scalar affine combination sum coeff_i * term_i. A single term with
  /// coefficient 1 is returned unchanged (no node recorded), which keeps
  /// degenerate mode reductions bit-for-bit exact.
  Tensor add_scaled(const std::vector<std::pair<Tensor, double>>& terms);

  /// Seed d(root)/d(root) = 1 and run the reverse sweep. root must be a
  /// scalar. Leaf gradients accumulate across calls.
  void backward(const Tensor& root);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind op;
    std::function<void()> pull;
  };

  Tensor make_output(std::vector<int> shape);
  void track_input(const Tensor& t);
  void record(OpKind op, std::function<void()> pull);

  std::vector<Node> nodes_;
  std::vector<Tensor> produced_;
  int backward_calls_ = 0;
};

}  // namespace mprl
