#include "mprl/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mprl/error.hpp"
#include "mprl/kernels.hpp"

namespace mprl {

namespace {

void check_matrix(const Tensor& t, const char* who) {
  require(t.defined() && t.rank() == 2, ErrorKind::Dimension, std::string(who) + ": expected a matrix");
}

}  // namespace

Tensor Tape::make_output(std::vector<int> shape) {
  Tensor out = Tensor::uninitialized(std::move(shape));
  out.ensure_grad();
  produced_.push_back(out);
  return out;
}

void Tape::track_input(const Tensor& t) {
  const_cast<Tensor&>(t).ensure_grad();
}

void Tape::record(OpKind op, std::function<void()> pull) {
  nodes_.push_back(Node{op, std::move(pull)});
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  check_matrix(a, "matmul");
  check_matrix(b, "matmul");
  require(a.dim(1) == b.dim(0), ErrorKind::Dimension,
          "matmul: inner dimensions differ (" + std::to_string(a.dim(1)) + " vs " +
              std::to_string(b.dim(0)) + ")");
  int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  track_input(a);
  track_input(b);
  Tensor out = make_output({m, n});
  kernels::matmul(a.data(), b.data(), out.data(), m, k, n);
  record(OpKind::MatMul, [a = a, b = b, out, m, k, n]() mutable {
    kernels::matmul_transb_acc(out.grad().data(), b.data(), a.grad().data(), m, n, k);
    kernels::matmul_transa_acc(a.data(), out.grad().data(), b.grad().data(), k, m, n);
  });
  return out;
}

Tensor Tape::matmul_transb(const Tensor& a, const Tensor& b) {
  check_matrix(a, "matmul_transb");
  check_matrix(b, "matmul_transb");
  require(a.dim(1) == b.dim(1), ErrorKind::Dimension, "matmul_transb: inner dimensions differ");
  int m = a.dim(0), k = a.dim(1), n = b.dim(0);
  track_input(a);
  track_input(b);
  Tensor out = make_output({m, n});
  kernels::matmul_transb(a.data(), b.data(), out.data(), m, k, n);
  record(OpKind::MatMulTransB, [a = a, b = b, out, m, k, n]() mutable {
    // dA += dC.B ; dB += dC^T.A
    kernels::matmul_acc(out.grad().data(), b.data(), a.grad().data(), m, n, k);
    kernels::matmul_transa_acc(out.grad().data(), a.data(), b.grad().data(), n, m, k);
  });
  return out;
}

Tensor Tape::linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  check_matrix(x, "linear");
  check_matrix(w, "linear");
  require(x.dim(1) == w.dim(0), ErrorKind::Dimension, "linear: inner dimensions differ");
  require(bias.rank() == 1 && bias.dim(0) == w.dim(1), ErrorKind::Dimension,
          "linear: bias width mismatch");
  int m = x.dim(0), k = x.dim(1), n = w.dim(1);
  track_input(x);
  track_input(w);
  track_input(bias);
  Tensor out = make_output({m, n});
  kernels::matmul(x.data(), w.data(), out.data(), m, k, n);
  double* po = out.data();
  const double* pb = bias.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) po[i * n + j] += pb[j];
  record(OpKind::Linear, [x = x, w = w, bias = bias, out, m, k, n]() mutable {
    const double* go = out.grad().data();
    kernels::matmul_transb_acc(go, w.data(), x.grad().data(), m, n, k);
    kernels::matmul_transa_acc(x.data(), go, w.grad().data(), k, m, n);
    double* gb = bias.grad().data();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) gb[j] += go[i * n + j];
  });
  return out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), ErrorKind::Dimension, "add: shape mismatch");
  track_input(a);
  track_input(b);
  Tensor out = make_output(a.shape());
  const int64_t n = a.size();
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  record(OpKind::Add, [a = a, b = b, out, n]() mutable {
    const double* go = out.grad().data();
    double* ga = a.grad().data();
    double* gb = b.grad().data();
    for (int64_t i = 0; i < n; ++i) {
      ga[i] += go[i];
      gb[i] += go[i];
    }
  });
  return out;
}

Tensor Tape::add_rowwise(const Tensor& a, const Tensor& bias) {
  check_matrix(a, "add_rowwise");
  require(bias.rank() == 1 && bias.dim(0) == a.dim(1), ErrorKind::Dimension,
          "add_rowwise: bias width mismatch");
  int m = a.dim(0), n = a.dim(1);
  track_input(a);
  track_input(bias);
  Tensor out = make_output({m, n});
  const double* pa = a.data();
  const double* pb = bias.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) po[i * n + j] = pa[i * n + j] + pb[j];
  record(OpKind::AddRowwise, [a = a, bias = bias, out, m, n]() mutable {
    const double* go = out.grad().data();
    double* ga = a.grad().data();
    double* gb = bias.grad().data();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        double g = go[i * n + j];
        ga[i * n + j] += g;
        gb[j] += g;
      }
  });
  return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), ErrorKind::Dimension, "mul: shape mismatch");
  track_input(a);
  track_input(b);
  Tensor out = make_output(a.shape());
  const int64_t n = a.size();
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
  record(OpKind::Mul, [a = a, b = b, out, n]() mutable {
    const double* go = out.grad().data();
    const double* pa = a.data();
    const double* pb = b.data();
    double* ga = a.grad().data();
    double* gb = b.grad().data();
    for (int64_t i = 0; i < n; ++i) {
      ga[i] += go[i] * pb[i];
      gb[i] += go[i] * pa[i];
    }
  });
  return out;
}

Tensor Tape::scale(const Tensor& a, double c) {
  track_input(a);
  Tensor out = make_output(a.shape());
  const int64_t n = a.size();
  const double* pa = a.data();
  double* po = out.data();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * c;
  record(OpKind::Scale, [a = a, out, c, n]() mutable {
    const double* go = out.grad().data();
    double* ga = a.grad().data();
    for (int64_t i = 0; i < n; ++i) ga[i] += go[i] * c;
  });
  return out;
}

Tensor Tape::sum(const Tensor& a) {
  track_input(a);
  Tensor out = make_output({1});
  const double* pa = a.data();
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += pa[i];
  out.data()[0] = s;
  record(OpKind::Sum, [a = a, out]() mutable {
    double g = out.grad()[0];
    double* ga = a.grad().data();
    for (int64_t i = 0; i < a.size(); ++i) ga[i] += g;
  });
  return out;
}

Tensor Tape::layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  check_matrix(x, "layer_norm");
  int m = x.dim(0), n = x.dim(1);
  require(gain.rank() == 1 && gain.dim(0) == n, ErrorKind::Dimension, "layer_norm: gain width");
  require(bias.rank() == 1 && bias.dim(0) == n, ErrorKind::Dimension, "layer_norm: bias width");
  track_input(x);
  track_input(gain);
  track_input(bias);
  Tensor out = make_output({m, n});
  auto stats = std::make_shared<std::vector<double>>(static_cast<size_t>(2 * m));
  for (int i = 0; i < m; ++i)
    kernels::layernorm_row(x.data() + i * n, gain.data(), bias.data(), out.data() + i * n, n, eps,
                           stats->data() + 2 * i, stats->data() + 2 * i + 1);
  record(OpKind::LayerNorm, [x = x, gain = gain, bias = bias, out, stats, m, n]() mutable {
    const double* pg = gain.data();
    double* ggain = gain.grad().data();
    double* gbias = bias.grad().data();
    double* gx = x.grad().data();
    for (int i = 0; i < m; ++i) {
      double mean = (*stats)[static_cast<size_t>(2 * i)];
      double rstd = (*stats)[static_cast<size_t>(2 * i + 1)];
      const double* xr = x.data() + i * n;
      const double* gr = out.grad().data() + i * n;
      double sum_dg = 0.0, sum_dgx = 0.0;
      for (int j = 0; j < n; ++j) {
        double xhat = (xr[j] - mean) * rstd;
        double dg = gr[j] * pg[j];
        sum_dg += dg;
        sum_dgx += dg * xhat;
        ggain[j] += gr[j] * xhat;
        gbias[j] += gr[j];
      }
      double inv_n = 1.0 / n;
      for (int j = 0; j < n; ++j) {
        double xhat = (xr[j] - mean) * rstd;
        double dg = gr[j] * pg[j];
        gx[i * n + j] += rstd * (dg - inv_n * sum_dg - xhat * inv_n * sum_dgx);
      }
    }
  });
  return out;
}

Tensor Tape::gelu(const Tensor& x) {
  track_input(x);
  Tensor out = make_output(x.shape());
  const int64_t n = x.size();
  kernels::gelu_forward(x.data(), out.data(), n);
  record(OpKind::Gelu, [x = x, out, n]() mutable {
    kernels::gelu_backward(x.data(), out.grad().data(), x.grad().data(), n);
  });
  return out;
}

Tensor Tape::embedding(const Tensor& table, std::span<const int> ids) {
  check_matrix(table, "embedding");
  int v = table.dim(0), d = table.dim(1);
  for (int id : ids)
    require(id >= 0 && id < v, ErrorKind::Index, "embedding: id out of range");
  track_input(table);
  int L = static_cast<int>(ids.size());
  Tensor out = make_output({L, d});
  for (int i = 0; i < L; ++i)
    std::copy_n(table.data() + ids[static_cast<size_t>(i)] * d, d, out.data() + i * d);
  std::vector<int> ids_copy(ids.begin(), ids.end());
  record(OpKind::Embedding, [table = table, out, ids_copy, d]() mutable {
    const double* go = out.grad().data();
    double* gt = table.grad().data();
    for (size_t i = 0; i < ids_copy.size(); ++i) {
      const double* g = go + i * static_cast<size_t>(d);
      double* row = gt + static_cast<size_t>(ids_copy[i]) * d;
      for (int j = 0; j < d; ++j) row[j] += g[j];
    }
  });
  return out;
}

Tensor Tape::slice_rows(const Tensor& x, int r0, int r1) {
  check_matrix(x, "slice_rows");
  require(0 <= r0 && r0 <= r1 && r1 <= x.dim(0), ErrorKind::Index, "slice_rows: bad range");
  int n = x.dim(1), rows = r1 - r0;
  track_input(x);
  Tensor out = make_output({rows, n});
  std::copy_n(x.data() + r0 * n, static_cast<size_t>(rows) * n, out.data());
  record(OpKind::SliceRows, [x = x, out, r0, rows, n]() mutable {
    const double* go = out.grad().data();
    double* gx = x.grad().data() + static_cast<size_t>(r0) * n;
    for (int64_t i = 0; i < static_cast<int64_t>(rows) * n; ++i) gx[i] += go[i];
  });
  return out;
}

Tensor Tape::slice_cols(const Tensor& x, int c0, int c1) {
  check_matrix(x, "slice_cols");
  require(0 <= c0 && c0 <= c1 && c1 <= x.dim(1), ErrorKind::Index, "slice_cols: bad range");
  int m = x.dim(0), n = x.dim(1), w = c1 - c0;
  track_input(x);
  Tensor out = make_output({m, w});
  const double* px = x.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i) std::copy_n(px + i * n + c0, w, po + i * w);
  record(OpKind::SliceCols, [x = x, out, c0, m, n, w]() mutable {
    const double* go = out.grad().data();
    double* gx = x.grad().data();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < w; ++j) gx[i * n + c0 + j] += go[i * w + j];
  });
  return out;
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), ErrorKind::Contract, "concat_cols: no parts");
  int m = parts[0].dim(0), total = 0;
  for (const Tensor& p : parts) {
    check_matrix(p, "concat_cols");
    require(p.dim(0) == m, ErrorKind::Dimension, "concat_cols: row count mismatch");
    total += p.dim(1);
    track_input(p);
  }
  Tensor out = make_output({m, total});
  int off = 0;
  for (const Tensor& p : parts) {
    int w = p.dim(1);
    const double* pp = p.data();
    double* po = out.data();
    for (int i = 0; i < m; ++i) std::copy_n(pp + i * w, w, po + i * total + off);
    off += w;
  }
  std::vector<Tensor> parts_copy = parts;
  record(OpKind::ConcatCols, [parts_copy, out, m, total]() mutable {
    const double* go = out.grad().data();
    int off2 = 0;
    for (Tensor& p : parts_copy) {
      int w = p.dim(1);
      double* gp = p.grad().data();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j) gp[i * w + j] += go[i * total + off2 + j];
      off2 += w;
    }
  });
  return out;
}

Tensor Tape::softmax_rows(const Tensor& x) {
  check_matrix(x, "softmax_rows");
  int m = x.dim(0), n = x.dim(1);
  track_input(x);
  Tensor out = make_output({m, n});
  for (int i = 0; i < m; ++i) {
    std::copy_n(x.data() + i * n, n, out.data() + i * n);
    kernels::softmax_inplace(out.data() + i * n, n);
  }
  record(OpKind::SoftmaxRows, [x = x, out, m, n]() mutable {
    double* gx = x.grad().data();
    for (int i = 0; i < m; ++i) {
      const double* y = out.data() + i * n;
      const double* gy = out.grad().data() + i * n;
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += gy[j] * y[j];
      for (int j = 0; j < n; ++j) gx[i * n + j] += y[j] * (gy[j] - dot);
    }
  });
  return out;
}

Tensor Tape::causal_softmax_rows(const Tensor& scores) {
  check_matrix(scores, "causal_softmax_rows");
  require(scores.dim(0) == scores.dim(1), ErrorKind::Dimension,
          "causal_softmax_rows: square input required");
  int L = scores.dim(0);
  track_input(scores);
  Tensor out = make_output({L, L});
  for (int i = 0; i < L; ++i) {
    double* row = out.data() + i * L;
    std::copy_n(scores.data() + i * L, i + 1, row);
    kernels::softmax_inplace(row, i + 1);
    std::fill(row + i + 1, row + L, 0.0);  // exact zeros above the diagonal
  }
  record(OpKind::CausalSoftmaxRows, [scores = scores, out, L]() mutable {
    double* gs = scores.grad().data();
    for (int i = 0; i < L; ++i) {
      const double* y = out.data() + i * L;
      const double* gy = out.grad().data() + i * L;
      double dot = 0.0;
      for (int j = 0; j <= i; ++j) dot += gy[j] * y[j];
      for (int j = 0; j <= i; ++j) gs[i * L + j] += y[j] * (gy[j] - dot);
    }
  });
  return out;
}

Tensor Tape::cross_entropy(const Tensor& logits, std::span<const int> targets,
                           std::span<const uint8_t> mask) {
  check_matrix(logits, "cross_entropy");
  int n = logits.dim(0), c = logits.dim(1);
  require(static_cast<int>(targets.size()) == n, ErrorKind::Dimension,
          "cross_entropy: targets length mismatch");
  require(mask.empty() || static_cast<int>(mask.size()) == n, ErrorKind::Dimension,
          "cross_entropy: mask length mismatch");
  track_input(logits);
  Tensor out = make_output({1});
  auto lses = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!mask.empty() && !mask[static_cast<size_t>(i)]) continue;
    int t = targets[static_cast<size_t>(i)];
    require(t >= 0 && t < c, ErrorKind::Index, "cross_entropy: target index out of range");
    double lse = kernels::logsumexp(logits.data() + i * c, c);
    (*lses)[static_cast<size_t>(i)] = lse;
    loss += lse - logits.data()[i * c + t];
  }
  out.data()[0] = loss;
  std::vector<int> tcopy(targets.begin(), targets.end());
  std::vector<uint8_t> mcopy(mask.begin(), mask.end());
  record(OpKind::CrossEntropy, [logits = logits, out, lses, tcopy, mcopy, n, c]() mutable {
    double g = out.grad()[0];
    const double* pl = logits.data();
    double* gl = logits.grad().data();
    for (int i = 0; i < n; ++i) {
      if (!mcopy.empty() && !mcopy[static_cast<size_t>(i)]) continue;
      double lse = (*lses)[static_cast<size_t>(i)];
      const double* row = pl + i * c;
      double* grow = gl + i * c;
      int t = tcopy[static_cast<size_t>(i)];
      for (int j = 0; j < c; ++j) {
        double p = std::exp(row[j] - lse);
        grow[j] += g * (p - (j == t ? 1.0 : 0.0));
      }
    }
  });
  return out;
}

Tensor Tape::gather_logprobs(const Tensor& logits, std::span<const int> rows,
                             std::span<const int> classes) {
  check_matrix(logits, "gather_logprobs");
  require(rows.size() == classes.size(), ErrorKind::Contract,
          "gather_logprobs: rows/classes length mismatch");
  int n = logits.dim(0), c = logits.dim(1);
  int T = static_cast<int>(rows.size());
  for (int t = 0; t < T; ++t) {
    require(rows[static_cast<size_t>(t)] >= 0 && rows[static_cast<size_t>(t)] < n,
            ErrorKind::Index, "gather_logprobs: row out of range");
    require(classes[static_cast<size_t>(t)] >= 0 && classes[static_cast<size_t>(t)] < c,
            ErrorKind::Index, "gather_logprobs: class out of range");
  }
  track_input(logits);
  Tensor out = make_output({T});
  auto lses = std::make_shared<std::vector<double>>(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    int r = rows[static_cast<size_t>(t)];
    double lse = kernels::logsumexp(logits.data() + r * c, c);
    (*lses)[static_cast<size_t>(t)] = lse;
    out.data()[t] = logits.data()[r * c + classes[static_cast<size_t>(t)]] - lse;
  }
  std::vector<int> rcopy(rows.begin(), rows.end());
  std::vector<int> ccopy(classes.begin(), classes.end());
  record(OpKind::GatherLogProbs, [logits = logits, out, lses, rcopy, ccopy, c]() mutable {
    const double* pl = logits.data();
    double* gl = logits.grad().data();
    for (size_t t = 0; t < rcopy.size(); ++t) {
      double g = out.grad()[t];
      if (g == 0.0) continue;
      int r = rcopy[t];
      double lse = (*lses)[t];
      const double* row = pl + r * c;
      double* grow = gl + r * c;
      for (int j = 0; j < c; ++j) {
        double p = std::exp(row[j] - lse);
        grow[j] += g * ((j == ccopy[t] ? 1.0 : 0.0) - p);
      }
    }
  });
  return out;
}

Tensor Tape::weighted_sum(const Tensor& x, std::span<const double> weights) {
  require(x.rank() == 1, ErrorKind::Dimension, "weighted_sum: expected a vector");
  require(static_cast<size_t>(x.dim(0)) == weights.size(), ErrorKind::Contract,
          "weighted_sum: length mismatch");
  track_input(x);
  Tensor out = make_output({1});
  double s = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) s += x.data()[i] * weights[i];
  out.data()[0] = s;
  std::vector<double> wcopy(weights.begin(), weights.end());
  record(OpKind::WeightedSum, [x = x, out, wcopy]() mutable {
    double g = out.grad()[0];
    double* gx = x.grad().data();
    for (size_t i = 0; i < wcopy.size(); ++i) gx[i] += g * wcopy[i];
  });
  return out;
}

Tensor Tape::hinge(const Tensor& s) {
  require(s.size() == 1, ErrorKind::Contract, "hinge: scalar required");
  track_input(s);
  Tensor out = make_output({1});
  bool active = s.data()[0] > 0.0;
  out.data()[0] = active ? s.data()[0] : 0.0;
  record(OpKind::Hinge, [s = s, out, active]() mutable {
    if (active) s.grad()[0] += out.grad()[0];
  });
  return out;
}

Tensor Tape::mse_rows(const Tensor& pred, std::span<const int> rows,
                      std::span<const double> targets) {
  require(rows.size() == targets.size(), ErrorKind::Contract, "mse_rows: length mismatch");
  require(!rows.empty(), ErrorKind::Contract, "mse_rows: empty selection");
  int64_t n = pred.size();
  for (int r : rows) require(r >= 0 && r < n, ErrorKind::Index, "mse_rows: row out of range");
  track_input(pred);
  Tensor out = make_output({1});
  int T = static_cast<int>(rows.size());
  double loss = 0.0;
  for (int t = 0; t < T; ++t) {
    double d = pred.data()[rows[static_cast<size_t>(t)]] - targets[static_cast<size_t>(t)];
    loss += d * d;
  }
  out.data()[0] = loss / T;
  std::vector<int> rcopy(rows.begin(), rows.end());
  std::vector<double> tcopy(targets.begin(), targets.end());
  record(OpKind::MseRows, [pred = pred, out, rcopy, tcopy]() mutable {
    double g = out.grad()[0];
    const double* pp = pred.data();
    double* gp = pred.grad().data();
    double inv_t = 1.0 / static_cast<double>(rcopy.size());
    for (size_t t = 0; t < rcopy.size(); ++t) {
      double d = pp[static_cast<size_t>(rcopy[t])] - tcopy[t];
      gp[static_cast<size_t>(rcopy[t])] += g * 2.0 * d * inv_t;
    }
  });
  return out;
}

Tensor Tape::add_scaled(const std::vector<std::pair<Tensor, double>>& terms) {
  require(!terms.empty(), ErrorKind::Contract, "add_scaled: no terms");
  for (const auto& [t, c] : terms)
    require(t.size() == 1, ErrorKind::Contract, "add_scaled: scalar terms required");
  if (terms.size() == 1 && terms[0].second == 1.0) return terms[0].first;
  for (const auto& [t, c] : terms) track_input(t);
  Tensor out = make_output({1});
  double s = 0.0;
  for (const auto& [t, c] : terms) s += c * t.data()[0];
  out.data()[0] = s;
  std::vector<std::pair<Tensor, double>> tcopy = terms;
  record(OpKind::AddScaled, [tcopy, out]() mutable {
    double g = out.grad()[0];
    for (auto& [t, c] : tcopy) t.grad()[0] += g * c;
  });
  return out;
}

void Tape::backward(const Tensor& root) {
  require(root.defined() && root.size() == 1, ErrorKind::Contract,
          "backward: root must be a scalar");
  if (backward_calls_ > 0)
    for (Tensor& t : produced_) t.zero_grad();  // fresh buffers are already zero
  ++backward_calls_;
  Tensor seed = root;
  seed.ensure_grad();
  seed.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->pull();
}

}  // namespace mprl
