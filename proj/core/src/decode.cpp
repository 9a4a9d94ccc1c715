#include "mprl/decode.hpp"

#include <cmath>
#include <string>

#include "mprl/error.hpp"
#include "mprl/kernels.hpp"

namespace mprl {

Decoder::Decoder(const ModelParams& params) : params_(&params) {
  const ModelConfig& cfg = params.config;
  const size_t cache = static_cast<size_t>(cfg.max_seq_len) * cfg.d_model;
  key_cache_.assign(static_cast<size_t>(cfg.n_layers), std::vector<double>(cache));
  value_cache_.assign(static_cast<size_t>(cfg.n_layers), std::vector<double>(cache));
  x_.resize(static_cast<size_t>(cfg.d_model));
  normed_.resize(static_cast<size_t>(cfg.d_model));
  q_.resize(static_cast<size_t>(cfg.d_model));
  k_.resize(static_cast<size_t>(cfg.d_model));
  v_.resize(static_cast<size_t>(cfg.d_model));
  attn_.resize(static_cast<size_t>(cfg.d_model));
  ff_.resize(static_cast<size_t>(cfg.d_ff));
  probs_.resize(static_cast<size_t>(cfg.max_seq_len));
  hidden_.resize(static_cast<size_t>(cfg.d_model));
  token_logits_.resize(static_cast<size_t>(cfg.vocab_size));
  abstract_logits_.resize(kNumAbstractClasses);
}

int Decoder::capacity() const { return params_->config.max_seq_len; }

void Decoder::truncate(int len) {
  require(len >= 0 && len <= length_, ErrorKind::Contract, "Decoder::truncate: bad length");
  length_ = len;
}

const StepView& Decoder::feed(int token) {
  const ModelParams& p = *params_;
  const ModelConfig& cfg = p.config;
  const int d = cfg.d_model, hd = cfg.head_dim(), pos = length_;
  require(pos < cfg.max_seq_len, ErrorKind::Length, "Decoder::feed: sequence is full");
  require(token >= 0 && token < cfg.vocab_size, ErrorKind::Index,
          "Decoder::feed: token id out of range");

  const double scores_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  double mean = 0.0, rstd = 0.0;

  for (int i = 0; i < d; ++i)
    x_[static_cast<size_t>(i)] = p.tok_emb.data()[token * d + i] + p.pos_emb.data()[pos * d + i];

  for (int li = 0; li < cfg.n_layers; ++li) {
    const LayerParams& l = p.layers[static_cast<size_t>(li)];
    kernels::layernorm_row(x_.data(), l.ln1_gain.data(), l.ln1_bias.data(), normed_.data(), d,
                           1e-5, &mean, &rstd);
    kernels::matmul(normed_.data(), l.wq.data(), q_.data(), 1, d, d);
    kernels::matmul(normed_.data(), l.wk.data(), k_.data(), 1, d, d);
    kernels::matmul(normed_.data(), l.wv.data(), v_.data(), 1, d, d);
    for (int i = 0; i < d; ++i) {
      q_[static_cast<size_t>(i)] += l.bq.data()[i];
      k_[static_cast<size_t>(i)] += l.bk.data()[i];
      v_[static_cast<size_t>(i)] += l.bv.data()[i];
    }
    double* kcache = key_cache_[static_cast<size_t>(li)].data();
    double* vcache = value_cache_[static_cast<size_t>(li)].data();
    std::copy(q_.begin(), q_.begin() + d, normed_.begin());  // hold q; reuse normed_ as storage
    std::copy(k_.begin(), k_.begin() + d, kcache + static_cast<size_t>(pos) * d);
    std::copy(v_.begin(), v_.begin() + d, vcache + static_cast<size_t>(pos) * d);

    for (int h = 0; h < cfg.n_heads; ++h) {
      const double* qh = normed_.data() + h * hd;
      for (int j = 0; j <= pos; ++j) {
        const double* kj = kcache + static_cast<size_t>(j) * d + h * hd;
        double dot = 0.0;
        for (int e = 0; e < hd; ++e) dot += qh[e] * kj[e];
        probs_[static_cast<size_t>(j)] = dot * scores_scale;
      }
      kernels::softmax_inplace(probs_.data(), pos + 1);
      double* out = attn_.data() + h * hd;
      for (int e = 0; e < hd; ++e) out[e] = 0.0;
      for (int j = 0; j <= pos; ++j) {
        const double* vj = vcache + static_cast<size_t>(j) * d + h * hd;
        double pj = probs_[static_cast<size_t>(j)];
        for (int e = 0; e < hd; ++e) out[e] += pj * vj[e];
      }
    }
    kernels::matmul(attn_.data(), l.w_attn_out.data(), q_.data(), 1, d, d);
    for (int i = 0; i < d; ++i) x_[static_cast<size_t>(i)] += q_[static_cast<size_t>(i)] + l.b_attn_out.data()[i];

    kernels::layernorm_row(x_.data(), l.ln2_gain.data(), l.ln2_bias.data(), normed_.data(), d,
                           1e-5, &mean, &rstd);
    kernels::matmul(normed_.data(), l.w_ff_in.data(), ff_.data(), 1, d, cfg.d_ff);
    for (int i = 0; i < cfg.d_ff; ++i) ff_[static_cast<size_t>(i)] += l.b_ff_in.data()[i];
    kernels::gelu_forward(ff_.data(), ff_.data(), cfg.d_ff);
    kernels::matmul(ff_.data(), l.w_ff_out.data(), q_.data(), 1, cfg.d_ff, d);
    for (int i = 0; i < d; ++i) x_[static_cast<size_t>(i)] += q_[static_cast<size_t>(i)] + l.b_ff_out.data()[i];
  }

  kernels::layernorm_row(x_.data(), p.lnf_gain.data(), p.lnf_bias.data(), hidden_.data(), d, 1e-5,
                         &mean, &rstd);
  kernels::matmul(hidden_.data(), p.lm_head.data(), token_logits_.data(), 1, d, cfg.vocab_size);
  kernels::matmul(hidden_.data(), p.abstract_head.data(), abstract_logits_.data(), 1, d,
                  kNumAbstractClasses);
  kernels::matmul(hidden_.data(), p.baseline_head.data(), &baseline_, 1, d, 1);

  ++length_;
  view_ = StepView{std::span<const double>(token_logits_),
                   std::span<const double>(abstract_logits_), baseline_};
  return view_;
}

// Prefill runs the prompt as one blocked pass (gemm over all rows) and
// stores K/V for every position; only the last position's head outputs
// are materialized. feed() then extends one token at a time.
const StepView& Decoder::prefill(std::span<const int> tokens) {
  require(!tokens.empty(), ErrorKind::Length, "Decoder::prefill: empty prompt");
  const ModelParams& p = *params_;
  const ModelConfig& cfg = p.config;
  const int L = static_cast<int>(tokens.size());
  if (L < 8) {  // blocked pass gains nothing on short prompts
    for (int t : tokens) feed(t);
    return view_;
  }
  require(length_ == 0, ErrorKind::Contract, "Decoder::prefill: decoder already holds tokens");
  require(L <= cfg.max_seq_len, ErrorKind::Length, "Decoder::prefill: prompt exceeds max_seq_len");

  const int d = cfg.d_model, hd = cfg.head_dim(), ff = cfg.d_ff, heads = cfg.n_heads;
  const double scores_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  double mean = 0.0, rstd = 0.0;

  std::vector<double> xs(static_cast<size_t>(L) * d);
  std::vector<double> normed(static_cast<size_t>(L) * d);
  std::vector<double> attn(static_cast<size_t>(L) * d);
  std::vector<double> proj(static_cast<size_t>(L) * d);
  std::vector<double> ffbuf(static_cast<size_t>(L) * ff);
  std::vector<double> qh(static_cast<size_t>(L) * hd), khp(static_cast<size_t>(L) * hd),
      vhp(static_cast<size_t>(L) * hd), ohp(static_cast<size_t>(L) * hd);
  std::vector<double> scores(static_cast<size_t>(L) * L);
  std::vector<double> qbuf(static_cast<size_t>(L) * d);

  for (int i = 0; i < L; ++i) {
    int token = tokens[static_cast<size_t>(i)];
    require(token >= 0 && token < cfg.vocab_size, ErrorKind::Index,
            "Decoder::prefill: token id out of range");
    for (int j = 0; j < d; ++j)
      xs[static_cast<size_t>(i) * d + j] = p.tok_emb.data()[token * d + j] + p.pos_emb.data()[i * d + j];
  }

  for (int li = 0; li < cfg.n_layers; ++li) {
    const LayerParams& l = p.layers[static_cast<size_t>(li)];
    double* kcache = key_cache_[static_cast<size_t>(li)].data();
    double* vcache = value_cache_[static_cast<size_t>(li)].data();

    for (int i = 0; i < L; ++i)
      kernels::layernorm_row(xs.data() + static_cast<size_t>(i) * d, l.ln1_gain.data(),
                             l.ln1_bias.data(), normed.data() + static_cast<size_t>(i) * d, d,
                             1e-5, &mean, &rstd);
    kernels::matmul(normed.data(), l.wq.data(), qbuf.data(), L, d, d);
    kernels::matmul(normed.data(), l.wk.data(), kcache, L, d, d);
    kernels::matmul(normed.data(), l.wv.data(), vcache, L, d, d);
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < d; ++j) {
        qbuf[static_cast<size_t>(i) * d + j] += l.bq.data()[j];
        kcache[static_cast<size_t>(i) * d + j] += l.bk.data()[j];
        vcache[static_cast<size_t>(i) * d + j] += l.bv.data()[j];
      }

    for (int h = 0; h < heads; ++h) {
      for (int i = 0; i < L; ++i) {
        std::copy_n(qbuf.data() + static_cast<size_t>(i) * d + h * hd, hd,
                    qh.data() + static_cast<size_t>(i) * hd);
        std::copy_n(kcache + static_cast<size_t>(i) * d + h * hd, hd,
                    khp.data() + static_cast<size_t>(i) * hd);
        std::copy_n(vcache + static_cast<size_t>(i) * d + h * hd, hd,
                    vhp.data() + static_cast<size_t>(i) * hd);
      }
      kernels::matmul_transb(qh.data(), khp.data(), scores.data(), L, hd, L);
      for (int i = 0; i < L; ++i) {
        double* row = scores.data() + static_cast<size_t>(i) * L;
        for (int j = 0; j <= i; ++j) row[j] *= scores_scale;
        kernels::softmax_inplace(row, i + 1);
        std::fill(row + i + 1, row + L, 0.0);
      }
      kernels::matmul(scores.data(), vhp.data(), ohp.data(), L, L, hd);
      for (int i = 0; i < L; ++i)
        std::copy_n(ohp.data() + static_cast<size_t>(i) * hd, hd,
                    attn.data() + static_cast<size_t>(i) * d + h * hd);
    }
    kernels::matmul(attn.data(), l.w_attn_out.data(), proj.data(), L, d, d);
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < d; ++j)
        xs[static_cast<size_t>(i) * d + j] += proj[static_cast<size_t>(i) * d + j] + l.b_attn_out.data()[j];

    for (int i = 0; i < L; ++i)
      kernels::layernorm_row(xs.data() + static_cast<size_t>(i) * d, l.ln2_gain.data(),
                             l.ln2_bias.data(), normed.data() + static_cast<size_t>(i) * d, d,
                             1e-5, &mean, &rstd);
    kernels::matmul(normed.data(), l.w_ff_in.data(), ffbuf.data(), L, d, ff);
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < ff; ++j) ffbuf[static_cast<size_t>(i) * ff + j] += l.b_ff_in.data()[j];
    kernels::gelu_forward(ffbuf.data(), ffbuf.data(), static_cast<int64_t>(L) * ff);
    kernels::matmul(ffbuf.data(), l.w_ff_out.data(), proj.data(), L, ff, d);
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < d; ++j)
        xs[static_cast<size_t>(i) * d + j] += proj[static_cast<size_t>(i) * d + j] + l.b_ff_out.data()[j];
  }

  // head outputs for the last position only
  kernels::layernorm_row(xs.data() + static_cast<size_t>(L - 1) * d, p.lnf_gain.data(),
                         p.lnf_bias.data(), hidden_.data(), d, 1e-5, &mean, &rstd);
  kernels::matmul(hidden_.data(), p.lm_head.data(), token_logits_.data(), 1, d, cfg.vocab_size);
  kernels::matmul(hidden_.data(), p.abstract_head.data(), abstract_logits_.data(), 1, d,
                  kNumAbstractClasses);
  kernels::matmul(hidden_.data(), p.baseline_head.data(), &baseline_, 1, d, 1);

  length_ = L;
  view_ = StepView{std::span<const double>(token_logits_),
                   std::span<const double>(abstract_logits_), baseline_};
  return view_;
}

}  // namespace mprl
