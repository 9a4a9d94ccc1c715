#pragma once

#include <cstddef>
#include <cstdint>

namespace mprl::kernels {

// Dense double-precision routines shared by the tape ops and the
// cache-backed decoder. Row-major everywhere.

void matmul(const double* a, const double* b, double* c, int m, int k, int n);             // c = a.b
void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n);         // c += a.b
void matmul_transb_acc(const double* a, const double* b, double* c, int m, int k, int n);  // c += a.b^T with a:[m,k], b:[n,k]
void matmul_transa_acc(const double* a, const double* b, double* c, int m, int k, int n);  // c += a^T.b with a:[k,m], b:[k,n]
void matmul_transb(const double* a, const double* b, double* c, int m, int k, int n);      // c = a.b^T with a:[m,k], b:[n,k]

// y = (x - mean) * rstd * gain + bias over one row of width n.
// mean/rstd are written out for the backward pass.
void layernorm_row(const double* x, const double* gain, const double* bias, double* y, int n,
                   double eps, double* out_mean, double* out_rstd);

double gelu(double x);
double gelu_grad(double x);
// Vectorized variants over n elements.
void gelu_forward(const double* x, double* y, int64_t n);
void gelu_backward(const double* x, const double* dy, double* dx_acc, int64_t n);

// Stable in-place softmax over n entries.
void softmax_inplace(double* row, int n);
double logsumexp(const double* row, int n);

}  // namespace mprl::kernels
