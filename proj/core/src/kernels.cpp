#include "mprl/kernels.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace mprl::kernels {

namespace {
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const Mat>;
using Map = Eigen::Map<Mat>;
}  // namespace

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  Map(c, m, n).noalias() = MapC(a, m, k) * MapC(b, k, n);
}

void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  Map(c, m, n).noalias() += MapC(a, m, k) * MapC(b, k, n);
}

void matmul_transb_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  Map(c, m, n).noalias() += MapC(a, m, k) * MapC(b, n, k).transpose();
}

void matmul_transa_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  Map(c, m, n).noalias() += MapC(a, k, m).transpose() * MapC(b, k, n);
}

void matmul_transb(const double* a, const double* b, double* c, int m, int k, int n) {
  Map(c, m, n).noalias() = MapC(a, m, k) * MapC(b, n, k).transpose();
}

void layernorm_row(const double* x, const double* gain, const double* bias, double* y, int n,
                   double eps, double* out_mean, double* out_rstd) {
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += x[i];
  mean /= n;
  double var = 0.0;
  for (int i = 0; i < n; ++i) {
    double d = x[i] - mean;
    var += d * d;
  }
  var /= n;
  double rstd = 1.0 / std::sqrt(var + eps);
  for (int i = 0; i < n; ++i) y[i] = (x[i] - mean) * rstd * gain[i] + bias[i];
  *out_mean = mean;
  *out_rstd = rstd;
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluK = 0.044715;
}  // namespace

double gelu(double x) {
  double inner = kGeluC * (x + kGeluK * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(inner));
}

double gelu_grad(double x) {
  double inner = kGeluC * (x + kGeluK * x * x * x);
  double t = std::tanh(inner);
  double d_inner = kGeluC * (1.0 + 3.0 * kGeluK * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner;
}

void gelu_forward(const double* x, double* y, int64_t n) {
  using Arr = Eigen::Array<double, Eigen::Dynamic, 1>;
  Eigen::Map<const Arr> xa(x, n);
  Eigen::Map<Arr> ya(y, n);
  ya = 0.5 * xa * (1.0 + (kGeluC * (xa + kGeluK * xa.cube())).tanh());
}

void gelu_backward(const double* x, const double* dy, double* dx_acc, int64_t n) {
  using Arr = Eigen::Array<double, Eigen::Dynamic, 1>;
  Eigen::Map<const Arr> xa(x, n);
  Eigen::Map<const Arr> dya(dy, n);
  Eigen::Map<Arr> dxa(dx_acc, n);
  Arr t = (kGeluC * (xa + kGeluK * xa.cube())).tanh();
  Arr d_inner = kGeluC * (1.0 + 3.0 * kGeluK * xa.square());
  dxa += dya * (0.5 * (1.0 + t) + 0.5 * xa * (1.0 - t.square()) * d_inner);
}

void softmax_inplace(double* row, int n) {
  double mx = row[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, row[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    row[i] = std::exp(row[i] - mx);
    sum += row[i];
  }
  double inv = 1.0 / sum;
  for (int i = 0; i < n; ++i) row[i] *= inv;
}

double logsumexp(const double* row, int n) {
  double mx = row[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, row[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += std::exp(row[i] - mx);
  return mx + std::log(sum);
}

}  // namespace mprl::kernels
