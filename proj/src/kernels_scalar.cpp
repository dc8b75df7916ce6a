#include "vpf/kernels.hpp"

namespace vpf::kernels {
namespace {

void s_gemm_nn(int m, int n, int k, const double* a, const double* b,
               double* c, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + int64_t(i) * n;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
    }
    const double* ai = a + int64_t(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + int64_t(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void s_gemm_nt(int m, int n, int k, const double* a, const double* b,
               double* c, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + int64_t(i) * k;
    double* ci = c + int64_t(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + int64_t(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = accumulate ? ci[j] + acc : acc;
    }
  }
}

void s_gemm_tn(int m, int n, int k, const double* a, const double* b,
               double* c, bool accumulate) {
  if (!accumulate) {
    for (int64_t i = 0; i < int64_t(m) * n; ++i) c[i] = 0.0;
  }
  for (int p = 0; p < k; ++p) {
    const double* ap = a + int64_t(p) * m;
    const double* bp = b + int64_t(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = ap[i];
      double* ci = c + int64_t(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

double s_dot(int n, const double* x, const double* y) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void s_axpy(int n, double alpha, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void s_add(int n, const double* x, const double* y, double* out) {
  for (int i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void s_sub(int n, const double* x, const double* y, double* out) {
  for (int i = 0; i < n; ++i) out[i] = x[i] - y[i];
}

void s_mul(int n, const double* x, const double* y, double* out) {
  for (int i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void s_scale(int n, double alpha, const double* x, double* out) {
  for (int i = 0; i < n; ++i) out[i] = alpha * x[i];
}

double s_sum(int n, const double* x) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double s_max(int n, const double* x) {
  double m = x[0];
  for (int i = 1; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops{s_gemm_nn, s_gemm_nt, s_gemm_tn, s_dot, s_axpy,
                       s_add,     s_sub,     s_mul,     s_scale, s_sum, s_max};
  return ops;
}

}  // namespace vpf::kernels
