// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma on x86-64 only; callers must check avx2_available() before
// dispatching here.

#include "vpf/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace vpf::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// 4-row by 8-column register block; A rows are broadcast against B panels.
void v_gemm_nn(int m, int n, int k, const double* a, const double* b,
               double* c, bool accumulate) {
  if (!accumulate) {
    for (int64_t i = 0; i < int64_t(m) * n; ++i) c[i] = 0.0;
  }
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = a + int64_t(i) * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    double* c0 = c + int64_t(i) * n;
    double* c1 = c0 + n;
    double* c2 = c1 + n;
    double* c3 = c2 + n;
    int j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d s00 = _mm256_loadu_pd(c0 + j), s01 = _mm256_loadu_pd(c0 + j + 4);
      __m256d s10 = _mm256_loadu_pd(c1 + j), s11 = _mm256_loadu_pd(c1 + j + 4);
      __m256d s20 = _mm256_loadu_pd(c2 + j), s21 = _mm256_loadu_pd(c2 + j + 4);
      __m256d s30 = _mm256_loadu_pd(c3 + j), s31 = _mm256_loadu_pd(c3 + j + 4);
      for (int p = 0; p < k; ++p) {
        const double* bp = b + int64_t(p) * n + j;
        __m256d b0 = _mm256_loadu_pd(bp);
        __m256d b1 = _mm256_loadu_pd(bp + 4);
        __m256d av;
        av = _mm256_set1_pd(a0[p]);
        s00 = _mm256_fmadd_pd(av, b0, s00);
        s01 = _mm256_fmadd_pd(av, b1, s01);
        av = _mm256_set1_pd(a1[p]);
        s10 = _mm256_fmadd_pd(av, b0, s10);
        s11 = _mm256_fmadd_pd(av, b1, s11);
        av = _mm256_set1_pd(a2[p]);
        s20 = _mm256_fmadd_pd(av, b0, s20);
        s21 = _mm256_fmadd_pd(av, b1, s21);
        av = _mm256_set1_pd(a3[p]);
        s30 = _mm256_fmadd_pd(av, b0, s30);
        s31 = _mm256_fmadd_pd(av, b1, s31);
      }
      _mm256_storeu_pd(c0 + j, s00);
      _mm256_storeu_pd(c0 + j + 4, s01);
      _mm256_storeu_pd(c1 + j, s10);
      _mm256_storeu_pd(c1 + j + 4, s11);
      _mm256_storeu_pd(c2 + j, s20);
      _mm256_storeu_pd(c2 + j + 4, s21);
      _mm256_storeu_pd(c3 + j, s30);
      _mm256_storeu_pd(c3 + j + 4, s31);
    }
    for (; j < n; ++j) {
      double acc0 = c0[j], acc1 = c1[j], acc2 = c2[j], acc3 = c3[j];
      for (int p = 0; p < k; ++p) {
        const double bv = b[int64_t(p) * n + j];
        acc0 += a0[p] * bv;
        acc1 += a1[p] * bv;
        acc2 += a2[p] * bv;
        acc3 += a3[p] * bv;
      }
      c0[j] = acc0;
      c1[j] = acc1;
      c2[j] = acc2;
      c3[j] = acc3;
    }
  }
  for (; i < m; ++i) {
    const double* ai = a + int64_t(i) * k;
    double* ci = c + int64_t(i) * n;
    for (int p = 0; p < k; ++p) {
      __m256d av = _mm256_set1_pd(ai[p]);
      const double* bp = b + int64_t(p) * n;
      int j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cv = _mm256_loadu_pd(ci + j);
        _mm256_storeu_pd(ci + j, _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j), cv));
      }
      for (; j < n; ++j) ci[j] += ai[p] * bp[j];
    }
  }
}

inline double dot_avx(int n, const double* x, const double* y) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
  }
  for (; i + 4 <= n; i += 4) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
  }
  double acc = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void v_gemm_nt(int m, int n, int k, const double* a, const double* b,
               double* c, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + int64_t(i) * k;
    double* ci = c + int64_t(i) * n;
    for (int j = 0; j < n; ++j) {
      const double acc = dot_avx(k, ai, b + int64_t(j) * k);
      ci[j] = accumulate ? ci[j] + acc : acc;
    }
  }
}

void v_gemm_tn(int m, int n, int k, const double* a, const double* b,
               double* c, bool accumulate) {
  if (!accumulate) {
    for (int64_t i = 0; i < int64_t(m) * n; ++i) c[i] = 0.0;
  }
  for (int p = 0; p < k; ++p) {
    const double* ap = a + int64_t(p) * m;
    const double* bp = b + int64_t(p) * n;
    for (int i = 0; i < m; ++i) {
      __m256d av = _mm256_set1_pd(ap[i]);
      double* ci = c + int64_t(i) * n;
      int j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cv = _mm256_loadu_pd(ci + j);
        _mm256_storeu_pd(ci + j, _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j), cv));
      }
      for (; j < n; ++j) ci[j] += ap[i] * bp[j];
    }
  }
}

double v_dot(int n, const double* x, const double* y) { return dot_avx(n, x, y); }

void v_axpy(int n, double alpha, const double* x, double* y) {
  __m256d av = _mm256_set1_pd(alpha);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void v_add(int n, const double* x, const double* y, double* out) {
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void v_sub(int n, const double* x, const double* y, double* out) {
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] - y[i];
}

void v_mul(int n, const double* x, const double* y, double* out) {
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void v_scale(int n, double alpha, const double* x, double* out) {
  __m256d av = _mm256_set1_pd(alpha);
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = alpha * x[i];
}

double v_sum(int n, const double* x) {
  __m256d s = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) s = _mm256_add_pd(s, _mm256_loadu_pd(x + i));
  double acc = hsum(s);
  for (; i < n; ++i) acc += x[i];
  return acc;
}

double v_max(int n, const double* x) {
  if (n < 4) {
    double m = x[0];
    for (int i = 1; i < n; ++i)
      if (x[i] > m) m = x[i];
    return m;
  }
  __m256d mv = _mm256_loadu_pd(x);
  int i = 4;
  for (; i + 4 <= n; i += 4) mv = _mm256_max_pd(mv, _mm256_loadu_pd(x + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, mv);
  double m = lanes[0];
  for (int l = 1; l < 4; ++l)
    if (lanes[l] > m) m = lanes[l];
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops{v_gemm_nn, v_gemm_nt, v_gemm_tn, v_dot, v_axpy,
                       v_add,     v_sub,     v_mul,     v_scale, v_sum, v_max};
  return ops;
}

}  // namespace vpf::kernels

#endif  // x86-64
