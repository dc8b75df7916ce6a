#pragma once

#include <string>

namespace vpf::kernels {

// Double-precision inner-loop kernels behind the tensor engine and the DCT.
// Every entry has a scalar reference implementation; on x86-64 an AVX2+FMA
// variant is selected at runtime when the CPU supports it. The two variants
// are equivalence-tested against each other (SIMD changes accumulation order,
// so equality is up to rounding, not bit-exact).
//
// All matrices are dense row-major with packed leading dimension.
struct Ops {
  // C(m,n) = A(m,k) * B(k,n), optionally accumulating into C.
  void (*gemm_nn)(int m, int n, int k, const double* a, const double* b,
                  double* c, bool accumulate);
  // C(m,n) = A(m,k) * B(n,k)^T
  void (*gemm_nt)(int m, int n, int k, const double* a, const double* b,
                  double* c, bool accumulate);
  // C(m,n) = A(k,m)^T * B(k,n)
  void (*gemm_tn)(int m, int n, int k, const double* a, const double* b,
                  double* c, bool accumulate);
  double (*dot)(int n, const double* x, const double* y);
  // y += alpha * x
  void (*axpy)(int n, double alpha, const double* x, double* y);
  void (*add)(int n, const double* x, const double* y, double* out);
  void (*sub)(int n, const double* x, const double* y, double* out);
  void (*mul)(int n, const double* x, const double* y, double* out);
  void (*scale)(int n, double alpha, const double* x, double* out);
  double (*sum)(int n, const double* x);
  double (*max)(int n, const double* x);  // n >= 1
};

enum class Backend { scalar, avx2 };

const Ops& scalar_ops();
bool avx2_available();      // CPU support and the AVX2 TU compiled in
const Ops& avx2_ops();      // valid only when avx2_available()

// Active backend: VPF_SIMD=scalar|avx2|auto (default auto) decides at first
// use; set_backend overrides (tests).
Backend active_backend();
void set_backend(Backend b);
const char* backend_name();

const Ops& ops();

}  // namespace vpf::kernels
