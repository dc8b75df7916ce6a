#include "vpf/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <thread>

#include "vpf/common.hpp"

namespace vpf::kernels {
namespace {

std::atomic<const Ops*> g_active{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

bool cpu_has_avx2() {
#if defined(VPF_HAVE_AVX2_TU) && (defined(__x86_64__) || defined(_M_X64))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

void init_from_env() {
  Backend b = Backend::scalar;
  const char* env = std::getenv("VPF_SIMD");
  if (env && std::strcmp(env, "scalar") == 0) {
    b = Backend::scalar;
  } else if (env && std::strcmp(env, "avx2") == 0) {
    if (!cpu_has_avx2()) throw ValidationError("VPF_SIMD=avx2: AVX2 not available on this CPU/build");
    b = Backend::avx2;
  } else {
    b = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
  }
  g_backend.store(b);
  g_active.store(b == Backend::avx2 ? &avx2_ops() : &scalar_ops());
}

}  // namespace

bool avx2_available() { return cpu_has_avx2(); }

#if !(defined(VPF_HAVE_AVX2_TU) && (defined(__x86_64__) || defined(_M_X64)))
const Ops& avx2_ops() { throw ValidationError("AVX2 kernels not compiled in"); }
#endif

const Ops& ops() {
  const Ops* p = g_active.load(std::memory_order_acquire);
  if (!p) {
    init_from_env();
    p = g_active.load();
  }
  return *p;
}

Backend active_backend() {
  ops();
  return g_backend.load();
}

void set_backend(Backend b) {
  if (b == Backend::avx2 && !cpu_has_avx2())
    throw ValidationError("set_backend: AVX2 not available");
  g_backend.store(b);
  g_active.store(b == Backend::avx2 ? &avx2_ops() : &scalar_ops());
}

const char* backend_name() {
  return active_backend() == Backend::avx2 ? "avx2" : "scalar";
}

}  // namespace vpf::kernels

namespace vpf {

int worker_thread_cap() {
  const char* env = std::getenv("VPF_THREADS");
  if (env) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : int(hc);
}

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
  const int threads = std::min<int64_t>(worker_thread_cap(), n);
  if (threads <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        int64_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace vpf
