#include "vpf/sigproc.hpp"

#include <cmath>

#include "vpf/common.hpp"
#include "vpf/kernels.hpp"

namespace vpf::sigproc {

DctPlan::DctPlan(int length, int kept) : length_(length), kept_(kept) {
  if (length < 1) throw ValidationError("DctPlan: length must be >= 1");
  if (kept < 1 || kept > length)
    throw ValidationError("DctPlan: kept must be in [1, length]");
  basis_.resize(size_t(length) * length);
  const double s0 = std::sqrt(1.0 / length);
  const double sk = std::sqrt(2.0 / length);
  for (int k = 0; k < length; ++k) {
    const double scale = (k == 0) ? s0 : sk;
    for (int n = 0; n < length; ++n) {
      basis_[size_t(k) * length + n] =
          scale * std::cos(M_PI * (2.0 * n + 1.0) * k / (2.0 * length));
    }
  }
}

std::vector<double> DctPlan::forward(const std::vector<double>& signal,
                                     int channels) const {
  if (signal.size() != size_t(length_) * channels)
    throw ValidationError("dct_forward: signal length does not match plan");
  std::vector<double> out(size_t(kept_) * channels);
  kernels::ops().gemm_nn(kept_, channels, length_, basis_.data(), signal.data(),
                         out.data(), false);
  return out;
}

std::vector<double> DctPlan::inverse(const std::vector<double>& coeffs,
                                     int channels) const {
  if (coeffs.size() != size_t(kept_) * channels)
    throw ValidationError("idct_inverse: coefficient count does not match plan");
  // x = B^T * [coeffs; 0]; only the first `kept` basis rows contribute.
  std::vector<double> out(size_t(length_) * channels);
  kernels::ops().gemm_tn(length_, channels, kept_, basis_.data(), coeffs.data(),
                         out.data(), false);
  return out;
}

}  // namespace vpf::sigproc
