#pragma once

#include <vector>

namespace vpf::sigproc {

// Orthonormal DCT-II along the temporal axis. The basis matrix B has rows
// indexed by frequency; B * B^T = I, so the inverse transform is B^T with
// coefficients above `kept` treated as zero.
//
// Signals are row-major (length x channels); each channel is transformed
// independently. Dense matrix products are used throughout: lengths stay in
// the low hundreds, so an FFT path is not worth its complexity.
class DctPlan {
 public:
  DctPlan(int length, int kept);

  int length() const { return length_; }
  int kept() const { return kept_; }
  // row-major length x length, row k = frequency-k basis vector
  const std::vector<double>& basis() const { return basis_; }

  // (length x channels) -> (kept x channels)
  std::vector<double> forward(const std::vector<double>& signal, int channels) const;
  // (kept x channels) -> (length x channels); exact inverse when kept == length
  std::vector<double> inverse(const std::vector<double>& coeffs, int channels) const;

 private:
  int length_;
  int kept_;
  std::vector<double> basis_;
};

// Default coefficient count for a given input length (paper-scale 50 -> 10).
inline int default_dct_keep(int length) { return (length + 4) / 5; }

}  // namespace vpf::sigproc
