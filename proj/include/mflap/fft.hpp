#ifndef MFLAP_FFT_HPP
#define MFLAP_FFT_HPP

#include "mflap/tensor.hpp"

namespace mflap::fft {

// In-place DFT of length n: out[k] = sum_j in[j] * exp(sign * 2*pi*i*j*k/n).
// sign = -1 is the forward transform, +1 the inverse. No normalization is
// applied. Power-of-two lengths use an iterative radix-2 FFT, other lengths
// fall back to a table-driven O(n^2) DFT (all non power-of-two grids in this
// project are small).
void transform(cxd* a, int n, int sign);

// Transform a complex tensor along one axis, applying `scale` afterwards.
void transform_axis(Tensor& t, int axis, int sign, double scale = 1.0);

// Eight independent length-n transforms over a split SoA block: element k of
// line j lives at index k*8+j of re/im. Vectorizes across the lines.
void transform_block8(double* re, double* im, int n, int sign);

bool is_pow2(int64_t n);

} // namespace mflap::fft

#endif
