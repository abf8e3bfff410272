#ifndef MFLAP_FASTMATH_HPP
#define MFLAP_FASTMATH_HPP

#include <cstdint>

namespace mflap::fastmath {

// Elementwise transcendentals over arrays, compiled in a separate unit with
// vectorization-friendly flags. Inputs must be finite.
void vsin(const double* x, double* out, int64_t n);
void vcos(const double* x, double* out, int64_t n);
void vexp(const double* x, double* out, int64_t n);

} // namespace mflap::fastmath

#endif
