#include "mflap/fastmath.hpp"

#include <cmath>

namespace mflap::fastmath {

void vsin(const double* x, double* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = std::sin(x[i]);
}

void vcos(const double* x, double* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = std::cos(x[i]);
}

void vexp(const double* x, double* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

} // namespace mflap::fastmath
