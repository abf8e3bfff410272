#include "mflap/tensor.hpp"

#include <cmath>
#include <sstream>

namespace mflap {

std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

bool Tensor::finite() const {
    for (double v : buf)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace mflap
