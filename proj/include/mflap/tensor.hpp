#ifndef MFLAP_TENSOR_HPP
#define MFLAP_TENSOR_HPP

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mflap {

using cxd = std::complex<double>;

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

enum class DType { Real64, Complex128 };

inline const char* dtype_name(DType d) {
    return d == DType::Real64 ? "real64" : "complex128";
}

inline int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t s : shape) n *= s;
    return n;
}

std::string shape_str(const std::vector<int64_t>& shape);

// Dense tensor over a flat row-major buffer. Complex values are stored
// interleaved (re, im) so the buffer can be viewed as std::complex<double>*.
// This interleaved layout is the single supported complex convention.
struct Tensor {
    std::vector<int64_t> shape;
    DType dtype = DType::Real64;
    std::vector<double> buf;

    Tensor() = default;

    static Tensor real(std::vector<int64_t> shape_) {
        Tensor t;
        t.shape = std::move(shape_);
        t.dtype = DType::Real64;
        t.buf.assign(static_cast<size_t>(shape_numel(t.shape)), 0.0);
        return t;
    }
    static Tensor complex(std::vector<int64_t> shape_) {
        Tensor t;
        t.shape = std::move(shape_);
        t.dtype = DType::Complex128;
        t.buf.assign(static_cast<size_t>(2 * shape_numel(t.shape)), 0.0);
        return t;
    }
    static Tensor scalar(double v) {
        Tensor t = real({});
        t.buf[0] = v;
        return t;
    }
    static Tensor from(std::vector<int64_t> shape_, std::vector<double> vals) {
        Tensor t;
        t.shape = std::move(shape_);
        t.dtype = DType::Real64;
        if (static_cast<int64_t>(vals.size()) != shape_numel(t.shape))
            throw Error("Tensor::from: value count does not match shape " + shape_str(t.shape));
        t.buf = std::move(vals);
        return t;
    }

    int64_t numel() const { return shape_numel(shape); }
    int rank() const { return static_cast<int>(shape.size()); }
    bool is_complex() const { return dtype == DType::Complex128; }

    double* data() { return buf.data(); }
    const double* data() const { return buf.data(); }

    cxd* cdata() { return reinterpret_cast<cxd*>(buf.data()); }
    const cxd* cdata() const { return reinterpret_cast<const cxd*>(buf.data()); }

    double& at(int64_t i) { return buf[static_cast<size_t>(i)]; }
    double at(int64_t i) const { return buf[static_cast<size_t>(i)]; }
    cxd& cat(int64_t i) { return cdata()[i]; }
    cxd cat(int64_t i) const { return cdata()[i]; }

    void zero() { std::fill(buf.begin(), buf.end(), 0.0); }
    bool finite() const;

    bool same_shape(const Tensor& o) const { return shape == o.shape && dtype == o.dtype; }
};

inline bool shapes_equal(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
    return a == b;
}

} // namespace mflap

#endif
