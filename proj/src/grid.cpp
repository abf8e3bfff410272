#include "mflap/grid.hpp"

#include "mflap/fft.hpp"

#include <cmath>

namespace mflap::lno {

void GridSpec::validate() const {
    if (rank() < 1 || rank() > 3) throw Error("GridSpec: rank must be 1..3");
    if (axis_extents.size() != axis_lengths.size())
        throw Error("GridSpec: extents/lengths size mismatch");
    for (int64_t n : axis_lengths)
        if (n < 2) throw Error("GridSpec: axis lengths must be >= 2");
    for (double e : axis_extents)
        if (!(e > 0.0)) throw Error("GridSpec: extents must be positive");
    if (time_axis < 0 || time_axis >= rank()) throw Error("GridSpec: bad time axis");
}

FunctionSample FunctionSample::zeros(const GridSpec& g, int64_t channels) {
    g.validate();
    FunctionSample f;
    f.grid = g;
    f.channels = channels;
    auto shape = g.axis_lengths;
    shape.push_back(channels);
    f.values = Tensor::real(shape);
    return f;
}

void FunctionSample::check() const {
    grid.validate();
    auto shape = grid.axis_lengths;
    shape.push_back(channels);
    if (values.shape != shape || values.is_complex())
        throw Error("FunctionSample: values shape " + shape_str(values.shape) +
                    " does not match grid " + shape_str(shape));
    if (!values.finite()) throw Error("FunctionSample: non-finite values");
}

SpectralRepresentation spectral_coefficients(const FunctionSample& v) {
    v.check();
    SpectralRepresentation sr;
    sr.grid = v.grid;
    sr.channels = v.channels;
    sr.coefficients = Tensor::complex(v.values.shape);
    cxd* c = sr.coefficients.cdata();
    for (int64_t i = 0; i < v.values.numel(); ++i) c[i] = cxd(v.values.at(i), 0.0);
    for (int a = 0; a < v.grid.rank(); ++a)
        fft::transform_axis(sr.coefficients, a, -1,
                            1.0 / double(v.grid.axis_lengths[static_cast<size_t>(a)]));
    sr.omega.resize(static_cast<size_t>(v.grid.rank()));
    for (int a = 0; a < v.grid.rank(); ++a) {
        int64_t m = v.grid.axis_lengths[static_cast<size_t>(a)];
        double w1 = v.grid.fundamental_omega(a);
        auto& wv = sr.omega[static_cast<size_t>(a)];
        wv.resize(static_cast<size_t>(m));
        for (int64_t l = 0; l < m; ++l)
            wv[static_cast<size_t>(l)] = w1 * double(l < (m + 1) / 2 ? l : l - m);
    }
    return sr;
}

namespace {

// Resample one axis of a [pre, M, post] view.
Tensor resample_axis(const Tensor& t, int axis, int64_t target_len) {
    const int64_t m = t.shape[static_cast<size_t>(axis)];
    auto oshape = t.shape;
    oshape[static_cast<size_t>(axis)] = target_len;
    if (target_len == m) return t;

    int64_t pre = 1, post = 1;
    for (int i = 0; i < axis; ++i) pre *= t.shape[static_cast<size_t>(i)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < t.shape.size(); ++i) post *= t.shape[i];

    Tensor out = Tensor::real(oshape);
    if (target_len < m) {
        if (m % target_len != 0)
            throw Error("resample: non-integer stride for downsampling axis " +
                        std::to_string(axis));
        const int64_t stride = m / target_len;
        for (int64_t p = 0; p < pre; ++p)
            for (int64_t j = 0; j < target_len; ++j)
                for (int64_t q = 0; q < post; ++q)
                    out.at((p * target_len + j) * post + q) = t.at((p * m + j * stride) * post + q);
        return out;
    }

    // upsample: zero-pad the spectrum, splitting the Nyquist bin for even m
    std::vector<cxd> line(static_cast<size_t>(m)), pad(static_cast<size_t>(target_len));
    for (int64_t p = 0; p < pre; ++p)
        for (int64_t q = 0; q < post; ++q) {
            for (int64_t j = 0; j < m; ++j)
                line[static_cast<size_t>(j)] = cxd(t.at((p * m + j) * post + q), 0.0);
            fft::transform(line.data(), static_cast<int>(m), -1);
            for (auto& z : line) z /= double(m);
            std::fill(pad.begin(), pad.end(), cxd(0, 0));
            const int64_t half = m / 2;
            for (int64_t l = 0; l < (m + 1) / 2; ++l) pad[static_cast<size_t>(l)] = line[static_cast<size_t>(l)];
            for (int64_t l = (m + 1) / 2; l < m; ++l)
                pad[static_cast<size_t>(target_len - m + l)] = line[static_cast<size_t>(l)];
            if (m % 2 == 0) {
                cxd ny = line[static_cast<size_t>(half)];
                pad[static_cast<size_t>(half)] = 0.5 * ny;
                pad[static_cast<size_t>(target_len - half)] = 0.5 * std::conj(ny);
            }
            fft::transform(pad.data(), static_cast<int>(target_len), +1);
            for (int64_t j = 0; j < target_len; ++j)
                out.at((p * target_len + j) * post + q) = pad[static_cast<size_t>(j)].real();
        }
    return out;
}

} // namespace

FunctionSample resample(const FunctionSample& f, const GridSpec& target) {
    f.check();
    target.validate();
    if (target.rank() != f.grid.rank()) throw Error("resample: rank mismatch");
    for (int a = 0; a < target.rank(); ++a)
        if (target.axis_extents[static_cast<size_t>(a)] != f.grid.axis_extents[static_cast<size_t>(a)])
            throw Error("resample: extents must match on axis " + std::to_string(a));
    FunctionSample out;
    out.grid = target;
    out.channels = f.channels;
    out.values = f.values;
    for (int a = 0; a < target.rank(); ++a)
        out.values = resample_axis(out.values, a, target.axis_lengths[static_cast<size_t>(a)]);
    return out;
}

} // namespace mflap::lno
