#ifndef MFLAP_GRID_HPP
#define MFLAP_GRID_HPP

#include "mflap/tensor.hpp"

namespace mflap::lno {

// Uniform grid over half-open intervals: axis a samples coordinates
// idx * extent_a / len_a for idx = 0..len_a-1. The time axis is the one the
// pole-residue transients act along; fundamental frequency w1 = 2*pi/extent.
struct GridSpec {
    std::vector<int64_t> axis_lengths;
    std::vector<double> axis_extents;
    int time_axis = 0;

    int rank() const { return static_cast<int>(axis_lengths.size()); }
    int64_t points() const { return shape_numel(axis_lengths); }
    double coord(int axis, int64_t idx) const {
        return axis_extents[static_cast<size_t>(axis)] * double(idx) /
               double(axis_lengths[static_cast<size_t>(axis)]);
    }
    double fundamental_omega(int axis) const {
        return 2.0 * 3.14159265358979323846 / axis_extents[static_cast<size_t>(axis)];
    }
    void validate() const;
    bool operator==(const GridSpec& o) const {
        return axis_lengths == o.axis_lengths && axis_extents == o.axis_extents &&
               time_axis == o.time_axis;
    }
};

// A function discretized on a uniform grid; values shape = axis_lengths x channels.
struct FunctionSample {
    GridSpec grid;
    int64_t channels = 1;
    Tensor values;

    static FunctionSample zeros(const GridSpec& g, int64_t channels);
    void check() const;
};

// Multi-axis Fourier coefficients with 1/M normalization per axis, in FFT
// index order (frequency index l maps to l for l < (M+1)/2, else l - M).
struct SpectralRepresentation {
    GridSpec grid;
    int64_t channels = 1;
    Tensor coefficients;                      // complex, axis_lengths x channels
    std::vector<std::vector<double>> omega;   // per axis, angular frequencies

    int64_t freq_index(int axis, int64_t l) const {
        int64_t m = grid.axis_lengths[static_cast<size_t>(axis)];
        return l < (m + 1) / 2 ? l : l - m;
    }
};

SpectralRepresentation spectral_coefficients(const FunctionSample& v);

// Strided subsampling to coarser grids over the same extents; trigonometric
// (zero-padded spectrum) interpolation to finer grids.
FunctionSample resample(const FunctionSample& f, const GridSpec& target);

} // namespace mflap::lno

#endif
