#include "mflap/fft.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <vector>

namespace mflap::fft {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Tables {
    // roots[k] = exp(-2*pi*i*k/n) and the conjugates, k = 0..n-1
    std::vector<cxd> fwd;
    std::vector<cxd> inv;
    std::vector<int> bitrev; // only for pow2
};

const Tables& tables_for(int n) {
    static std::map<int, Tables> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    Tables t;
    t.fwd.resize(static_cast<size_t>(n));
    t.inv.resize(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        double a = -kTwoPi * double(k) / double(n);
        t.fwd[static_cast<size_t>(k)] = cxd(std::cos(a), std::sin(a));
        t.inv[static_cast<size_t>(k)] = std::conj(t.fwd[static_cast<size_t>(k)]);
    }
    if (is_pow2(n)) {
        t.bitrev.resize(static_cast<size_t>(n));
        int lg = 0;
        while ((1 << lg) < n) ++lg;
        for (int i = 0; i < n; ++i) {
            int r = 0;
            for (int b = 0; b < lg; ++b)
                if (i & (1 << b)) r |= 1 << (lg - 1 - b);
            t.bitrev[static_cast<size_t>(i)] = r;
        }
    }
    return cache.emplace(n, std::move(t)).first->second;
}

void fft_pow2(cxd* a, int n, const std::vector<cxd>& roots, const std::vector<int>& bitrev) {
    for (int i = 0; i < n; ++i) {
        int j = bitrev[static_cast<size_t>(i)];
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const int half = len / 2;
        const int step = n / len;
        for (int i = 0; i < n; i += len) {
            const cxd* w = roots.data();
            for (int k = 0; k < half; ++k) {
                const cxd u = a[i + k];
                const cxd v = a[i + k + half] * *w;
                a[i + k] = u + v;
                a[i + k + half] = u - v;
                w += step;
            }
        }
    }
}

void dft_naive(cxd* a, int n, const std::vector<cxd>& roots) {
    static thread_local std::vector<cxd> out;
    out.resize(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        cxd acc(0.0, 0.0);
        int idx = 0;
        for (int j = 0; j < n; ++j) {
            acc += a[j] * roots[static_cast<size_t>(idx)];
            idx += k;
            if (idx >= n) idx -= n;
        }
        out[static_cast<size_t>(k)] = acc;
    }
    for (int k = 0; k < n; ++k) a[k] = out[static_cast<size_t>(k)];
}

void fft_pow2_block8(double* re, double* im, int n, const std::vector<cxd>& roots,
                     const std::vector<int>& bitrev) {
    double tmp[8];
    for (int i = 0; i < n; ++i) {
        int j = bitrev[static_cast<size_t>(i)];
        if (i < j) {
            std::memcpy(tmp, re + 8 * i, sizeof tmp);
            std::memcpy(re + 8 * i, re + 8 * j, sizeof tmp);
            std::memcpy(re + 8 * j, tmp, sizeof tmp);
            std::memcpy(tmp, im + 8 * i, sizeof tmp);
            std::memcpy(im + 8 * i, im + 8 * j, sizeof tmp);
            std::memcpy(im + 8 * j, tmp, sizeof tmp);
        }
    }
    for (int len = 2; len <= n; len <<= 1) {
        const int half = len / 2;
        const int step = n / len;
        for (int i = 0; i < n; i += len) {
            for (int k = 0; k < half; ++k) {
                const cxd w = roots[static_cast<size_t>(k * step)];
                const double wre = w.real(), wim = w.imag();
                double* ur = re + 8 * (i + k);
                double* ui = im + 8 * (i + k);
                double* vr = re + 8 * (i + k + half);
                double* vi = im + 8 * (i + k + half);
                for (int j = 0; j < 8; ++j) {
                    const double tr = vr[j] * wre - vi[j] * wim;
                    const double ti = vr[j] * wim + vi[j] * wre;
                    vr[j] = ur[j] - tr;
                    vi[j] = ui[j] - ti;
                    ur[j] += tr;
                    ui[j] += ti;
                }
            }
        }
    }
}

void dft_naive_block8(double* re, double* im, int n, const std::vector<cxd>& roots) {
    static thread_local std::vector<double> ore, oim;
    ore.resize(static_cast<size_t>(8 * n));
    oim.resize(static_cast<size_t>(8 * n));
    for (int k = 0; k < n; ++k) {
        double ar[8] = {0}, ai[8] = {0};
        int idx = 0;
        for (int l = 0; l < n; ++l) {
            const cxd w = roots[static_cast<size_t>(idx)];
            const double wre = w.real(), wim = w.imag();
            const double* xr = re + 8 * l;
            const double* xi = im + 8 * l;
            for (int j = 0; j < 8; ++j) {
                ar[j] += xr[j] * wre - xi[j] * wim;
                ai[j] += xr[j] * wim + xi[j] * wre;
            }
            idx += k;
            if (idx >= n) idx -= n;
        }
        std::memcpy(ore.data() + 8 * k, ar, sizeof ar);
        std::memcpy(oim.data() + 8 * k, ai, sizeof ai);
    }
    std::memcpy(re, ore.data(), static_cast<size_t>(8 * n) * sizeof(double));
    std::memcpy(im, oim.data(), static_cast<size_t>(8 * n) * sizeof(double));
}

} // namespace

void transform_block8(double* re, double* im, int n, int sign) {
    if (n <= 1) return;
    const Tables& tb = tables_for(n);
    const auto& roots = sign < 0 ? tb.fwd : tb.inv;
    if (is_pow2(n))
        fft_pow2_block8(re, im, n, roots, tb.bitrev);
    else
        dft_naive_block8(re, im, n, roots);
}

bool is_pow2(int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

void transform(cxd* a, int n, int sign) {
    if (n <= 1) return;
    const Tables& tb = tables_for(n);
    const auto& roots = sign < 0 ? tb.fwd : tb.inv;
    if (is_pow2(n))
        fft_pow2(a, n, roots, tb.bitrev);
    else
        dft_naive(a, n, roots);
}

void transform_axis(Tensor& t, int axis, int sign, double scale) {
    if (!t.is_complex()) throw Error("fft::transform_axis: tensor must be complex");
    const int r = t.rank();
    if (axis < 0 || axis >= r) throw Error("fft::transform_axis: axis out of range");
    const int64_t n = t.shape[static_cast<size_t>(axis)];
    int64_t inner = 1, outer = 1;
    for (int i = axis + 1; i < r; ++i) inner *= t.shape[static_cast<size_t>(i)];
    for (int i = 0; i < axis; ++i) outer *= t.shape[static_cast<size_t>(i)];

    std::vector<cxd> line(static_cast<size_t>(n));
    cxd* d = t.cdata();
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            cxd* base = d + o * n * inner + in;
            if (inner == 1) {
                transform(base, static_cast<int>(n), sign);
                if (scale != 1.0)
                    for (int64_t k = 0; k < n; ++k) base[k] *= scale;
            } else {
                for (int64_t k = 0; k < n; ++k) line[static_cast<size_t>(k)] = base[k * inner];
                transform(line.data(), static_cast<int>(n), sign);
                for (int64_t k = 0; k < n; ++k) base[k * inner] = line[static_cast<size_t>(k)] * scale;
            }
        }
    }
}

} // namespace mflap::fft
