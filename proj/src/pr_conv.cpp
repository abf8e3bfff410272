#include "mflap/fft.hpp"
#include "mflap/graph.hpp"

#include <cmath>
#include <cstring>

// Fused forward/adjoint of one Laplace layer. Per retained spatial mode s and
// channel pair (ci, co), the time axis is treated with the pole-residue
// decomposition
//   V(mu_n)   = sum_l alpha_l / (mu_n - i w_l)          (transient residues)
//   K(i w_l)  = sum_n beta_n / (i w_l - mu_n)           (steady kernel values)
//   out(t)    = Re[ sum_n beta_n V(mu_n) e^{mu_n t} + sum_l alpha_l K(i w_l) e^{i w_l t} ]
// where alpha is the 1/M-normalized DFT of the (spatially transformed) input.
// Spatial axes keep the first `cut` nonnegative Fourier modes per axis and
// truncate the rest. Complex gradients use the conjugate (Wirtinger) packing.
//
// Hot loops work on split re/im arrays; reductions are strip-mined over a
// fixed lane count so they vectorize while keeping a deterministic summation
// order. Rank-1 grids skip the spatial transforms and exploit that the
// cotangent entering the layer is purely real.

namespace mflap::ad {

namespace {
constexpr double kPoleCollisionTol = 1e-12;
constexpr double kExpGuard = 700.0;
constexpr int kExpResync = 32;
constexpr int kLanes = 8;

// out = sum_l a[l] * b[l] over split complex arrays; a_im may be null (real a).
inline void cdot(const double* are, const double* aim, const double* bre, const double* bim,
                 int64_t n, double& out_re, double& out_im) {
    double pr[kLanes] = {0}, pi[kLanes] = {0};
    int64_t l = 0;
    if (aim) {
        for (; l + kLanes <= n; l += kLanes)
            for (int j = 0; j < kLanes; ++j) {
                pr[j] += are[l + j] * bre[l + j] - aim[l + j] * bim[l + j];
                pi[j] += are[l + j] * bim[l + j] + aim[l + j] * bre[l + j];
            }
        for (; l < n; ++l) {
            pr[0] += are[l] * bre[l] - aim[l] * bim[l];
            pi[0] += are[l] * bim[l] + aim[l] * bre[l];
        }
    } else {
        for (; l + kLanes <= n; l += kLanes)
            for (int j = 0; j < kLanes; ++j) {
                pr[j] += are[l + j] * bre[l + j];
                pi[j] += are[l + j] * bim[l + j];
            }
        for (; l < n; ++l) {
            pr[0] += are[l] * bre[l];
            pi[0] += are[l] * bim[l];
        }
    }
    double sr = 0, si = 0;
    for (int j = 0; j < kLanes; ++j) {
        sr += pr[j];
        si += pi[j];
    }
    out_re = sr;
    out_im = si;
}

// out = sum_l a[l] * conj(b[l]); a_im may be null; optional real weights w[l].
inline void cdot_conj(const double* are, const double* aim, const double* bre, const double* bim,
                      const double* wgt, int64_t n, double& out_re, double& out_im) {
    double pr[kLanes] = {0}, pi[kLanes] = {0};
    int64_t l = 0;
    if (aim) {
        if (wgt) {
            for (; l + kLanes <= n; l += kLanes)
                for (int j = 0; j < kLanes; ++j) {
                    pr[j] += wgt[l + j] * (are[l + j] * bre[l + j] + aim[l + j] * bim[l + j]);
                    pi[j] += wgt[l + j] * (aim[l + j] * bre[l + j] - are[l + j] * bim[l + j]);
                }
            for (; l < n; ++l) {
                pr[0] += wgt[l] * (are[l] * bre[l] + aim[l] * bim[l]);
                pi[0] += wgt[l] * (aim[l] * bre[l] - are[l] * bim[l]);
            }
        } else {
            for (; l + kLanes <= n; l += kLanes)
                for (int j = 0; j < kLanes; ++j) {
                    pr[j] += are[l + j] * bre[l + j] + aim[l + j] * bim[l + j];
                    pi[j] += aim[l + j] * bre[l + j] - are[l + j] * bim[l + j];
                }
            for (; l < n; ++l) {
                pr[0] += are[l] * bre[l] + aim[l] * bim[l];
                pi[0] += aim[l] * bre[l] - are[l] * bim[l];
            }
        }
    } else {
        if (wgt) {
            for (; l + kLanes <= n; l += kLanes)
                for (int j = 0; j < kLanes; ++j) {
                    pr[j] += wgt[l + j] * are[l + j] * bre[l + j];
                    pi[j] -= wgt[l + j] * are[l + j] * bim[l + j];
                }
            for (; l < n; ++l) {
                pr[0] += wgt[l] * are[l] * bre[l];
                pi[0] -= wgt[l] * are[l] * bim[l];
            }
        } else {
            for (; l + kLanes <= n; l += kLanes)
                for (int j = 0; j < kLanes; ++j) {
                    pr[j] += are[l + j] * bre[l + j];
                    pi[j] -= are[l + j] * bim[l + j];
                }
            for (; l < n; ++l) {
                pr[0] += are[l] * bre[l];
                pi[0] -= are[l] * bim[l];
            }
        }
    }
    double sr = 0, si = 0;
    for (int j = 0; j < kLanes; ++j) {
        sr += pr[j];
        si += pi[j];
    }
    out_re = sr;
    out_im = si;
}

// dst += c * src (complex scalar times split complex array)
inline void caxpy(double cre, double cim, const double* sre, const double* sim, double* dre,
                  double* dim, int64_t n) {
    for (int64_t l = 0; l < n; ++l) {
        dre[l] += cre * sre[l] - cim * sim[l];
        dim[l] += cre * sim[l] + cim * sre[l];
    }
}

// dst_re += Re(c * src) only
inline void caxpy_re(double cre, double cim, const double* sre, const double* sim, double* dre,
                     int64_t n) {
    for (int64_t l = 0; l < n; ++l) dre[l] += cre * sre[l] - cim * sim[l];
}


// dst += sum_j c_j * src_j for up to 4 split-complex sources (one dst pass)
inline void caxpy4(const double* cre, const double* cim, const double* const* sre,
                   const double* const* sim, int nk, double* dre, double* dim, int64_t n) {
    if (nk == 4) {
        const double c0r = cre[0], c0i = cim[0], c1r = cre[1], c1i = cim[1];
        const double c2r = cre[2], c2i = cim[2], c3r = cre[3], c3i = cim[3];
        const double *s0r = sre[0], *s0i = sim[0], *s1r = sre[1], *s1i = sim[1];
        const double *s2r = sre[2], *s2i = sim[2], *s3r = sre[3], *s3i = sim[3];
        for (int64_t l = 0; l < n; ++l) {
            dre[l] += c0r * s0r[l] - c0i * s0i[l] + c1r * s1r[l] - c1i * s1i[l] +
                      c2r * s2r[l] - c2i * s2i[l] + c3r * s3r[l] - c3i * s3i[l];
            dim[l] += c0r * s0i[l] + c0i * s0r[l] + c1r * s1i[l] + c1i * s1r[l] +
                      c2r * s2i[l] + c2i * s2r[l] + c3r * s3i[l] + c3i * s3r[l];
        }
    } else {
        for (int k = 0; k < nk; ++k) caxpy(cre[k], cim[k], sre[k], sim[k], dre, dim, n);
    }
}

// real part only
inline void caxpy4_re(const double* cre, const double* cim, const double* const* sre,
                      const double* const* sim, int nk, double* dre, int64_t n) {
    if (nk == 4) {
        const double c0r = cre[0], c0i = cim[0], c1r = cre[1], c1i = cim[1];
        const double c2r = cre[2], c2i = cim[2], c3r = cre[3], c3i = cim[3];
        const double *s0r = sre[0], *s0i = sim[0], *s1r = sre[1], *s1i = sim[1];
        const double *s2r = sre[2], *s2i = sim[2], *s3r = sre[3], *s3i = sim[3];
        for (int64_t l = 0; l < n; ++l)
            dre[l] += c0r * s0r[l] - c0i * s0i[l] + c1r * s1r[l] - c1i * s1i[l] +
                      c2r * s2r[l] - c2i * s2i[l] + c3r * s3r[l] - c3i * s3i[l];
    } else {
        for (int k = 0; k < nk; ++k) caxpy_re(cre[k], cim[k], sre[k], sim[k], dre, n);
    }
}

// dst_j += conj(src) * c_j for up to 4 destinations (one src pass)
inline void cfan4_conj(const double* cre, const double* cim, const double* are,
                       const double* aim, int nk, double* const* dre, double* const* dim,
                       int64_t n) {
    if (nk == 4) {
        const double c0r = cre[0], c0i = cim[0], c1r = cre[1], c1i = cim[1];
        const double c2r = cre[2], c2i = cim[2], c3r = cre[3], c3i = cim[3];
        double *d0r = dre[0], *d0i = dim[0], *d1r = dre[1], *d1i = dim[1];
        double *d2r = dre[2], *d2i = dim[2], *d3r = dre[3], *d3i = dim[3];
        for (int64_t l = 0; l < n; ++l) {
            const double xr = are[l], xi = -aim[l];
            d0r[l] += xr * c0r - xi * c0i;
            d0i[l] += xr * c0i + xi * c0r;
            d1r[l] += xr * c1r - xi * c1i;
            d1i[l] += xr * c1i + xi * c1r;
            d2r[l] += xr * c2r - xi * c2i;
            d2i[l] += xr * c2i + xi * c2r;
            d3r[l] += xr * c3r - xi * c3i;
            d3i[l] += xr * c3i + xi * c3r;
        }
    } else {
        for (int k = 0; k < nk; ++k)
            for (int64_t l = 0; l < n; ++l) {
                dre[k][l] += are[l] * cre[k] + aim[l] * cim[k];
                dim[k][l] += are[l] * cim[k] - aim[l] * cre[k];
            }
    }
}


// dst += sum_j c_j * conj(src_j), up to 4 sources
inline void caxpy4_conj(const double* cre, const double* cim, const double* const* sre,
                        const double* const* sim, int nk, double* dre, double* dim, int64_t n) {
    if (nk == 4) {
        const double c0r = cre[0], c0i = cim[0], c1r = cre[1], c1i = cim[1];
        const double c2r = cre[2], c2i = cim[2], c3r = cre[3], c3i = cim[3];
        const double *s0r = sre[0], *s0i = sim[0], *s1r = sre[1], *s1i = sim[1];
        const double *s2r = sre[2], *s2i = sim[2], *s3r = sre[3], *s3i = sim[3];
        for (int64_t l = 0; l < n; ++l) {
            dre[l] += c0r * s0r[l] + c0i * s0i[l] + c1r * s1r[l] + c1i * s1i[l] +
                      c2r * s2r[l] + c2i * s2i[l] + c3r * s3r[l] + c3i * s3i[l];
            dim[l] += c0i * s0r[l] - c0r * s0i[l] + c1i * s1r[l] - c1r * s1i[l] +
                      c2i * s2r[l] - c2r * s2i[l] + c3i * s3r[l] - c3r * s3i[l];
        }
    } else {
        for (int k = 0; k < nk; ++k)
            for (int64_t l = 0; l < n; ++l) {
                dre[l] += cre[k] * sre[k][l] + cim[k] * sim[k][l];
                dim[l] += cim[k] * sre[k][l] - cre[k] * sim[k][l];
            }
    }
}

// four dots sharing one left operand: out_k = sum_l a(l) * b_k(l)
inline void cdot4(const double* are, const double* aim, const double* const* bre,
                  const double* const* bim, int nk, int64_t n, double* ore, double* oim) {
    if (nk == 4) {
        constexpr int L = 4;
        double pr[4][L] = {{0}}, pi[4][L] = {{0}};
        const double *b0r = bre[0], *b0i = bim[0], *b1r = bre[1], *b1i = bim[1];
        const double *b2r = bre[2], *b2i = bim[2], *b3r = bre[3], *b3i = bim[3];
        int64_t l = 0;
        for (; l + L <= n; l += L)
            for (int j = 0; j < L; ++j) {
                const double xr = are[l + j], xi = aim[l + j];
                pr[0][j] += xr * b0r[l + j] - xi * b0i[l + j];
                pi[0][j] += xr * b0i[l + j] + xi * b0r[l + j];
                pr[1][j] += xr * b1r[l + j] - xi * b1i[l + j];
                pi[1][j] += xr * b1i[l + j] + xi * b1r[l + j];
                pr[2][j] += xr * b2r[l + j] - xi * b2i[l + j];
                pi[2][j] += xr * b2i[l + j] + xi * b2r[l + j];
                pr[3][j] += xr * b3r[l + j] - xi * b3i[l + j];
                pi[3][j] += xr * b3i[l + j] + xi * b3r[l + j];
            }
        for (; l < n; ++l) {
            const double xr = are[l], xi = aim[l];
            pr[0][0] += xr * b0r[l] - xi * b0i[l];
            pi[0][0] += xr * b0i[l] + xi * b0r[l];
            pr[1][0] += xr * b1r[l] - xi * b1i[l];
            pi[1][0] += xr * b1i[l] + xi * b1r[l];
            pr[2][0] += xr * b2r[l] - xi * b2i[l];
            pi[2][0] += xr * b2i[l] + xi * b2r[l];
            pr[3][0] += xr * b3r[l] - xi * b3i[l];
            pi[3][0] += xr * b3i[l] + xi * b3r[l];
        }
        for (int k = 0; k < 4; ++k) {
            double sr = 0, si = 0;
            for (int j = 0; j < L; ++j) {
                sr += pr[k][j];
                si += pi[k][j];
            }
            ore[k] = sr;
            oim[k] = si;
        }
    } else {
        for (int k = 0; k < nk; ++k) cdot(are, aim, bre[k], bim[k], n, ore[k], oim[k]);
    }
}

// paired plain/weighted conjugated dots against one cotangent line:
// gg_k = sum gu conj(e_k), gt_k = sum w gu conj(e_k), two e-rows per call
inline void cdot2_conj_pair(const double* gur, const double* gui, const double* const* ere,
                            const double* const* eim, const double* wgt, int nk, int64_t n,
                            double* ggre, double* ggim, double* gtre, double* gtim) {
    if (nk == 2 && gui) {
        constexpr int L = 4;
        double g0r[L] = {0}, g0i[L] = {0}, g1r[L] = {0}, g1i[L] = {0};
        double t0r[L] = {0}, t0i[L] = {0}, t1r[L] = {0}, t1i[L] = {0};
        const double *e0r = ere[0], *e0i = eim[0], *e1r = ere[1], *e1i = eim[1];
        int64_t l = 0;
        for (; l + L <= n; l += L)
            for (int j = 0; j < L; ++j) {
                const double ur = gur[l + j], ui = gui[l + j], wv = wgt[l + j];
                const double p0r = ur * e0r[l + j] + ui * e0i[l + j];
                const double p0i = ui * e0r[l + j] - ur * e0i[l + j];
                const double p1r = ur * e1r[l + j] + ui * e1i[l + j];
                const double p1i = ui * e1r[l + j] - ur * e1i[l + j];
                g0r[j] += p0r;
                g0i[j] += p0i;
                g1r[j] += p1r;
                g1i[j] += p1i;
                t0r[j] += wv * p0r;
                t0i[j] += wv * p0i;
                t1r[j] += wv * p1r;
                t1i[j] += wv * p1i;
            }
        for (; l < n; ++l) {
            const double ur = gur[l], ui = gui[l], wv = wgt[l];
            const double p0r = ur * e0r[l] + ui * e0i[l];
            const double p0i = ui * e0r[l] - ur * e0i[l];
            const double p1r = ur * e1r[l] + ui * e1i[l];
            const double p1i = ui * e1r[l] - ur * e1i[l];
            g0r[0] += p0r;
            g0i[0] += p0i;
            g1r[0] += p1r;
            g1i[0] += p1i;
            t0r[0] += wv * p0r;
            t0i[0] += wv * p0i;
            t1r[0] += wv * p1r;
            t1i[0] += wv * p1i;
        }
        ggre[0] = g0r[0] + g0r[1] + g0r[2] + g0r[3];
        ggim[0] = g0i[0] + g0i[1] + g0i[2] + g0i[3];
        ggre[1] = g1r[0] + g1r[1] + g1r[2] + g1r[3];
        ggim[1] = g1i[0] + g1i[1] + g1i[2] + g1i[3];
        gtre[0] = t0r[0] + t0r[1] + t0r[2] + t0r[3];
        gtim[0] = t0i[0] + t0i[1] + t0i[2] + t0i[3];
        gtre[1] = t1r[0] + t1r[1] + t1r[2] + t1r[3];
        gtim[1] = t1i[0] + t1i[1] + t1i[2] + t1i[3];
    } else if (nk == 2) {
        constexpr int L = 4;
        double g0r[L] = {0}, g0i[L] = {0}, g1r[L] = {0}, g1i[L] = {0};
        double t0r[L] = {0}, t0i[L] = {0}, t1r[L] = {0}, t1i[L] = {0};
        const double *e0r = ere[0], *e0i = eim[0], *e1r = ere[1], *e1i = eim[1];
        int64_t l = 0;
        for (; l + L <= n; l += L)
            for (int j = 0; j < L; ++j) {
                const double ur = gur[l + j], wv = wgt[l + j];
                g0r[j] += ur * e0r[l + j];
                g0i[j] -= ur * e0i[l + j];
                g1r[j] += ur * e1r[l + j];
                g1i[j] -= ur * e1i[l + j];
                t0r[j] += wv * ur * e0r[l + j];
                t0i[j] -= wv * ur * e0i[l + j];
                t1r[j] += wv * ur * e1r[l + j];
                t1i[j] -= wv * ur * e1i[l + j];
            }
        for (; l < n; ++l) {
            const double ur = gur[l], wv = wgt[l];
            g0r[0] += ur * e0r[l];
            g0i[0] -= ur * e0i[l];
            g1r[0] += ur * e1r[l];
            g1i[0] -= ur * e1i[l];
            t0r[0] += wv * ur * e0r[l];
            t0i[0] -= wv * ur * e0i[l];
            t1r[0] += wv * ur * e1r[l];
            t1i[0] -= wv * ur * e1i[l];
        }
        ggre[0] = g0r[0] + g0r[1] + g0r[2] + g0r[3];
        ggim[0] = g0i[0] + g0i[1] + g0i[2] + g0i[3];
        ggre[1] = g1r[0] + g1r[1] + g1r[2] + g1r[3];
        ggim[1] = g1i[0] + g1i[1] + g1i[2] + g1i[3];
        gtre[0] = t0r[0] + t0r[1] + t0r[2] + t0r[3];
        gtim[0] = t0i[0] + t0i[1] + t0i[2] + t0i[3];
        gtre[1] = t1r[0] + t1r[1] + t1r[2] + t1r[3];
        gtim[1] = t1i[0] + t1i[1] + t1i[2] + t1i[3];
    } else {
        for (int k = 0; k < nk; ++k) {
            cdot_conj(gur, gui, ere[k], eim[k], nullptr, n, ggre[k], ggim[k]);
            cdot_conj(gur, gui, ere[k], eim[k], wgt, n, gtre[k], gtim[k]);
        }
    }
}

} // namespace

struct PrConvWork {
    bool ready = false;
    int64_t B = 0, T = 0, P = 0; // P: padded row pitch to avoid cache-set conflicts
    int S = 0, G = 0;
    bool rank1 = false;
    double dt = 0.0;

    std::vector<double> omega; // [T]
    std::vector<double> tval;  // [T]
    std::vector<int64_t> combo_off, combo_off_out; // [S]
    int64_t tstride = 0, bstride = 0;
    int64_t tstride_out = 0, bstride_out = 0;

    Tensor xc; // [B, grid..., Cin] complex (rank > 1 only)
    Tensor uc; // [B, grid..., Cout] complex (rank > 1 only)
    std::vector<double> a_re, a_im;     // alpha [B,S,Cin,T]
    std::vector<double> r_re, r_im;     // [G,N,T]
    std::vector<double> e_re, e_im;     // [G,N,T]
    std::vector<double> k_re, k_im;     // [G,T]
    std::vector<double> v_re, v_im;     // V [B,G,N]
    std::vector<double> gm_re, gm_im;   // gamma [B,G,N]
    std::vector<double> gv_re, gv_im;   // grad V [B,G,N]
    std::vector<double> lam_re, lam_im; // lambda [B,S,Cout,T]
    std::vector<double> u_re, u_im;     // cotangent lines [B,S,Cout,T]
    std::vector<double> ga_re, ga_im;   // grad alpha [B,S,Cin,T]
    std::vector<double> gk_re, gk_im;   // grad K [G,T]
    std::vector<double> gr_re, gr_im;   // grad r [G,N,T]
    std::vector<double> blk_re, blk_im; // [T*8] blocked-FFT scratch

    void init(const PrConvSpec& sp, const Tensor& v);
};

void PrConvWork::init(const PrConvSpec& sp, const Tensor& v) {
    const int r = static_cast<int>(sp.grid.size());
    B = v.shape[0];
    T = sp.time_len();
    P = T + 8;
    S = sp.spatial_combos();
    G = sp.c_in * sp.c_out * S;
    rank1 = r == 1;
    const double ext = sp.time_extent();
    dt = ext / static_cast<double>(T);
    const double w1 = 2.0 * 3.14159265358979323846 / ext;
    omega.resize(static_cast<size_t>(T));
    tval.resize(static_cast<size_t>(T));
    for (int64_t l = 0; l < T; ++l) {
        int64_t f = l < (T + 1) / 2 ? l : l - T;
        omega[static_cast<size_t>(l)] = w1 * static_cast<double>(f);
        tval[static_cast<size_t>(l)] = dt * static_cast<double>(l);
    }
    std::vector<int64_t> st(static_cast<size_t>(r + 2));
    int64_t acc = 1;
    for (int i = r + 1; i >= 0; --i) {
        st[static_cast<size_t>(i)] = acc;
        acc *= v.shape[static_cast<size_t>(i)];
    }
    bstride = st[0];
    tstride = st[static_cast<size_t>(sp.time_axis + 1)];
    bstride_out = bstride / sp.c_in * sp.c_out;
    tstride_out = tstride / sp.c_in * sp.c_out;
    combo_off.assign(static_cast<size_t>(S), 0);
    combo_off_out.assign(static_cast<size_t>(S), 0);
    std::vector<int> kidx(static_cast<size_t>(r), 0);
    for (int s = 0; s < S; ++s) {
        int64_t off = 0;
        for (int a = 0; a < r; ++a)
            if (a != sp.time_axis) off += kidx[static_cast<size_t>(a)] * st[static_cast<size_t>(a + 1)];
        combo_off[static_cast<size_t>(s)] = off;
        combo_off_out[static_cast<size_t>(s)] = off / sp.c_in * sp.c_out;
        for (int a = r - 1; a >= 0; --a) {
            if (a == sp.time_axis) continue;
            if (++kidx[static_cast<size_t>(a)] < sp.spatial_cut[static_cast<size_t>(a)]) break;
            kidx[static_cast<size_t>(a)] = 0;
        }
    }

    if (!rank1) {
        xc = Tensor::complex(v.shape);
        auto oshape = v.shape;
        oshape.back() = sp.c_out;
        uc = Tensor::complex(oshape);
    }
    size_t bsct = static_cast<size_t>(B) * static_cast<size_t>(S) * static_cast<size_t>(sp.c_in) *
                  static_cast<size_t>(P);
    a_re.assign(bsct, 0.0);
    a_im.assign(bsct, 0.0);
    ga_re.assign(bsct, 0.0);
    ga_im.assign(bsct, 0.0);
    size_t gnt = static_cast<size_t>(G) * static_cast<size_t>(sp.n_modes) * static_cast<size_t>(P);
    r_re.assign(gnt, 0.0);
    r_im.assign(gnt, 0.0);
    e_re.assign(gnt, 0.0);
    e_im.assign(gnt, 0.0);
    gr_re.assign(gnt, 0.0);
    gr_im.assign(gnt, 0.0);
    size_t gt = static_cast<size_t>(G) * static_cast<size_t>(P);
    k_re.assign(gt, 0.0);
    k_im.assign(gt, 0.0);
    gk_re.assign(gt, 0.0);
    gk_im.assign(gt, 0.0);
    size_t bgn = static_cast<size_t>(B) * static_cast<size_t>(G) * static_cast<size_t>(sp.n_modes);
    v_re.assign(bgn, 0.0);
    v_im.assign(bgn, 0.0);
    gm_re.assign(bgn, 0.0);
    gm_im.assign(bgn, 0.0);
    gv_re.assign(bgn, 0.0);
    gv_im.assign(bgn, 0.0);
    size_t bsot = static_cast<size_t>(B) * static_cast<size_t>(S) *
                  static_cast<size_t>(sp.c_out) * static_cast<size_t>(P);
    lam_re.assign(bsot, 0.0);
    lam_im.assign(bsot, 0.0);
    u_re.assign(bsot, 0.0);
    u_im.assign(bsot, 0.0);
    blk_re.assign(static_cast<size_t>(8 * T), 0.0);
    blk_im.assign(static_cast<size_t>(8 * T), 0.0);
    ready = true;
}

Graph::Graph() = default;
Graph::~Graph() = default;
Graph::Graph(Graph&&) noexcept = default;
Graph& Graph::operator=(Graph&&) noexcept = default;

int Graph::pr_conv(int v, int mu, int beta, const PrConvSpec& spec, const std::string& name) {
    const Node& vn = nodes_[static_cast<size_t>(v)];
    const Node& mn = nodes_[static_cast<size_t>(mu)];
    const Node& bn = nodes_[static_cast<size_t>(beta)];
    if (vn.value.is_complex()) throw Error(name + ": input must be real");
    const int r = static_cast<int>(spec.grid.size());
    if (vn.value.rank() != r + 2)
        throw Error(name + ": input rank must be batch + grid + channels");
    for (int a = 0; a < r; ++a)
        if (vn.value.shape[static_cast<size_t>(a + 1)] != spec.grid[static_cast<size_t>(a)])
            throw Error(name + ": grid mismatch at axis " + std::to_string(a));
    if (vn.value.shape.back() != spec.c_in) throw Error(name + ": channel mismatch");
    if (spec.time_axis < 0 || spec.time_axis >= r) throw Error(name + ": bad time axis");
    if (static_cast<int>(spec.spatial_cut.size()) != r && r > 1)
        throw Error(name + ": spatial_cut must cover every grid axis");
    for (int a = 0; a < r; ++a) {
        if (a == spec.time_axis) continue;
        if (spec.spatial_cut[static_cast<size_t>(a)] < 1 ||
            spec.spatial_cut[static_cast<size_t>(a)] > spec.grid[static_cast<size_t>(a)])
            throw Error(name + ": spatial cut out of range on axis " + std::to_string(a));
    }
    std::vector<int64_t> pshape = {spec.c_in, spec.c_out, spec.spatial_combos(), spec.n_modes};
    if (!mn.value.is_complex() || mn.value.shape != pshape)
        throw Error(name + ": poles must be complex with shape " + shape_str(pshape));
    if (!bn.value.is_complex() || bn.value.shape != pshape)
        throw Error(name + ": residues must be complex with shape " + shape_str(pshape));

    Node n;
    n.kind = OpKind::PrConv;
    n.name = name;
    n.args = {v, mu, beta};
    n.pr = spec;
    auto oshape = vn.value.shape;
    oshape.back() = spec.c_out;
    n.value = Tensor::real(oshape);
    prwork_.push_back(std::make_unique<PrConvWork>());
    n.work = static_cast<int>(prwork_.size()) - 1;
    return push(std::move(n));
}

void pr_conv_forward(Graph& g, Node& n) {
    const PrConvSpec& sp = n.pr;
    const Tensor& v = g.node(n.args[0]).value;
    const Tensor& mu = g.node(n.args[1]).value;
    const Tensor& beta = g.node(n.args[2]).value;
    PrConvWork& w = *g.prwork_[static_cast<size_t>(n.work)];
    if (!w.ready) w.init(sp, v);

    const int r = static_cast<int>(sp.grid.size());
    const int Ci = sp.c_in, Co = sp.c_out, N = sp.n_modes;
    const int64_t T = w.T, B = w.B;
    const double inv_t = 1.0 / double(T);
    double* blk_re = w.blk_re.data();
    double* blk_im = w.blk_im.data();

    // spatial transforms (rank > 1)
    cxd* xc = nullptr;
    if (!w.rank1) {
        xc = w.xc.cdata();
        for (int64_t i = 0; i < v.numel(); ++i) xc[i] = cxd(v.at(i), 0.0);
        for (int a = 0; a < r; ++a) {
            if (a == sp.time_axis) continue;
            fft::transform_axis(w.xc, a + 1, -1, 1.0 / double(sp.grid[static_cast<size_t>(a)]));
        }
    }

    // time DFT of every (b, s, ci) line, 8 lines per blocked transform
    const int64_t Lin = B * w.S * Ci;
    for (int64_t base = 0; base < Lin; base += 8) {
        const int nb = static_cast<int>(std::min<int64_t>(8, Lin - base));
        if (nb < 8) {
            std::memset(blk_re, 0, static_cast<size_t>(8 * T) * sizeof(double));
            std::memset(blk_im, 0, static_cast<size_t>(8 * T) * sizeof(double));
        }
        for (int j = 0; j < nb; ++j) {
            const int64_t row = base + j;
            const int64_t b = row / (w.S * Ci);
            const int64_t rem = row % (w.S * Ci);
            const int s = static_cast<int>(rem / Ci);
            const int ci = static_cast<int>(rem % Ci);
            if (w.rank1) {
                const double* src = v.data() + b * w.bstride + ci;
                for (int64_t t = 0; t < T; ++t) {
                    blk_re[t * 8 + j] = src[t * w.tstride];
                    blk_im[t * 8 + j] = 0.0;
                }
            } else {
                const cxd* src = xc + b * w.bstride + w.combo_off[static_cast<size_t>(s)] + ci;
                for (int64_t t = 0; t < T; ++t) {
                    const cxd z = src[t * w.tstride];
                    blk_re[t * 8 + j] = z.real();
                    blk_im[t * 8 + j] = z.imag();
                }
            }
        }
        fft::transform_block8(blk_re, blk_im, static_cast<int>(T), -1);
        for (int j = 0; j < nb; ++j) {
            const int64_t row = base + j;
            double* are = w.a_re.data() + row * w.P;
            double* aim = w.a_im.data() + row * w.P;
            for (int64_t t = 0; t < T; ++t) {
                are[t] = blk_re[t * 8 + j] * inv_t;
                aim[t] = blk_im[t * 8 + j] * inv_t;
            }
        }
    }

    // parameter tables
    const double text = sp.time_extent();
    const cxd* mup = mu.cdata();
    const cxd* bep = beta.cdata();
    std::fill(w.k_re.begin(), w.k_re.end(), 0.0);
    std::fill(w.k_im.begin(), w.k_im.end(), 0.0);
    for (int gi = 0; gi < w.G; ++gi) {
        double* kre = w.k_re.data() + int64_t(gi) * w.P;
        double* kim = w.k_im.data() + int64_t(gi) * w.P;
        for (int m = 0; m < N; ++m) {
            const cxd mv = mup[int64_t(gi) * N + m];
            const cxd bv = bep[int64_t(gi) * N + m];
            if (!std::isfinite(mv.real()) || !std::isfinite(mv.imag()))
                throw Error(n.name + ": non-finite pole");
            if (std::abs(mv.real()) * text > kExpGuard)
                throw Error(n.name + ": pole real part overflows exp on [0," + std::to_string(text) + "]");
            double* rre = w.r_re.data() + (int64_t(gi) * N + m) * w.P;
            double* rim = w.r_im.data() + (int64_t(gi) * N + m) * w.P;
            const double mre = mv.real(), mim = mv.imag();
            double dmin = 1e300;
            for (int64_t l = 0; l < T; ++l) {
                const double dim = mim - w.omega[static_cast<size_t>(l)];
                const double d2 = mre * mre + dim * dim;
                dmin = d2 < dmin ? d2 : dmin;
                const double inv = 1.0 / d2;
                rre[l] = mre * inv;
                rim[l] = -dim * inv;
            }
            if (dmin < kPoleCollisionTol * kPoleCollisionTol)
                throw Error(n.name + ": pole collides with grid frequency (|mu - iw| < 1e-12)");
            for (int64_t l = 0; l < T; ++l) {
                kre[l] -= bv.real() * rre[l] - bv.imag() * rim[l];
                kim[l] -= bv.real() * rim[l] + bv.imag() * rre[l];
            }
            double* ere = w.e_re.data() + (int64_t(gi) * N + m) * w.P;
            double* eim = w.e_im.data() + (int64_t(gi) * N + m) * w.P;
            const cxd step = std::exp(mv * w.dt);
            cxd cur(1.0, 0.0);
            for (int64_t t = 0; t < T; ++t) {
                if (t % kExpResync == 0) cur = std::exp(mv * w.tval[static_cast<size_t>(t)]);
                ere[t] = cur.real();
                eim[t] = cur.imag();
                cur *= step;
            }
        }
    }

    // V, gamma, lambda. Mode tiles keep r rows hot across the batch loop.
    std::fill(w.lam_re.begin(), w.lam_re.end(), 0.0);
    std::fill(w.lam_im.begin(), w.lam_im.end(), 0.0);
    int gi = 0;
    for (int ci = 0; ci < Ci; ++ci)
        for (int co = 0; co < Co; ++co)
            for (int s = 0; s < w.S; ++s, ++gi) {
                const int64_t pb = int64_t(gi) * N;
                for (int mt = 0; mt < N; mt += 4) {
                    const int nk = std::min(4, N - mt);
                    const double* bre4[4];
                    const double* bim4[4];
                    for (int k = 0; k < nk; ++k) {
                        bre4[k] = w.r_re.data() + (pb + mt + k) * w.P;
                        bim4[k] = w.r_im.data() + (pb + mt + k) * w.P;
                    }
                    for (int64_t b = 0; b < B; ++b) {
                        const double* are = w.a_re.data() + ((b * w.S + s) * Ci + ci) * w.P;
                        const double* aim = w.a_im.data() + ((b * w.S + s) * Ci + ci) * w.P;
                        double ore[4], oim[4];
                        cdot4(are, aim, bre4, bim4, nk, T, ore, oim);
                        for (int k = 0; k < nk; ++k) {
                            const size_t vi = static_cast<size_t>((b * w.G + gi) * N + mt + k);
                            w.v_re[vi] = ore[k];
                            w.v_im[vi] = oim[k];
                            const cxd bv = bep[pb + mt + k];
                            w.gm_re[vi] = bv.real() * ore[k] - bv.imag() * oim[k];
                            w.gm_im[vi] = bv.real() * oim[k] + bv.imag() * ore[k];
                        }
                    }
                }
                const double* kre = w.k_re.data() + int64_t(gi) * w.P;
                const double* kim = w.k_im.data() + int64_t(gi) * w.P;
                for (int64_t b = 0; b < B; ++b) {
                    const double* are = w.a_re.data() + ((b * w.S + s) * Ci + ci) * w.P;
                    const double* aim = w.a_im.data() + ((b * w.S + s) * Ci + ci) * w.P;
                    double* lre = w.lam_re.data() + ((b * w.S + s) * Co + co) * w.P;
                    double* lim = w.lam_im.data() + ((b * w.S + s) * Co + co) * w.P;
                    for (int64_t l = 0; l < T; ++l) {
                        lre[l] += are[l] * kre[l] - aim[l] * kim[l];
                        lim[l] += are[l] * kim[l] + aim[l] * kre[l];
                    }
                }
            }

    // steady-state synthesis: blocked inverse DFT of every lambda line in place
    const int64_t Lout = B * w.S * Co;
    for (int64_t base = 0; base < Lout; base += 8) {
        const int nb = static_cast<int>(std::min<int64_t>(8, Lout - base));
        if (nb < 8) {
            std::memset(blk_re, 0, static_cast<size_t>(8 * T) * sizeof(double));
            std::memset(blk_im, 0, static_cast<size_t>(8 * T) * sizeof(double));
        }
        for (int j = 0; j < nb; ++j) {
            const double* lre = w.lam_re.data() + (base + j) * w.P;
            const double* lim = w.lam_im.data() + (base + j) * w.P;
            for (int64_t t = 0; t < T; ++t) {
                blk_re[t * 8 + j] = lre[t];
                blk_im[t * 8 + j] = lim[t];
            }
        }
        fft::transform_block8(blk_re, blk_im, static_cast<int>(T), +1);
        for (int j = 0; j < nb; ++j) {
            double* lre = w.lam_re.data() + (base + j) * w.P;
            double* lim = w.lam_im.data() + (base + j) * w.P;
            for (int64_t t = 0; t < T; ++t) {
                lre[t] = blk_re[t * 8 + j];
                lim[t] = blk_im[t * 8 + j];
            }
        }
    }

    // add transients: (ci, mode) tiles stay hot while the batch streams
    for (int s = 0; s < w.S; ++s)
        for (int co = 0; co < Co; ++co) {
            const int CM = Ci * N;
            for (int cm = 0; cm < CM; cm += 4) {
                const int nk = std::min(4, CM - cm);
                const double* sre4[4];
                const double* sim4[4];
                int64_t vib[4];
                for (int k = 0; k < nk; ++k) {
                    const int cik = (cm + k) / N;
                    const int mk = (cm + k) % N;
                    const int gg = (cik * Co + co) * w.S + s;
                    sre4[k] = w.e_re.data() + (int64_t(gg) * N + mk) * w.P;
                    sim4[k] = w.e_im.data() + (int64_t(gg) * N + mk) * w.P;
                    vib[k] = int64_t(gg) * N + mk;
                }
                for (int64_t b = 0; b < B; ++b) {
                    double cre[4], cim2[4];
                    for (int k = 0; k < nk; ++k) {
                        const size_t vi = static_cast<size_t>(b * w.G * N + vib[k]);
                        cre[k] = w.gm_re[vi];
                        cim2[k] = w.gm_im[vi];
                    }
                    double* lre = w.lam_re.data() + ((b * w.S + s) * Co + co) * w.P;
                    double* lim = w.lam_im.data() + ((b * w.S + s) * Co + co) * w.P;
                    if (w.rank1)
                        caxpy4_re(cre, cim2, sre4, sim4, nk, lre, T);
                    else
                        caxpy4(cre, cim2, sre4, sim4, nk, lre, lim, T);
                }
            }
        }

    // emit
    if (!w.rank1) w.uc.zero();
    cxd* uc = w.rank1 ? nullptr : w.uc.cdata();
    for (int64_t row = 0; row < Lout; ++row) {
        const int64_t b = row / (w.S * Co);
        const int64_t rem = row % (w.S * Co);
        const int s = static_cast<int>(rem / Co);
        const int co = static_cast<int>(rem % Co);
        const double* lre = w.lam_re.data() + row * w.P;
        const double* lim = w.lam_im.data() + row * w.P;
        if (w.rank1) {
            double* out = n.value.data() + b * w.bstride_out + co;
            for (int64_t t = 0; t < T; ++t) out[t * w.tstride_out] = lre[t];
        } else {
            cxd* base2 = uc + b * w.bstride_out + w.combo_off_out[static_cast<size_t>(s)] + co;
            for (int64_t t = 0; t < T; ++t) base2[t * w.tstride_out] = cxd(lre[t], lim[t]);
        }
    }

    if (!w.rank1) {
        for (int a = 0; a < r; ++a) {
            if (a == sp.time_axis) continue;
            fft::transform_axis(w.uc, a + 1, +1, 1.0);
        }
        for (int64_t i = 0; i < n.value.numel(); ++i) n.value.at(i) = uc[i].real();
    }
}

void pr_conv_backward(Graph& g, Node& n) {
    const PrConvSpec& sp = n.pr;
    Node& vn = g.nodes_[static_cast<size_t>(n.args[0])];
    Node& mn = g.nodes_[static_cast<size_t>(n.args[1])];
    Node& bn = g.nodes_[static_cast<size_t>(n.args[2])];
    const Tensor& beta = bn.value;
    PrConvWork& w = *g.prwork_[static_cast<size_t>(n.work)];
    const int r = static_cast<int>(sp.grid.size());
    const int Ci = sp.c_in, Co = sp.c_out, N = sp.n_modes;
    const int64_t T = w.T, B = w.B;
    const bool need_v = vn.needs_grad;
    const bool need_mu = mn.needs_grad;
    const bool need_beta = bn.needs_grad;
    double* blk_re = w.blk_re.data();
    double* blk_im = w.blk_im.data();

    const Tensor& gout = n.grad;
    cxd* uc = nullptr;
    if (!w.rank1) {
        uc = w.uc.cdata();
        for (int64_t i = 0; i < gout.numel(); ++i) uc[i] = cxd(gout.at(i), 0.0);
        for (int a = 0; a < r; ++a) {
            if (a == sp.time_axis) continue;
            fft::transform_axis(w.uc, a + 1, -1, 1.0);
        }
    }

    // gather all cotangent lines gU into u_re/u_im rows
    const int64_t Lout = B * w.S * Co;
    for (int64_t row = 0; row < Lout; ++row) {
        const int64_t b = row / (w.S * Co);
        const int64_t rem = row % (w.S * Co);
        const int s = static_cast<int>(rem / Co);
        const int co = static_cast<int>(rem % Co);
        double* ur = w.u_re.data() + row * w.P;
        double* ui = w.u_im.data() + row * w.P;
        if (w.rank1) {
            const double* src = gout.data() + b * w.bstride_out + co;
            for (int64_t t = 0; t < T; ++t) ur[t] = src[t * w.tstride_out];
            std::memset(ui, 0, static_cast<size_t>(T) * sizeof(double));
        } else {
            const cxd* src = uc + b * w.bstride_out + w.combo_off_out[static_cast<size_t>(s)] + co;
            for (int64_t t = 0; t < T; ++t) {
                const cxd z = src[t * w.tstride_out];
                ur[t] = z.real();
                ui[t] = z.imag();
            }
        }
    }

    if (need_v) {
        std::fill(w.ga_re.begin(), w.ga_re.end(), 0.0);
        std::fill(w.ga_im.begin(), w.ga_im.end(), 0.0);
    }
    std::fill(w.gk_re.begin(), w.gk_re.end(), 0.0);
    std::fill(w.gk_im.begin(), w.gk_im.end(), 0.0);
    if (need_mu) {
        std::fill(w.gr_re.begin(), w.gr_re.end(), 0.0);
        std::fill(w.gr_im.begin(), w.gr_im.end(), 0.0);
    }

    Tensor* gmu = need_mu ? &g.grad_buf(n.args[1]) : nullptr;
    Tensor* gbe = need_beta ? &g.grad_buf(n.args[2]) : nullptr;
    const cxd* bep = beta.cdata();

    // transient adjoint, three passes tiled for row reuse:
    //  1. gg/gt dots per (b, group, mode) -> gbeta, gmu, gV
    //  2. galpha += conj(r) gV, fanned over (co, mode) tiles per (b, s, ci)
    //  3. gr += conj(alpha) gV, gr-row tiles resident across the batch
    for (int s = 0; s < w.S; ++s)
        for (int co = 0; co < Co; ++co)
            for (int ci = 0; ci < Ci; ++ci) {
                const int gi2 = (ci * Co + co) * w.S + s;
                const int64_t pb = int64_t(gi2) * N;
                for (int mt = 0; mt < N; mt += 2) {
                    const int nk = std::min(2, N - mt);
                    const double* ere2[2];
                    const double* eim2[2];
                    for (int k = 0; k < nk; ++k) {
                        ere2[k] = w.e_re.data() + (pb + mt + k) * w.P;
                        eim2[k] = w.e_im.data() + (pb + mt + k) * w.P;
                    }
                    for (int64_t b = 0; b < B; ++b) {
                        const int64_t row = (b * w.S + s) * Co + co;
                        const double* gur = w.u_re.data() + row * w.P;
                        const double* gui = w.rank1 ? nullptr : w.u_im.data() + row * w.P;
                        double ggre[2], ggim[2], gtre[2], gtim[2];
                        cdot2_conj_pair(gur, gui, ere2, eim2, w.tval.data(), nk, T, ggre, ggim,
                                        gtre, gtim);
                        for (int k = 0; k < nk; ++k) {
                            const size_t vi = static_cast<size_t>((b * w.G + gi2) * N + mt + k);
                            if (need_beta)
                                gbe->cat(pb + mt + k) +=
                                    cxd(w.v_re[vi] * ggre[k] + w.v_im[vi] * ggim[k],
                                        w.v_re[vi] * ggim[k] - w.v_im[vi] * ggre[k]);
                            if (need_mu)
                                gmu->cat(pb + mt + k) +=
                                    cxd(w.gm_re[vi] * gtre[k] + w.gm_im[vi] * gtim[k],
                                        w.gm_re[vi] * gtim[k] - w.gm_im[vi] * gtre[k]);
                            const cxd bv = bep[pb + mt + k];
                            w.gv_re[vi] = bv.real() * ggre[k] + bv.imag() * ggim[k];
                            w.gv_im[vi] = bv.real() * ggim[k] - bv.imag() * ggre[k];
                        }
                    }
                }
            }

    if (need_v)
        for (int s = 0; s < w.S; ++s)
            for (int ci = 0; ci < Ci; ++ci) {
                const int CM = Co * N;
                for (int cm = 0; cm < CM; cm += 4) {
                    const int nk = std::min(4, CM - cm);
                    const double* sre4[4];
                    const double* sim4[4];
                    int64_t vib[4];
                    for (int k = 0; k < nk; ++k) {
                        const int cok = (cm + k) / N;
                        const int mk = (cm + k) % N;
                        const int gg = (ci * Co + cok) * w.S + s;
                        sre4[k] = w.r_re.data() + (int64_t(gg) * N + mk) * w.P;
                        sim4[k] = w.r_im.data() + (int64_t(gg) * N + mk) * w.P;
                        vib[k] = int64_t(gg) * N + mk;
                    }
                    for (int64_t b = 0; b < B; ++b) {
                        double cre[4], cim2[4];
                        for (int k = 0; k < nk; ++k) {
                            const size_t vi = static_cast<size_t>(b * w.G * N + vib[k]);
                            cre[k] = w.gv_re[vi];
                            cim2[k] = w.gv_im[vi];
                        }
                        double* gar = w.ga_re.data() + ((b * w.S + s) * Ci + ci) * w.P;
                        double* gai = w.ga_im.data() + ((b * w.S + s) * Ci + ci) * w.P;
                        caxpy4_conj(cre, cim2, sre4, sim4, nk, gar, gai, T);
                    }
                }
            }

    if (need_mu)
        for (int s = 0; s < w.S; ++s)
            for (int ci = 0; ci < Ci; ++ci) {
                const int CM = Co * N;
                for (int cm = 0; cm < CM; cm += 4) {
                    const int nk = std::min(4, CM - cm);
                    double* dre4[4];
                    double* dim4[4];
                    int64_t vib[4];
                    for (int k = 0; k < nk; ++k) {
                        const int cok = (cm + k) / N;
                        const int mk = (cm + k) % N;
                        const int gg = (ci * Co + cok) * w.S + s;
                        dre4[k] = w.gr_re.data() + (int64_t(gg) * N + mk) * w.P;
                        dim4[k] = w.gr_im.data() + (int64_t(gg) * N + mk) * w.P;
                        vib[k] = int64_t(gg) * N + mk;
                    }
                    for (int64_t b = 0; b < B; ++b) {
                        const double* are = w.a_re.data() + ((b * w.S + s) * Ci + ci) * w.P;
                        const double* aim = w.a_im.data() + ((b * w.S + s) * Ci + ci) * w.P;
                        double cre[4], cim2[4];
                        for (int k = 0; k < nk; ++k) {
                            const size_t vi = static_cast<size_t>(b * w.G * N + vib[k]);
                            cre[k] = w.gv_re[vi];
                            cim2[k] = w.gv_im[vi];
                        }
                        cfan4_conj(cre, cim2, are, aim, nk, dre4, dim4, T);
                    }
                }
            }

    // steady adjoint: glambda = unnormalized forward DFT of gU rows (in place)
    for (int64_t base = 0; base < Lout; base += 8) {
        const int nb = static_cast<int>(std::min<int64_t>(8, Lout - base));
        if (nb < 8) {
            std::memset(blk_re, 0, static_cast<size_t>(8 * T) * sizeof(double));
            std::memset(blk_im, 0, static_cast<size_t>(8 * T) * sizeof(double));
        }
        for (int j = 0; j < nb; ++j) {
            const double* ur = w.u_re.data() + (base + j) * w.P;
            const double* ui = w.u_im.data() + (base + j) * w.P;
            for (int64_t t = 0; t < T; ++t) {
                blk_re[t * 8 + j] = ur[t];
                blk_im[t * 8 + j] = ui[t];
            }
        }
        fft::transform_block8(blk_re, blk_im, static_cast<int>(T), -1);
        for (int j = 0; j < nb; ++j) {
            double* ur = w.u_re.data() + (base + j) * w.P;
            double* ui = w.u_im.data() + (base + j) * w.P;
            for (int64_t t = 0; t < T; ++t) {
                ur[t] = blk_re[t * 8 + j];
                ui[t] = blk_im[t * 8 + j];
            }
        }
    }

    for (int64_t row = 0; row < Lout; ++row) {
        const int64_t b = row / (w.S * Co);
        const int64_t rem = row % (w.S * Co);
        const int s = static_cast<int>(rem / Co);
        const int co = static_cast<int>(rem % Co);
        const double* glr = w.u_re.data() + row * w.P;
        const double* gli = w.u_im.data() + row * w.P;
        for (int ci = 0; ci < Ci; ++ci) {
            const int gi2 = (ci * Co + co) * w.S + s;
            const double* kre = w.k_re.data() + int64_t(gi2) * w.P;
            const double* kim = w.k_im.data() + int64_t(gi2) * w.P;
            const double* are = w.a_re.data() + ((b * w.S + s) * Ci + ci) * w.P;
            const double* aim = w.a_im.data() + ((b * w.S + s) * Ci + ci) * w.P;
            double* gkr = w.gk_re.data() + int64_t(gi2) * w.P;
            double* gki = w.gk_im.data() + int64_t(gi2) * w.P;
            if (need_v) {
                double* gar = w.ga_re.data() + ((b * w.S + s) * Ci + ci) * w.P;
                double* gai = w.ga_im.data() + ((b * w.S + s) * Ci + ci) * w.P;
                for (int64_t l = 0; l < T; ++l) {
                    gar[l] += kre[l] * glr[l] + kim[l] * gli[l];
                    gai[l] += kre[l] * gli[l] - kim[l] * glr[l];
                }
            }
            for (int64_t l = 0; l < T; ++l) {
                gkr[l] += are[l] * glr[l] + aim[l] * gli[l];
                gki[l] += are[l] * gli[l] - aim[l] * glr[l];
            }
        }
    }

    // K -> beta, r; r -> mu
    if (need_mu || need_beta) {
        for (int gi = 0; gi < w.G; ++gi) {
            const double* gkr = w.gk_re.data() + int64_t(gi) * w.P;
            const double* gki = w.gk_im.data() + int64_t(gi) * w.P;
            for (int m = 0; m < N; ++m) {
                const int64_t pb = int64_t(gi) * N + m;
                const double* rre = w.r_re.data() + pb * w.P;
                const double* rim = w.r_im.data() + pb * w.P;
                const cxd bv = bep[pb];
                if (need_beta) {
                    double sre, sim;
                    cdot_conj(gkr, gki, rre, rim, nullptr, T, sre, sim);
                    gbe->cat(pb) += cxd(-sre, -sim);
                }
                if (need_mu) {
                    double* grr = w.gr_re.data() + pb * w.P;
                    double* gri = w.gr_im.data() + pb * w.P;
                    for (int64_t l = 0; l < T; ++l) {
                        grr[l] -= bv.real() * gkr[l] + bv.imag() * gki[l];
                        gri[l] -= bv.real() * gki[l] - bv.imag() * gkr[l];
                    }
                    double pr[kLanes] = {0}, pi[kLanes] = {0};
                    int64_t l = 0;
                    for (; l + kLanes <= T; l += kLanes)
                        for (int j = 0; j < kLanes; ++j) {
                            const double cre = rre[l + j] * rre[l + j] - rim[l + j] * rim[l + j];
                            const double cim = -2.0 * rre[l + j] * rim[l + j];
                            pr[j] -= cre * grr[l + j] - cim * gri[l + j];
                            pi[j] -= cre * gri[l + j] + cim * grr[l + j];
                        }
                    for (; l < T; ++l) {
                        const double cre = rre[l] * rre[l] - rim[l] * rim[l];
                        const double cim = -2.0 * rre[l] * rim[l];
                        pr[0] -= cre * grr[l] - cim * gri[l];
                        pi[0] -= cre * gri[l] + cim * grr[l];
                    }
                    double sre = 0, sim = 0;
                    for (int j = 0; j < kLanes; ++j) {
                        sre += pr[j];
                        sim += pi[j];
                    }
                    gmu->cat(pb) += cxd(sre, sim);
                }
            }
        }
    }

    // alpha adjoint: blocked inverse DFT of gAlpha rows, then scatter to the grid
    if (need_v) {
        const double inv_t = 1.0 / double(T);
        const int64_t Lin = B * w.S * Ci;
        for (int64_t base = 0; base < Lin; base += 8) {
            const int nb = static_cast<int>(std::min<int64_t>(8, Lin - base));
            if (nb < 8) {
                std::memset(blk_re, 0, static_cast<size_t>(8 * T) * sizeof(double));
                std::memset(blk_im, 0, static_cast<size_t>(8 * T) * sizeof(double));
            }
            for (int j = 0; j < nb; ++j) {
                const double* gar = w.ga_re.data() + (base + j) * w.P;
                const double* gai = w.ga_im.data() + (base + j) * w.P;
                for (int64_t t = 0; t < T; ++t) {
                    blk_re[t * 8 + j] = gar[t];
                    blk_im[t * 8 + j] = gai[t];
                }
            }
            fft::transform_block8(blk_re, blk_im, static_cast<int>(T), +1);
            for (int j = 0; j < nb; ++j) {
                double* gar = w.ga_re.data() + (base + j) * w.P;
                double* gai = w.ga_im.data() + (base + j) * w.P;
                for (int64_t t = 0; t < T; ++t) {
                    gar[t] = blk_re[t * 8 + j] * inv_t;
                    gai[t] = blk_im[t * 8 + j] * inv_t;
                }
            }
        }
        Tensor& gv = g.grad_buf(n.args[0]);
        if (w.rank1) {
            for (int64_t row = 0; row < Lin; ++row) {
                const int64_t b = row / Ci;
                const int ci = static_cast<int>(row % Ci);
                const double* gar = w.ga_re.data() + row * w.P;
                double* base2 = gv.data() + b * w.bstride + ci;
                for (int64_t t = 0; t < T; ++t) base2[t * w.tstride] += gar[t];
            }
        } else {
            cxd* xc = w.xc.cdata();
            std::memset(xc, 0, static_cast<size_t>(w.xc.numel()) * sizeof(cxd));
            for (int64_t row = 0; row < Lin; ++row) {
                const int64_t b = row / (w.S * Ci);
                const int64_t rem = row % (w.S * Ci);
                const int s = static_cast<int>(rem / Ci);
                const int ci = static_cast<int>(rem % Ci);
                const double* gar = w.ga_re.data() + row * w.P;
                const double* gai = w.ga_im.data() + row * w.P;
                cxd* base2 = xc + b * w.bstride + w.combo_off[static_cast<size_t>(s)] + ci;
                for (int64_t t = 0; t < T; ++t) base2[t * w.tstride] = cxd(gar[t], gai[t]);
            }
            for (int a = 0; a < r; ++a) {
                if (a == sp.time_axis) continue;
                fft::transform_axis(w.xc, a + 1, +1, 1.0 / double(sp.grid[static_cast<size_t>(a)]));
            }
            for (int64_t i = 0; i < gv.numel(); ++i) gv.at(i) += xc[i].real();
        }
    }
}

} // namespace mflap::ad
