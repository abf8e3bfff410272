#ifndef MFLAP_SYSTEMS_HPP
#define MFLAP_SYSTEMS_HPP

#include "mflap/mf.hpp"

namespace mflap::systems {

struct LorenzParams {
    double sigma = 10.0, rho = 5.0, beta_geom = 8.0 / 3.0;
    double u0 = 1.0, y0 = 0.0, z0 = 0.0;
    double horizon = 20.0;
    double amplitude = 1.0; // forcing C in f(t) = C sin(2 pi t)
};

struct DuffingParams {
    double damping = 0.5;
    double horizon = 20.0;
    double amplitude = 1.0;
};

struct BurgersParams {
    double viscosity = 1.0 / 1000.0;
    double sigma_grf = 7.0, tau_grf = 7.0, gamma_grf = 2.5;
    int grf_modes = 31; // spectral cut; below the output-grid Nyquist so subsampled
                        // snapshots carry no aliased mass
};

struct BrusselatorParams {
    double a = 1.0, b = 3.0, d0 = 1.0, d1 = 0.5;
    double horizon = 20.0;
    double amplitude = 1.0; // forcing C in f(t) = C e^{-0.01 t} sin t
};

enum class CorruptionKind { LinearTrend, Sinusoidal };

// linear trend: u_L = u_H + a1*t + a2*x + a3*y + b
// sinusoidal:   u_L = a * u_H * sin(2 pi b t)
struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::LinearTrend;
    double a1 = 0, a2 = 0, a3 = 0, b = 0;
    double a = 0, freq = 0;
};

// RK4-integrated state trajectories sampled onto half-open uniform grids.
lno::FunctionSample simulate_lorenz(const LorenzParams& p, int64_t fine_steps, int64_t out_len);
lno::FunctionSample simulate_duffing(const DuffingParams& p, int64_t fine_steps, int64_t out_len);

// Gaussian random field u0 ~ N(0, sigma^2 (-Laplacian + tau^2 I)^-gamma) on
// [0,1], sampled spectrally with conjugate pairing. The field is stored as
// Fourier-series coefficients so it can be synthesized exactly on any grid.
struct GrfField {
    std::vector<cxd> coeffs; // c_0..c_K; field = c0 + 2 Re sum_{k>=1} c_k e^{2 pi i k x}
    double eval(double x) const;
    void synth(int64_t n, double* out) const;
};
GrfField sample_grf(const BurgersParams& p, uint64_t seed);

// Pseudo-spectral viscous Burgers on [0,1] periodic with 2/3-rule dealiasing,
// marched with explicit RK4 on a fine internal grid, then subsampled to an
// (x, t) output grid (time axis 1).
lno::FunctionSample simulate_burgers(const GrfField& u0, const BurgersParams& p, int64_t nx_out,
                                     int64_t nt_out);

// Brusselator reaction-diffusion on [0,1]^2 periodic, second-order central
// finite differences + RK4 on a doubled internal grid; output u(t, x, y)
// (time axis 0). `chi` is the random initial field on the internal grid.
lno::FunctionSample simulate_brusselator(const BrusselatorParams& p, const Tensor& chi,
                                         int64_t nt_out, int64_t nxy_out);
Tensor sample_brusselator_chi(uint64_t seed, int64_t internal_nxy);

lno::FunctionSample lf_corrupt(const lno::FunctionSample& u_h, const CorruptionSpec& spec);

enum class Task { Lorenz, LorenzNonlinear, Duffing, Burgers, Brusselator };
const char* task_name(Task t);
Task task_from(const std::string& s);

struct DatasetRecipe {
    Task task = Task::Lorenz;
    int64_t n_lf_train = 200, n_hf_train = 10;
    int64_t n_lf_test = 130, n_hf_test = 130;
    lno::GridSpec lf_grid, hf_grid;
    CorruptionSpec corruption;
    bool normalize = false;
    int64_t fine_steps = 16384;     // ODE tasks
    double amp_start = 0.05, amp_step = 0.05; // training amplitude grid
    double test_amp_offset = 0.025; // test amplitudes sit half a step off the grid

    static DatasetRecipe preset(Task t);
};

mf::FidelityDataset build_dataset(const DatasetRecipe& recipe, uint64_t seed);

} // namespace mflap::systems

#endif
