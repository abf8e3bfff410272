#include "mflap/systems.hpp"

#include "mflap/fft.hpp"
#include "mflap/rng.hpp"

#include <functional>

#include <cmath>
#include <cstring>

namespace mflap::systems {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

uint64_t child_seed(uint64_t seed, uint64_t idx) {
    // splitmix64 step over (seed, idx)
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (idx + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// classic fixed-step RK4 for small ODE states, sampling component `comp`
// onto a half-open output grid
lno::FunctionSample rk4_sample(double horizon, int64_t fine_steps, int64_t out_len, int dim,
                               const double* init,
                               const std::function<void(double, const double*, double*)>& rhs,
                               int comp) {
    if (fine_steps % out_len != 0)
        throw Error("rk4_sample: fine step count must be a multiple of the output length");
    lno::GridSpec g{{out_len}, {horizon}, 0};
    auto out = lno::FunctionSample::zeros(g, 1);
    const int64_t stride = fine_steps / out_len;
    const double h = horizon / double(fine_steps);
    std::vector<double> y(init, init + dim), k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
    for (int64_t step = 0; step < fine_steps; ++step) {
        if (step % stride == 0) out.values.at(step / stride) = y[static_cast<size_t>(comp)];
        const double t = h * double(step);
        rhs(t, y.data(), k1.data());
        for (int i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        rhs(t + 0.5 * h, tmp.data(), k2.data());
        for (int i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        rhs(t + 0.5 * h, tmp.data(), k3.data());
        for (int i = 0; i < dim; ++i) tmp[i] = y[i] + h * k3[i];
        rhs(t + h, tmp.data(), k4.data());
        for (int i = 0; i < dim; ++i)
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        for (int i = 0; i < dim; ++i)
            if (!std::isfinite(y[i])) throw Error("rk4_sample: non-finite state");
    }
    return out;
}

} // namespace

lno::FunctionSample simulate_lorenz(const LorenzParams& p, int64_t fine_steps, int64_t out_len) {
    if (double(fine_steps) < 8192.0 * p.horizon / 20.0)
        throw Error("simulate_lorenz: fine grid below 8192 steps per [0,20] horizon");
    const double init[3] = {p.u0, p.y0, p.z0};
    auto rhs = [&](double t, const double* s, double* d) {
        const double f = p.amplitude * std::sin(kTwoPi * t);
        d[0] = p.sigma * (s[1] - s[0]);
        d[1] = s[0] * (p.rho - s[2]) - s[1];
        d[2] = s[0] * s[1] - p.beta_geom * s[2] - f; // forcing enters with a minus sign
    };
    return rk4_sample(p.horizon, fine_steps, out_len, 3, init, rhs, 0);
}

lno::FunctionSample simulate_duffing(const DuffingParams& p, int64_t fine_steps, int64_t out_len) {
    if (double(fine_steps) < 8192.0 * p.horizon / 20.0)
        throw Error("simulate_duffing: fine grid below 8192 steps per [0,20] horizon");
    const double init[2] = {0.0, 0.0};
    auto rhs = [&](double t, const double* s, double* d) {
        const double f = p.amplitude * std::sin(kTwoPi * t);
        d[0] = s[1];
        d[1] = f - p.damping * s[1] - s[0] - s[0] * s[0] * s[0];
    };
    return rk4_sample(p.horizon, fine_steps, out_len, 2, init, rhs, 0);
}

double GrfField::eval(double x) const {
    double v = coeffs[0].real();
    for (size_t k = 1; k < coeffs.size(); ++k) {
        const double a = kTwoPi * double(k) * x;
        v += 2.0 * (coeffs[k].real() * std::cos(a) - coeffs[k].imag() * std::sin(a));
    }
    return v;
}

void GrfField::synth(int64_t n, double* out) const {
    for (int64_t i = 0; i < n; ++i) out[i] = eval(double(i) / double(n));
}

GrfField sample_grf(const BurgersParams& p, uint64_t seed) {
    if (p.gamma_grf <= 0.5) throw Error("sample_grf: gamma must exceed 0.5");
    Rng rng(seed);
    GrfField f;
    f.coeffs.resize(static_cast<size_t>(p.grf_modes) + 1);
    // k = 0 kept with variance sigma^2 tau^(-2 gamma)
    f.coeffs[0] = cxd(p.sigma_grf * std::pow(p.tau_grf, -p.gamma_grf) * rng.normal(), 0.0);
    const double inv_sqrt2 = 0.70710678118654752440;
    for (int k = 1; k <= p.grf_modes; ++k) {
        const double lam = kTwoPi * double(k);
        const double sd = p.sigma_grf * std::pow(lam * lam + p.tau_grf * p.tau_grf, -p.gamma_grf / 2.0);
        f.coeffs[static_cast<size_t>(k)] =
            cxd(sd * inv_sqrt2 * rng.normal(), sd * inv_sqrt2 * rng.normal());
    }
    return f;
}

lno::FunctionSample simulate_burgers(const GrfField& u0, const BurgersParams& p, int64_t nx_out,
                                     int64_t nt_out) {
    const int64_t nx = 256;
    if (nx % nx_out != 0) throw Error("simulate_burgers: output x grid must divide 256");
    const int64_t steps_per_snap = (2000 + nt_out - 1) / nt_out;
    const int64_t nsteps = steps_per_snap * nt_out;
    const double dt = 1.0 / double(nsteps);

    std::vector<double> u(static_cast<size_t>(nx));
    u0.synth(nx, u.data());
    double umax = 0;
    for (double v : u) umax = std::max(umax, std::abs(v));
    const double kcut = kTwoPi * double(nx) / 3.0;
    const double kmax = kTwoPi * double(nx) / 2.0;
    const double stiff = dt * (kcut * (umax * 1.5 + 0.1) + p.viscosity * kmax * kmax);
    if (stiff > 2.5)
        throw Error("simulate_burgers: CFL heuristic violated; reduce dt below " +
                    std::to_string(dt * 2.5 / stiff));

    std::vector<cxd> uh(static_cast<size_t>(nx)), k1(nx), k2(nx), k3(nx), k4(nx), tmp(nx),
        der(nx), prod(nx);
    for (int64_t i = 0; i < nx; ++i) uh[static_cast<size_t>(i)] = cxd(u[static_cast<size_t>(i)], 0.0);
    fft::transform(uh.data(), static_cast<int>(nx), -1);

    std::vector<double> wave(static_cast<size_t>(nx));
    std::vector<bool> keep(static_cast<size_t>(nx));
    for (int64_t l = 0; l < nx; ++l) {
        int64_t fidx = l < (nx + 1) / 2 ? l : l - nx;
        wave[static_cast<size_t>(l)] = kTwoPi * double(fidx);
        keep[static_cast<size_t>(l)] = std::abs(fidx) <= nx / 3;
    }

    auto rhs = [&](const std::vector<cxd>& state, std::vector<cxd>& out) {
        // physical u and u_x
        for (int64_t l = 0; l < nx; ++l) {
            tmp[static_cast<size_t>(l)] = state[static_cast<size_t>(l)];
            der[static_cast<size_t>(l)] = cxd(0.0, wave[static_cast<size_t>(l)]) * state[static_cast<size_t>(l)];
        }
        fft::transform(tmp.data(), static_cast<int>(nx), +1);
        fft::transform(der.data(), static_cast<int>(nx), +1);
        const double inv = 1.0 / double(nx);
        for (int64_t i = 0; i < nx; ++i) {
            const double uu = tmp[static_cast<size_t>(i)].real() * inv;
            const double ux = der[static_cast<size_t>(i)].real() * inv;
            prod[static_cast<size_t>(i)] = cxd(uu * ux, 0.0);
        }
        fft::transform(prod.data(), static_cast<int>(nx), -1);
        for (int64_t l = 0; l < nx; ++l) {
            cxd conv = keep[static_cast<size_t>(l)] ? prod[static_cast<size_t>(l)] : cxd(0, 0);
            out[static_cast<size_t>(l)] =
                -conv - p.viscosity * wave[static_cast<size_t>(l)] * wave[static_cast<size_t>(l)] *
                            state[static_cast<size_t>(l)];
        }
    };

    lno::GridSpec g{{nx_out, nt_out}, {1.0, 1.0}, 1};
    auto out = lno::FunctionSample::zeros(g, 1);
    const int64_t xstride = nx / nx_out;
    auto snapshot = [&](int64_t snap) {
        for (int64_t l = 0; l < nx; ++l) tmp[static_cast<size_t>(l)] = uh[static_cast<size_t>(l)];
        fft::transform(tmp.data(), static_cast<int>(nx), +1);
        const double inv = 1.0 / double(nx);
        for (int64_t i = 0; i < nx_out; ++i) {
            const double v = tmp[static_cast<size_t>(i * xstride)].real() * inv;
            if (!std::isfinite(v)) throw Error("simulate_burgers: non-finite state");
            out.values.at(i * nt_out + snap) = v;
        }
    };

    for (int64_t step = 0; step < nsteps; ++step) {
        if (step % steps_per_snap == 0) snapshot(step / steps_per_snap);
        rhs(uh, k1);
        for (int64_t l = 0; l < nx; ++l) tmp[static_cast<size_t>(l)] = uh[static_cast<size_t>(l)] + 0.5 * dt * k1[static_cast<size_t>(l)];
        std::vector<cxd> save_tmp = tmp; // rhs overwrites tmp internally
        rhs(save_tmp, k2);
        for (int64_t l = 0; l < nx; ++l) tmp[static_cast<size_t>(l)] = uh[static_cast<size_t>(l)] + 0.5 * dt * k2[static_cast<size_t>(l)];
        save_tmp = tmp;
        rhs(save_tmp, k3);
        for (int64_t l = 0; l < nx; ++l) tmp[static_cast<size_t>(l)] = uh[static_cast<size_t>(l)] + dt * k3[static_cast<size_t>(l)];
        save_tmp = tmp;
        rhs(save_tmp, k4);
        for (int64_t l = 0; l < nx; ++l)
            uh[static_cast<size_t>(l)] += dt / 6.0 *
                                          (k1[static_cast<size_t>(l)] + 2.0 * k2[static_cast<size_t>(l)] +
                                           2.0 * k3[static_cast<size_t>(l)] + k4[static_cast<size_t>(l)]);
    }
    return out;
}

Tensor sample_brusselator_chi(uint64_t seed, int64_t internal_nxy) {
    Rng rng(seed);
    Tensor chi = Tensor::real({internal_nxy, internal_nxy});
    for (auto& v : chi.buf) v = rng.uniform(-1.0, 1.0);
    return chi;
}

lno::FunctionSample simulate_brusselator(const BrusselatorParams& p, const Tensor& chi,
                                         int64_t nt_out, int64_t nxy_out) {
    const int64_t n = nxy_out * 2; // internal grid
    if (chi.rank() != 2 || chi.shape[0] != n || chi.shape[1] != n)
        throw Error("simulate_brusselator: chi must live on the doubled internal grid");
    const double hx = 1.0 / double(n);
    const double lap_max = 8.0 * std::max(p.d0, p.d1) / (hx * hx);
    const double dt_max = 0.7 * 2.79 / lap_max;
    const double snap_dt = p.horizon / double(nt_out);
    const int64_t steps_per_snap = static_cast<int64_t>(std::ceil(snap_dt / dt_max));
    const double dt = snap_dt / double(steps_per_snap);
    const int64_t nsteps = steps_per_snap * nt_out;

    const int64_t nn = n * n;
    std::vector<double> state(static_cast<size_t>(2 * nn));
    for (int64_t i = 0; i < nn; ++i) {
        state[static_cast<size_t>(i)] = 1.0;                                  // u
        state[static_cast<size_t>(nn + i)] = p.b / p.a + 0.1 * chi.at(i);     // v
    }
    std::vector<double> k1(2 * nn), k2(2 * nn), k3(2 * nn), k4(2 * nn), tmp(2 * nn);

    auto rhs = [&](double t, const double* s, double* d) {
        const double f = p.amplitude * std::exp(-0.01 * t) * std::sin(t);
        const double ih2 = 1.0 / (hx * hx);
        const double* u = s;
        const double* v = s + nn;
        double* du = d;
        double* dv = d + nn;
        for (int64_t i = 0; i < n; ++i) {
            const int64_t up = (i + 1) % n, dn = (i + n - 1) % n;
            for (int64_t j = 0; j < n; ++j) {
                const int64_t lf = (j + n - 1) % n, rt = (j + 1) % n;
                const int64_t c = i * n + j;
                const double lap_u = (u[up * n + j] + u[dn * n + j] + u[i * n + lf] + u[i * n + rt] -
                                      4.0 * u[c]) * ih2;
                const double lap_v = (v[up * n + j] + v[dn * n + j] + v[i * n + lf] + v[i * n + rt] -
                                      4.0 * v[c]) * ih2;
                const double uu = u[c], vv = v[c];
                du[c] = p.d0 * lap_u + p.a + f - (1.0 + p.b) * uu + vv * uu * uu;
                dv[c] = p.d1 * lap_v + p.b * uu - vv * uu * uu;
            }
        }
    };

    lno::GridSpec g{{nt_out, nxy_out, nxy_out}, {p.horizon, 1.0, 1.0}, 0};
    auto out = lno::FunctionSample::zeros(g, 1);
    auto snapshot = [&](int64_t snap) {
        for (int64_t i = 0; i < nxy_out; ++i)
            for (int64_t j = 0; j < nxy_out; ++j) {
                const double v = state[static_cast<size_t>((2 * i) * n + 2 * j)];
                if (!std::isfinite(v)) throw Error("simulate_brusselator: non-finite state");
                out.values.at((snap * nxy_out + i) * nxy_out + j) = v;
            }
    };

    for (int64_t step = 0; step < nsteps; ++step) {
        if (step % steps_per_snap == 0) snapshot(step / steps_per_snap);
        const double t = dt * double(step);
        rhs(t, state.data(), k1.data());
        for (int64_t i = 0; i < 2 * nn; ++i) tmp[static_cast<size_t>(i)] = state[static_cast<size_t>(i)] + 0.5 * dt * k1[static_cast<size_t>(i)];
        rhs(t + 0.5 * dt, tmp.data(), k2.data());
        for (int64_t i = 0; i < 2 * nn; ++i) tmp[static_cast<size_t>(i)] = state[static_cast<size_t>(i)] + 0.5 * dt * k2[static_cast<size_t>(i)];
        rhs(t + 0.5 * dt, tmp.data(), k3.data());
        for (int64_t i = 0; i < 2 * nn; ++i) tmp[static_cast<size_t>(i)] = state[static_cast<size_t>(i)] + dt * k3[static_cast<size_t>(i)];
        rhs(t + dt, tmp.data(), k4.data());
        for (int64_t i = 0; i < 2 * nn; ++i)
            state[static_cast<size_t>(i)] += dt / 6.0 *
                                             (k1[static_cast<size_t>(i)] + 2.0 * k2[static_cast<size_t>(i)] +
                                              2.0 * k3[static_cast<size_t>(i)] + k4[static_cast<size_t>(i)]);
    }
    return out;
}

lno::FunctionSample lf_corrupt(const lno::FunctionSample& u_h, const CorruptionSpec& spec) {
    u_h.check();
    lno::FunctionSample out = u_h;
    const lno::GridSpec& g = u_h.grid;
    const int r = g.rank();
    // trend coordinates: a1 follows the time axis, a2/a3 the spatial axes in order
    std::vector<double> coef(static_cast<size_t>(r), 0.0);
    if (spec.kind == CorruptionKind::LinearTrend) {
        coef[static_cast<size_t>(g.time_axis)] = spec.a1;
        double spatial[2] = {spec.a2, spec.a3};
        int si = 0;
        for (int a = 0; a < r; ++a)
            if (a != g.time_axis) coef[static_cast<size_t>(a)] = spatial[si++];
    }
    std::vector<int64_t> idx(static_cast<size_t>(r), 0);
    const int64_t pts = g.points();
    for (int64_t pi = 0; pi < pts; ++pi) {
        double trend = 0.0, t = 0.0;
        for (int a = 0; a < r; ++a) {
            const double coord = g.coord(a, idx[static_cast<size_t>(a)]);
            trend += coef[static_cast<size_t>(a)] * coord;
            if (a == g.time_axis) t = coord;
        }
        for (int64_t c = 0; c < u_h.channels; ++c) {
            const int64_t off = pi * u_h.channels + c;
            if (spec.kind == CorruptionKind::LinearTrend)
                out.values.at(off) = u_h.values.at(off) + trend + spec.b;
            else
                out.values.at(off) = spec.a * u_h.values.at(off) * std::sin(kTwoPi * spec.freq * t);
        }
        for (int a = r - 1; a >= 0; --a) {
            if (++idx[static_cast<size_t>(a)] < g.axis_lengths[static_cast<size_t>(a)]) break;
            idx[static_cast<size_t>(a)] = 0;
        }
    }
    return out;
}

const char* task_name(Task t) {
    switch (t) {
    case Task::Lorenz: return "lorenz";
    case Task::LorenzNonlinear: return "lorenz_nonlinear";
    case Task::Duffing: return "duffing";
    case Task::Burgers: return "burgers";
    case Task::Brusselator: return "brusselator";
    }
    return "?";
}

Task task_from(const std::string& s) {
    if (s == "lorenz") return Task::Lorenz;
    if (s == "lorenz_nonlinear") return Task::LorenzNonlinear;
    if (s == "duffing") return Task::Duffing;
    if (s == "burgers") return Task::Burgers;
    if (s == "brusselator") return Task::Brusselator;
    throw Error("unknown task '" + s + "'");
}

DatasetRecipe DatasetRecipe::preset(Task t) {
    DatasetRecipe r;
    r.task = t;
    switch (t) {
    case Task::Lorenz:
    case Task::LorenzNonlinear:
        r.lf_grid = {{512}, {20.0}, 0};
        r.hf_grid = {{2048}, {20.0}, 0};
        r.n_lf_train = 200;
        r.n_hf_train = 10;
        r.n_lf_test = 130;
        r.n_hf_test = 130;
        if (t == Task::Lorenz) {
            r.corruption = {CorruptionKind::LinearTrend, 0.05, 0, 0, 1.0, 0, 0};
        } else {
            r.corruption.kind = CorruptionKind::Sinusoidal;
            r.corruption.a = 1.0;
            r.corruption.freq = 1.0 / kTwoPi;
        }
        break;
    case Task::Duffing:
        r.lf_grid = {{1024}, {20.0}, 0};
        r.hf_grid = {{2048}, {20.0}, 0};
        r.n_lf_train = 200;
        r.n_hf_train = 10;
        r.n_lf_test = 130;
        r.n_hf_test = 130;
        r.corruption = {CorruptionKind::LinearTrend, 0.05, 0, 0, 1.0, 0, 0};
        break;
    case Task::Burgers:
        // the source text uses 200 LF pairs even though its data table lists 800
        r.lf_grid = {{32, 25}, {1.0, 1.0}, 1};
        r.hf_grid = {{64, 50}, {1.0, 1.0}, 1};
        r.n_lf_train = 200;
        r.n_hf_train = 10;
        r.n_lf_test = 100;
        r.n_hf_test = 100;
        r.corruption = {CorruptionKind::LinearTrend, 0.25, 0.25, 0, 0.50, 0, 0};
        break;
    case Task::Brusselator:
        r.lf_grid = {{13, 7, 7}, {20.0, 1.0, 1.0}, 0};
        r.hf_grid = {{39, 14, 14}, {20.0, 1.0, 1.0}, 0};
        r.n_lf_train = 800;
        r.n_hf_train = 1;
        r.n_lf_test = 200;
        r.n_hf_test = 200;
        r.corruption = {CorruptionKind::LinearTrend, 0.10, 0.10, 0.10, 1.0, 0, 0};
        r.normalize = true;
        break;
    }
    return r;
}

namespace {

struct SamplePair {
    lno::FunctionSample f_h, u_h; // HF-grid input and solution
};

// input carrier: replicate time-invariant / space-invariant inputs over the
// full grid so every corrector sees a full-rank field
lno::FunctionSample broadcast_input(const lno::GridSpec& g, const std::function<double(int64_t)>& time_axis_fn,
                                    const std::function<double(int64_t)>& other_fn, bool input_is_time) {
    auto f = lno::FunctionSample::zeros(g, 1);
    std::vector<int64_t> idx(static_cast<size_t>(g.rank()), 0);
    const int64_t pts = g.points();
    for (int64_t pi = 0; pi < pts; ++pi) {
        f.values.at(pi) = input_is_time ? time_axis_fn(idx[static_cast<size_t>(g.time_axis)])
                                        : other_fn(pi);
        for (int a = g.rank() - 1; a >= 0; --a) {
            if (++idx[static_cast<size_t>(a)] < g.axis_lengths[static_cast<size_t>(a)]) break;
            idx[static_cast<size_t>(a)] = 0;
        }
    }
    return f;
}

void stack_into(Tensor& dst, int64_t j, const Tensor& sample) {
    const int64_t per = sample.numel();
    std::copy(sample.buf.begin(), sample.buf.end(), dst.data() + j * per);
}

Tensor stacked(int64_t n, const std::vector<int64_t>& grid_shape, int64_t channels) {
    auto shape = grid_shape;
    shape.insert(shape.begin(), n);
    shape.push_back(channels);
    return Tensor::real(shape);
}

} // namespace

mf::FidelityDataset build_dataset(const DatasetRecipe& recipe, uint64_t seed) {
    mf::FidelityDataset ds;
    ds.task = task_name(recipe.task);
    ds.lf_grid = recipe.lf_grid;
    ds.hf_grid = recipe.hf_grid;
    ds.seed = seed;
    const int64_t NL = recipe.n_lf_train, NH = recipe.n_hf_train;
    const int64_t TL = recipe.n_lf_test, TH = recipe.n_hf_test;
    if (TL != TH) throw Error("build_dataset: test sets are paired (same underlying solutions)");

    ds.lf_train_in = stacked(NL, recipe.lf_grid.axis_lengths, 1);
    ds.lf_train_out = stacked(NL, recipe.lf_grid.axis_lengths, 1);
    ds.hf_train_in = stacked(NH, recipe.hf_grid.axis_lengths, 1);
    ds.hf_train_out = stacked(NH, recipe.hf_grid.axis_lengths, 1);
    ds.lf_test_in = stacked(TL, recipe.lf_grid.axis_lengths, 1);
    ds.lf_test_out = stacked(TL, recipe.lf_grid.axis_lengths, 1);
    ds.hf_test_in = stacked(TH, recipe.hf_grid.axis_lengths, 1);
    ds.hf_test_out = stacked(TH, recipe.hf_grid.axis_lengths, 1);

    // stratified HF-train subset of the LF-train solution indices
    for (int64_t j = 0; j < NH; ++j)
        ds.hf_subset.push_back((2 * j + 1) * NL / (2 * NH));

    const bool ode = recipe.task == Task::Lorenz || recipe.task == Task::LorenzNonlinear ||
                     recipe.task == Task::Duffing;
    const int64_t n_amps = 200; // paper's forcing grid size

    auto amp_train = [&](int64_t j) { return recipe.amp_start + recipe.amp_step * double(j); };
    auto amp_test = [&](int64_t j) {
        return recipe.amp_start + recipe.test_amp_offset + recipe.amp_step * double(j % n_amps);
    };

    auto make_pair = [&](double amplitude, uint64_t sample_seed) -> SamplePair {
        SamplePair sp;
        switch (recipe.task) {
        case Task::Lorenz:
        case Task::LorenzNonlinear: {
            LorenzParams p;
            p.amplitude = amplitude;
            sp.u_h = simulate_lorenz(p, recipe.fine_steps, recipe.hf_grid.axis_lengths[0]);
            sp.f_h = broadcast_input(recipe.hf_grid,
                                     [&](int64_t k) {
                                         return amplitude * std::sin(kTwoPi * recipe.hf_grid.coord(0, k));
                                     },
                                     nullptr, true);
            break;
        }
        case Task::Duffing: {
            DuffingParams p;
            p.amplitude = amplitude;
            sp.u_h = simulate_duffing(p, recipe.fine_steps, recipe.hf_grid.axis_lengths[0]);
            sp.f_h = broadcast_input(recipe.hf_grid,
                                     [&](int64_t k) {
                                         return amplitude * std::sin(kTwoPi * recipe.hf_grid.coord(0, k));
                                     },
                                     nullptr, true);
            break;
        }
        case Task::Burgers: {
            BurgersParams p;
            GrfField u0 = sample_grf(p, sample_seed);
            sp.u_h = simulate_burgers(u0, p, recipe.hf_grid.axis_lengths[0],
                                      recipe.hf_grid.axis_lengths[1]);
            // f(x, t) = u0(x), replicated along the time axis
            const int64_t nx = recipe.hf_grid.axis_lengths[0];
            const int64_t nt = recipe.hf_grid.axis_lengths[1];
            std::vector<double> line(static_cast<size_t>(nx));
            u0.synth(nx, line.data());
            sp.f_h = lno::FunctionSample::zeros(recipe.hf_grid, 1);
            for (int64_t i = 0; i < nx; ++i)
                for (int64_t t = 0; t < nt; ++t)
                    sp.f_h.values.at(i * nt + t) = line[static_cast<size_t>(i)];
            break;
        }
        case Task::Brusselator: {
            BrusselatorParams p;
            p.amplitude = amplitude;
            Tensor chi = sample_brusselator_chi(sample_seed, recipe.hf_grid.axis_lengths[1] * 2);
            sp.u_h = simulate_brusselator(p, chi, recipe.hf_grid.axis_lengths[0],
                                          recipe.hf_grid.axis_lengths[1]);
            sp.f_h = broadcast_input(recipe.hf_grid,
                                     [&](int64_t k) {
                                         const double t = recipe.hf_grid.coord(0, k);
                                         return amplitude * std::exp(-0.01 * t) * std::sin(t);
                                     },
                                     nullptr, true);
            break;
        }
        }
        return sp;
    };

    // LF training set (with the stratified HF subset drawn from the same solutions)
    int64_t hf_slot = 0;
    for (int64_t j = 0; j < NL; ++j) {
        const double amp = ode ? amp_train(j) : amp_train(j % n_amps);
        SamplePair sp = make_pair(amp, child_seed(seed, static_cast<uint64_t>(j)));
        lno::FunctionSample u_l = lno::resample(lf_corrupt(sp.u_h, recipe.corruption), recipe.lf_grid);
        lno::FunctionSample f_l = lno::resample(sp.f_h, recipe.lf_grid);
        stack_into(ds.lf_train_in, j, f_l.values);
        stack_into(ds.lf_train_out, j, u_l.values);
        if (hf_slot < NH && ds.hf_subset[static_cast<size_t>(hf_slot)] == j) {
            stack_into(ds.hf_train_in, hf_slot, sp.f_h.values);
            stack_into(ds.hf_train_out, hf_slot, sp.u_h.values);
            ++hf_slot;
        }
    }
    if (hf_slot != NH) throw Error("build_dataset: HF subset selection failed");

    // paired test sets on the offset amplitude grid
    for (int64_t j = 0; j < TL; ++j) {
        const double amp = amp_test(j);
        ds.test_amplitudes.push_back(amp);
        SamplePair sp = make_pair(amp, child_seed(seed ^ 0xABCDEF1234567ULL, static_cast<uint64_t>(j)));
        lno::FunctionSample u_l = lno::resample(lf_corrupt(sp.u_h, recipe.corruption), recipe.lf_grid);
        lno::FunctionSample f_l = lno::resample(sp.f_h, recipe.lf_grid);
        stack_into(ds.lf_test_in, j, f_l.values);
        stack_into(ds.lf_test_out, j, u_l.values);
        stack_into(ds.hf_test_in, j, sp.f_h.values);
        stack_into(ds.hf_test_out, j, sp.u_h.values);
    }

    if (recipe.normalize) {
        Tensor all_in = ds.lf_train_in; // fit on training statistics of both fidelities
        all_in.buf.insert(all_in.buf.end(), ds.hf_train_in.buf.begin(), ds.hf_train_in.buf.end());
        all_in.shape = {static_cast<int64_t>(all_in.buf.size())};
        Tensor all_out = ds.lf_train_out;
        all_out.buf.insert(all_out.buf.end(), ds.hf_train_out.buf.begin(), ds.hf_train_out.buf.end());
        all_out.shape = {static_cast<int64_t>(all_out.buf.size())};
        ds.norm_in = mf::RangeMap::fit(all_in, 1);
        ds.norm_out = mf::RangeMap::fit(all_out, 1);
    }
    ds.check();
    return ds;
}

} // namespace mflap::systems
