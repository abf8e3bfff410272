#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mflap/systems.hpp"

#include <cmath>

using namespace mflap;
using namespace mflap::systems;

TEST_CASE("lorenz: unforced equilibrium stays stationary over [0,1]") {
    LorenzParams p;
    p.amplitude = 0.0;
    p.u0 = std::sqrt(32.0 / 3.0);
    p.y0 = std::sqrt(32.0 / 3.0);
    p.z0 = 4.0;
    p.horizon = 1.0;
    auto u = simulate_lorenz(p, 8192, 256);
    for (int i = 0; i < 256; ++i)
        CHECK(std::abs(u.values.at(i) - p.u0) < 1e-9);
}

TEST_CASE("duffing: zero forcing and zero init stays at rest") {
    DuffingParams p;
    p.amplitude = 0.0;
    auto u = simulate_duffing(p, 8192, 512);
    for (int i = 0; i < 512; ++i) CHECK(u.values.at(i) == 0.0);
}

namespace {

// endpoint step-halving convergence order over a short horizon
template <typename Sim>
double convergence_slope(Sim&& sim) {
    // errors e(h) ~ C h^4; slope from successive Richardson differences
    const double u1 = sim(1024);
    const double u2 = sim(2048);
    const double u3 = sim(4096);
    const double d1 = std::abs(u1 - u2);
    const double d2 = std::abs(u2 - u3);
    return std::log2(d1 / d2);
}

} // namespace

TEST_CASE("integrators show fourth-order step-halving convergence") {
    auto lorenz_end = [](int64_t steps) {
        LorenzParams p;
        p.amplitude = 3.0;
        p.horizon = 2.0;
        auto u = simulate_lorenz(p, steps, 8); // short horizon t in [0,2]
        return u.values.at(7);
    };
    const double slope_l = convergence_slope(lorenz_end);
    CHECK(slope_l > 3.7);
    CHECK(slope_l < 4.3);

    auto duffing_end = [](int64_t steps) {
        DuffingParams p;
        p.amplitude = 5.0;
        p.horizon = 2.0;
        auto u = simulate_duffing(p, steps, 8);
        return u.values.at(7);
    };
    const double slope_d = convergence_slope(duffing_end);
    CHECK(slope_d > 3.7);
    CHECK(slope_d < 4.3);
}

TEST_CASE("simulate outputs land on the requested grids") {
    LorenzParams lp;
    lp.amplitude = 1.0;
    auto uh = simulate_lorenz(lp, 16384, 2048);
    CHECK(uh.grid.axis_lengths[0] == 2048);
    DuffingParams dp;
    dp.amplitude = 1.0;
    CHECK(simulate_duffing(dp, 16384, 1024).grid.axis_lengths[0] == 1024);
    CHECK(simulate_duffing(dp, 16384, 2048).grid.axis_lengths[0] == 2048);
}

TEST_CASE("grf: periodicity, mean, and mode variances") {
    BurgersParams p;
    auto f = sample_grf(p, 7);
    CHECK(std::abs(f.eval(0.0) - f.eval(1.0)) < 1e-12);

    const int draws = 10000;
    double mean_at_x = 0.0;
    double m1_var = 0.0;
    const double x0 = 0.37;
    for (int d = 0; d < draws; ++d) {
        auto g = sample_grf(p, 1000 + static_cast<uint64_t>(d));
        mean_at_x += g.eval(x0);
        m1_var += std::norm(g.coeffs[1]);
    }
    mean_at_x /= draws;
    m1_var /= draws;
    // field std at a point is ~0.07; 3 standard errors of the mean over 1e4 draws
    CHECK(std::abs(mean_at_x) < 3.0 * 0.1 / std::sqrt(double(draws)));
    const double lam = 4.0 * 3.14159265358979 * 3.14159265358979;
    const double want = p.sigma_grf * p.sigma_grf *
                        std::pow(lam + p.tau_grf * p.tau_grf, -p.gamma_grf);
    CHECK(m1_var == doctest::Approx(want).epsilon(0.10));
}

TEST_CASE("burgers: constant initial condition stays constant") {
    BurgersParams p;
    GrfField f;
    f.coeffs.assign(3, cxd(0, 0));
    f.coeffs[0] = cxd(0.8, 0.0);
    auto u = simulate_burgers(f, p, 64, 50);
    CHECK(u.grid.axis_lengths[0] == 64);
    CHECK(u.grid.axis_lengths[1] == 50);
    for (int64_t i = 0; i < u.values.numel(); ++i)
        CHECK(std::abs(u.values.at(i) - 0.8) < 1e-10);
}

TEST_CASE("burgers: the mean is conserved over [0,1]") {
    BurgersParams p;
    auto f = sample_grf(p, 3);
    auto u = simulate_burgers(f, p, 64, 50);
    // mean over x at the first and last snapshots
    double m0 = 0, m1 = 0;
    for (int i = 0; i < 64; ++i) {
        m0 += u.values.at(i * 50 + 0);
        m1 += u.values.at(i * 50 + 49);
    }
    m0 /= 64;
    m1 /= 64;
    CHECK(std::abs(m1 - m0) < 1e-6);
}

TEST_CASE("brusselator: homogeneous equilibrium is stationary") {
    BrusselatorParams p;
    p.amplitude = 0.0; // f == 0
    p.horizon = 1.0;
    Tensor chi = Tensor::real({28, 28}); // zero field -> v = b/a exactly
    auto u = simulate_brusselator(p, chi, 13, 14);
    for (int64_t i = 0; i < u.values.numel(); ++i)
        CHECK(std::abs(u.values.at(i) - 1.0) < 1e-8);
}

TEST_CASE("brusselator: output grid shape") {
    BrusselatorParams p;
    p.amplitude = 2.0;
    p.horizon = 2.0;
    Tensor chi = sample_brusselator_chi(5, 28);
    auto u = simulate_brusselator(p, chi, 5, 14);
    CHECK(u.grid.axis_lengths == std::vector<int64_t>{5, 14, 14});
    CHECK(u.values.finite());
}

TEST_CASE("lf_corrupt: linear trend, sinusoidal, and commutation with subsampling") {
    lno::GridSpec g{{2048}, {20.0}, 0};
    auto zero = lno::FunctionSample::zeros(g, 1);
    CorruptionSpec lin{CorruptionKind::LinearTrend, 0.05, 0, 0, 1.0, 0, 0};
    auto ul = lf_corrupt(zero, lin);
    for (int i = 0; i < 2048; i += 97)
        CHECK(ul.values.at(i) == doctest::Approx(0.05 * g.coord(0, i) + 1.0));

    Rng rng(3);
    auto uh = lno::FunctionSample::zeros(g, 1);
    for (auto& v : uh.values.buf) v = rng.normal();
    CorruptionSpec sin_spec;
    sin_spec.kind = CorruptionKind::Sinusoidal;
    sin_spec.a = 1.0;
    sin_spec.freq = 1.0 / (2.0 * 3.14159265358979323846);
    auto us = lf_corrupt(uh, sin_spec);
    for (int i = 0; i < 2048; i += 131)
        CHECK(us.values.at(i) == doctest::Approx(uh.values.at(i) * std::sin(g.coord(0, i))));

    lno::GridSpec gl{{512}, {20.0}, 0};
    auto a = lno::resample(lf_corrupt(uh, lin), gl);
    auto b = lf_corrupt(lno::resample(uh, gl), lin);
    for (int i = 0; i < 512; ++i) CHECK(a.values.at(i) == doctest::Approx(b.values.at(i)).epsilon(1e-14));
}

TEST_CASE("build_dataset: lorenz counts, subsets, determinism") {
    DatasetRecipe r = DatasetRecipe::preset(Task::Lorenz);
    r.n_lf_train = 20;
    r.n_hf_train = 4;
    r.n_lf_test = 6;
    r.n_hf_test = 6;
    r.fine_steps = 16384;
    mf::FidelityDataset d1 = build_dataset(r, 7);
    CHECK(d1.n_lf_train() == 20);
    CHECK(d1.n_hf_train() == 4);
    CHECK(d1.n_hf_test() == 6);
    CHECK(d1.hf_subset.size() == 4);
    for (auto i : d1.hf_subset) CHECK(i < 20);
    CHECK(d1.test_amplitudes.size() == 6);
    CHECK(d1.test_amplitudes[0] == doctest::Approx(0.075));

    mf::FidelityDataset d2 = build_dataset(r, 7);
    CHECK(d1.lf_train_out.buf == d2.lf_train_out.buf);
    CHECK(d1.hf_test_out.buf == d2.hf_test_out.buf);

    // the corruption identity holds exactly on shared grid points
    CorruptionSpec lin = r.corruption;
    const int64_t mh = 2048, ml = 512, stride = mh / ml;
    for (size_t j = 0; j < d1.hf_subset.size(); ++j) {
        const int64_t lf_idx = d1.hf_subset[j];
        for (int64_t i = 0; i < ml; i += 113) {
            const double t = d1.lf_grid.coord(0, i);
            const double expect = d1.hf_train_out.at(static_cast<int64_t>(j) * mh + i * stride) +
                                  lin.a1 * t + lin.b;
            CHECK(d1.lf_train_out.at(lf_idx * ml + i) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}
