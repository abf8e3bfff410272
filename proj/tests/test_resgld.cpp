#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mflap/resgld.hpp"

#include <cmath>

using namespace mflap;
using namespace mflap::resgld;

TEST_CASE("sgld_step: plain gradient step and fixed point") {
    ChainState c = ChainState::make({1.0}, 0.0, 0.1, 1);
    sgld_step(c, {1.0}, 0.1, 0.0); // L = theta^2/2 -> grad = theta = 1
    CHECK(c.theta[0] == doctest::Approx(0.9));

    ChainState c2 = ChainState::make({0.37}, 0.0, 0.1, 1);
    sgld_step(c2, {0.0}, 0.1, 0.0);
    CHECK(c2.theta[0] == 0.37);

    CHECK_THROWS_AS(sgld_step(c, {std::nan("")}, 0.1, 0.0), Error);
}

TEST_CASE("sgld_step: increment variance matches 2 lr tau") {
    ChainState c = ChainState::make({0.0}, 0.0, 0.0, 42);
    const double lr = 0.05, tau = 0.3;
    const int n = 100000;
    double ssq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double before = c.theta[0];
        sgld_step(c, {0.0}, lr, tau);
        const double inc = c.theta[0] - before;
        ssq += inc * inc;
    }
    const double var = ssq / n;
    CHECK(var == doctest::Approx(2.0 * lr * tau).epsilon(0.05));
}

TEST_CASE("adaptive_drift_step: first-step drift value and degenerate cases") {
    SamplerConfig cfg;
    cfg.n_chains = 1;
    // first step from zero moments with scalar grad g > 0:
    // A = 0.1 g / sqrt(0.001 g^2) = 3.1623 independent of g
    for (double g : {0.5, 2.0, 7.3}) {
        ChainState c = ChainState::make({1.0}, 0.0, 0.1, 1);
        const double lr = 0.01;
        adaptive_drift_step(c, {g}, lr, 0.0, cfg);
        const double drift = (1.0 - c.theta[0]) / lr - g; // a * A with a = 1
        CHECK(drift == doctest::Approx(3.16228).epsilon(1e-4));
    }

    // grad = 0 from zero moments: A = 0, pure noise step (here tau = 0)
    ChainState cz = ChainState::make({0.2}, 0.0, 0.1, 1);
    adaptive_drift_step(cz, {0.0}, 0.01, 0.0, cfg);
    CHECK(cz.theta[0] == 0.2);

    // a = 0 reduces exactly to sgld_step
    SamplerConfig cfg0 = cfg;
    cfg0.drift_scale = 0.0;
    ChainState ca = ChainState::make({1.0}, 0.0, 0.1, 7);
    ChainState cb = ChainState::make({1.0}, 0.0, 0.1, 7);
    adaptive_drift_step(ca, {0.7}, 0.02, 0.0, cfg0);
    sgld_step(cb, {0.7}, 0.02, 0.0);
    CHECK(ca.theta[0] == cb.theta[0]);
}

TEST_CASE("min_window formula") {
    CHECK(min_window(10, 0.10) == 30);
    CHECK(min_window(2, 0.5) == 1);
    CHECK(min_window(4, 0.10) == 17);
    CHECK_THROWS_AS(min_window(1, 0.1), Error);
}

TEST_CASE("geometric ladder") {
    auto l = geometric_ladder(5e-6, 5e-4, 3);
    CHECK(l[0] == doctest::Approx(5e-6));
    CHECK(l[1] == doctest::Approx(5e-5));
    CHECK(l[2] == doctest::Approx(5e-4));
    auto l2 = geometric_ladder(5e-3, 5e-2, 2);
    CHECK(l2[0] == doctest::Approx(5e-3));
    CHECK(l2[1] == doctest::Approx(5e-2));
    auto l10 = geometric_ladder(1e-5, 1e-4, 10);
    for (int i = 0; i + 1 < 10; ++i)
        CHECK(l10[static_cast<size_t>(i + 1)] / l10[static_cast<size_t>(i)] ==
              doctest::Approx(std::pow(10.0, 1.0 / 9.0)).epsilon(1e-10));
    CHECK(geometric_ladder(2.0, 9.0, 1) == std::vector<double>{2.0});
}

TEST_CASE("cosine_lr: endpoints and midpoint") {
    CHECK(cosine_lr(0.02, 0, 100) == doctest::Approx(0.02));
    CHECK(cosine_lr(0.02, 100, 100) == doctest::Approx(0.0002));
    CHECK(cosine_lr(1.0, 50, 100) == doctest::Approx(0.505));
}

TEST_CASE("buffer_step schedule") {
    CHECK(buffer_step(1) == doctest::Approx(0.5));
    CHECK(buffer_step(1000) == doctest::Approx(0.28475).epsilon(1e-4));
}

TEST_CASE("update_buffer arithmetic") {
    SamplerConfig cfg;
    cfg.n_chains = 2;
    SwapController ctl = SwapController::make(cfg);
    update_buffer(ctl, 0, true, cfg); // one attempt, one swap
    CHECK(ctl.pairs[0].buffer == doctest::Approx(0.5 + 0.5 * (1.0 - 0.1)));

    SwapController ctl2 = SwapController::make(cfg);
    update_buffer(ctl2, 0, false, cfg);
    CHECK(ctl2.pairs[0].buffer == doctest::Approx(0.5 + 0.5 * (0.0 - 0.1)));
}

TEST_CASE("attempt_swaps: window gate and loss condition") {
    SamplerConfig cfg;
    cfg.n_chains = 2;
    cfg.window = 50;
    std::vector<ChainState> chains;
    chains.push_back(ChainState::make({1.0}, 1e-5, 1e-3, 1));
    chains.push_back(ChainState::make({2.0}, 1e-4, 1e-2, 2));
    SwapController ctl = SwapController::make(cfg);

    // G = 10 < W*: no swap regardless of losses
    ctl.pairs[0].gap = 10;
    ctl.iteration = 49; // window end, even window parity 0 -> pair considered
    attempt_swaps(chains, ctl, {2.0, 0.1}, cfg);
    CHECK(chains[0].theta[0] == 1.0);
    CHECK(ctl.pairs[0].gap == 11);

    // G = 50: 1.0 + 0.5 < 2.0 -> swap, gap resets
    ctl.pairs[0].gap = 50;
    ctl.pairs[0].buffer = 0.5;
    ctl.iteration = 49;
    attempt_swaps(chains, ctl, {2.0, 1.0}, cfg);
    CHECK(chains[0].theta[0] == 2.0);
    CHECK(chains[1].theta[0] == 1.0);
    CHECK(ctl.pairs[0].gap == 0);

    // 1.8 + 0.5 >= 2.0 -> no swap
    ctl.pairs[0].gap = 50;
    ctl.pairs[0].buffer = 0.5;
    ctl.iteration = 49;
    attempt_swaps(chains, ctl, {2.0, 1.8}, cfg);
    CHECK(chains[0].theta[0] == 2.0); // unchanged from previous swap
    CHECK(ctl.pairs[0].gap == 51);
}

TEST_CASE("swap preserves the multiset of parameter vectors") {
    SamplerConfig cfg;
    cfg.n_chains = 4;
    cfg.window = 17;
    cfg.eta_lo = 1e-3;
    cfg.eta_hi = 1e-2;
    std::vector<ChainState> chains;
    for (int c = 0; c < 4; ++c)
        chains.push_back(ChainState::make({double(c), double(10 + c)}, 1e-5 * (c + 1), 1e-3,
                                          static_cast<uint64_t>(c + 1)));
    SwapController ctl = SwapController::make(cfg);
    Rng rng(3);
    std::multiset<double> before;
    for (auto& c : chains) before.insert(c.theta[0]);
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> losses{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
        attempt_swaps(chains, ctl, losses, cfg);
    }
    std::multiset<double> after;
    for (auto& c : chains) after.insert(c.theta[0]);
    CHECK(before == after);
    bool any = false;
    for (auto& p : ctl.pairs) any = any || p.swaps > 0;
    CHECK(any);
}

TEST_CASE("two-chain toy: swap rate settles near the target") {
    // quadratic target with minibatch-style noisy losses
    SamplerConfig cfg;
    cfg.n_chains = 2;
    cfg.window = 50;
    cfg.eta_lo = 2e-3;
    cfg.eta_hi = 1e-2;
    cfg.temp_lo = 1e-3;
    cfg.temp_hi = 1e-2;
    auto temps = geometric_ladder(cfg.temp_lo, cfg.temp_hi, 2);
    auto lrs = geometric_ladder(cfg.eta_lo, cfg.eta_hi, 2);
    std::vector<ChainState> chains;
    for (int c = 0; c < 2; ++c)
        chains.push_back(ChainState::make({1.0, -1.0}, temps[static_cast<size_t>(c)],
                                          lrs[static_cast<size_t>(c)], static_cast<uint64_t>(c + 5)));
    SwapController ctl = SwapController::make(cfg);
    Rng noise(11);
    auto loss_fn = [&](int, const std::vector<double>& th, std::vector<double>& g) {
        const double c0 = 0.3 * noise.normal(), c1 = 0.3 * noise.normal();
        g[0] = th[0] - c0;
        g[1] = th[1] - c1;
        return 0.5 * (g[0] * g[0] + g[1] * g[1]);
    };
    const int64_t windows = 4000;
    for (int64_t i = 0; i < windows * cfg.window; ++i)
        resgld_step(chains, ctl, loss_fn, cfg, lrs);
    const double rate = ctl.swap_rate(0);
    CHECK(rate > 0.05);
    CHECK(rate < 0.15);
    CHECK(std::abs(ctl.pairs[0].buffer) < 50.0);
}

TEST_CASE("zero-temperature single chain is bitwise reproducible") {
    SamplerConfig cfg;
    cfg.n_chains = 1;
    cfg.zero_temperature = true;
    auto run = [&]() {
        std::vector<ChainState> chains{ChainState::make({1.0, 2.0}, 0.0, 1e-2, 3)};
        SwapController ctl = SwapController::make(cfg);
        auto loss_fn = [&](int, const std::vector<double>& th, std::vector<double>& g) {
            g[0] = th[0];
            g[1] = 2.0 * th[1];
            return 0.5 * th[0] * th[0] + th[1] * th[1];
        };
        for (int i = 0; i < 500; ++i) resgld_step(chains, ctl, loss_fn, cfg, {1e-2});
        return chains[0].theta;
    };
    CHECK(run() == run());
}

TEST_CASE("predict_with_uncertainty: degenerate and two-member ensembles") {
    Tensor a = Tensor::from({4}, {0, 0, 0, 0});
    Tensor b = Tensor::from({4}, {2, 2, 2, 2});
    CHECK_THROWS_AS(predict_with_uncertainty({}), Error);

    auto band1 = predict_with_uncertainty({a, a, a});
    for (int i = 0; i < 4; ++i) {
        CHECK(band1.mean.at(i) == 0.0);
        CHECK(band1.lower.at(i) == 0.0);
        CHECK(band1.upper.at(i) == 0.0);
    }
    auto band2 = predict_with_uncertainty({a, b});
    for (int i = 0; i < 4; ++i) {
        CHECK(band2.mean.at(i) == doctest::Approx(1.0));
        CHECK(band2.lower.at(i) <= band2.mean.at(i));
        CHECK(band2.mean.at(i) <= band2.upper.at(i));
    }
}

TEST_CASE("rng serialization restores the stream exactly") {
    Rng a(123);
    for (int i = 0; i < 1000; ++i) a.normal();
    std::string s = a.serialize();
    Rng b;
    b.deserialize(s);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
}
