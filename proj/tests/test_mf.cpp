#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mflap/config.hpp"
#include "mflap/systems.hpp"
#include "mflap/trainer.hpp"

#include <cmath>

using namespace mflap;

namespace {

// small synthetic linear inter-fidelity task: u_L is a smoothed copy of f,
// u_H = u_L + 0.1 t + 0.5
mf::FidelityDataset synthetic_linear(int64_t n_lf, int64_t n_hf, uint64_t seed) {
    const int64_t ml = 32, mh = 64;
    lno::GridSpec gl{{ml}, {4.0}, 0}, gh{{mh}, {4.0}, 0};
    mf::FidelityDataset ds;
    ds.task = "synthetic";
    ds.lf_grid = gl;
    ds.hf_grid = gh;
    ds.seed = seed;
    auto stack = [&](int64_t n, const lno::GridSpec& g) {
        auto shape = g.axis_lengths;
        shape.insert(shape.begin(), n);
        shape.push_back(1);
        return Tensor::real(shape);
    };
    ds.lf_train_in = stack(n_lf, gl);
    ds.lf_train_out = stack(n_lf, gl);
    ds.hf_train_in = stack(n_hf, gh);
    ds.hf_train_out = stack(n_hf, gh);
    ds.lf_test_in = stack(8, gl);
    ds.lf_test_out = stack(8, gl);
    ds.hf_test_in = stack(8, gh);
    ds.hf_test_out = stack(8, gh);
    Rng rng(seed);
    auto fill_pair = [&](Tensor& fin_l, Tensor& uout_l, Tensor& fin_h, Tensor& uout_h, int64_t j,
                         bool with_hf) {
        const double a = 1.0 + rng.uniform(), ph = rng.uniform() * 6.28;
        auto f = [&](double t) { return a * std::sin(3.14159 * t / 2.0 + ph); };
        auto ul = [&](double t) { return 0.5 * a * std::sin(3.14159 * t / 2.0 + ph - 0.4); };
        for (int64_t i = 0; i < fin_l.shape[1]; ++i) {
            const double t = 4.0 * double(i) / double(fin_l.shape[1]);
            fin_l.at(j * fin_l.shape[1] + i) = f(t);
            uout_l.at(j * fin_l.shape[1] + i) = ul(t);
        }
        if (with_hf)
            for (int64_t i = 0; i < fin_h.shape[1]; ++i) {
                const double t = 4.0 * double(i) / double(fin_h.shape[1]);
                fin_h.at(j * fin_h.shape[1] + i) = f(t);
                uout_h.at(j * fin_h.shape[1] + i) = ul(t) + 0.1 * t + 0.5;
            }
    };
    for (int64_t j = 0; j < n_lf; ++j)
        fill_pair(ds.lf_train_in, ds.lf_train_out, ds.hf_train_in, ds.hf_train_out, j,
                  j < n_hf);
    for (int64_t j = 0; j < 8; ++j)
        fill_pair(ds.lf_test_in, ds.lf_test_out, ds.hf_test_in, ds.hf_test_out, j, true);
    return ds;
}

harness::ExperimentConfig tiny_config() {
    harness::ExperimentConfig cfg = harness::ExperimentConfig::preset(systems::Task::Lorenz);
    for (lno::LNOConfig* c : {&cfg.g_lf, &cfg.g_lin, &cfg.g_nl}) {
        c->lift_width = c->laplace_width = c->linear_path_width = 2;
        c->laplace_modes = 2;
        c->projection_width = 8;
    }
    cfg.g_lin.projection_width = 2;
    cfg.g_nl.projection_width = 2;
    cfg.recipe.phase1.epochs = 40;
    cfg.recipe.phase1.batch = 10;
    cfg.recipe.phase1.sampler.n_chains = 2;
    cfg.recipe.phase1.sampler.window = 5;
    cfg.recipe.phase1.sampler.eta_lo = 2e-3;
    cfg.recipe.phase1.sampler.eta_hi = 1e-2;
    cfg.recipe.phase1.ensemble_size = 0;
    cfg.recipe.phase2.epochs = 50;
    cfg.recipe.phase2.batch = 10;
    cfg.recipe.phase2.sampler.n_chains = 2;
    cfg.recipe.phase2.sampler.window = 5;
    cfg.recipe.phase2.sampler.eta_lo = 2e-3;
    cfg.recipe.phase2.sampler.eta_hi = 1e-2;
    cfg.recipe.phase2.ensemble_interval = 5;
    cfg.recipe.phase2.ensemble_size = 10;
    return cfg;
}

} // namespace

TEST_CASE("relative_lp_loss: identity, full miss, scaling, zero norm") {
    Tensor t = Tensor::from({4}, {1, -2, 3, -4});
    Tensor z = Tensor::real({4});
    CHECK(mf::relative_lp_loss(t, t, 2.0) == 0.0);
    CHECK(mf::relative_lp_loss(z, t, 2.0) == doctest::Approx(1.0));
    Tensor d = t;
    for (auto& v : d.buf) v *= 2.0;
    CHECK(mf::relative_lp_loss(d, t, 2.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(mf::relative_lp_loss(t, z, 2.0), Error);

    // scale consistency: loss(c*pred, c*target) == loss(pred, target)
    Tensor p = Tensor::from({4}, {1.1, -1.9, 3.2, -4.4});
    const double base = mf::relative_lp_loss(p, t, 2.0);
    Tensor pc = p, tc = t;
    for (auto& v : pc.buf) v *= -7.3;
    for (auto& v : tc.buf) v *= -7.3;
    CHECK(mf::relative_lp_loss(pc, tc, 2.0) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("RangeMap: decode after encode is the identity") {
    Rng rng(5);
    Tensor t = Tensor::real({64});
    for (auto& v : t.buf) v = 3.0 * rng.normal() + 1.0;
    auto m = mf::RangeMap::fit(t, 1);
    Tensor e = t;
    m.encode(e);
    for (double v : e.buf) {
        CHECK(v >= -1e-12);
        CHECK(v <= 1.0 + 1e-12);
    }
    m.decode(e);
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(std::abs(e.at(i) - t.at(i)) < 1e-12);
}

TEST_CASE("mf_forward: degenerate and midpoint blends") {
    lno::GridSpec g{{32}, {4.0}, 0};
    mf::MFModel m;
    m.cfg_lf = tiny_config().g_lf;
    m.cfg_lin = tiny_config().g_lin;
    m.cfg_nl = tiny_config().g_nl;
    m.lf_grid = m.hf_grid = g;
    m.p_lf = lno::init_params(m.cfg_lf, g, 1);
    m.p_lin = lno::init_params(m.cfg_lin, g, 2, "gl.");
    m.p_nl = lno::init_params(m.cfg_nl, g, 3, "gnl.");

    auto f = lno::FunctionSample::zeros(g, 1);
    Rng rng(4);
    for (auto& v : f.values.buf) v = rng.normal();

    auto z = mf::mf_corrector_input(m, f);
    auto ul = lno::lno_forward(m.cfg_lin, m.p_lin, z, "gl.");
    auto un = lno::lno_forward(m.cfg_nl, m.p_nl, z, "gnl.");

    m.alpha_logit = 40.0; // alpha ~ 1
    auto y1 = mf::mf_forward(m, f);
    for (int i = 0; i < 32; ++i) CHECK(y1.values.at(i) == doctest::Approx(ul.values.at(i)).epsilon(1e-12));

    m.alpha_logit = -40.0; // alpha ~ 0
    auto y0 = mf::mf_forward(m, f);
    for (int i = 0; i < 32; ++i) CHECK(y0.values.at(i) == doctest::Approx(un.values.at(i)).epsilon(1e-12));

    m.alpha_logit = 0.0; // alpha = 0.5 exactly (the initialization)
    CHECK(m.alpha() == 0.5);
    auto yh = mf::mf_forward(m, f);
    for (int i = 0; i < 32; ++i) {
        const double lo = std::min(ul.values.at(i), un.values.at(i));
        const double hi = std::max(ul.values.at(i), un.values.at(i));
        CHECK(yh.values.at(i) >= lo - 1e-12); // convex blend stays bounded
        CHECK(yh.values.at(i) <= hi + 1e-12);
        CHECK(yh.values.at(i) ==
              doctest::Approx(0.5 * ul.values.at(i) + 0.5 * un.values.at(i)).epsilon(1e-12));
    }
}

TEST_CASE("loss graph: single-pair batch reduces to relative_lp_loss") {
    lno::GridSpec g{{32}, {4.0}, 0};
    lno::LNOConfig cfg = tiny_config().g_lf;
    auto lg = mf::build_operator_loss_graph(cfg, g, 1, 2.0);
    auto ps = lno::init_params(cfg, g, 9);
    Rng rng(2);
    Tensor x = Tensor::real({1, 32, 1}), u = Tensor::real({1, 32, 1});
    for (auto& v : x.buf) v = rng.normal();
    for (auto& v : u.buf) v = rng.normal();
    Tensor tn = mf::target_norms(u, 2.0);
    auto bind = ps.bindings();
    bind["__x"] = &x;
    bind["__u"] = &u;
    bind["__tn"] = &tn;
    const double graph_loss = lg.graph.forward(bind).buf[0];

    auto f = lno::FunctionSample::zeros(g, 1);
    std::copy(x.buf.begin(), x.buf.end(), f.values.buf.begin());
    auto pred = lno::lno_forward(cfg, ps, f);
    Tensor ut = Tensor::real({32, 1});
    std::copy(u.buf.begin(), u.buf.end(), ut.buf.begin());
    CHECK(graph_loss == doctest::Approx(mf::relative_lp_loss(pred.values, ut, 2.0)).epsilon(1e-12));
}

TEST_CASE("frozen LF operator receives zero gradients in a combined graph") {
    lno::GridSpec g{{24}, {4.0}, 0};
    lno::LNOConfig cfg = tiny_config().g_lf;
    ad::Graph gr;
    int x = gr.leaf("__x", {1, 24, 1}, DType::Real64, false);
    int base = lno::build_lno(gr, cfg, g, x, "glf.", true, /*frozen=*/true);
    int cat = gr.concat(x, base, 2);
    lno::LNOConfig corr = tiny_config().g_nl;
    int pred = lno::build_lno(gr, corr, g, cat, "gnl.", true);
    gr.set_output(gr.reduce_sum(gr.abspow(pred, 2.0), {0, 1, 2}));

    auto p_lf = lno::init_params(cfg, g, 1, "glf.");
    auto p_nl = lno::init_params(corr, g, 2, "gnl.");
    Tensor xt = Tensor::real({1, 24, 1});
    Rng rng(7);
    for (auto& v : xt.buf) v = rng.normal();
    auto bind = p_lf.bindings();
    for (auto& [k, v] : p_nl.bindings()) bind[k] = v;
    bind["__x"] = &xt;
    gr.forward(bind);
    auto grads = gr.backward(Tensor::scalar(1.0));
    for (auto& [name, t] : grads) {
        if (name.rfind("glf.", 0) == 0) {
            for (double v : t.buf) CHECK(v == 0.0);
        }
    }
    // and the corrector gradients are not all zero
    double nz = 0;
    for (auto& [name, t] : grads)
        if (name.rfind("gnl.", 0) == 0)
            for (double v : t.buf) nz += std::abs(v);
    CHECK(nz > 0.0);
}

TEST_CASE("two-phase training on the synthetic task reduces the phase-2 loss") {
    mf::FidelityDataset ds = synthetic_linear(200, 10, 5);
    harness::ExperimentConfig cfg = tiny_config();

    mf::MFModel proto;
    proto.cfg_lf = cfg.g_lf;
    proto.cfg_lin = cfg.g_lin;
    proto.cfg_nl = cfg.g_nl;
    proto.lf_grid = ds.lf_grid;
    proto.hf_grid = ds.hf_grid;
    proto.p_lf = lno::init_params(cfg.g_lf, ds.lf_grid, 11);
    proto.p_lin = lno::init_params(cfg.g_lin, ds.lf_grid, 12, "gl.");
    proto.p_nl = lno::init_params(cfg.g_nl, ds.lf_grid, 13, "gnl.");

    std::vector<double> lf_before = proto.p_lf.flatten();
    auto res = train::train_two_phase(proto, ds, cfg.recipe, 21);

    REQUIRE(!res.phase2.losses.empty());
    const double first = res.phase2.losses.front().chain_losses[0];
    const double last = res.phase2.losses.back().chain_losses[0];
    CHECK(last < first);

    // ensemble bookkeeping: 10 snapshots at interval 5 over the last 50 epochs
    CHECK(res.ensemble.size() == 10);

    // theta_(1) frozen bitwise through phase 2
    std::vector<double> lf_after = res.model.p_lf.flatten();
    CHECK(lf_before.size() == lf_after.size());
    bool changed_in_phase1 = lf_before != lf_after; // phase 1 must train it
    CHECK(changed_in_phase1);

    // alpha remains in (0,1)
    CHECK(res.model.alpha() > 0.0);
    CHECK(res.model.alpha() < 1.0);
}

TEST_CASE("zero-temperature single-chain two-phase runs are bitwise identical") {
    mf::FidelityDataset ds = synthetic_linear(40, 5, 6);
    harness::ExperimentConfig cfg = tiny_config();
    cfg.recipe.phase1.epochs = 10;
    cfg.recipe.phase1.batch = 8;
    cfg.recipe.phase2.epochs = 10;
    cfg.recipe.phase2.batch = 5;
    cfg.recipe.phase1.sampler.n_chains = 1;
    cfg.recipe.phase2.sampler.n_chains = 1;
    cfg.apply_zero_temperature();

    auto run = [&]() {
        mf::MFModel proto;
        proto.cfg_lf = cfg.g_lf;
        proto.cfg_lin = cfg.g_lin;
        proto.cfg_nl = cfg.g_nl;
        proto.lf_grid = ds.lf_grid;
        proto.hf_grid = ds.hf_grid;
        proto.p_lf = lno::init_params(cfg.g_lf, ds.lf_grid, 31);
        proto.p_lin = lno::init_params(cfg.g_lin, ds.lf_grid, 32, "gl.");
        proto.p_nl = lno::init_params(cfg.g_nl, ds.lf_grid, 33, "gnl.");
        auto res = train::train_two_phase(proto, ds, cfg.recipe, 77);
        std::vector<double> all = res.model.p_lf.flatten();
        auto l2 = res.model.p_lin.flatten();
        auto l3 = res.model.p_nl.flatten();
        all.insert(all.end(), l2.begin(), l2.end());
        all.insert(all.end(), l3.begin(), l3.end());
        all.push_back(res.model.alpha_logit);
        return all;
    };
    CHECK(run() == run());
}

TEST_CASE("baselines: empty HF data errors; mix epoch touches both fidelities") {
    mf::FidelityDataset ds = synthetic_linear(40, 5, 9);
    harness::ExperimentConfig cfg = tiny_config();
    cfg.recipe.phase1.epochs = 4;
    cfg.recipe.phase1.batch = 8;
    cfg.recipe.phase2.epochs = 4;
    cfg.recipe.phase2.batch = 5;

    mf::FidelityDataset empty = ds;
    empty.hf_train_in = Tensor::real({0, 64, 1});
    empty.hf_train_out = Tensor::real({0, 64, 1});
    CHECK_THROWS_AS(train::train_baseline(train::BaselineKind::HF, cfg.g_lf, empty, cfg.recipe, 1),
                    Error);

    auto mix = train::train_baseline(train::BaselineKind::Mix, cfg.g_lf, ds, cfg.recipe, 1);
    // per-epoch step count: 40/8 LF steps + 5/5 HF steps, losses recorded once per epoch
    CHECK(mix.diag.losses.size() == 4);
    CHECK(mix.params.flat_size() > 0);

    auto hf = train::train_baseline(train::BaselineKind::HF, cfg.g_lf, ds, cfg.recipe, 1);
    CHECK(hf.grid.axis_lengths[0] == 64);
}
