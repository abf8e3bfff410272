#include "mflap/config.hpp"

namespace mflap::harness {

json grid_to_json(const lno::GridSpec& g) {
    return json{{"axis_lengths", g.axis_lengths},
                {"axis_extents", g.axis_extents},
                {"time_axis", g.time_axis}};
}

lno::GridSpec grid_from_json(const json& j) {
    lno::GridSpec g;
    g.axis_lengths = j.at("axis_lengths").get<std::vector<int64_t>>();
    g.axis_extents = j.at("axis_extents").get<std::vector<double>>();
    g.time_axis = j.at("time_axis").get<int>();
    return g;
}

json lno_to_json(const lno::LNOConfig& c) {
    return json{{"in_channels", c.in_channels},
                {"out_channels", c.out_channels},
                {"lift_layers", c.lift_layers},
                {"lift_width", c.lift_width},
                {"laplace_layers", c.laplace_layers},
                {"laplace_width", c.laplace_width},
                {"laplace_modes", c.laplace_modes},
                {"linear_path_layers", c.linear_path_layers},
                {"linear_path_width", c.linear_path_width},
                {"projection_layers", c.projection_layers},
                {"projection_width", c.projection_width},
                {"activation", lno::activation_name(c.activation)}};
}

lno::LNOConfig lno_from_json(const json& j) {
    lno::LNOConfig c;
    c.in_channels = j.at("in_channels");
    c.out_channels = j.at("out_channels");
    c.lift_layers = j.at("lift_layers");
    c.lift_width = j.at("lift_width");
    c.laplace_layers = j.at("laplace_layers");
    c.laplace_width = j.at("laplace_width");
    c.laplace_modes = j.at("laplace_modes");
    c.linear_path_layers = j.at("linear_path_layers");
    c.linear_path_width = j.at("linear_path_width");
    c.projection_layers = j.at("projection_layers");
    c.projection_width = j.at("projection_width");
    c.activation = lno::activation_from(j.at("activation"));
    return c;
}

json sampler_to_json(const resgld::SamplerConfig& c) {
    return json{{"beta1", c.beta1},
                {"beta2", c.beta2},
                {"rho", c.rho},
                {"drift_scale", c.drift_scale},
                {"n_chains", c.n_chains},
                {"target_swap_rate", c.target_swap_rate},
                {"window", c.window},
                {"temp_lo", c.temp_lo},
                {"temp_hi", c.temp_hi},
                {"eta_lo", c.eta_lo},
                {"eta_hi", c.eta_hi},
                {"buffer_init", c.buffer_init},
                {"zero_temperature", c.zero_temperature}};
}

resgld::SamplerConfig sampler_from_json(const json& j) {
    resgld::SamplerConfig c;
    c.beta1 = j.at("beta1");
    c.beta2 = j.at("beta2");
    c.rho = j.at("rho");
    c.drift_scale = j.at("drift_scale");
    c.n_chains = j.at("n_chains");
    c.target_swap_rate = j.at("target_swap_rate");
    c.window = j.at("window");
    c.temp_lo = j.at("temp_lo");
    c.temp_hi = j.at("temp_hi");
    c.eta_lo = j.at("eta_lo");
    c.eta_hi = j.at("eta_hi");
    c.buffer_init = j.at("buffer_init");
    c.zero_temperature = j.at("zero_temperature");
    return c;
}

json phase_to_json(const train::PhaseRecipe& r) {
    return json{{"epochs", r.epochs},
                {"batch", r.batch},
                {"sampler", sampler_to_json(r.sampler)},
                {"ensemble_interval", r.ensemble_interval},
                {"ensemble_size", r.ensemble_size}};
}

train::PhaseRecipe phase_from_json(const json& j) {
    train::PhaseRecipe r;
    r.epochs = j.at("epochs");
    r.batch = j.at("batch");
    r.sampler = sampler_from_json(j.at("sampler"));
    r.ensemble_interval = j.at("ensemble_interval");
    r.ensemble_size = j.at("ensemble_size");
    return r;
}

json recipe_to_json(const systems::DatasetRecipe& r) {
    return json{{"task", systems::task_name(r.task)},
                {"n_lf_train", r.n_lf_train},
                {"n_hf_train", r.n_hf_train},
                {"n_lf_test", r.n_lf_test},
                {"n_hf_test", r.n_hf_test},
                {"lf_grid", grid_to_json(r.lf_grid)},
                {"hf_grid", grid_to_json(r.hf_grid)},
                {"corruption",
                 json{{"kind", r.corruption.kind == systems::CorruptionKind::LinearTrend
                                   ? "linear_trend"
                                   : "sinusoidal"},
                      {"a1", r.corruption.a1},
                      {"a2", r.corruption.a2},
                      {"a3", r.corruption.a3},
                      {"b", r.corruption.b},
                      {"a", r.corruption.a},
                      {"freq", r.corruption.freq}}},
                {"normalize", r.normalize},
                {"fine_steps", r.fine_steps},
                {"amp_start", r.amp_start},
                {"amp_step", r.amp_step},
                {"test_amp_offset", r.test_amp_offset}};
}

systems::DatasetRecipe recipe_from_json(const json& j) {
    systems::DatasetRecipe r;
    r.task = systems::task_from(j.at("task"));
    r.n_lf_train = j.at("n_lf_train");
    r.n_hf_train = j.at("n_hf_train");
    r.n_lf_test = j.at("n_lf_test");
    r.n_hf_test = j.at("n_hf_test");
    r.lf_grid = grid_from_json(j.at("lf_grid"));
    r.hf_grid = grid_from_json(j.at("hf_grid"));
    const json& c = j.at("corruption");
    r.corruption.kind = c.at("kind") == "linear_trend" ? systems::CorruptionKind::LinearTrend
                                                       : systems::CorruptionKind::Sinusoidal;
    r.corruption.a1 = c.at("a1");
    r.corruption.a2 = c.at("a2");
    r.corruption.a3 = c.at("a3");
    r.corruption.b = c.at("b");
    r.corruption.a = c.at("a");
    r.corruption.freq = c.at("freq");
    r.normalize = j.at("normalize");
    r.fine_steps = j.at("fine_steps");
    r.amp_start = j.at("amp_start");
    r.amp_step = j.at("amp_step");
    r.test_amp_offset = j.at("test_amp_offset");
    return r;
}

ExperimentConfig ExperimentConfig::preset(systems::Task t) {
    ExperimentConfig c;
    c.task = t;
    c.dataset = systems::DatasetRecipe::preset(t);

    auto base = [&](lno::Activation act, int width, int layers, int modes, int proj_w) {
        lno::LNOConfig l;
        l.in_channels = 1;
        l.out_channels = 1;
        l.lift_layers = 1;
        l.lift_width = width;
        l.laplace_layers = layers;
        l.laplace_width = width;
        l.laplace_modes = modes;
        l.linear_path_layers = layers;
        l.linear_path_width = width;
        l.projection_layers = 2;
        l.projection_width = proj_w;
        l.activation = act;
        return l;
    };

    train::PhaseRecipe p1, p2;
    switch (t) {
    case systems::Task::Lorenz:
    case systems::Task::LorenzNonlinear: {
        c.g_lf = base(lno::Activation::Sine, 3, 1, 8, 128);
        c.g_lin = base(lno::Activation::None, 3, 1, 8, 2);
        c.g_nl = base(lno::Activation::Sine, 3, 1, 8, 2);
        const int nc = t == systems::Task::Lorenz ? 4 : 6;
        p1.epochs = 2000;
        p1.batch = 50;
        p1.sampler.n_chains = nc;
        p1.sampler.eta_lo = 5e-6;
        p1.sampler.eta_hi = 5e-4;
        p2.epochs = 5000;
        p2.batch = 10;
        p2.sampler.n_chains = nc;
        p2.sampler.eta_lo = 5e-6;
        p2.sampler.eta_hi = 5e-4;
        break;
    }
    case systems::Task::Duffing: {
        c.g_lf = base(lno::Activation::Sine, 3, 1, 8, 128);
        c.g_lin = base(lno::Activation::None, 3, 1, 8, 2);
        c.g_nl = base(lno::Activation::Sine, 3, 1, 8, 2);
        p1.epochs = 2000;
        p1.batch = 20;
        p1.sampler.n_chains = 5;
        p1.sampler.eta_lo = 5e-3;
        p1.sampler.eta_hi = 5e-2;
        p2.epochs = 5000;
        p2.batch = 10;
        p2.sampler.n_chains = 5;
        p2.sampler.eta_lo = 5e-3;
        p2.sampler.eta_hi = 5e-2;
        break;
    }
    case systems::Task::Burgers: {
        c.g_lf = base(lno::Activation::Sine, 8, 2, 3, 128);
        c.g_lin = base(lno::Activation::None, 8, 2, 3, 16);
        c.g_nl = base(lno::Activation::Sine, 8, 2, 3, 16);
        p1.epochs = 1000;
        p1.batch = 200;
        p1.sampler.n_chains = 5;
        p1.sampler.eta_lo = 1e-4;
        p1.sampler.eta_hi = 1e-3;
        p2.epochs = 1000;
        p2.batch = 10;
        p2.sampler.n_chains = 5;
        p2.sampler.eta_lo = 1e-4;
        p2.sampler.eta_hi = 1e-3;
        p2.ensemble_interval = 100;
        break;
    }
    case systems::Task::Brusselator: {
        c.g_lf = base(lno::Activation::Relu, 16, 1, 3, 128);
        c.g_lin = base(lno::Activation::None, 16, 1, 3, 2);
        c.g_nl = base(lno::Activation::Relu, 16, 1, 3, 2);
        p1.epochs = 1000;
        p1.batch = 200;
        p1.sampler.n_chains = 5;
        p1.sampler.eta_lo = 1e-4;
        p1.sampler.eta_hi = 1e-3;
        p2.epochs = 500;
        p2.batch = 1;
        p2.sampler.n_chains = 1; // single-chain adaptive-drift SGLD
        p2.sampler.eta_lo = 1e-3;
        p2.sampler.eta_hi = 1e-3;
        p2.ensemble_interval = 50;
        break;
    }
    }
    c.g_lin.in_channels = 2;
    c.g_nl.in_channels = 2;
    c.recipe.phase1 = p1;
    c.recipe.phase2 = p2;
    return c;
}

void ExperimentConfig::apply_zero_temperature() {
    zero_temperature = true;
    recipe.phase1.sampler.zero_temperature = true;
    recipe.phase2.sampler.zero_temperature = true;
}

json ExperimentConfig::to_json() const {
    return json{{"task", systems::task_name(task)},
                {"dataset", recipe_to_json(dataset)},
                {"g_lf", lno_to_json(g_lf)},
                {"g_lin", lno_to_json(g_lin)},
                {"g_nl", lno_to_json(g_nl)},
                {"phase1", phase_to_json(recipe.phase1)},
                {"phase2", phase_to_json(recipe.phase2)},
                {"p", recipe.p},
                {"repeats", repeats},
                {"seed", seed},
                {"zero_temperature", zero_temperature}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    c.task = systems::task_from(j.at("task"));
    c.dataset = recipe_from_json(j.at("dataset"));
    c.g_lf = lno_from_json(j.at("g_lf"));
    c.g_lin = lno_from_json(j.at("g_lin"));
    c.g_nl = lno_from_json(j.at("g_nl"));
    c.recipe.phase1 = phase_from_json(j.at("phase1"));
    c.recipe.phase2 = phase_from_json(j.at("phase2"));
    c.recipe.p = j.at("p");
    c.repeats = j.at("repeats");
    c.seed = j.at("seed");
    c.zero_temperature = j.at("zero_temperature");
    return c;
}

} // namespace mflap::harness
