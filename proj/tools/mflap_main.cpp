#include "mflap/report.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace mflap;
namespace fs = std::filesystem;

namespace {

fs::path out_root(const std::string& out, const std::string& fallback_name) {
    if (!out.empty()) return out;
    const char* env = std::getenv("MFLAP_OUT");
    fs::path root = env ? fs::path(env) : fs::path(".");
    return root / fallback_name;
}

harness::ExperimentConfig config_for(const std::string& task, const std::string& config_file) {
    harness::ExperimentConfig cfg = harness::ExperimentConfig::preset(systems::task_from(task));
    if (!config_file.empty()) {
        std::ifstream is(config_file);
        if (!is) throw Error("cannot read config " + config_file);
        cfg = harness::ExperimentConfig::from_json(harness::json::parse(is));
    }
    return cfg;
}

std::vector<harness::RunRecord> collect_records(const std::vector<std::string>& dirs) {
    std::vector<harness::RunRecord> recs;
    auto try_load = [&](const fs::path& p) {
        if (fs::exists(p / "runrecord.json")) {
            std::ifstream is(p / "runrecord.json");
            recs.push_back(harness::RunRecord::from_json(harness::json::parse(is)));
            return true;
        }
        return false;
    };
    for (const auto& d : dirs) {
        fs::path p(d);
        if (try_load(p)) continue;
        if (!fs::is_directory(p)) throw Error("no run record under " + d);
        bool any = false;
        for (const auto& e : fs::directory_iterator(p))
            if (e.is_directory()) any = try_load(e.path()) || any;
        if (!any) throw Error("no run record under " + d);
    }
    return recs;
}

int cmd_generate(const std::string& task, uint64_t seed, const std::string& out,
                 int64_t lf_count, const std::string& config_file) {
    harness::ExperimentConfig cfg = config_for(task, config_file);
    if (lf_count > 0) cfg.dataset.n_lf_train = lf_count;
    fs::path dir = out_root(out, cfg.dataset.task == systems::Task::Lorenz
                                     ? "dataset_lorenz"
                                     : std::string("dataset_") + systems::task_name(cfg.dataset.task));
    std::cout << "generating " << systems::task_name(cfg.dataset.task) << " dataset (seed " << seed
              << ") -> " << dir << "\n";
    mf::FidelityDataset ds = systems::build_dataset(cfg.dataset, seed);
    harness::save_dataset(ds, cfg.dataset, dir);
    std::cout << "wrote " << ds.n_lf_train() << " LF / " << ds.n_hf_train() << " HF training pairs, "
              << ds.n_hf_test() << " test pairs\n";
    return 0;
}

int cmd_train(const std::string& data, uint64_t seed, const std::string& out, int repeats,
              bool zero_temp, const std::string& baseline, bool with_mix,
              const std::string& config_file) {
    mf::FidelityDataset ds = harness::load_dataset(data);
    harness::ExperimentConfig cfg = config_for(ds.task, config_file);
    if (repeats > 0) cfg.repeats = repeats;
    cfg.seed = seed;
    if (zero_temp) cfg.apply_zero_temperature();
    fs::path dir = out_root(out, std::string("train_") + ds.task + "_" + std::to_string(seed));
    fs::create_directories(dir);

    if (!baseline.empty()) {
        train::BaselineKind kind = baseline == "lf"   ? train::BaselineKind::LF
                                   : baseline == "hf" ? train::BaselineKind::HF
                                                      : train::BaselineKind::Mix;
        for (int r = 0; r < cfg.repeats; ++r) {
            const uint64_t rs = seed + static_cast<uint64_t>(r);
            std::cout << "baseline " << baseline << " repeat " << r << " (seed " << rs << ")\n";
            train::TrainedOperator op = train::train_baseline(kind, cfg.g_lf, ds, cfg.recipe, rs);
            fs::path rd = dir / ("run" + std::to_string(r));
            fs::create_directories(rd);
            Tensor hf_in = ds.hf_test_in;
            if (ds.norm_in) ds.norm_in->encode(hf_in);
            Tensor pred = train::predict_stacked(op.cfg, ds.hf_grid, op.params, hf_in);
            if (ds.norm_out) ds.norm_out->decode(pred);
            auto ls = train::per_sample_losses(pred, ds.hf_test_out, cfg.recipe.p);
            double acc = 0;
            for (double v : ls) acc += v;
            harness::RunRecord rec;
            rec.task = ds.task;
            rec.seed = rs;
            rec.config_echo = cfg.to_json();
            rec.methods.push_back({baseline, acc / double(ls.size()), acc / double(ls.size()), ls});
            rec.wall_seconds = op.wall_seconds;
            std::ofstream os(rd / "runrecord.json");
            os << rec.to_json().dump(2) << "\n";
            harness::write_epoch_losses_csv(op.diag, rd / "losses.csv");
            harness::write_swaps_csv(op.diag, rd / "swaps.csv");
            std::cout << "  test loss " << acc / double(ls.size()) << "\n";
        }
        auto rows = harness::aggregate(collect_records({dir.string()}));
        harness::write_report_csv(rows, dir / "report.csv");
        return 0;
    }

    for (int r = 0; r < cfg.repeats; ++r) {
        const uint64_t rs = seed + static_cast<uint64_t>(r);
        std::cout << "repeat " << r << " (seed " << rs << ")\n";
        fs::path rd = dir / ("run" + std::to_string(r));
        harness::ExperimentOutput eo = harness::run_experiment(cfg, ds, rs, rd, true, with_mix);
        std::cout << "  mf " << eo.record.find("mf")->mean_loss << "  lf "
                  << eo.record.find("lf")->mean_loss << "  hf "
                  << (eo.record.find("hf") ? eo.record.find("hf")->mean_loss : -1.0)
                  << "  coverage " << eo.record.coverage95 << "  alpha " << eo.record.alpha << "\n";
    }
    auto rows = harness::aggregate(collect_records({dir.string()}));
    harness::write_report_csv(rows, dir / "report.csv");
    std::cout << "report -> " << (dir / "report.csv") << "\n";
    return 0;
}

int cmd_evaluate(const std::string& model, const std::string& data, const std::string& out) {
    mf::FidelityDataset ds = harness::load_dataset(data);
    harness::Checkpoint ck = harness::load_checkpoint(model);
    std::vector<train::MFSnapshot> ens;
    mf::MFModel m = harness::mf_from_checkpoint(ck, &ens);
    harness::ExperimentConfig cfg = harness::ExperimentConfig::from_json(ck.config_echo);

    Tensor hf_in = ds.hf_test_in;
    if (ds.norm_in) ds.norm_in->encode(hf_in);
    Tensor z = train::corrector_inputs(m.cfg_lf, ds.hf_grid, m.p_lf, hf_in);
    std::vector<Tensor> preds;
    for (const auto& s : ens) {
        mf::MFModel ms = m;
        ms.p_lin = s.p_lin;
        ms.p_nl = s.p_nl;
        ms.alpha_logit = s.alpha_logit;
        Tensor t = train::predict_stacked_mf(ms, z);
        if (ds.norm_out) ds.norm_out->decode(t);
        preds.push_back(std::move(t));
    }
    if (preds.empty()) {
        Tensor t = train::predict_stacked_mf(m, z);
        if (ds.norm_out) ds.norm_out->decode(t);
        preds.push_back(std::move(t));
    }
    auto band = resgld::predict_with_uncertainty(preds);
    auto ls = train::per_sample_losses(band.mean, ds.hf_test_out, cfg.recipe.p);
    double acc = 0;
    for (double v : ls) acc += v;
    std::cout << "mf test loss (ensemble mean, " << preds.size() << " members): "
              << acc / double(ls.size()) << "\n";
    if (!out.empty()) {
        harness::json j{{"mf_test_loss", acc / double(ls.size())},
                        {"ensemble", preds.size()},
                        {"alpha", m.alpha()}};
        std::ofstream os(out);
        os << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_predict(const std::string& model, const std::string& data, const std::string& out,
                const std::string& which, int cases, const std::string& lf_model,
                const std::string& hf_model) {
    mf::FidelityDataset ds = harness::load_dataset(data);
    harness::Checkpoint ck = harness::load_checkpoint(model);
    std::vector<train::MFSnapshot> ens;
    mf::MFModel m = harness::mf_from_checkpoint(ck, &ens);
    fs::path dir = out_root(out, "predict_" + ds.task);
    fs::create_directories(dir);

    Tensor hf_in = ds.hf_test_in;
    if (ds.norm_in) ds.norm_in->encode(hf_in);
    Tensor z = train::corrector_inputs(m.cfg_lf, ds.hf_grid, m.p_lf, hf_in);
    std::vector<Tensor> preds;
    for (const auto& s : ens) {
        mf::MFModel ms = m;
        ms.p_lin = s.p_lin;
        ms.p_nl = s.p_nl;
        ms.alpha_logit = s.alpha_logit;
        Tensor t = train::predict_stacked_mf(ms, z);
        if (ds.norm_out) ds.norm_out->decode(t);
        preds.push_back(std::move(t));
    }
    if (preds.empty()) {
        Tensor t = train::predict_stacked_mf(m, z);
        if (ds.norm_out) ds.norm_out->decode(t);
        preds.push_back(std::move(t));
    }
    auto band = resgld::predict_with_uncertainty(preds);

    if (which == "intervals" || which == "trajectories") {
        if (ds.hf_grid.rank() != 1) throw Error("interval plots are for rank-1 tasks");
        harness::emit_plotdata_intervals(ds, band.mean, band.lower, band.upper, cases, ds.seed,
                                         dir / "intervals.csv");
        std::cout << "wrote " << (dir / "intervals.csv") << "\n";
    } else if (which == "errors") {
        if (lf_model.empty() || hf_model.empty())
            throw Error("errors plot needs --baseline-lf and --baseline-hf checkpoints");
        harness::Checkpoint lfc = harness::load_checkpoint(lf_model);
        harness::Checkpoint hfc = harness::load_checkpoint(hf_model);
        harness::ExperimentConfig cfg = harness::ExperimentConfig::from_json(ck.config_echo);
        Tensor plf = train::predict_stacked(cfg.g_lf, ds.hf_grid, lfc.params, hf_in);
        Tensor phf = train::predict_stacked(cfg.g_lf, ds.hf_grid, hfc.params, hf_in);
        if (ds.norm_out) {
            ds.norm_out->decode(plf);
            ds.norm_out->decode(phf);
        }
        harness::emit_plotdata_errors(ds, band.mean, plf, phf, cases, ds.seed, dir / "errors.csv");
        std::cout << "wrote " << (dir / "errors.csv") << "\n";
    } else {
        throw Error("unknown plot kind '" + which + "'");
    }
    return 0;
}

int cmd_sweep(const std::string& data, const std::string& param, const std::string& values,
              uint64_t seed, const std::string& out, int repeats, bool zero_temp,
              const std::string& config_file) {
    mf::FidelityDataset ds = harness::load_dataset(data);
    harness::ExperimentConfig base = config_for(ds.task, config_file);
    if (zero_temp) base.apply_zero_temperature();
    fs::path dir = out_root(out, "sweep_" + ds.task + "_" + param);
    fs::create_directories(dir);

    std::vector<double> vals;
    if (values.find("..") != std::string::npos) {
        // geometric enumeration "lo..hi x2"
        auto dots = values.find("..");
        auto xpos = values.find('x', dots);
        double lo = std::stod(values.substr(0, dots));
        double hi = std::stod(values.substr(dots + 2, xpos - dots - 2));
        double fac = std::stod(values.substr(xpos + 1));
        for (double v = lo; v <= hi * (1.0 + 1e-12); v *= fac) vals.push_back(v);
    } else {
        std::string rest = values;
        while (!rest.empty()) {
            auto comma = rest.find(',');
            vals.push_back(std::stod(rest.substr(0, comma)));
            if (comma == std::string::npos) break;
            rest = rest.substr(comma + 1);
        }
    }

    std::ofstream os(dir / "sweep.csv");
    os << "param,value,repeat,mf_test_loss\n";
    os.precision(17);
    for (double v : vals) {
        harness::ExperimentConfig cfg = base;
        if (param == "lr") {
            // single-chain runs isolate the learning rate from swap effects
            cfg.recipe.phase1.sampler.n_chains = 1;
            cfg.recipe.phase2.sampler.n_chains = 1;
            cfg.recipe.phase1.sampler.eta_lo = cfg.recipe.phase1.sampler.eta_hi = v;
            cfg.recipe.phase2.sampler.eta_lo = cfg.recipe.phase2.sampler.eta_hi = v;
        } else if (param == "chains") {
            cfg.recipe.phase1.sampler.n_chains = static_cast<int>(v);
            cfg.recipe.phase2.sampler.n_chains = static_cast<int>(v);
        } else {
            throw Error("unknown sweep parameter '" + param + "'");
        }
        for (int r = 0; r < std::max(repeats, 1); ++r) {
            const uint64_t rs = seed + static_cast<uint64_t>(r);
            std::cout << param << "=" << v << " repeat " << r << "\n";
            harness::ExperimentOutput eo = harness::run_experiment(cfg, ds, rs, "", false, false);
            os << param << "," << v << "," << r << "," << eo.record.find("mf")->mean_loss << "\n";
            os.flush();
        }
    }
    std::cout << "wrote " << (dir / "sweep.csv") << "\n";
    return 0;
}

int cmd_report(const std::string& runs, const std::string& out) {
    std::vector<std::string> dirs;
    std::string rest = runs;
    while (!rest.empty()) {
        auto comma = rest.find(',');
        dirs.push_back(rest.substr(0, comma));
        if (comma == std::string::npos) break;
        rest = rest.substr(comma + 1);
    }
    auto rows = harness::aggregate(collect_records(dirs));
    fs::path file = out.empty() ? fs::path("report.csv") : fs::path(out);
    harness::write_report_csv(rows, file);
    for (const auto& r : rows)
        std::cout << r.task << " " << r.method << ": " << r.mean_loss << " +/- " << r.std_loss
                  << " (" << r.n << " repeats)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-fidelity Laplace neural operator experiments"};
    app.require_subcommand(1);

    std::string task = "lorenz", data, out, config_file, baseline, which = "intervals";
    std::string model, lf_model, hf_model, param = "lr", values, runs;
    uint64_t seed = 1;
    int repeats = 0, cases = 6;
    int64_t lf_count = 0;
    bool zero_temp = false, with_mix = false;

    auto* gen = app.add_subcommand("generate", "build a benchmark dataset");
    gen->add_option("--task", task, "lorenz|lorenz_nonlinear|duffing|burgers|brusselator");
    gen->add_option("--seed", seed);
    gen->add_option("--out", out);
    gen->add_option("--lf-count", lf_count, "override the LF training-set size");
    gen->add_option("--config", config_file);

    auto* tr = app.add_subcommand("train", "train the multi-fidelity model or a baseline");
    tr->add_option("--data", data)->required();
    tr->add_option("--seed", seed);
    tr->add_option("--out", out);
    tr->add_option("--repeats", repeats);
    tr->add_option("--baseline", baseline, "lf|hf|mix: train a single-fidelity baseline instead");
    tr->add_flag("--zero-temp", zero_temp, "force all chain temperatures to zero");
    tr->add_flag("--with-mix", with_mix, "also train the mixed-fidelity baseline");
    tr->add_option("--config", config_file);

    auto* ev = app.add_subcommand("evaluate", "evaluate a trained model on the test set");
    ev->add_option("--model", model)->required();
    ev->add_option("--data", data)->required();
    ev->add_option("--out", out);

    auto* pr = app.add_subcommand("predict", "emit prediction/interval plot data");
    pr->add_option("--model", model)->required();
    pr->add_option("--data", data)->required();
    pr->add_option("--out", out);
    pr->add_option("--which", which, "intervals|trajectories|errors");
    pr->add_option("--cases", cases);
    pr->add_option("--baseline-lf", lf_model);
    pr->add_option("--baseline-hf", hf_model);

    auto* sw = app.add_subcommand("sweep", "learning-rate or chain-count ablation");
    sw->add_option("--data", data)->required();
    sw->add_option("--param", param, "lr|chains");
    sw->add_option("--values", values, "lo..hi xF (geometric) or comma list")->required();
    sw->add_option("--seed", seed);
    sw->add_option("--out", out);
    sw->add_option("--repeats", repeats);
    sw->add_flag("--zero-temp", zero_temp);
    sw->add_option("--config", config_file);

    auto* rp = app.add_subcommand("report", "aggregate run records into mean/std tables");
    rp->add_option("--runs", runs)->required();
    rp->add_option("--out", out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(task, seed, out, lf_count, config_file);
        if (tr->parsed()) return cmd_train(data, seed, out, repeats, zero_temp, baseline, with_mix, config_file);
        if (ev->parsed()) return cmd_evaluate(model, data, out);
        if (pr->parsed()) return cmd_predict(model, data, out, which, cases, lf_model, hf_model);
        if (sw->parsed()) return cmd_sweep(data, param, values, seed, out, repeats, zero_temp, config_file);
        if (rp->parsed()) return cmd_report(runs, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
