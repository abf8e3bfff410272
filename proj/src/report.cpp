#include "mflap/report.hpp"

#include <cmath>
#include <fstream>

namespace mflap::harness {

namespace fs = std::filesystem;

json RunRecord::to_json() const {
    json ms = json::array();
    for (const auto& m : methods)
        ms.push_back(json{{"method", m.method},
                          {"mean_loss", m.mean_loss},
                          {"final_loss", m.final_loss},
                          {"per_sample", m.per_sample}});
    return json{{"format", "mflap-runrecord"}, {"version", 1},
                {"task", task},      {"seed", seed},
                {"config", config_echo}, {"methods", ms},
                {"coverage95", coverage95}, {"alpha", alpha},
                {"wall_seconds", wall_seconds}};
}

RunRecord RunRecord::from_json(const json& j) {
    RunRecord r;
    r.task = j.at("task");
    r.seed = j.at("seed");
    r.config_echo = j.at("config");
    for (const json& m : j.at("methods")) {
        MethodResult mr;
        mr.method = m.at("method");
        mr.mean_loss = m.at("mean_loss");
        mr.final_loss = m.at("final_loss");
        mr.per_sample = m.at("per_sample").get<std::vector<double>>();
        r.methods.push_back(std::move(mr));
    }
    r.coverage95 = j.at("coverage95");
    r.alpha = j.at("alpha");
    r.wall_seconds = j.at("wall_seconds");
    return r;
}

const MethodResult* RunRecord::find(const std::string& m) const {
    for (const auto& mr : methods)
        if (mr.method == m) return &mr;
    return nullptr;
}

std::vector<ReportRow> aggregate(const std::vector<RunRecord>& records) {
    std::vector<ReportRow> rows;
    for (const auto& rec : records)
        for (const auto& m : rec.methods) {
            ReportRow* row = nullptr;
            for (auto& r : rows)
                if (r.task == rec.task && r.method == m.method) row = &r;
            if (!row) {
                rows.push_back({rec.task, m.method, 0, 0, 0});
                row = &rows.back();
            }
            row->mean_loss += m.mean_loss; // accumulate, finalize below
            row->std_loss += m.mean_loss * m.mean_loss;
            row->n += 1;
        }
    for (auto& r : rows) {
        const double mean = r.mean_loss / double(r.n);
        const double ssq = r.std_loss;
        r.mean_loss = mean;
        r.std_loss = r.n > 1 ? std::sqrt(std::max(0.0, (ssq - double(r.n) * mean * mean) / double(r.n - 1)))
                             : 0.0;
    }
    return rows;
}

void write_report_csv(const std::vector<ReportRow>& rows, const fs::path& file) {
    std::ofstream os(file);
    os << "task,method,mean_loss,std_loss,repeats\n";
    os.precision(17);
    for (const auto& r : rows)
        os << r.task << "," << r.method << "," << r.mean_loss << "," << r.std_loss << "," << r.n
           << "\n";
}

void write_epoch_losses_csv(const train::PhaseDiagnostics& d, const fs::path& file) {
    std::ofstream os(file);
    os << "epoch";
    if (!d.losses.empty())
        for (size_t c = 0; c < d.losses[0].chain_losses.size(); ++c) os << ",chain" << c;
    os << "\n";
    os.precision(17);
    for (const auto& row : d.losses) {
        os << row.epoch;
        for (double v : row.chain_losses) os << "," << v;
        os << "\n";
    }
}

void write_swaps_csv(const train::PhaseDiagnostics& d, const fs::path& file) {
    std::ofstream os(file);
    os << "iteration,pair,loss_low_temp,loss_high_temp,buffer,swapped\n";
    os.precision(17);
    for (const auto& e : d.swap_events)
        os << e.iteration << "," << e.pair << "," << e.loss_lo << "," << e.loss_hi << ","
           << e.buffer << "," << (e.swapped ? 1 : 0) << "\n";
}

namespace {

std::vector<int64_t> pick_cases(int64_t n, int cases, uint64_t seed) {
    std::vector<int64_t> all(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
    Rng rng(seed ^ 0xCA5E5ULL);
    rng.shuffle(all);
    all.resize(static_cast<size_t>(std::min<int64_t>(cases, n)));
    return all;
}

} // namespace

void emit_plotdata_intervals(const mf::FidelityDataset& ds, const Tensor& pred_mean,
                             const Tensor& band_lo, const Tensor& band_hi, int cases,
                             uint64_t seed, const fs::path& file) {
    const lno::GridSpec& g = ds.hf_grid;
    if (g.rank() != 1) throw Error("emit_plotdata_intervals: rank-1 tasks only");
    const int64_t m = g.axis_lengths[0];
    const int64_t n = ds.n_hf_test();
    std::ofstream os(file);
    os << "sample_id,t,ground_truth,lf_value,prediction,ci_lower,ci_upper\n";
    os.precision(17);
    // LF values on the HF grid come from the corruption of the HF truth, which
    // is exact on shared grid points
    systems::DatasetRecipe recipe = systems::DatasetRecipe::preset(systems::task_from(ds.task));
    for (int64_t sid : pick_cases(n, cases, seed)) {
        lno::FunctionSample u_h = lno::FunctionSample::zeros(g, 1);
        std::copy(ds.hf_test_out.data() + sid * m, ds.hf_test_out.data() + (sid + 1) * m,
                  u_h.values.data());
        lno::FunctionSample u_l = systems::lf_corrupt(u_h, recipe.corruption);
        for (int64_t k = 0; k < m; ++k) {
            os << sid << "," << g.coord(0, k) << "," << u_h.values.at(k) << ","
               << u_l.values.at(k) << "," << pred_mean.at(sid * m + k) << ","
               << band_lo.at(sid * m + k) << "," << band_hi.at(sid * m + k) << "\n";
        }
    }
}

void emit_plotdata_errors(const mf::FidelityDataset& ds, const Tensor& pred_mf,
                          const Tensor& pred_lf, const Tensor& pred_hf, int cases, uint64_t seed,
                          const fs::path& file) {
    const lno::GridSpec& g = ds.hf_grid;
    const int64_t pts = g.points();
    const int64_t n = ds.n_hf_test();
    std::ofstream os(file);
    os << "sample_id";
    for (int a = 0; a < g.rank(); ++a) os << ",coord" << a;
    os << ",truth,prediction,abs_error_mf,abs_error_lf,abs_error_hf\n";
    os.precision(17);
    for (int64_t sid : pick_cases(n, cases, seed)) {
        std::vector<int64_t> idx(static_cast<size_t>(g.rank()), 0);
        for (int64_t p = 0; p < pts; ++p) {
            os << sid;
            for (int a = 0; a < g.rank(); ++a) os << "," << g.coord(a, idx[static_cast<size_t>(a)]);
            const double truth = ds.hf_test_out.at(sid * pts + p);
            const double pm = pred_mf.at(sid * pts + p);
            os << "," << truth << "," << pm << "," << std::abs(pm - truth) << ","
               << std::abs(pred_lf.at(sid * pts + p) - truth) << ","
               << std::abs(pred_hf.at(sid * pts + p) - truth) << "\n";
            for (int a = g.rank() - 1; a >= 0; --a) {
                if (++idx[static_cast<size_t>(a)] < g.axis_lengths[static_cast<size_t>(a)]) break;
                idx[static_cast<size_t>(a)] = 0;
            }
        }
    }
}

namespace {

// ensemble predictive mean and band for one operator over HF test inputs
struct EnsembleEval {
    Tensor mean, lo, hi;
    std::vector<double> per_sample;
    double mean_loss = 0, final_loss = 0;
};

EnsembleEval evaluate_operator(const lno::LNOConfig& cfg, const lno::GridSpec& grid,
                               const lno::ParamStore& final_params,
                               const std::vector<lno::ParamStore>& ensemble,
                               const mf::FidelityDataset& ds, const Tensor& inputs_enc,
                               double p) {
    EnsembleEval ev;
    std::vector<Tensor> preds;
    auto decode = [&](Tensor t) {
        if (ds.norm_out) ds.norm_out->decode(t);
        return t;
    };
    for (const auto& ps : ensemble)
        preds.push_back(decode(train::predict_stacked(cfg, grid, ps, inputs_enc)));
    if (preds.empty()) preds.push_back(decode(train::predict_stacked(cfg, grid, final_params, inputs_enc)));
    auto band = resgld::predict_with_uncertainty(preds);
    ev.mean = band.mean;
    ev.lo = band.lower;
    ev.hi = band.upper;
    ev.per_sample = train::per_sample_losses(ev.mean, ds.hf_test_out, p);
    double acc = 0;
    for (double v : ev.per_sample) acc += v;
    ev.mean_loss = acc / double(ev.per_sample.size());
    Tensor fin = decode(train::predict_stacked(cfg, grid, final_params, inputs_enc));
    auto fl = train::per_sample_losses(fin, ds.hf_test_out, p);
    acc = 0;
    for (double v : fl) acc += v;
    ev.final_loss = acc / double(fl.size());
    return ev;
}

} // namespace

ExperimentOutput run_experiment(const ExperimentConfig& cfg, const mf::FidelityDataset& ds,
                                uint64_t run_seed, const fs::path& out_dir, bool with_hf_baseline,
                                bool with_mix_baseline) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentOutput out;
    out.record.task = ds.task;
    out.record.seed = run_seed;
    out.record.config_echo = cfg.to_json();
    out.record.config_echo["run_seed"] = run_seed;

    // prototype model
    mf::MFModel proto;
    proto.cfg_lf = cfg.g_lf;
    proto.cfg_lin = cfg.g_lin;
    proto.cfg_nl = cfg.g_nl;
    proto.lf_grid = ds.lf_grid;
    proto.hf_grid = ds.hf_grid;
    proto.p_lf = lno::init_params(cfg.g_lf, ds.lf_grid, run_seed);
    proto.p_lin = lno::init_params(cfg.g_lin, ds.lf_grid, run_seed ^ 0x11ULL, "gl.");
    proto.p_nl = lno::init_params(cfg.g_nl, ds.lf_grid, run_seed ^ 0x22ULL, "gnl.");
    proto.alpha_logit = 0.0; // alpha = 0.50

    train::MFTrainResult mf_res = train::train_two_phase(proto, ds, cfg.recipe, run_seed);
    out.model = mf_res.model;
    out.ensemble = mf_res.ensemble;

    // HF test inputs, encoded when the task is normalized
    Tensor hf_test_in = ds.hf_test_in;
    if (ds.norm_in) ds.norm_in->encode(hf_test_in);
    Tensor z_test = train::corrector_inputs(out.model.cfg_lf, ds.hf_grid, out.model.p_lf, hf_test_in);

    // MF ensemble evaluation
    {
        std::vector<Tensor> preds;
        for (const auto& snap : out.ensemble) {
            mf::MFModel m = out.model;
            m.p_lin = snap.p_lin;
            m.p_nl = snap.p_nl;
            m.alpha_logit = snap.alpha_logit;
            Tensor t = train::predict_stacked_mf(m, z_test);
            if (ds.norm_out) ds.norm_out->decode(t);
            preds.push_back(std::move(t));
        }
        if (preds.empty()) {
            Tensor t = train::predict_stacked_mf(out.model, z_test);
            if (ds.norm_out) ds.norm_out->decode(t);
            preds.push_back(std::move(t));
        }
        auto band = resgld::predict_with_uncertainty(preds);
        out.mf_pred_mean = band.mean;
        out.mf_band_lo = band.lower;
        out.mf_band_hi = band.upper;
        MethodResult mr;
        mr.method = "mf";
        mr.per_sample = train::per_sample_losses(band.mean, ds.hf_test_out, cfg.recipe.p);
        double acc = 0;
        for (double v : mr.per_sample) acc += v;
        mr.mean_loss = acc / double(mr.per_sample.size());
        Tensor fin = train::predict_stacked_mf(out.model, z_test);
        if (ds.norm_out) ds.norm_out->decode(fin);
        auto fl = train::per_sample_losses(fin, ds.hf_test_out, cfg.recipe.p);
        acc = 0;
        for (double v : fl) acc += v;
        mr.final_loss = acc / double(fl.size());
        out.record.methods.push_back(std::move(mr));

        // pointwise 95%-band coverage of the HF test truth
        int64_t inside = 0;
        const int64_t npts = ds.hf_test_out.numel();
        for (int64_t i = 0; i < npts; ++i) {
            const double tr = ds.hf_test_out.at(i);
            if (tr >= band.lower.at(i) && tr <= band.upper.at(i)) ++inside;
        }
        out.record.coverage95 = double(inside) / double(npts);
        out.record.alpha = out.model.alpha();
    }

    // LF baseline (identical to phase-1 G_L: same architecture, data, recipe, seed)
    {
        std::vector<lno::ParamStore> ens; // phase-1 keeps no dedicated ensemble by default
        EnsembleEval ev = evaluate_operator(out.model.cfg_lf, ds.hf_grid, out.model.p_lf, ens, ds,
                                            hf_test_in, cfg.recipe.p);
        out.record.methods.push_back({"lf", ev.mean_loss, ev.final_loss, ev.per_sample});
    }

    if (with_hf_baseline) {
        train::TrainedOperator hf =
            train::train_baseline(train::BaselineKind::HF, cfg.g_lf, ds, cfg.recipe, run_seed ^ 0x8fULL);
        EnsembleEval ev = evaluate_operator(hf.cfg, ds.hf_grid, hf.params, hf.ensemble, ds,
                                            hf_test_in, cfg.recipe.p);
        out.record.methods.push_back({"hf", ev.mean_loss, ev.final_loss, ev.per_sample});
        if (!out_dir.empty()) {
            write_epoch_losses_csv(hf.diag, out_dir / "hf_baseline_losses.csv");
        }
    }
    if (with_mix_baseline) {
        train::TrainedOperator mx =
            train::train_baseline(train::BaselineKind::Mix, cfg.g_lf, ds, cfg.recipe, run_seed ^ 0x3cULL);
        EnsembleEval ev = evaluate_operator(mx.cfg, ds.hf_grid, mx.params, mx.ensemble, ds,
                                            hf_test_in, cfg.recipe.p);
        out.record.methods.push_back({"mix", ev.mean_loss, ev.final_loss, ev.per_sample});
    }

    out.record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        {
            std::ofstream os(out_dir / "config.json");
            os << out.record.config_echo.dump(2) << "\n";
        }
        write_epoch_losses_csv(mf_res.phase1, out_dir / "phase1_losses.csv");
        write_epoch_losses_csv(mf_res.phase2, out_dir / "phase2_losses.csv");
        write_swaps_csv(mf_res.phase1, out_dir / "swaps_phase1.csv");
        write_swaps_csv(mf_res.phase2, out_dir / "swaps_phase2.csv");
        {
            std::ofstream os(out_dir / "runrecord.json");
            os << out.record.to_json().dump(2) << "\n";
        }
        save_checkpoint(checkpoint_from_mf(cfg, out.model, out.ensemble), out_dir / "checkpoint");
        if (ds.hf_grid.rank() == 1)
            emit_plotdata_intervals(ds, out.mf_pred_mean, out.mf_band_lo, out.mf_band_hi, 6,
                                    run_seed, out_dir / "intervals.csv");
    }
    return out;
}

Checkpoint checkpoint_from_mf(const ExperimentConfig& cfg, const mf::MFModel& model,
                              const std::vector<train::MFSnapshot>& ensemble) {
    Checkpoint c;
    c.kind = "mf";
    c.config_echo = cfg.to_json();
    c.phase = 2;
    c.epochs_done = cfg.recipe.phase2.epochs;
    c.lf_grid = model.lf_grid;
    c.hf_grid = model.hf_grid;
    for (auto& [n, t] : model.p_lf.items) c.params.add(n, t);
    for (auto& [n, t] : model.p_lin.items) c.params.add(n, t);
    for (auto& [n, t] : model.p_nl.items) c.params.add(n, t);
    c.params.add("alpha.logit", Tensor::from({1}, {model.alpha_logit}));
    for (const auto& s : ensemble) {
        std::vector<double> flat;
        auto app = [&](const lno::ParamStore& ps) {
            for (auto& [n, t] : ps.items) flat.insert(flat.end(), t.buf.begin(), t.buf.end());
        };
        app(s.p_lin);
        app(s.p_nl);
        flat.push_back(s.alpha_logit);
        c.ensemble.push_back(std::move(flat));
    }
    return c;
}

mf::MFModel mf_from_checkpoint(const Checkpoint& c, std::vector<train::MFSnapshot>* ensemble) {
    ExperimentConfig cfg = ExperimentConfig::from_json(c.config_echo.contains("run_seed")
                                                           ? c.config_echo
                                                           : c.config_echo);
    mf::MFModel m;
    m.cfg_lf = cfg.g_lf;
    m.cfg_lin = cfg.g_lin;
    m.cfg_nl = cfg.g_nl;
    m.lf_grid = c.lf_grid;
    m.hf_grid = c.hf_grid;
    for (auto& [name, t] : c.params.items) {
        if (name == "alpha.logit")
            m.alpha_logit = t.buf[0];
        else if (name.rfind("gl.", 0) == 0)
            m.p_lin.add(name, t);
        else if (name.rfind("gnl.", 0) == 0)
            m.p_nl.add(name, t);
        else
            m.p_lf.add(name, t);
    }
    if (ensemble) {
        for (const auto& flat : c.ensemble) {
            train::MFSnapshot s;
            s.p_lin = m.p_lin;
            s.p_nl = m.p_nl;
            size_t off = 0;
            auto fill = [&](lno::ParamStore& ps) {
                for (auto& [n, t] : ps.items) {
                    std::copy(flat.begin() + static_cast<long>(off),
                              flat.begin() + static_cast<long>(off + t.buf.size()), t.buf.begin());
                    off += t.buf.size();
                }
            };
            fill(s.p_lin);
            fill(s.p_nl);
            s.alpha_logit = flat[off];
            ensemble->push_back(std::move(s));
        }
    }
    return m;
}

} // namespace mflap::harness
