#include "mflap/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace mflap::train {

namespace {

int64_t eval_micro(int64_t n) {
    // largest divisor of n not exceeding 32
    for (int64_t m = std::min<int64_t>(32, n); m >= 1; --m)
        if (n % m == 0) return m;
    return 1;
}

void flatten_grads(const lno::ParamStore& layout, const std::map<std::string, Tensor>& grads,
                   std::vector<double>& out) {
    size_t off = 0;
    for (auto& [name, t] : layout.items) {
        auto it = grads.find(name);
        if (it == grads.end()) throw Error("flatten_grads: missing gradient for '" + name + "'");
        const auto& buf = it->second.buf;
        std::copy(buf.begin(), buf.end(), out.begin() + static_cast<long>(off));
        off += buf.size();
    }
    if (off != out.size()) throw Error("flatten_grads: layout size mismatch");
}

} // namespace

OperatorTrainer::OperatorTrainer(mf::LossGraph graph, lno::ParamStore layout, const Tensor& inputs,
                                 const Tensor& targets, PhaseRecipe recipe, double p, uint64_t seed)
    : graph_(std::move(graph)), params_(std::move(layout)), inputs_(&inputs), targets_(&targets),
      recipe_(std::move(recipe)), p_(p) {
    recipe_.sampler.validate();
    const int64_t n = inputs.shape[0];
    if (targets.shape[0] != n) throw Error("OperatorTrainer: input/target count mismatch");
    if (n % recipe_.batch != 0)
        throw Error("OperatorTrainer: batch " + std::to_string(recipe_.batch) +
                    " must divide the training set size " + std::to_string(n));
    if (recipe_.batch % graph_.micro_batch != 0)
        throw Error("OperatorTrainer: micro batch must divide the batch");
    norms_ = mf::target_norms(targets, p_);
    loader_.seed(seed ^ 0x10adULL);

    auto temps = resgld::geometric_ladder(recipe_.sampler.temp_lo, recipe_.sampler.temp_hi,
                                          recipe_.sampler.n_chains);
    auto lrs = resgld::geometric_ladder(recipe_.sampler.eta_lo, recipe_.sampler.eta_hi,
                                        recipe_.sampler.n_chains);
    std::vector<double> theta0 = params_.flatten();
    for (int c = 0; c < recipe_.sampler.n_chains; ++c)
        chains_.push_back(resgld::ChainState::make(
            theta0, recipe_.sampler.zero_temperature ? 0.0 : temps[static_cast<size_t>(c)],
            lrs[static_cast<size_t>(c)], seed + 7919ULL * static_cast<uint64_t>(c + 1)));
    ctl_ = resgld::SwapController::make(recipe_.sampler);

    auto in_shape = graph_.in_shape;
    auto out_shape = graph_.out_shape;
    staged_in_ = Tensor::real(in_shape);
    staged_out_ = Tensor::real(out_shape);
    staged_norms_ = Tensor::real({graph_.micro_batch});
    cot_ = Tensor::scalar(1.0);
}

double OperatorTrainer::loss_and_grad(int /*chain*/, const std::vector<double>& theta,
                                      std::vector<double>& grad) {
    params_.unflatten(theta);
    auto bind = params_.bindings();
    bind["__x"] = &staged_in_;
    bind["__u"] = &staged_out_;
    bind["__tn"] = &staged_norms_;
    const Tensor& out = graph_.graph.forward(bind);
    auto grads = graph_.graph.backward(cot_);
    flatten_grads(params_, grads, grad);
    return out.buf[0];
}

void OperatorTrainer::run_epochs(int64_t upto) {
    const int64_t n = inputs_->shape[0];
    std::vector<int64_t> order(static_cast<size_t>(n));
    auto lrs_now = std::vector<double>(chains_.size(), 0.0);
    const double inv_batch = 1.0 / double(recipe_.batch);
    cot_.buf[0] = inv_batch;

    for (; epoch_ < upto; ++epoch_) {
        std::iota(order.begin(), order.end(), 0);
        loader_.shuffle(order);
        for (size_t c = 0; c < chains_.size(); ++c)
            lrs_now[c] = resgld::cosine_lr(chains_[c].base_lr, epoch_, recipe_.epochs);

        std::vector<double> epoch_loss(chains_.size(), 0.0);
        const int64_t steps = n / recipe_.batch;
        for (int64_t s = 0; s < steps; ++s) {
            // shared minibatch across chains
            std::vector<int64_t> idx(order.begin() + s * recipe_.batch,
                                     order.begin() + (s + 1) * recipe_.batch);
            // single micro-batch per step (batch == micro_batch is enforced upstream
            // for the preset recipes; otherwise accumulate)
            if (recipe_.batch == graph_.micro_batch) {
                mf::gather_samples(*inputs_, idx, staged_in_);
                mf::gather_samples(*targets_, idx, staged_out_);
                for (size_t j = 0; j < idx.size(); ++j)
                    staged_norms_.at(static_cast<int64_t>(j)) = norms_.at(idx[j]);
                auto fn = [this](int c, const std::vector<double>& th, std::vector<double>& g) {
                    return this->loss_and_grad(c, th, g) / double(recipe_.batch);
                };
                std::vector<double> losses;
                try {
                    losses = resgld::resgld_step(chains_, ctl_, fn, recipe_.sampler, lrs_now);
                } catch (const Error& e) {
                    throw Error(std::string(e.what()) + " (epoch " + std::to_string(epoch_) + ")");
                }
                for (size_t c = 0; c < losses.size(); ++c) epoch_loss[c] += losses[c];
            } else {
                throw Error("OperatorTrainer: micro-batch accumulation not enabled for this recipe");
            }
        }
        for (auto& v : epoch_loss) v /= double(steps);
        diag_.losses.push_back({epoch_, epoch_loss});
        diag_.final_chain_losses = epoch_loss;

        const int64_t done = epoch_ + 1;
        const int64_t tail_start = recipe_.epochs - int64_t(recipe_.ensemble_size) * recipe_.ensemble_interval;
        if (recipe_.ensemble_size > 0 && done > tail_start && done % recipe_.ensemble_interval == 0)
            ensemble_.push_back(chains_[0].theta);
    }
    // drain swap events
    diag_.swap_events.insert(diag_.swap_events.end(), ctl_.events.begin(), ctl_.events.end());
    ctl_.events.clear();
}

Tensor predict_stacked(const lno::LNOConfig& cfg, const lno::GridSpec& grid,
                       const lno::ParamStore& params, const Tensor& inputs) {
    const int64_t n = inputs.shape[0];
    const int64_t micro = eval_micro(n);
    mf::EvalGraph eg = mf::build_operator_eval_graph(cfg, grid, micro);
    auto out_shape = inputs.shape;
    out_shape.back() = cfg.out_channels;
    Tensor preds = Tensor::real(out_shape);
    Tensor staged;
    const int64_t per_in = inputs.numel() / n;
    const int64_t per_out = preds.numel() / n;
    for (int64_t base = 0; base < n; base += micro) {
        std::vector<int64_t> idx(static_cast<size_t>(micro));
        std::iota(idx.begin(), idx.end(), base);
        mf::gather_samples(inputs, idx, staged);
        auto bind = params.bindings();
        bind["__x"] = &staged;
        const Tensor& out = eg.graph.forward(bind);
        std::copy(out.buf.begin(), out.buf.end(), preds.data() + base * per_out);
        (void)per_in;
    }
    return preds;
}

Tensor corrector_inputs(const lno::LNOConfig& cfg_lf, const lno::GridSpec& grid,
                        const lno::ParamStore& p_lf, const Tensor& hf_inputs) {
    Tensor base = predict_stacked(cfg_lf, grid, p_lf, hf_inputs);
    const int64_t n = hf_inputs.shape[0];
    const int64_t cin = hf_inputs.shape.back();
    const int64_t cout = base.shape.back();
    auto shape = hf_inputs.shape;
    shape.back() = cin + cout;
    Tensor z = Tensor::real(shape);
    const int64_t pts = hf_inputs.numel() / (n * cin);
    for (int64_t j = 0; j < n; ++j)
        for (int64_t p = 0; p < pts; ++p) {
            for (int64_t c = 0; c < cin; ++c)
                z.at((j * pts + p) * (cin + cout) + c) = hf_inputs.at((j * pts + p) * cin + c);
            for (int64_t c = 0; c < cout; ++c)
                z.at((j * pts + p) * (cin + cout) + cin + c) = base.at((j * pts + p) * cout + c);
        }
    return z;
}

Tensor predict_stacked_mf(const mf::MFModel& model, const Tensor& zin) {
    const int64_t n = zin.shape[0];
    const int64_t micro = eval_micro(n);
    mf::EvalGraph eg = mf::build_mf_eval_graph(model.cfg_lin, model.cfg_nl, model.hf_grid, micro);
    auto out_shape = zin.shape;
    out_shape.back() = model.cfg_lin.out_channels;
    Tensor preds = Tensor::real(out_shape);
    Tensor staged;
    Tensor logit = Tensor::from({1}, {model.alpha_logit});
    const int64_t per_out = preds.numel() / n;
    for (int64_t base = 0; base < n; base += micro) {
        std::vector<int64_t> idx(static_cast<size_t>(micro));
        std::iota(idx.begin(), idx.end(), base);
        mf::gather_samples(zin, idx, staged);
        auto bind = model.p_lin.bindings();
        for (auto& [k, v] : model.p_nl.bindings()) bind[k] = v;
        bind["alpha.logit"] = &logit;
        bind["__x"] = &staged;
        const Tensor& out = eg.graph.forward(bind);
        std::copy(out.buf.begin(), out.buf.end(), preds.data() + base * per_out);
    }
    return preds;
}

std::vector<double> per_sample_losses(const Tensor& preds, const Tensor& targets, double p) {
    if (!preds.same_shape(targets)) throw Error("per_sample_losses: shape mismatch");
    const int64_t n = preds.shape[0];
    const int64_t per = preds.numel() / n;
    std::vector<double> out(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j) {
        double num = 0, den = 0;
        for (int64_t i = 0; i < per; ++i) {
            num += std::pow(std::abs(preds.at(j * per + i) - targets.at(j * per + i)), p);
            den += std::pow(std::abs(targets.at(j * per + i)), p);
        }
        if (den == 0.0) throw Error("per_sample_losses: zero-norm target");
        out[static_cast<size_t>(j)] = std::pow(num / den, 1.0 / p);
    }
    return out;
}

namespace {

// split a merged two-operator parameter vector back into stores
void unflatten_mf(const std::vector<double>& theta, lno::ParamStore& merged,
                  lno::ParamStore& p_lin, lno::ParamStore& p_nl, double& alpha_logit) {
    merged.unflatten(theta);
    for (auto& [name, t] : merged.items) {
        if (name == "alpha.logit") {
            alpha_logit = t.buf[0];
        } else if (name.rfind("gl.", 0) == 0) {
            *p_lin.find(name) = t;
        } else if (name.rfind("gnl.", 0) == 0) {
            *p_nl.find(name) = t;
        }
    }
}

} // namespace

MFTrainResult train_two_phase(const mf::MFModel& proto, const mf::FidelityDataset& ds,
                              const TwoPhaseRecipe& recipe, uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    MFTrainResult res;
    res.model = proto;

    // normalization: encode working copies when the dataset carries a range map
    Tensor lf_in = ds.lf_train_in, lf_out = ds.lf_train_out;
    Tensor hf_in = ds.hf_train_in, hf_out = ds.hf_train_out;
    if (ds.norm_in) {
        ds.norm_in->encode(lf_in);
        ds.norm_in->encode(hf_in);
    }
    if (ds.norm_out) {
        ds.norm_out->encode(lf_out);
        ds.norm_out->encode(hf_out);
    }

    // Phase 1: fit G_L on LF pairs (lambda = 1)
    {
        mf::LossGraph lg = mf::build_operator_loss_graph(res.model.cfg_lf, ds.lf_grid,
                                                         recipe.phase1.batch, recipe.p);
        OperatorTrainer tr(std::move(lg), res.model.p_lf, lf_in, lf_out, recipe.phase1, recipe.p,
                           seed);
        tr.run_all();
        res.model.p_lf.unflatten(tr.cold_theta());
        res.phase1 = tr.diagnostics();
    }

    // Phase 2: freeze theta_(1); correctors see [f_H, G_L(f_H)] (lambda = 0)
    Tensor z = corrector_inputs(res.model.cfg_lf, ds.hf_grid, res.model.p_lf, hf_in);
    {
        mf::LossGraph lg = mf::build_mf_loss_graph(res.model.cfg_lin, res.model.cfg_nl, ds.hf_grid,
                                                   recipe.phase2.batch, recipe.p);
        lno::ParamStore merged;
        for (auto& [n2, t] : res.model.p_lin.items) merged.add(n2, t);
        for (auto& [n2, t] : res.model.p_nl.items) merged.add(n2, t);
        merged.add("alpha.logit", Tensor::from({1}, {res.model.alpha_logit}));
        OperatorTrainer tr(std::move(lg), std::move(merged), z, hf_out, recipe.phase2, recipe.p,
                           seed ^ 0xF00DULL);
        tr.run_all();
        unflatten_mf(tr.cold_theta(), tr.layout(), res.model.p_lin, res.model.p_nl,
                     res.model.alpha_logit);
        for (const auto& snap : tr.ensemble()) {
            MFSnapshot ms;
            ms.p_lin = res.model.p_lin;
            ms.p_nl = res.model.p_nl;
            unflatten_mf(snap, tr.layout(), ms.p_lin, ms.p_nl, ms.alpha_logit);
            res.ensemble.push_back(std::move(ms));
        }
        res.phase2 = tr.diagnostics();
    }
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

const char* baseline_name(BaselineKind k) {
    switch (k) {
    case BaselineKind::LF: return "lf";
    case BaselineKind::HF: return "hf";
    case BaselineKind::Mix: return "mix";
    }
    return "?";
}

TrainedOperator train_baseline(BaselineKind kind, const lno::LNOConfig& cfg,
                               const mf::FidelityDataset& ds, const TwoPhaseRecipe& recipe,
                               uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainedOperator out;
    out.cfg = cfg;

    Tensor lf_in = ds.lf_train_in, lf_out = ds.lf_train_out;
    Tensor hf_in = ds.hf_train_in, hf_out = ds.hf_train_out;
    if (ds.norm_in) {
        ds.norm_in->encode(lf_in);
        ds.norm_in->encode(hf_in);
    }
    if (ds.norm_out) {
        ds.norm_out->encode(lf_out);
        ds.norm_out->encode(hf_out);
    }

    if (kind == BaselineKind::LF) {
        out.grid = ds.lf_grid;
        lno::ParamStore init = lno::init_params(cfg, ds.lf_grid, seed);
        mf::LossGraph lg = mf::build_operator_loss_graph(cfg, ds.lf_grid, recipe.phase1.batch, recipe.p);
        OperatorTrainer tr(std::move(lg), std::move(init), lf_in, lf_out, recipe.phase1, recipe.p, seed);
        tr.run_all();
        out.params = tr.layout();
        out.params.unflatten(tr.cold_theta());
        for (const auto& s : tr.ensemble()) {
            lno::ParamStore ps = out.params;
            ps.unflatten(s);
            out.ensemble.push_back(std::move(ps));
        }
        out.diag = tr.diagnostics();
    } else if (kind == BaselineKind::HF) {
        if (ds.n_hf_train() == 0) throw Error("train_baseline: no HF training pairs");
        out.grid = ds.hf_grid;
        lno::ParamStore init = lno::init_params(cfg, ds.hf_grid, seed);
        PhaseRecipe r = recipe.phase2;
        r.batch = std::min<int64_t>(r.batch, ds.n_hf_train());
        mf::LossGraph lg = mf::build_operator_loss_graph(cfg, ds.hf_grid, r.batch, recipe.p);
        OperatorTrainer tr(std::move(lg), std::move(init), hf_in, hf_out, r, recipe.p, seed);
        tr.run_all();
        out.params = tr.layout();
        out.params.unflatten(tr.cold_theta());
        for (const auto& s : tr.ensemble()) {
            lno::ParamStore ps = out.params;
            ps.unflatten(s);
            out.ensemble.push_back(std::move(ps));
        }
        out.diag = tr.diagnostics();
    } else {
        // Mix: one operator trained on both fidelities, batches grouped by
        // resolution; every epoch touches N_L + N_H samples.
        out.grid = ds.lf_grid;
        lno::ParamStore layout = lno::init_params(cfg, ds.lf_grid, seed);
        PhaseRecipe rec = recipe.phase1;
        rec.sampler.validate();
        mf::LossGraph lg_lf = mf::build_operator_loss_graph(cfg, ds.lf_grid, rec.batch, recipe.p);
        const int64_t hf_batch = std::min<int64_t>(recipe.phase2.batch, ds.n_hf_train());
        mf::LossGraph lg_hf = mf::build_operator_loss_graph(cfg, ds.hf_grid, hf_batch, recipe.p);

        Tensor norms_lf = mf::target_norms(lf_out, recipe.p);
        Tensor norms_hf = mf::target_norms(hf_out, recipe.p);
        auto temps = resgld::geometric_ladder(rec.sampler.temp_lo, rec.sampler.temp_hi,
                                              rec.sampler.n_chains);
        auto lrs = resgld::geometric_ladder(rec.sampler.eta_lo, rec.sampler.eta_hi,
                                            rec.sampler.n_chains);
        std::vector<double> theta0 = layout.flatten();
        std::vector<resgld::ChainState> chains;
        for (int c = 0; c < rec.sampler.n_chains; ++c)
            chains.push_back(resgld::ChainState::make(
                theta0, rec.sampler.zero_temperature ? 0.0 : temps[static_cast<size_t>(c)],
                lrs[static_cast<size_t>(c)], seed + 7919ULL * static_cast<uint64_t>(c + 1)));
        auto ctl = resgld::SwapController::make(rec.sampler);
        Rng loader(seed ^ 0x10adULL);

        Tensor staged_in, staged_out, staged_norms;
        Tensor cot = Tensor::scalar(1.0);
        auto step_on = [&](mf::LossGraph& lg, const Tensor& in, const Tensor& tgt,
                           const Tensor& norms, const std::vector<int64_t>& idx,
                           const std::vector<double>& lrs_now) {
            mf::gather_samples(in, idx, staged_in);
            mf::gather_samples(tgt, idx, staged_out);
            staged_norms = Tensor::real({static_cast<int64_t>(idx.size())});
            for (size_t j = 0; j < idx.size(); ++j) staged_norms.at(static_cast<int64_t>(j)) = norms.at(idx[j]);
            cot.buf[0] = 1.0 / double(idx.size());
            auto fn = [&](int, const std::vector<double>& th, std::vector<double>& g) {
                layout.unflatten(th);
                auto bind = layout.bindings();
                bind["__x"] = &staged_in;
                bind["__u"] = &staged_out;
                bind["__tn"] = &staged_norms;
                const Tensor& o = lg.graph.forward(bind);
                auto grads = lg.graph.backward(cot);
                flatten_grads(layout, grads, g);
                return o.buf[0] / double(idx.size());
            };
            return resgld::resgld_step(chains, ctl, fn, rec.sampler, lrs_now);
        };

        std::vector<int64_t> order_lf(static_cast<size_t>(ds.n_lf_train()));
        std::vector<int64_t> order_hf(static_cast<size_t>(ds.n_hf_train()));
        std::vector<double> lrs_now(chains.size());
        for (int64_t e = 0; e < rec.epochs; ++e) {
            for (size_t c = 0; c < chains.size(); ++c)
                lrs_now[c] = resgld::cosine_lr(chains[c].base_lr, e, rec.epochs);
            std::iota(order_lf.begin(), order_lf.end(), 0);
            std::iota(order_hf.begin(), order_hf.end(), 0);
            loader.shuffle(order_lf);
            loader.shuffle(order_hf);
            std::vector<double> acc(chains.size(), 0.0);
            int64_t nsteps = 0;
            for (int64_t s = 0; s + rec.batch <= ds.n_lf_train(); s += rec.batch) {
                std::vector<int64_t> idx(order_lf.begin() + s, order_lf.begin() + s + rec.batch);
                auto l = step_on(lg_lf, lf_in, lf_out, norms_lf, idx, lrs_now);
                for (size_t c = 0; c < l.size(); ++c) acc[c] += l[c];
                ++nsteps;
            }
            for (int64_t s = 0; s + hf_batch <= ds.n_hf_train(); s += hf_batch) {
                std::vector<int64_t> idx(order_hf.begin() + s, order_hf.begin() + s + hf_batch);
                auto l = step_on(lg_hf, hf_in, hf_out, norms_hf, idx, lrs_now);
                for (size_t c = 0; c < l.size(); ++c) acc[c] += l[c];
                ++nsteps;
            }
            for (auto& v : acc) v /= double(std::max<int64_t>(nsteps, 1));
            out.diag.losses.push_back({e, acc});
            out.diag.final_chain_losses = acc;
            const int64_t done = e + 1;
            const int64_t tail = rec.epochs - int64_t(rec.ensemble_size) * rec.ensemble_interval;
            if (rec.ensemble_size > 0 && done > tail && done % rec.ensemble_interval == 0) {
                lno::ParamStore ps = layout;
                ps.unflatten(chains[0].theta);
                out.ensemble.push_back(std::move(ps));
            }
        }
        out.diag.swap_events = ctl.events;
        out.params = layout;
        out.params.unflatten(chains[0].theta);
    }
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

} // namespace mflap::train
