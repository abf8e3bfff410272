#include "mflap/mf.hpp"

#include <cmath>
#include <cstdio>

namespace mflap::mf {

RangeMap RangeMap::fit(const Tensor& samples, int64_t channels) {
    if (samples.numel() == 0) throw Error("RangeMap: empty sample set");
    RangeMap m;
    m.lo.assign(static_cast<size_t>(channels), 1e300);
    m.hi.assign(static_cast<size_t>(channels), -1e300);
    const int64_t n = samples.numel();
    for (int64_t i = 0; i < n; ++i) {
        const int64_t c = i % channels;
        m.lo[static_cast<size_t>(c)] = std::min(m.lo[static_cast<size_t>(c)], samples.at(i));
        m.hi[static_cast<size_t>(c)] = std::max(m.hi[static_cast<size_t>(c)], samples.at(i));
    }
    for (int64_t c = 0; c < channels; ++c) {
        if (!(m.hi[static_cast<size_t>(c)] > m.lo[static_cast<size_t>(c)]))
            m.hi[static_cast<size_t>(c)] = m.lo[static_cast<size_t>(c)] + 1.0; // constant channel
    }
    return m;
}

void RangeMap::encode(Tensor& t) const {
    const int64_t channels = static_cast<int64_t>(lo.size());
    for (int64_t i = 0; i < t.numel(); ++i) {
        const size_t c = static_cast<size_t>(i % channels);
        t.at(i) = (t.at(i) - lo[c]) / (hi[c] - lo[c]);
    }
}

void RangeMap::decode(Tensor& t) const {
    const int64_t channels = static_cast<int64_t>(lo.size());
    for (int64_t i = 0; i < t.numel(); ++i) {
        const size_t c = static_cast<size_t>(i % channels);
        t.at(i) = t.at(i) * (hi[c] - lo[c]) + lo[c];
    }
}

void FidelityDataset::check() const {
    lf_grid.validate();
    hf_grid.validate();
    if (n_lf_train() < n_hf_train())
        std::fprintf(stderr, "warning: N_L (%lld) < N_H (%lld); the method expects abundant LF data\n",
                     static_cast<long long>(n_lf_train()), static_cast<long long>(n_hf_train()));
}

double relative_lp_loss(const Tensor& pred, const Tensor& target, double p) {
    if (!pred.same_shape(target)) throw Error("relative_lp_loss: shape mismatch");
    if (p < 1.0) throw Error("relative_lp_loss: p must be >= 1");
    double num = 0, den = 0;
    for (int64_t i = 0; i < pred.numel(); ++i) {
        num += std::pow(std::abs(pred.at(i) - target.at(i)), p);
        den += std::pow(std::abs(target.at(i)), p);
    }
    if (den == 0.0) throw Error("relative_lp_loss: zero-norm target");
    return std::pow(num, 1.0 / p) / std::pow(den, 1.0 / p);
}

lno::FunctionSample mf_corrector_input(const MFModel& model, const lno::FunctionSample& f) {
    lno::FunctionSample base = lno::lno_forward(model.cfg_lf, model.p_lf, f);
    lno::FunctionSample z;
    z.grid = f.grid;
    z.channels = f.channels + base.channels;
    auto shape = f.grid.axis_lengths;
    shape.push_back(z.channels);
    z.values = Tensor::real(shape);
    const int64_t pts = f.grid.points();
    for (int64_t p = 0; p < pts; ++p) {
        for (int64_t c = 0; c < f.channels; ++c)
            z.values.at(p * z.channels + c) = f.values.at(p * f.channels + c);
        for (int64_t c = 0; c < base.channels; ++c)
            z.values.at(p * z.channels + f.channels + c) = base.values.at(p * base.channels + c);
    }
    return z;
}

lno::FunctionSample mf_forward(const MFModel& model, const lno::FunctionSample& f) {
    lno::FunctionSample z = mf_corrector_input(model, f);
    lno::FunctionSample ul = lno::lno_forward(model.cfg_lin, model.p_lin, z, "gl.");
    lno::FunctionSample un = lno::lno_forward(model.cfg_nl, model.p_nl, z, "gnl.");
    const double a = model.alpha();
    lno::FunctionSample out = ul;
    for (size_t i = 0; i < out.values.buf.size(); ++i)
        out.values.buf[i] = a * ul.values.buf[i] + (1.0 - a) * un.values.buf[i];
    return out;
}

namespace {

// per-sample relative loss summed over the batch, appended to `g` after `pred`
int append_loss(ad::Graph& g, int pred, const std::vector<int64_t>& out_shape, double p) {
    const int rank = static_cast<int>(out_shape.size());
    int u = g.leaf("__u", out_shape, DType::Real64, false);
    int tn = g.leaf("__tn", {out_shape[0]}, DType::Real64, false);
    int diff = g.add(pred, u, 1.0, -1.0);
    int ap = g.abspow(diff, p);
    std::vector<int> axes;
    for (int i = 1; i < rank; ++i) axes.push_back(i);
    int ss = g.reduce_sum(ap, axes);
    int num = g.abspow(ss, 1.0 / p);
    int rel = g.div(num, tn);
    return g.reduce_sum(rel, {0});
}

} // namespace

LossGraph build_operator_loss_graph(const lno::LNOConfig& cfg, const lno::GridSpec& grid,
                                    int64_t micro_batch, double p) {
    LossGraph lg;
    lg.micro_batch = micro_batch;
    lg.in_shape = grid.axis_lengths;
    lg.in_shape.insert(lg.in_shape.begin(), micro_batch);
    lg.in_shape.push_back(cfg.in_channels);
    lg.out_shape = grid.axis_lengths;
    lg.out_shape.insert(lg.out_shape.begin(), micro_batch);
    lg.out_shape.push_back(cfg.out_channels);
    int x = lg.graph.leaf("__x", lg.in_shape, DType::Real64, false);
    int pred = lno::build_lno(lg.graph, cfg, grid, x, "", true);
    lg.graph.set_output(append_loss(lg.graph, pred, lg.out_shape, p));
    return lg;
}

LossGraph build_mf_loss_graph(const lno::LNOConfig& cfg_lin, const lno::LNOConfig& cfg_nl,
                              const lno::GridSpec& grid, int64_t micro_batch, double p) {
    if (cfg_lin.in_channels != cfg_nl.in_channels || cfg_lin.out_channels != cfg_nl.out_channels)
        throw Error("build_mf_loss_graph: corrector channel mismatch");
    LossGraph lg;
    lg.micro_batch = micro_batch;
    lg.in_shape = grid.axis_lengths;
    lg.in_shape.insert(lg.in_shape.begin(), micro_batch);
    lg.in_shape.push_back(cfg_lin.in_channels);
    lg.out_shape = grid.axis_lengths;
    lg.out_shape.insert(lg.out_shape.begin(), micro_batch);
    lg.out_shape.push_back(cfg_lin.out_channels);
    ad::Graph& g = lg.graph;
    int x = g.leaf("__x", lg.in_shape, DType::Real64, false);
    int pl = lno::build_lno(g, cfg_lin, grid, x, "gl.", true);
    int pn = lno::build_lno(g, cfg_nl, grid, x, "gnl.", true);
    int logit = g.leaf("alpha.logit", {1}, DType::Real64, true);
    // alpha = 1 / (1 + exp(-logit))
    int one = g.constant(Tensor::from({1}, {1.0}), "one");
    int neg = g.add(one, logit, 0.0, -1.0);
    int ex = g.exp_(neg);
    int denom = g.add(one, ex, 1.0, 1.0);
    int alpha = g.div(one, denom);
    int beta = g.add(one, alpha, 1.0, -1.0); // 1 - alpha
    int ab = g.broadcast(alpha, lg.out_shape);
    int bb = g.broadcast(beta, lg.out_shape);
    int blend = g.add(g.mul(ab, pl), g.mul(bb, pn));
    g.set_output(append_loss(g, blend, lg.out_shape, p));
    return lg;
}

EvalGraph build_operator_eval_graph(const lno::LNOConfig& cfg, const lno::GridSpec& grid,
                                    int64_t micro_batch) {
    EvalGraph eg;
    eg.micro_batch = micro_batch;
    auto in_shape = grid.axis_lengths;
    in_shape.insert(in_shape.begin(), micro_batch);
    in_shape.push_back(cfg.in_channels);
    int x = eg.graph.leaf("__x", in_shape, DType::Real64, false);
    eg.graph.set_output(lno::build_lno(eg.graph, cfg, grid, x, "", true));
    return eg;
}

EvalGraph build_mf_eval_graph(const lno::LNOConfig& cfg_lin, const lno::LNOConfig& cfg_nl,
                              const lno::GridSpec& grid, int64_t micro_batch) {
    EvalGraph eg;
    eg.micro_batch = micro_batch;
    auto in_shape = grid.axis_lengths;
    in_shape.insert(in_shape.begin(), micro_batch);
    in_shape.push_back(cfg_lin.in_channels);
    auto out_shape = grid.axis_lengths;
    out_shape.insert(out_shape.begin(), micro_batch);
    out_shape.push_back(cfg_lin.out_channels);
    ad::Graph& g = eg.graph;
    int x = g.leaf("__x", in_shape, DType::Real64, false);
    int pl = lno::build_lno(g, cfg_lin, grid, x, "gl.", true);
    int pn = lno::build_lno(g, cfg_nl, grid, x, "gnl.", true);
    int logit = g.leaf("alpha.logit", {1}, DType::Real64, true);
    int one = g.constant(Tensor::from({1}, {1.0}), "one");
    int neg = g.add(one, logit, 0.0, -1.0);
    int ex = g.exp_(neg);
    int denom = g.add(one, ex, 1.0, 1.0);
    int alpha = g.div(one, denom);
    int beta = g.add(one, alpha, 1.0, -1.0);
    int ab = g.broadcast(alpha, out_shape);
    int bb = g.broadcast(beta, out_shape);
    g.set_output(g.add(g.mul(ab, pl), g.mul(bb, pn)));
    return eg;
}

Tensor target_norms(const Tensor& stacked, double p) {
    const int64_t n = stacked.shape[0];
    const int64_t per = stacked.numel() / std::max<int64_t>(n, 1);
    Tensor out = Tensor::real({n});
    for (int64_t j = 0; j < n; ++j) {
        double acc = 0;
        const double* base = stacked.data() + j * per;
        for (int64_t i = 0; i < per; ++i) acc += std::pow(std::abs(base[i]), p);
        if (acc == 0.0)
            throw Error("target_norms: zero-norm target at sample " + std::to_string(j));
        out.at(j) = std::pow(acc, 1.0 / p);
    }
    return out;
}

void gather_samples(const Tensor& stacked, const std::vector<int64_t>& idx, Tensor& out) {
    const int64_t n = stacked.shape[0];
    const int64_t per = stacked.numel() / std::max<int64_t>(n, 1);
    if (out.shape.empty() || out.shape[0] != static_cast<int64_t>(idx.size())) {
        auto shape = stacked.shape;
        shape[0] = static_cast<int64_t>(idx.size());
        out = Tensor::real(shape);
    }
    for (size_t j = 0; j < idx.size(); ++j) {
        if (idx[j] < 0 || idx[j] >= n) throw Error("gather_samples: index out of range");
        std::copy(stacked.data() + idx[j] * per, stacked.data() + (idx[j] + 1) * per,
                  out.data() + static_cast<int64_t>(j) * per);
    }
}

} // namespace mflap::mf
