#include "mflap/lno.hpp"

#include <algorithm>
#include <cmath>

namespace mflap::lno {

const char* activation_name(Activation a) {
    switch (a) {
    case Activation::Sine: return "sine";
    case Activation::Relu: return "relu";
    case Activation::None: return "none";
    }
    return "?";
}

Activation activation_from(const std::string& s) {
    if (s == "sine") return Activation::Sine;
    if (s == "relu") return Activation::Relu;
    if (s == "none") return Activation::None;
    throw Error("unknown activation '" + s + "'");
}

void LNOConfig::validate() const {
    if (in_channels < 1 || out_channels < 1) throw Error("LNOConfig: bad channel counts");
    if (lift_layers < 1 || laplace_layers < 1 || projection_layers < 1)
        throw Error("LNOConfig: layer counts must be >= 1");
    if (lift_width != laplace_width)
        throw Error("LNOConfig: lift width must match laplace width");
    if (linear_path_width != laplace_width)
        throw Error("LNOConfig: linear path width must match laplace width");
    if (linear_path_layers % laplace_layers != 0)
        throw Error("LNOConfig: linear path layers must distribute over laplace layers");
    if (laplace_modes < 1) throw Error("LNOConfig: modes must be >= 1");
}

void ParamStore::add(std::string name, Tensor t) {
    if (find(name)) throw Error("ParamStore: duplicate '" + name + "'");
    items.emplace_back(std::move(name), std::move(t));
}

Tensor* ParamStore::find(const std::string& name) {
    for (auto& [n, t] : items)
        if (n == name) return &t;
    return nullptr;
}

const Tensor* ParamStore::find(const std::string& name) const {
    for (auto& [n, t] : items)
        if (n == name) return &t;
    return nullptr;
}

void ParamStore::merge(const ParamStore& other) {
    for (auto& [n, t] : other.items) add(n, t);
}

int64_t ParamStore::flat_size() const {
    int64_t n = 0;
    for (auto& [name, t] : items) n += static_cast<int64_t>(t.buf.size());
    return n;
}

std::vector<double> ParamStore::flatten() const {
    std::vector<double> out;
    out.reserve(static_cast<size_t>(flat_size()));
    for (auto& [name, t] : items) out.insert(out.end(), t.buf.begin(), t.buf.end());
    return out;
}

void ParamStore::unflatten(const std::vector<double>& flat) {
    size_t off = 0;
    for (auto& [name, t] : items) {
        if (off + t.buf.size() > flat.size()) throw Error("ParamStore: flat vector too short");
        std::copy(flat.begin() + static_cast<long>(off),
                  flat.begin() + static_cast<long>(off + t.buf.size()), t.buf.begin());
        off += t.buf.size();
    }
    if (off != flat.size()) throw Error("ParamStore: flat vector size mismatch");
}

ad::Graph::Bindings ParamStore::bindings() const {
    ad::Graph::Bindings b;
    for (auto& [n, t] : items) b[n] = &t;
    return b;
}

ad::PrConvSpec pr_spec_for(const LNOConfig& cfg, const GridSpec& grid, int c_in, int c_out) {
    ad::PrConvSpec sp;
    sp.grid = grid.axis_lengths;
    sp.extents = grid.axis_extents;
    sp.time_axis = grid.time_axis;
    sp.spatial_cut.assign(static_cast<size_t>(grid.rank()), cfg.laplace_modes);
    sp.c_in = c_in;
    sp.c_out = c_out;
    sp.n_modes = cfg.laplace_modes;
    return sp;
}

namespace {

struct LayerDims {
    std::vector<int64_t> lift;  // widths including input
    std::vector<int64_t> proj;  // widths including output
    int w_depth = 1;
};

LayerDims dims_of(const LNOConfig& cfg) {
    LayerDims d;
    d.lift.push_back(cfg.in_channels);
    for (int i = 0; i < cfg.lift_layers; ++i) d.lift.push_back(cfg.lift_width);
    d.proj.push_back(cfg.laplace_width);
    for (int i = 0; i < cfg.projection_layers - 1; ++i) d.proj.push_back(cfg.projection_width);
    d.proj.push_back(cfg.out_channels);
    d.w_depth = cfg.linear_path_layers / cfg.laplace_layers;
    return d;
}

} // namespace

int build_lno(ad::Graph& g, const LNOConfig& cfg, const GridSpec& grid, int x,
              const std::string& prefix, bool trainable, bool frozen) {
    cfg.validate();
    grid.validate();
    const bool bias = !cfg.linear();
    LayerDims d = dims_of(cfg);

    auto declare_chain = [&](const std::string& base, const std::vector<int64_t>& widths) {
        std::vector<std::pair<int, int>> layers;
        for (size_t i = 0; i + 1 < widths.size(); ++i) {
            int w = g.leaf(prefix + base + ".w" + std::to_string(i), {widths[i + 1], widths[i]},
                           DType::Real64, trainable, frozen);
            int b = -1;
            if (bias)
                b = g.leaf(prefix + base + ".b" + std::to_string(i), {widths[i + 1]},
                           DType::Real64, trainable, frozen);
            layers.emplace_back(w, b);
        }
        return layers;
    };

    int v = g.affine_chain(x, declare_chain("lift", d.lift), prefix + "lift");

    ad::PrConvSpec sp = pr_spec_for(cfg, grid, cfg.laplace_width, cfg.laplace_width);
    std::vector<int64_t> pshape = {cfg.laplace_width, cfg.laplace_width, sp.spatial_combos(),
                                   cfg.laplace_modes};
    for (int blk = 0; blk < cfg.laplace_layers; ++blk) {
        std::string base = prefix + "blk" + std::to_string(blk);
        int mu = g.leaf(base + ".mu", pshape, DType::Complex128, trainable, frozen);
        int be = g.leaf(base + ".beta", pshape, DType::Complex128, trainable, frozen);
        int conv = g.pr_conv(v, mu, be, sp, base + ".laplace");
        std::vector<int64_t> ww(static_cast<size_t>(d.w_depth) + 1, cfg.laplace_width);
        int wv = g.affine_chain(v, declare_chain("blk" + std::to_string(blk) + ".w", ww),
                                base + ".w");
        v = g.add(conv, wv);
        switch (cfg.activation) {
        case Activation::Sine: v = g.sine(v); break;
        case Activation::Relu: v = g.relu(v); break;
        case Activation::None: break;
        }
    }

    return g.affine_chain(v, declare_chain("proj", d.proj), prefix + "proj");
}

ParamStore init_params(const LNOConfig& cfg, const GridSpec& grid, uint64_t seed,
                       const std::string& prefix) {
    cfg.validate();
    grid.validate();
    Rng rng(seed);
    ParamStore ps;
    const bool bias = !cfg.linear();
    LayerDims d = dims_of(cfg);

    auto kaiming_chain = [&](const std::string& base, const std::vector<int64_t>& widths) {
        for (size_t i = 0; i + 1 < widths.size(); ++i) {
            Tensor w = Tensor::real({widths[i + 1], widths[i]});
            const double sd = std::sqrt(2.0 / double(widths[i]));
            for (auto& v : w.buf) v = sd * rng.normal();
            ps.add(prefix + base + ".w" + std::to_string(i), std::move(w));
            if (bias) ps.add(prefix + base + ".b" + std::to_string(i), Tensor::real({widths[i + 1]}));
        }
    };

    kaiming_chain("lift", d.lift);

    const double w1 = grid.fundamental_omega(grid.time_axis);
    ad::PrConvSpec sp = pr_spec_for(cfg, grid, cfg.laplace_width, cfg.laplace_width);
    std::vector<int64_t> pshape = {cfg.laplace_width, cfg.laplace_width, sp.spatial_combos(),
                                   cfg.laplace_modes};
    for (int blk = 0; blk < cfg.laplace_layers; ++blk) {
        Tensor mu = Tensor::complex(pshape);
        Tensor be = Tensor::complex(pshape);
        for (int64_t i = 0; i < mu.numel(); ++i) {
            // uniform [0,1] init; the real part is negated so every transient
            // e^{mu t} decays over the horizon
            double re = -rng.uniform();
            double im = rng.uniform() * w1 * double(cfg.laplace_modes);
            mu.cat(i) = cxd(re, im);
            be.cat(i) = cxd(rng.uniform(), rng.uniform());
        }
        ps.add(prefix + "blk" + std::to_string(blk) + ".mu", std::move(mu));
        ps.add(prefix + "blk" + std::to_string(blk) + ".beta", std::move(be));
        std::vector<int64_t> ww(static_cast<size_t>(d.w_depth) + 1, cfg.laplace_width);
        kaiming_chain("blk" + std::to_string(blk) + ".w", ww);
    }

    kaiming_chain("proj", d.proj);
    return ps;
}

namespace {

// shared gather of the time-axis spectrum at one retained spatial combo
void gather_time_spectrum(const SpectralRepresentation& spec, const PoleResidueKernel& k,
                          int combo, int channel, std::vector<cxd>& out) {
    const GridSpec& g = spec.grid;
    const int r = g.rank();
    const int64_t C = spec.channels;
    std::vector<int64_t> st(static_cast<size_t>(r + 1));
    int64_t acc = 1;
    st[static_cast<size_t>(r)] = 1;
    acc = C;
    for (int i = r - 1; i >= 0; --i) {
        st[static_cast<size_t>(i)] = acc;
        acc *= g.axis_lengths[static_cast<size_t>(i)];
    }
    // decode combo into spatial indices (last spatial axis fastest)
    int64_t off = channel;
    int rem = combo;
    for (int a = r - 1; a >= 0; --a) {
        if (a == g.time_axis) continue;
        int cut = k.spatial_cut[static_cast<size_t>(a)];
        int idx = rem % cut;
        rem /= cut;
        off += idx * st[static_cast<size_t>(a)];
    }
    const int64_t T = g.axis_lengths[static_cast<size_t>(g.time_axis)];
    const int64_t tst = st[static_cast<size_t>(g.time_axis)];
    out.resize(static_cast<size_t>(T));
    const cxd* c = spec.coefficients.cdata();
    for (int64_t t = 0; t < T; ++t) out[static_cast<size_t>(t)] = c[off + t * tst];
}

void check_kernel(const PoleResidueKernel& k, const SpectralRepresentation& spec) {
    const GridSpec& g = spec.grid;
    if (static_cast<int>(k.spatial_cut.size()) != g.rank() && g.rank() > 1)
        throw Error("kernel: spatial_cut must cover grid axes");
    if (k.n_modes < 1) throw Error("kernel: n_modes must be >= 1");
    std::vector<int64_t> pshape = {k.c_in, k.c_out, k.spatial_combos(g), k.n_modes};
    if (k.poles.shape != pshape || k.residues.shape != pshape)
        throw Error("kernel: poles/residues must have shape " + shape_str(pshape));
    if (spec.channels != k.c_in) throw Error("kernel: channel mismatch with spectrum");
}

} // namespace

Tensor kernel_transient_residues(const PoleResidueKernel& k, const SpectralRepresentation& spec) {
    check_kernel(k, spec);
    const GridSpec& g = spec.grid;
    const int S = k.spatial_combos(g);
    const auto& omega = spec.omega[static_cast<size_t>(g.time_axis)];
    Tensor gamma = Tensor::complex({k.c_in, k.c_out, S, k.n_modes});
    std::vector<cxd> alpha;
    for (int ci = 0; ci < k.c_in; ++ci)
        for (int co = 0; co < k.c_out; ++co)
            for (int s = 0; s < S; ++s) {
                gather_time_spectrum(spec, k, s, ci, alpha);
                for (int n = 0; n < k.n_modes; ++n) {
                    int64_t pi = ((int64_t(ci) * k.c_out + co) * S + s) * k.n_modes + n;
                    cxd mu = k.poles.cat(pi);
                    cxd acc(0, 0);
                    for (size_t l = 0; l < alpha.size(); ++l) {
                        cxd den = mu - cxd(0.0, omega[l]);
                        if (std::abs(den) < 1e-12)
                            throw Error("kernel_transient_residues: pole collides with grid frequency");
                        acc += alpha[l] / den;
                    }
                    gamma.cat(pi) = k.residues.cat(pi) * acc;
                }
            }
    return gamma;
}

Tensor kernel_steady_residues(const PoleResidueKernel& k, const SpectralRepresentation& spec) {
    check_kernel(k, spec);
    const GridSpec& g = spec.grid;
    const int S = k.spatial_combos(g);
    const auto& omega = spec.omega[static_cast<size_t>(g.time_axis)];
    const int64_t T = g.axis_lengths[static_cast<size_t>(g.time_axis)];
    Tensor lam = Tensor::complex({k.c_in, k.c_out, S, T});
    std::vector<cxd> alpha;
    for (int ci = 0; ci < k.c_in; ++ci)
        for (int co = 0; co < k.c_out; ++co)
            for (int s = 0; s < S; ++s) {
                gather_time_spectrum(spec, k, s, ci, alpha);
                for (int64_t l = 0; l < T; ++l) {
                    cxd acc(0, 0);
                    for (int n = 0; n < k.n_modes; ++n) {
                        int64_t pi = ((int64_t(ci) * k.c_out + co) * S + s) * k.n_modes + n;
                        cxd den = cxd(0.0, omega[static_cast<size_t>(l)]) - k.poles.cat(pi);
                        if (std::abs(den) < 1e-12)
                            throw Error("kernel_steady_residues: pole collides with grid frequency");
                        acc += k.residues.cat(pi) / den;
                    }
                    lam.cat(((int64_t(ci) * k.c_out + co) * S + s) * T + l) =
                        alpha[static_cast<size_t>(l)] * acc;
                }
            }
    return lam;
}

FunctionSample laplace_layer_forward(const FunctionSample& v, const PoleResidueKernel& k) {
    v.check();
    if (v.channels != k.c_in) throw Error("laplace_layer_forward: channel mismatch");
    ad::Graph g;
    ad::PrConvSpec sp;
    sp.grid = v.grid.axis_lengths;
    sp.extents = v.grid.axis_extents;
    sp.time_axis = v.grid.time_axis;
    sp.spatial_cut = k.spatial_cut.empty() ? std::vector<int>{1} : k.spatial_cut;
    sp.c_in = k.c_in;
    sp.c_out = k.c_out;
    sp.n_modes = k.n_modes;
    auto vshape = v.values.shape;
    vshape.insert(vshape.begin(), 1);
    int xv = g.leaf("v", vshape, DType::Real64, false);
    int mu = g.leaf("mu", k.poles.shape, DType::Complex128, false);
    int be = g.leaf("beta", k.residues.shape, DType::Complex128, false);
    g.set_output(g.pr_conv(xv, mu, be, sp, "laplace"));
    Tensor vin = v.values;
    vin.shape = vshape;
    ad::Graph::Bindings b{{"v", &vin}, {"mu", &k.poles}, {"beta", &k.residues}};
    Tensor out = g.forward(b);
    out.shape.erase(out.shape.begin());
    FunctionSample r;
    r.grid = v.grid;
    r.channels = k.c_out;
    r.values = std::move(out);
    return r;
}

FunctionSample lno_forward(const LNOConfig& cfg, const ParamStore& params,
                           const FunctionSample& f, const std::string& prefix) {
    f.check();
    if (f.channels != cfg.in_channels) throw Error("lno_forward: channel mismatch");
    ad::Graph g;
    auto xshape = f.values.shape;
    xshape.insert(xshape.begin(), 1);
    int x = g.leaf("__input", xshape, DType::Real64, false);
    g.set_output(build_lno(g, cfg, f.grid, x, prefix, false));
    Tensor xin = f.values;
    xin.shape = xshape;
    auto b = params.bindings();
    b["__input"] = &xin;
    Tensor out = g.forward(b);
    out.shape.erase(out.shape.begin());
    FunctionSample r;
    r.grid = f.grid;
    r.channels = cfg.out_channels;
    r.values = std::move(out);
    return r;
}

} // namespace mflap::lno
