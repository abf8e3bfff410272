#include "mflap/graph.hpp"

#include "mflap/fastmath.hpp"
#include "mflap/fft.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace mflap::ad {

namespace {

std::vector<int64_t> strides_of(const std::vector<int64_t>& shape) {
    std::vector<int64_t> st(shape.size());
    int64_t acc = 1;
    for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
        st[static_cast<size_t>(i)] = acc;
        acc *= shape[static_cast<size_t>(i)];
    }
    return st;
}

// Right-aligned source strides for broadcasting src into dst; stretched or
// missing axes get stride 0.
std::vector<int64_t> bcast_strides(const std::vector<int64_t>& src,
                                   const std::vector<int64_t>& dst,
                                   const std::string& who) {
    if (src.size() > dst.size())
        throw Error(who + ": source rank exceeds target rank");
    auto sst = strides_of(src);
    std::vector<int64_t> out(dst.size(), 0);
    size_t off = dst.size() - src.size();
    for (size_t i = 0; i < src.size(); ++i) {
        int64_t sdim = src[i], ddim = dst[off + i];
        if (sdim == ddim)
            out[off + i] = sst[i];
        else if (sdim == 1)
            out[off + i] = 0;
        else
            throw Error(who + ": cannot broadcast " + shape_str(src) + " to " + shape_str(dst));
    }
    return out;
}

bool is_trailing(const std::vector<int>& axes, int rank) {
    if (axes.empty()) return false;
    const int k = rank - static_cast<int>(axes.size());
    for (size_t i = 0; i < axes.size(); ++i)
        if (axes[i] != k + static_cast<int>(i)) return false;
    return true;
}

struct Odometer {
    explicit Odometer(const std::vector<int64_t>& shape) : shape_(shape), idx_(shape.size(), 0) {}
    bool next() {
        for (int i = static_cast<int>(shape_.size()) - 1; i >= 0; --i) {
            if (++idx_[static_cast<size_t>(i)] < shape_[static_cast<size_t>(i)]) return true;
            idx_[static_cast<size_t>(i)] = 0;
        }
        return false;
    }
    int64_t offset(const std::vector<int64_t>& strides) const {
        int64_t o = 0;
        for (size_t i = 0; i < idx_.size(); ++i) o += idx_[i] * strides[i];
        return o;
    }
    const std::vector<int64_t> shape_;
    std::vector<int64_t> idx_;
};

} // namespace

int PrConvSpec::spatial_combos() const {
    int s = 1;
    for (size_t a = 0; a < grid.size(); ++a)
        if (static_cast<int>(a) != time_axis) s *= spatial_cut[a];
    return s;
}

int Graph::push(Node n) {
    for (int a : n.args)
        if (a >= 0) n.needs_grad = n.needs_grad || nodes_[static_cast<size_t>(a)].needs_grad;
    nodes_.push_back(std::move(n));
    forward_done_ = false;
    return static_cast<int>(nodes_.size()) - 1;
}

int Graph::leaf(const std::string& id, std::vector<int64_t> shape, DType dt,
                bool requires_grad, bool frozen) {
    if (leaf_lookup_.count(id)) throw Error("Graph::leaf: duplicate leaf id '" + id + "'");
    Node n;
    n.kind = OpKind::Leaf;
    n.name = id;
    n.leaf_id = id;
    n.requires_grad = requires_grad;
    n.frozen = frozen;
    n.needs_grad = requires_grad && !frozen;
    n.value = dt == DType::Real64 ? Tensor::real(shape) : Tensor::complex(shape);
    int idx = push(std::move(n));
    leaf_lookup_[id] = idx;
    leaf_order_.push_back(id);
    return idx;
}

int Graph::constant(Tensor t, const std::string& name) {
    Node n;
    n.kind = OpKind::Constant;
    n.name = name;
    n.value = std::move(t);
    return push(std::move(n));
}

int Graph::affine(int x, int w, int b, const std::string& name) {
    const Node& xn = nodes_[static_cast<size_t>(x)];
    const Node& wn = nodes_[static_cast<size_t>(w)];
    if (xn.value.is_complex() || wn.value.is_complex())
        throw Error(name + ": affine expects real operands");
    if (wn.value.rank() != 2) throw Error(name + ": weight must be rank 2");
    if (xn.value.rank() < 1 || xn.value.shape.back() != wn.value.shape[1])
        throw Error(name + ": input channels " + shape_str(xn.value.shape) +
                    " do not match weight " + shape_str(wn.value.shape));
    if (b >= 0) {
        const Node& bn = nodes_[static_cast<size_t>(b)];
        if (bn.value.rank() != 1 || bn.value.shape[0] != wn.value.shape[0])
            throw Error(name + ": bias shape mismatch");
    }
    Node n;
    n.kind = OpKind::Affine;
    n.name = name;
    n.args = {x, w, b};
    auto shape = xn.value.shape;
    shape.back() = wn.value.shape[0];
    n.value = Tensor::real(shape);
    return push(std::move(n));
}

int Graph::affine_chain(int x, std::vector<std::pair<int, int>> layers, const std::string& name) {
    if (layers.empty()) throw Error(name + ": empty chain");
    const Node& xn = nodes_[static_cast<size_t>(x)];
    if (xn.value.is_complex()) throw Error(name + ": chain expects real input");
    int64_t c = xn.value.shape.back();
    Node n;
    n.kind = OpKind::AffineChain;
    n.name = name;
    n.args.push_back(x);
    for (auto [w, b] : layers) {
        const Node& wn = nodes_[static_cast<size_t>(w)];
        if (wn.value.rank() != 2 || wn.value.shape[1] != c)
            throw Error(name + ": layer weight " + shape_str(wn.value.shape) +
                        " does not chain from width " + std::to_string(c));
        c = wn.value.shape[0];
        if (b >= 0) {
            const Node& bn = nodes_[static_cast<size_t>(b)];
            if (bn.value.rank() != 1 || bn.value.shape[0] != c)
                throw Error(name + ": layer bias shape mismatch");
        }
        n.args.push_back(w);
        n.args.push_back(b);
    }
    n.chain_layers = std::move(layers);
    auto shape = xn.value.shape;
    shape.back() = c;
    n.value = Tensor::real(shape);
    return push(std::move(n));
}

int Graph::sine(int x) {
    const Node& xn = nodes_[static_cast<size_t>(x)];
    if (xn.value.is_complex()) throw Error("sine: real input required");
    Node n;
    n.kind = OpKind::Sine;
    n.name = "sine";
    n.args = {x};
    n.value = Tensor::real(xn.value.shape);
    return push(std::move(n));
}

int Graph::relu(int x) {
    const Node& xn = nodes_[static_cast<size_t>(x)];
    if (xn.value.is_complex()) throw Error("relu: real input required");
    Node n;
    n.kind = OpKind::Relu;
    n.name = "relu";
    n.args = {x};
    n.value = Tensor::real(xn.value.shape);
    return push(std::move(n));
}

int Graph::exp_(int x) {
    const Node& xn = nodes_[static_cast<size_t>(x)];
    Node n;
    n.kind = OpKind::Exp;
    n.name = "exp";
    n.args = {x};
    n.value = xn.value.is_complex() ? Tensor::complex(xn.value.shape) : Tensor::real(xn.value.shape);
    return push(std::move(n));
}

int Graph::add(int x, int y, double ax, double ay) {
    const Node& xn = nodes_[static_cast<size_t>(x)];
    const Node& yn = nodes_[static_cast<size_t>(y)];
    if (!xn.value.same_shape(yn.value))
        throw Error("add: operand mismatch " + shape_str(xn.value.shape) + " vs " +
                    shape_str(yn.value.shape));
    Node n;
    n.kind = OpKind::Add;
    n.name = "add";
    n.args = {x, y};
    n.ca = ax;
    n.cb = ay;
    n.value = xn.value.is_complex() ? Tensor::complex(xn.value.shape) : Tensor::real(xn.value.shape);
    return push(std::move(n));
}

int Graph::mul(int x, int y) {
    const Node& xn = nodes_[static_cast<size_t>(x)];
    const Node& yn = nodes_[static_cast<size_t>(y)];
    if (xn.value.shape != yn.value.shape)
        throw Error("mul: shape mismatch " + shape_str(xn.value.shape) + " vs " +
                    shape_str(yn.value.shape));
    Node n;
    n.kind = OpKind::Mul;
    n.name = "mul";
    n.args = {x, y};
    bool cx = xn.value.is_complex() || yn.value.is_complex();
    n.value = cx ? Tensor::complex(xn.value.shape) : Tensor::real(xn.value.shape);
    return push(std::move(n));
}

int Graph::div(int x, int y) {
    const Node& xn = nodes_[static_cast<size_t>(x)];
    const Node& yn = nodes_[static_cast<size_t>(y)];
    if (xn.value.shape != yn.value.shape)
        throw Error("div: shape mismatch " + shape_str(xn.value.shape) + " vs " +
                    shape_str(yn.value.shape));
    Node n;
    n.kind = OpKind::Div;
    n.name = "div";
    n.args = {x, y};
    bool cx = xn.value.is_complex() || yn.value.is_complex();
    n.value = cx ? Tensor::complex(xn.value.shape) : Tensor::real(xn.value.shape);
    return push(std::move(n));
}

int Graph::dft_real(int x, int axis) {
    const Node& xn = nodes_[static_cast<size_t>(x)];
    if (xn.value.is_complex()) throw Error("dft_real: real input required");
    if (axis < 0 || axis >= xn.value.rank()) throw Error("dft_real: axis out of range");
    Node n;
    n.kind = OpKind::DftReal;
    n.name = "dft";
    n.args = {x};
    n.axis = axis;
    n.value = Tensor::complex(xn.value.shape);
    return push(std::move(n));
}

int Graph::reduce_sum(int x, std::vector<int> axes) {
    const Node& xn = nodes_[static_cast<size_t>(x)];
    std::sort(axes.begin(), axes.end());
    std::vector<int64_t> shape;
    for (int i = 0; i < xn.value.rank(); ++i)
        if (!std::binary_search(axes.begin(), axes.end(), i))
            shape.push_back(xn.value.shape[static_cast<size_t>(i)]);
    for (int a : axes)
        if (a < 0 || a >= xn.value.rank()) throw Error("reduce_sum: axis out of range");
    Node n;
    n.kind = OpKind::ReduceSum;
    n.name = "reduce_sum";
    n.args = {x};
    n.axes = std::move(axes);
    n.value = xn.value.is_complex() ? Tensor::complex(shape) : Tensor::real(shape);
    return push(std::move(n));
}

int Graph::concat(int x, int y, int axis) {
    const Node& xn = nodes_[static_cast<size_t>(x)];
    const Node& yn = nodes_[static_cast<size_t>(y)];
    if (xn.value.dtype != yn.value.dtype) throw Error("concat: dtype mismatch");
    if (xn.value.rank() != yn.value.rank()) throw Error("concat: rank mismatch");
    if (axis < 0 || axis >= xn.value.rank()) throw Error("concat: axis out of range");
    for (int i = 0; i < xn.value.rank(); ++i)
        if (i != axis && xn.value.shape[static_cast<size_t>(i)] != yn.value.shape[static_cast<size_t>(i)])
            throw Error("concat: shape mismatch " + shape_str(xn.value.shape) + " vs " +
                        shape_str(yn.value.shape));
    auto shape = xn.value.shape;
    shape[static_cast<size_t>(axis)] += yn.value.shape[static_cast<size_t>(axis)];
    Node n;
    n.kind = OpKind::Concat;
    n.name = "concat";
    n.args = {x, y};
    n.axis = axis;
    n.value = xn.value.is_complex() ? Tensor::complex(shape) : Tensor::real(shape);
    return push(std::move(n));
}

int Graph::broadcast(int x, std::vector<int64_t> target) {
    const Node& xn = nodes_[static_cast<size_t>(x)];
    bcast_strides(xn.value.shape, target, "broadcast"); // validates
    Node n;
    n.kind = OpKind::Broadcast;
    n.name = "broadcast";
    n.args = {x};
    n.target_shape = target;
    n.value = xn.value.is_complex() ? Tensor::complex(target) : Tensor::real(target);
    return push(std::move(n));
}

int Graph::real_part(int x) {
    const Node& xn = nodes_[static_cast<size_t>(x)];
    if (!xn.value.is_complex()) throw Error("real_part: complex input required");
    Node n;
    n.kind = OpKind::RealPart;
    n.name = "real_part";
    n.args = {x};
    n.value = Tensor::real(xn.value.shape);
    return push(std::move(n));
}

int Graph::abspow(int x, double p) {
    const Node& xn = nodes_[static_cast<size_t>(x)];
    if (xn.value.is_complex()) throw Error("abspow: real input required");
    Node n;
    n.kind = OpKind::AbsPow;
    n.name = "abspow";
    n.args = {x};
    n.ca = p;
    n.value = Tensor::real(xn.value.shape);
    return push(std::move(n));
}

void Graph::set_output(int id) {
    if (id < 0 || id >= num_nodes()) throw Error("set_output: bad node id");
    output_ = id;
}

Tensor& Graph::grad_buf(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.buf.empty() || !n.grad.same_shape(n.value)) {
        n.grad = n.value.is_complex() ? Tensor::complex(n.value.shape) : Tensor::real(n.value.shape);
    }
    return n.grad;
}

// ---------------------------------------------------------------------------
// forward

namespace {

struct ChainProducts {
    // prefix[i]: product W_i ... W_1 mapping input width -> width_i (i >= 1),
    // cbias[i]: accumulated bias at layer i. prefix[0] is identity (absent).
    std::vector<std::vector<double>> prefix;
    std::vector<std::vector<double>> cbias;
    std::vector<int64_t> widths; // widths[0] = input width
};

// w: [rows, cols] row-major times m: [cols, c0] -> [rows, c0]
std::vector<double> matmul(const double* w, int64_t rows, int64_t cols,
                           const std::vector<double>& m, int64_t c0) {
    std::vector<double> out(static_cast<size_t>(rows * c0), 0.0);
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t k = 0; k < cols; ++k) {
            double wv = w[r * cols + k];
            for (int64_t c = 0; c < c0; ++c)
                out[static_cast<size_t>(r * c0 + c)] += wv * m[static_cast<size_t>(k * c0 + c)];
        }
    return out;
}

ChainProducts chain_products(const Graph& g, const Node& n) {
    ChainProducts cp;
    const Tensor& xv = g.node(n.args[0]).value;
    int64_t c0 = xv.shape.back();
    cp.widths.push_back(c0);
    std::vector<double> eff(static_cast<size_t>(c0 * c0), 0.0);
    for (int64_t i = 0; i < c0; ++i) eff[static_cast<size_t>(i * c0 + i)] = 1.0;
    std::vector<double> cb; // current accumulated bias, size = current width
    cb.assign(static_cast<size_t>(c0), 0.0);
    bool first = true;
    for (auto [wid, bid] : n.chain_layers) {
        const Tensor& w = g.node(wid).value;
        int64_t rows = w.shape[0], cols = w.shape[1];
        eff = matmul(w.data(), rows, cols, eff, c0);
        std::vector<double> nb(static_cast<size_t>(rows), 0.0);
        if (!first || true) {
            for (int64_t r = 0; r < rows; ++r) {
                double acc = 0.0;
                for (int64_t k = 0; k < cols; ++k) acc += w.at(r * cols + k) * cb[static_cast<size_t>(k)];
                nb[static_cast<size_t>(r)] = acc;
            }
        }
        if (bid >= 0) {
            const Tensor& b = g.node(bid).value;
            for (int64_t r = 0; r < rows; ++r) nb[static_cast<size_t>(r)] += b.at(r);
        }
        cb = nb;
        cp.prefix.push_back(eff);
        cp.cbias.push_back(cb);
        cp.widths.push_back(rows);
        first = false;
    }
    return cp;
}

} // namespace

void Graph::eval_node(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    auto argv = [&](int i) -> const Tensor& { return nodes_[static_cast<size_t>(n.args[static_cast<size_t>(i)])].value; };
    switch (n.kind) {
    case OpKind::Leaf:
    case OpKind::Constant:
        break;
    case OpKind::Affine: {
        const Tensor& x = argv(0);
        const Tensor& w = argv(1);
        const Tensor* b = n.args[2] >= 0 ? &nodes_[static_cast<size_t>(n.args[2])].value : nullptr;
        int64_t cin = w.shape[1], cout = w.shape[0];
        int64_t npts = x.numel() / cin;
        const double* xp = x.data();
        const double* wp = w.data();
        double* yp = n.value.data();
        for (int64_t p = 0; p < npts; ++p) {
            const double* xr = xp + p * cin;
            double* yr = yp + p * cout;
            for (int64_t o = 0; o < cout; ++o) {
                double acc = b ? b->at(o) : 0.0;
                const double* wr = wp + o * cin;
                for (int64_t i = 0; i < cin; ++i) acc += wr[i] * xr[i];
                yr[o] = acc;
            }
        }
        break;
    }
    case OpKind::AffineChain: {
        const Tensor& x = argv(0);
        ChainProducts cp = chain_products(*this, n);
        const auto& eff = cp.prefix.back();
        const auto& cb = cp.cbias.back();
        int64_t c0 = cp.widths.front(), ck = cp.widths.back();
        int64_t npts = x.numel() / c0;
        const double* xp = x.data();
        double* yp = n.value.data();
        for (int64_t p = 0; p < npts; ++p) {
            const double* xr = xp + p * c0;
            double* yr = yp + p * ck;
            for (int64_t o = 0; o < ck; ++o) {
                double acc = cb[static_cast<size_t>(o)];
                const double* er = eff.data() + o * c0;
                for (int64_t i = 0; i < c0; ++i) acc += er[i] * xr[i];
                yr[o] = acc;
            }
        }
        break;
    }
    case OpKind::Sine: {
        const Tensor& x = argv(0);
        fastmath::vsin(x.data(), n.value.data(), x.numel());
        break;
    }
    case OpKind::Relu: {
        const Tensor& x = argv(0);
        for (int64_t i = 0; i < x.numel(); ++i) n.value.at(i) = x.at(i) > 0.0 ? x.at(i) : 0.0;
        break;
    }
    case OpKind::Exp: {
        const Tensor& x = argv(0);
        if (x.is_complex()) {
            for (int64_t i = 0; i < x.numel(); ++i) n.value.cat(i) = std::exp(x.cat(i));
        } else {
            for (int64_t i = 0; i < x.numel(); ++i) n.value.at(i) = std::exp(x.at(i));
        }
        break;
    }
    case OpKind::Add: {
        const Tensor& x = argv(0);
        const Tensor& y = argv(1);
        for (size_t i = 0; i < n.value.buf.size(); ++i)
            n.value.buf[i] = n.ca * x.buf[i] + n.cb * y.buf[i];
        break;
    }
    case OpKind::Mul: {
        const Tensor& x = argv(0);
        const Tensor& y = argv(1);
        if (!n.value.is_complex()) {
            for (int64_t i = 0; i < x.numel(); ++i) n.value.at(i) = x.at(i) * y.at(i);
        } else if (x.is_complex() && y.is_complex()) {
            for (int64_t i = 0; i < x.numel(); ++i) n.value.cat(i) = x.cat(i) * y.cat(i);
        } else {
            const Tensor& c = x.is_complex() ? x : y;
            const Tensor& r = x.is_complex() ? y : x;
            for (int64_t i = 0; i < c.numel(); ++i) n.value.cat(i) = c.cat(i) * r.at(i);
        }
        break;
    }
    case OpKind::Div: {
        const Tensor& x = argv(0);
        const Tensor& y = argv(1);
        if (!n.value.is_complex()) {
            for (int64_t i = 0; i < x.numel(); ++i) n.value.at(i) = x.at(i) / y.at(i);
        } else {
            auto cx = [&](const Tensor& t, int64_t i) {
                return t.is_complex() ? t.cat(i) : cxd(t.at(i), 0.0);
            };
            for (int64_t i = 0; i < x.numel(); ++i) n.value.cat(i) = cx(x, i) / cx(y, i);
        }
        break;
    }
    case OpKind::DftReal: {
        const Tensor& x = argv(0);
        for (int64_t i = 0; i < x.numel(); ++i) n.value.cat(i) = cxd(x.at(i), 0.0);
        double m = static_cast<double>(x.shape[static_cast<size_t>(n.axis)]);
        fft::transform_axis(n.value, n.axis, -1, 1.0 / m);
        break;
    }
    case OpKind::ReduceSum: {
        const Tensor& x = argv(0);
        n.value.zero();
        if (!x.is_complex() && is_trailing(n.axes, x.rank())) {
            const int64_t rows = n.value.numel();
            const int64_t inner = x.numel() / std::max<int64_t>(rows, 1);
            for (int64_t rw = 0; rw < rows; ++rw) {
                const double* xp = x.data() + rw * inner;
                double part[8] = {0};
                int64_t i = 0;
                for (; i + 8 <= inner; i += 8)
                    for (int j = 0; j < 8; ++j) part[j] += xp[i + j];
                for (; i < inner; ++i) part[0] += xp[i];
                double acc = 0;
                for (int j = 0; j < 8; ++j) acc += part[j];
                n.value.at(rw) = acc;
            }
            break;
        }
        auto xst = strides_of(x.shape);
        std::vector<int64_t> ost(x.shape.size(), 0);
        auto rst = strides_of(n.value.shape);
        size_t ri = 0;
        for (size_t i = 0; i < x.shape.size(); ++i) {
            if (std::binary_search(n.axes.begin(), n.axes.end(), static_cast<int>(i)))
                ost[i] = 0;
            else
                ost[i] = rst[ri++];
        }
        int width = x.is_complex() ? 2 : 1;
        Odometer od(x.shape);
        do {
            int64_t xi = od.offset(xst) * width;
            int64_t oi = od.offset(ost) * width;
            for (int c = 0; c < width; ++c) n.value.buf[static_cast<size_t>(oi + c)] += x.buf[static_cast<size_t>(xi + c)];
        } while (od.next());
        break;
    }
    case OpKind::Concat: {
        const Tensor& x = argv(0);
        const Tensor& y = argv(1);
        int width = x.is_complex() ? 2 : 1;
        int64_t inner = width;
        for (int i = n.axis + 1; i < x.rank(); ++i) inner *= x.shape[static_cast<size_t>(i)];
        int64_t ax = x.shape[static_cast<size_t>(n.axis)], ay = y.shape[static_cast<size_t>(n.axis)];
        int64_t outer = x.numel() * width / (ax * inner);
        const int64_t xrow = ax * inner, yrow = ay * inner, orow = (ax + ay) * inner;
        for (int64_t o = 0; o < outer; ++o) {
            std::memcpy(n.value.buf.data() + o * orow, x.buf.data() + o * xrow,
                        static_cast<size_t>(xrow) * sizeof(double));
            std::memcpy(n.value.buf.data() + o * orow + xrow, y.buf.data() + o * yrow,
                        static_cast<size_t>(yrow) * sizeof(double));
        }
        break;
    }
    case OpKind::Broadcast: {
        const Tensor& x = argv(0);
        auto sst = bcast_strides(x.shape, n.target_shape, "broadcast");
        auto dst = strides_of(n.target_shape);
        int width = x.is_complex() ? 2 : 1;
        Odometer od(n.target_shape);
        do {
            int64_t si = od.offset(sst) * width;
            int64_t di = od.offset(dst) * width;
            for (int c = 0; c < width; ++c) n.value.buf[static_cast<size_t>(di + c)] = x.buf[static_cast<size_t>(si + c)];
        } while (od.next());
        break;
    }
    case OpKind::RealPart: {
        const Tensor& x = argv(0);
        for (int64_t i = 0; i < x.numel(); ++i) n.value.at(i) = x.cat(i).real();
        break;
    }
    case OpKind::AbsPow: {
        const Tensor& x = argv(0);
        double p = n.ca;
        if (p == 2.0) {
            for (int64_t i = 0; i < x.numel(); ++i) n.value.at(i) = x.at(i) * x.at(i);
        } else {
            for (int64_t i = 0; i < x.numel(); ++i) n.value.at(i) = std::pow(std::abs(x.at(i)), p);
        }
        break;
    }
    case OpKind::PrConv:
        pr_conv_forward(*this, n);
        break;
    }
}

const Tensor& Graph::forward(const Bindings& bindings) {
    if (output_ < 0) throw Error("Graph::forward: no output set");
    forward_done_ = false;
    for (auto& [id, idx] : leaf_lookup_) {
        auto it = bindings.find(id);
        if (it == bindings.end()) throw Error("Graph::forward: unbound leaf '" + id + "'");
        Node& ln = nodes_[static_cast<size_t>(idx)];
        const Tensor& t = *it->second;
        if (!t.same_shape(ln.value))
            throw Error("Graph::forward: leaf '" + id + "' bound with shape " +
                        shape_str(t.shape) + ", declared " + shape_str(ln.value.shape));
        ln.value.buf = t.buf;
    }
    for (int i = 0; i <= output_; ++i) eval_node(i);
    forward_done_ = true;
    return nodes_[static_cast<size_t>(output_)].value;
}

// ---------------------------------------------------------------------------
// backward

void Graph::backprop_node(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.needs_grad || n.kind == OpKind::Leaf || n.kind == OpKind::Constant) return;
    const Tensor& g = n.grad;
    auto needs = [&](int i) { return n.args[static_cast<size_t>(i)] >= 0 && nodes_[static_cast<size_t>(n.args[static_cast<size_t>(i)])].needs_grad; };
    auto argv = [&](int i) -> const Tensor& { return nodes_[static_cast<size_t>(n.args[static_cast<size_t>(i)])].value; };
    auto argg = [&](int i) -> Tensor& { return grad_buf(n.args[static_cast<size_t>(i)]); };

    switch (n.kind) {
    case OpKind::Leaf:
    case OpKind::Constant:
        break;
    case OpKind::Affine: {
        const Tensor& x = argv(0);
        const Tensor& w = argv(1);
        int64_t cin = w.shape[1], cout = w.shape[0];
        int64_t npts = x.numel() / cin;
        if (needs(0)) {
            Tensor& gx = argg(0);
            for (int64_t p = 0; p < npts; ++p) {
                const double* gr = g.data() + p * cout;
                double* gxr = gx.data() + p * cin;
                for (int64_t o = 0; o < cout; ++o) {
                    const double* wr = w.data() + o * cin;
                    double gv = gr[o];
                    for (int64_t i = 0; i < cin; ++i) gxr[i] += gv * wr[i];
                }
            }
        }
        if (needs(1)) {
            Tensor& gw = argg(1);
            for (int64_t p = 0; p < npts; ++p) {
                const double* gr = g.data() + p * cout;
                const double* xr = x.data() + p * cin;
                for (int64_t o = 0; o < cout; ++o) {
                    double gv = gr[o];
                    double* gwr = gw.data() + o * cin;
                    for (int64_t i = 0; i < cin; ++i) gwr[i] += gv * xr[i];
                }
            }
        }
        if (n.args[2] >= 0 && needs(2)) {
            Tensor& gb = argg(2);
            for (int64_t p = 0; p < npts; ++p) {
                const double* gr = g.data() + p * cout;
                for (int64_t o = 0; o < cout; ++o) gb.at(o) += gr[o];
            }
        }
        break;
    }
    case OpKind::AffineChain: {
        const Tensor& x = argv(0);
        ChainProducts cp = chain_products(*this, n);
        int64_t c0 = cp.widths.front(), ck = cp.widths.back();
        int64_t npts = x.numel() / c0;
        // sufficient statistics
        std::vector<double> gxs(static_cast<size_t>(ck * c0), 0.0); // sum_p g_p x_p^T
        std::vector<double> sg(static_cast<size_t>(ck), 0.0);
        for (int64_t p = 0; p < npts; ++p) {
            const double* gr = g.data() + p * ck;
            const double* xr = x.data() + p * c0;
            for (int64_t o = 0; o < ck; ++o) {
                sg[static_cast<size_t>(o)] += gr[o];
                double* row = gxs.data() + o * c0;
                for (int64_t i = 0; i < c0; ++i) row[i] += gr[o] * xr[i];
            }
        }
        if (needs(0)) {
            const auto& eff = cp.prefix.back();
            Tensor& gx = argg(0);
            for (int64_t p = 0; p < npts; ++p) {
                const double* gr = g.data() + p * ck;
                double* gxr = gx.data() + p * c0;
                for (int64_t o = 0; o < ck; ++o) {
                    const double* er = eff.data() + o * c0;
                    for (int64_t i = 0; i < c0; ++i) gxr[i] += gr[o] * er[i];
                }
            }
        }
        // suffix products, walking layers from the top
        size_t L = n.chain_layers.size();
        std::vector<double> suffix(static_cast<size_t>(ck * ck), 0.0); // S_L = I
        for (int64_t i = 0; i < ck; ++i) suffix[static_cast<size_t>(i * ck + i)] = 1.0;
        int64_t srows = ck;
        for (size_t li = L; li-- > 0;) {
            int64_t wrows = cp.widths[li + 1];
            int64_t wcols = cp.widths[li];
            auto [wid, bid] = n.chain_layers[li];
            // dW = S^T * (Gx * P_{li-1}^T + sg * c_{li-1}^T)
            // build M = Gx * P^T + sg c^T : [ck x wcols]
            std::vector<double> M(static_cast<size_t>(ck * wcols), 0.0);
            if (li == 0) {
                for (int64_t r = 0; r < ck; ++r)
                    for (int64_t c = 0; c < wcols; ++c)
                        M[static_cast<size_t>(r * wcols + c)] = gxs[static_cast<size_t>(r * c0 + c)];
            } else {
                const auto& P = cp.prefix[li - 1]; // [wcols x c0]
                const auto& cb = cp.cbias[li - 1]; // [wcols]
                for (int64_t r = 0; r < ck; ++r)
                    for (int64_t c = 0; c < wcols; ++c) {
                        double acc = sg[static_cast<size_t>(r)] * cb[static_cast<size_t>(c)];
                        for (int64_t k = 0; k < c0; ++k)
                            acc += gxs[static_cast<size_t>(r * c0 + k)] * P[static_cast<size_t>(c * c0 + k)];
                        M[static_cast<size_t>(r * wcols + c)] = acc;
                    }
            }
            int wnode = wid;
            if (nodes_[static_cast<size_t>(wnode)].needs_grad) {
                Tensor& gw = grad_buf(wnode);
                for (int64_t r = 0; r < wrows; ++r)
                    for (int64_t c = 0; c < wcols; ++c) {
                        double acc = 0.0;
                        for (int64_t k = 0; k < ck; ++k)
                            acc += suffix[static_cast<size_t>(k * srows + r)] * M[static_cast<size_t>(k * wcols + c)];
                        gw.at(r * wcols + c) += acc;
                    }
            }
            if (bid >= 0 && nodes_[static_cast<size_t>(bid)].needs_grad) {
                Tensor& gb = grad_buf(bid);
                for (int64_t r = 0; r < wrows; ++r) {
                    double acc = 0.0;
                    for (int64_t k = 0; k < ck; ++k)
                        acc += suffix[static_cast<size_t>(k * srows + r)] * sg[static_cast<size_t>(k)];
                    gb.at(r) += acc;
                }
            }
            // suffix <- suffix * W_li  : [ck x wcols]
            const Tensor& w = node(wid).value;
            std::vector<double> ns(static_cast<size_t>(ck * wcols), 0.0);
            for (int64_t r = 0; r < ck; ++r)
                for (int64_t k = 0; k < wrows; ++k) {
                    double sv = suffix[static_cast<size_t>(r * srows + k)];
                    for (int64_t c = 0; c < wcols; ++c)
                        ns[static_cast<size_t>(r * wcols + c)] += sv * w.at(k * wcols + c);
                }
            suffix = std::move(ns);
            srows = wcols;
        }
        break;
    }
    case OpKind::Sine: {
        if (!needs(0)) break;
        const Tensor& x = argv(0);
        Tensor& gx = argg(0);
        static thread_local std::vector<double> cosbuf;
        cosbuf.resize(static_cast<size_t>(x.numel()));
        fastmath::vcos(x.data(), cosbuf.data(), x.numel());
        for (int64_t i = 0; i < x.numel(); ++i) gx.at(i) += cosbuf[static_cast<size_t>(i)] * g.at(i);
        break;
    }
    case OpKind::Relu: {
        if (!needs(0)) break;
        const Tensor& x = argv(0);
        Tensor& gx = argg(0);
        for (int64_t i = 0; i < x.numel(); ++i)
            if (x.at(i) > 0.0) gx.at(i) += g.at(i);
        break;
    }
    case OpKind::Exp: {
        if (!needs(0)) break;
        Tensor& gx = argg(0);
        if (n.value.is_complex()) {
            for (int64_t i = 0; i < n.value.numel(); ++i)
                gx.cat(i) += std::conj(n.value.cat(i)) * g.cat(i);
        } else {
            for (int64_t i = 0; i < n.value.numel(); ++i) gx.at(i) += n.value.at(i) * g.at(i);
        }
        break;
    }
    case OpKind::Add: {
        for (int k = 0; k < 2; ++k) {
            if (!needs(k)) continue;
            Tensor& gx = argg(k);
            double c = k == 0 ? n.ca : n.cb;
            for (size_t i = 0; i < g.buf.size(); ++i) gx.buf[i] += c * g.buf[i];
        }
        break;
    }
    case OpKind::Mul: {
        const Tensor& x = argv(0);
        const Tensor& y = argv(1);
        auto accum = [&](const Tensor& self, const Tensor& other, Tensor& gs) {
            if (!n.value.is_complex()) {
                for (int64_t i = 0; i < self.numel(); ++i) gs.at(i) += other.at(i) * g.at(i);
            } else if (self.is_complex()) {
                if (other.is_complex()) {
                    for (int64_t i = 0; i < self.numel(); ++i)
                        gs.cat(i) += std::conj(other.cat(i)) * g.cat(i);
                } else {
                    for (int64_t i = 0; i < self.numel(); ++i) gs.cat(i) += other.at(i) * g.cat(i);
                }
            } else {
                // real operand of a complex product
                for (int64_t i = 0; i < self.numel(); ++i) {
                    cxd o = other.is_complex() ? other.cat(i) : cxd(other.at(i), 0.0);
                    gs.at(i) += (g.cat(i) * std::conj(o)).real();
                }
            }
        };
        if (needs(0)) accum(x, y, argg(0));
        if (needs(1)) accum(y, x, argg(1));
        break;
    }
    case OpKind::Div: {
        const Tensor& x = argv(0);
        const Tensor& y = argv(1);
        if (!n.value.is_complex()) {
            if (needs(0)) {
                Tensor& gx = argg(0);
                for (int64_t i = 0; i < x.numel(); ++i) gx.at(i) += g.at(i) / y.at(i);
            }
            if (needs(1)) {
                Tensor& gy = argg(1);
                for (int64_t i = 0; i < x.numel(); ++i)
                    gy.at(i) -= g.at(i) * n.value.at(i) / y.at(i);
            }
        } else {
            auto cx = [&](const Tensor& t, int64_t i) {
                return t.is_complex() ? t.cat(i) : cxd(t.at(i), 0.0);
            };
            if (needs(0)) {
                Tensor& gx = argg(0);
                for (int64_t i = 0; i < x.numel(); ++i) {
                    cxd v = std::conj(1.0 / cx(y, i)) * g.cat(i);
                    if (x.is_complex())
                        gx.cat(i) += v;
                    else
                        gx.at(i) += v.real();
                }
            }
            if (needs(1)) {
                Tensor& gy = argg(1);
                for (int64_t i = 0; i < x.numel(); ++i) {
                    cxd v = -std::conj(n.value.cat(i) / cx(y, i)) * g.cat(i);
                    if (y.is_complex())
                        gy.cat(i) += v;
                    else
                        gy.at(i) += v.real();
                }
            }
        }
        break;
    }
    case OpKind::DftReal: {
        if (!needs(0)) break;
        Tensor gc = g; // copy; adjoint of (1/M) forward DFT is (1/M) unnormalized inverse
        double m = static_cast<double>(n.value.shape[static_cast<size_t>(n.axis)]);
        fft::transform_axis(gc, n.axis, +1, 1.0 / m);
        Tensor& gx = argg(0);
        for (int64_t i = 0; i < gx.numel(); ++i) gx.at(i) += gc.cat(i).real();
        break;
    }
    case OpKind::ReduceSum: {
        if (!needs(0)) break;
        const Tensor& x = argv(0);
        Tensor& gx = argg(0);
        if (!x.is_complex() && is_trailing(n.axes, x.rank())) {
            const int64_t rows = n.value.numel();
            const int64_t inner = x.numel() / std::max<int64_t>(rows, 1);
            for (int64_t rw = 0; rw < rows; ++rw) {
                const double gv = g.at(rw);
                double* gp = gx.data() + rw * inner;
                for (int64_t i = 0; i < inner; ++i) gp[i] += gv;
            }
            break;
        }
        auto xst = strides_of(x.shape);
        std::vector<int64_t> ost(x.shape.size(), 0);
        auto rst = strides_of(n.value.shape);
        size_t ri = 0;
        for (size_t i = 0; i < x.shape.size(); ++i) {
            if (std::binary_search(n.axes.begin(), n.axes.end(), static_cast<int>(i)))
                ost[i] = 0;
            else
                ost[i] = rst[ri++];
        }
        int width = x.is_complex() ? 2 : 1;
        Odometer od(x.shape);
        do {
            int64_t xi = od.offset(xst) * width;
            int64_t oi = od.offset(ost) * width;
            for (int c = 0; c < width; ++c) gx.buf[static_cast<size_t>(xi + c)] += g.buf[static_cast<size_t>(oi + c)];
        } while (od.next());
        break;
    }
    case OpKind::Concat: {
        const Tensor& x = argv(0);
        const Tensor& y = argv(1);
        int width = x.is_complex() ? 2 : 1;
        int64_t inner = width;
        for (int i = n.axis + 1; i < x.rank(); ++i) inner *= x.shape[static_cast<size_t>(i)];
        int64_t ax = x.shape[static_cast<size_t>(n.axis)], ay = y.shape[static_cast<size_t>(n.axis)];
        int64_t outer = x.numel() * width / (ax * inner);
        const int64_t xrow = ax * inner, yrow = ay * inner, orow = (ax + ay) * inner;
        if (needs(0)) {
            Tensor& gx = argg(0);
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t i = 0; i < xrow; ++i)
                    gx.buf[static_cast<size_t>(o * xrow + i)] += g.buf[static_cast<size_t>(o * orow + i)];
        }
        if (needs(1)) {
            Tensor& gy = argg(1);
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t i = 0; i < yrow; ++i)
                    gy.buf[static_cast<size_t>(o * yrow + i)] += g.buf[static_cast<size_t>(o * orow + xrow + i)];
        }
        break;
    }
    case OpKind::Broadcast: {
        if (!needs(0)) break;
        const Tensor& x = argv(0);
        Tensor& gx = argg(0);
        auto sst = bcast_strides(x.shape, n.target_shape, "broadcast");
        auto dst = strides_of(n.target_shape);
        int width = x.is_complex() ? 2 : 1;
        Odometer od(n.target_shape);
        do {
            int64_t si = od.offset(sst) * width;
            int64_t di = od.offset(dst) * width;
            for (int c = 0; c < width; ++c) gx.buf[static_cast<size_t>(si + c)] += g.buf[static_cast<size_t>(di + c)];
        } while (od.next());
        break;
    }
    case OpKind::RealPart: {
        if (!needs(0)) break;
        Tensor& gx = argg(0);
        for (int64_t i = 0; i < n.value.numel(); ++i) gx.cat(i) += cxd(g.at(i), 0.0);
        break;
    }
    case OpKind::AbsPow: {
        if (!needs(0)) break;
        const Tensor& x = argv(0);
        Tensor& gx = argg(0);
        double p = n.ca;
        if (p == 2.0) {
            for (int64_t i = 0; i < x.numel(); ++i) gx.at(i) += 2.0 * x.at(i) * g.at(i);
        } else {
            for (int64_t i = 0; i < x.numel(); ++i) {
                double xv = x.at(i);
                if (xv == 0.0) continue;
                double s = xv > 0.0 ? 1.0 : -1.0;
                gx.at(i) += p * std::pow(std::abs(xv), p - 1.0) * s * g.at(i);
            }
        }
        break;
    }
    case OpKind::PrConv:
        pr_conv_backward(*this, n);
        break;
    }
}

std::map<std::string, Tensor> Graph::backward(const Tensor& cotangent) {
    if (!forward_done_) throw Error("Graph::backward: forward_eval must run first");
    Node& out = nodes_[static_cast<size_t>(output_)];
    if (!cotangent.same_shape(out.value))
        throw Error("Graph::backward: cotangent shape " + shape_str(cotangent.shape) +
                    " does not match output " + shape_str(out.value.shape));
    for (int i = 0; i <= output_; ++i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (n.needs_grad) grad_buf(i).zero();
    }
    if (out.needs_grad) {
        grad_buf(output_).buf = cotangent.buf;
        for (int i = output_; i >= 0; --i) backprop_node(i);
    }
    std::map<std::string, Tensor> grads;
    for (const std::string& id : leaf_order_) {
        Node& ln = nodes_[static_cast<size_t>(leaf_lookup_[id])];
        if (!ln.requires_grad) continue;
        if (ln.frozen || !ln.needs_grad) {
            grads[id] = ln.value.is_complex() ? Tensor::complex(ln.value.shape)
                                              : Tensor::real(ln.value.shape);
        } else {
            grads[id] = ln.grad;
        }
    }
    return grads;
}

double Graph::grad_check(const Bindings& bindings, double eps) {
    if (eps <= 0.0) throw Error("grad_check: epsilon must be positive");
    const Tensor& out = forward(bindings);
    if (out.numel() != 1 || out.is_complex())
        throw Error("grad_check: output must be a real scalar");
    Tensor ct = Tensor::real(out.shape);
    ct.buf[0] = 1.0;
    auto grads = backward(ct);

    // own mutable copies of all bindings
    std::map<std::string, Tensor> owned;
    for (auto& [id, t] : bindings) owned[id] = *t;
    Bindings b2;
    for (auto& [id, t] : owned) b2[id] = &t;

    double worst = 0.0;
    for (const std::string& id : leaf_order_) {
        Node& ln = nodes_[static_cast<size_t>(leaf_lookup_[id])];
        if (!ln.requires_grad || ln.frozen) continue;
        Tensor& tv = owned[id];
        const Tensor& ga = grads[id];
        for (size_t k = 0; k < tv.buf.size(); ++k) {
            double orig = tv.buf[k];
            tv.buf[k] = orig + eps;
            double lp = forward(b2).buf[0];
            tv.buf[k] = orig - eps;
            double lm = forward(b2).buf[0];
            tv.buf[k] = orig;
            if (!std::isfinite(lp) || !std::isfinite(lm))
                throw Error("grad_check: non-finite loss when perturbing '" + id + "'");
            double fd = (lp - lm) / (2.0 * eps);
            double err = std::abs(ga.buf[k] - fd) / (std::abs(fd) + 1e-12);
            worst = std::max(worst, err);
        }
    }
    forward(bindings); // restore cached state
    return worst;
}

} // namespace mflap::ad
