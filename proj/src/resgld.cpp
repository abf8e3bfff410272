#include "mflap/resgld.hpp"

#include <cmath>

namespace mflap::resgld {

void SamplerConfig::validate() const {
    if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1))
        throw Error("SamplerConfig: moment decays must lie in (0,1)");
    if (n_chains < 1) throw Error("SamplerConfig: need at least one chain");
    if (!(target_swap_rate > 0 && target_swap_rate < 1))
        throw Error("SamplerConfig: target swap rate must lie in (0,1)");
    if (!(eta_lo > 0 && eta_hi >= eta_lo)) throw Error("SamplerConfig: bad learning-rate ladder");
    if (!(temp_lo >= 0 && temp_hi >= temp_lo)) throw Error("SamplerConfig: bad temperature ladder");
    if (n_chains >= 2 && window < min_window(n_chains, target_swap_rate))
        throw Error("SamplerConfig: window " + std::to_string(window) +
                    " below the theoretical minimum " +
                    std::to_string(min_window(n_chains, target_swap_rate)));
}

ChainState ChainState::make(std::vector<double> theta0, double temperature, double base_lr,
                            uint64_t seed) {
    ChainState c;
    c.theta = std::move(theta0);
    c.m.assign(c.theta.size(), 0.0);
    c.v.assign(c.theta.size(), 0.0);
    c.temperature = temperature;
    c.base_lr = base_lr;
    c.rng.seed(seed);
    return c;
}

SwapController SwapController::make(const SamplerConfig& cfg) {
    SwapController ctl;
    if (cfg.n_chains >= 2) {
        ctl.pairs.assign(static_cast<size_t>(cfg.n_chains - 1), PairStats{});
        for (auto& p : ctl.pairs) p.buffer = cfg.buffer_init;
    }
    return ctl;
}

int min_window(int n_chains, double target_rate) {
    if (n_chains < 2) throw Error("min_window: undefined for fewer than 2 chains");
    if (!(target_rate > 0 && target_rate < 1)) throw Error("min_window: rate must be in (0,1)");
    double num = std::log(double(n_chains)) + std::log(std::log(double(n_chains)));
    double den = -std::log(1.0 - target_rate);
    return static_cast<int>(std::ceil(num / den));
}

std::vector<double> geometric_ladder(double lo, double hi, int n) {
    if (n < 1) throw Error("geometric_ladder: n must be >= 1");
    std::vector<double> out(static_cast<size_t>(n));
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    double lr = std::log(hi / lo);
    for (int i = 0; i < n; ++i)
        out[static_cast<size_t>(i)] = std::exp(double(i) / double(n - 1) * lr) * lo;
    return out;
}

double cosine_lr(double eta0, int64_t epoch, int64_t total_epochs) {
    const double eta_min = 0.01 * eta0;
    if (total_epochs <= 0) return eta0;
    double phase = 3.14159265358979323846 * double(epoch) / double(total_epochs);
    return eta_min + 0.5 * (eta0 - eta_min) * (1.0 + std::cos(phase));
}

double buffer_step(int64_t i) {
    return std::min(0.5, 100.0 / (std::pow(double(i), 0.8) + 100.0));
}

namespace {

void check_grad(const std::vector<double>& grad, const std::vector<double>& theta) {
    if (grad.size() != theta.size()) throw Error("sampler: gradient/parameter size mismatch");
    for (double g : grad)
        if (!std::isfinite(g)) throw Error("sampler: non-finite gradient");
}

} // namespace

void sgld_step(ChainState& c, const std::vector<double>& grad, double lr, double temperature) {
    check_grad(grad, c.theta);
    if (!(lr > 0)) throw Error("sgld_step: learning rate must be positive");
    const double noise = temperature > 0 ? std::sqrt(2.0 * lr * temperature) : 0.0;
    for (size_t i = 0; i < c.theta.size(); ++i) {
        c.theta[i] -= lr * grad[i];
        if (noise > 0) c.theta[i] += noise * c.rng.normal();
    }
}

void adaptive_drift_step(ChainState& c, const std::vector<double>& grad, double lr,
                         double temperature, const SamplerConfig& cfg) {
    check_grad(grad, c.theta);
    if (!(lr > 0)) throw Error("adaptive_drift_step: learning rate must be positive");
    const double noise = temperature > 0 ? std::sqrt(2.0 * lr * temperature) : 0.0;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    for (size_t i = 0; i < c.theta.size(); ++i) {
        const double g = grad[i];
        c.m[i] = b1 * c.m[i] + (1.0 - b1) * g;
        c.v[i] = b2 * c.v[i] + (1.0 - b2) * g * g;
        const double drift = c.m[i] / (std::sqrt(c.v[i]) + cfg.rho);
        c.theta[i] -= lr * (g + cfg.drift_scale * drift);
        if (noise > 0) c.theta[i] += noise * c.rng.normal();
    }
}

void update_buffer(SwapController& ctl, int pair, bool indicator, const SamplerConfig& cfg) {
    PairStats& p = ctl.pairs[static_cast<size_t>(pair)];
    p.attempts += 1;
    if (indicator) p.swaps += 1;
    const double rate = double(p.swaps) / double(p.attempts);
    p.buffer += buffer_step(p.attempts) * (rate - cfg.target_swap_rate);
}

void attempt_swaps(std::vector<ChainState>& chains, SwapController& ctl,
                   const std::vector<double>& losses, const SamplerConfig& cfg) {
    const int np = static_cast<int>(ctl.pairs.size());
    if (np == 0) {
        ctl.iteration += 1;
        return;
    }
    if (losses.size() != chains.size()) throw Error("attempt_swaps: loss count mismatch");
    const int64_t i = ctl.iteration;
    const bool window_end = (i + 1) % cfg.window == 0;
    const int64_t parity = (i / cfg.window) % 2;
    for (int n = 0; n < np; ++n) {
        PairStats& p = ctl.pairs[static_cast<size_t>(n)];
        // even windows test pairs (1,2),(3,4),...; odd windows (2,3),(4,5),...
        const bool considered = window_end && (n % 2 == parity);
        bool swapped = false;
        if (considered && p.gap >= cfg.window) {
            const double lo = losses[static_cast<size_t>(n)];
            const double hi = losses[static_cast<size_t>(n + 1)];
            const bool indicator = hi + p.buffer < lo;
            ctl.events.push_back({i, n + 1, lo, hi, p.buffer, indicator});
            update_buffer(ctl, n, indicator, cfg);
            if (indicator) {
                chains[static_cast<size_t>(n)].theta.swap(chains[static_cast<size_t>(n + 1)].theta);
                p.gap = 0;
                swapped = true;
            }
        }
        if (!swapped) p.gap += 1;
    }
    ctl.iteration += 1;
}

std::vector<double> resgld_step(std::vector<ChainState>& chains, SwapController& ctl,
                                const LossGradFn& loss_and_grad, const SamplerConfig& cfg,
                                const std::vector<double>& lrs) {
    if (chains.empty()) throw Error("resgld_step: no chains");
    if (lrs.size() != chains.size()) throw Error("resgld_step: lr count mismatch");
    std::vector<double> losses(chains.size(), 0.0);
    std::vector<double> grad;
    for (size_t n = 0; n < chains.size(); ++n) {
        grad.assign(chains[n].theta.size(), 0.0);
        losses[n] = loss_and_grad(static_cast<int>(n), chains[n].theta, grad);
        if (!std::isfinite(losses[n]))
            throw Error("resgld_step: non-finite loss on chain " + std::to_string(n));
        adaptive_drift_step(chains[n], grad, lrs[n],
                            cfg.zero_temperature ? 0.0 : chains[n].temperature, cfg);
    }
    attempt_swaps(chains, ctl, losses, cfg);
    return losses;
}

UncertaintyBand predict_with_uncertainty(const std::vector<Tensor>& preds) {
    if (preds.empty()) throw Error("predict_with_uncertainty: empty ensemble");
    const size_t k = preds.size();
    for (const Tensor& t : preds)
        if (!t.same_shape(preds[0]) || t.is_complex())
            throw Error("predict_with_uncertainty: predictions must be identically shaped real tensors");
    UncertaintyBand band;
    band.mean = Tensor::real(preds[0].shape);
    band.lower = Tensor::real(preds[0].shape);
    band.upper = Tensor::real(preds[0].shape);
    const int64_t n = band.mean.numel();
    for (int64_t i = 0; i < n; ++i) {
        double s = 0;
        for (const Tensor& t : preds) s += t.at(i);
        const double mean = s / double(k);
        double var = 0;
        if (k > 1) {
            for (const Tensor& t : preds) var += (t.at(i) - mean) * (t.at(i) - mean);
            var /= double(k - 1);
        }
        const double half = 1.96 * std::sqrt(var);
        band.mean.at(i) = mean;
        band.lower.at(i) = mean - half;
        band.upper.at(i) = mean + half;
    }
    return band;
}

} // namespace mflap::resgld
