#ifndef MFLAP_RESGLD_HPP
#define MFLAP_RESGLD_HPP

#include "mflap/rng.hpp"
#include "mflap/tensor.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace mflap::resgld {

struct SamplerConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double rho = 1e-8;
    double drift_scale = 1.0; // `a`, never given a value in the source method
    int n_chains = 4;
    double target_swap_rate = 0.10;
    int window = 50; // W*, must be >= min_window(n_chains, target_swap_rate)
    double temp_lo = 1e-5;
    double temp_hi = 1e-4;
    double eta_lo = 5e-6;
    double eta_hi = 5e-4;
    double buffer_init = 0.50;
    bool zero_temperature = false;

    void validate() const;
};

struct ChainState {
    std::vector<double> theta;
    std::vector<double> m; // first moment
    std::vector<double> v; // second moment
    double temperature = 0.0;
    double base_lr = 0.0;
    Rng rng;

    static ChainState make(std::vector<double> theta0, double temperature, double base_lr,
                           uint64_t seed);
};

struct PairStats {
    double buffer = 0.50;  // C^(n)
    int64_t gap = 0;       // G^(n), iterations since last swap of this pair
    int64_t attempts = 0;  // swap tests performed
    int64_t swaps = 0;     // accepted swaps
};

struct SwapEvent {
    int64_t iteration;
    int pair; // 1-based lower chain index
    double loss_lo, loss_hi, buffer;
    bool swapped;
};

struct SwapController {
    std::vector<PairStats> pairs;
    int64_t iteration = 0;
    std::vector<SwapEvent> events; // appended on every attempt; caller may drain

    static SwapController make(const SamplerConfig& cfg);
    double swap_rate(int pair) const {
        const PairStats& p = pairs[static_cast<size_t>(pair)];
        return p.attempts ? double(p.swaps) / double(p.attempts) : 0.0;
    }
};

// ceil((ln Nc + ln ln Nc) / (-ln(1 - S)))
int min_window(int n_chains, double target_rate);

// geometric ladder between the endpoints; n = 1 returns {lo}
std::vector<double> geometric_ladder(double lo, double hi, int n);

// one-cycle cosine decay to 1% of the initial rate
double cosine_lr(double eta0, int64_t epoch, int64_t total_epochs);

// gamma_i = min(0.5, 100 / (i^0.8 + 100))
double buffer_step(int64_t i);

// theta' = theta - lr * grad + sqrt(2 lr tau) * eps
void sgld_step(ChainState& c, const std::vector<double>& grad, double lr, double temperature);

// Adam-style drift added to the raw gradient; no bias correction of the moments.
void adaptive_drift_step(ChainState& c, const std::vector<double>& grad, double lr,
                         double temperature, const SamplerConfig& cfg);

// Even-odd deterministic swap pass. Losses are the current-minibatch losses per
// chain; only parameter vectors are exchanged (moments and rng streams stay
// with the temperature slot). Increments the controller iteration.
void attempt_swaps(std::vector<ChainState>& chains, SwapController& ctl,
                   const std::vector<double>& losses, const SamplerConfig& cfg);

// Eq.-style correction-buffer update for one attempt of pair `n` (0-based
// index into ctl.pairs); `indicator` is the swap event. Uses the pair's
// attempt counter as the step index.
void update_buffer(SwapController& ctl, int pair, bool indicator, const SamplerConfig& cfg);

// loss_and_grad(chain_index, theta, grad_out) -> minibatch loss
using LossGradFn = std::function<double(int, const std::vector<double>&, std::vector<double>&)>;

// One replica-exchange iteration: per-chain adaptive-drift updates on a shared
// minibatch followed by the swap pass. `lrs` are the per-chain learning rates
// for this iteration. Returns the per-chain losses that fed the swap test.
std::vector<double> resgld_step(std::vector<ChainState>& chains, SwapController& ctl,
                                const LossGradFn& loss_and_grad, const SamplerConfig& cfg,
                                const std::vector<double>& lrs);

// Pointwise ensemble mean and 95% band (mean +/- 1.96 sample standard
// deviation) over prediction tensors of identical shape.
struct UncertaintyBand {
    Tensor mean, lower, upper;
};
UncertaintyBand predict_with_uncertainty(const std::vector<Tensor>& ensemble_predictions);

} // namespace mflap::resgld

#endif
