#ifndef MFLAP_TRAINER_HPP
#define MFLAP_TRAINER_HPP

#include "mflap/mf.hpp"
#include "mflap/resgld.hpp"

namespace mflap::train {

struct PhaseRecipe {
    int64_t epochs = 2000;
    int64_t batch = 50;
    resgld::SamplerConfig sampler;
    int64_t ensemble_interval = 100;
    int ensemble_size = 10;
};

struct EpochLossRow {
    int64_t epoch;
    std::vector<double> chain_losses; // epoch-mean per chain
};

struct PhaseDiagnostics {
    std::vector<EpochLossRow> losses;
    std::vector<resgld::SwapEvent> swap_events;
    std::vector<double> final_chain_losses;
};

// Trains one parameter layout against stacked (inputs, targets) with
// replica-exchange adaptive-drift SGLD. All chains start from the same
// initial parameters and see the same shuffled minibatches; the lowest
// temperature chain provides the result and the tail ensemble.
class OperatorTrainer {
  public:
    OperatorTrainer(mf::LossGraph graph, lno::ParamStore layout, const Tensor& inputs,
                    const Tensor& targets, PhaseRecipe recipe, double p, uint64_t seed);

    void run_epochs(int64_t upto);           // advance training to `upto` completed epochs
    void run_all() { run_epochs(recipe_.epochs); }

    int64_t epochs_done() const { return epoch_; }
    const PhaseRecipe& recipe() const { return recipe_; }
    std::vector<double> cold_theta() const { return chains_[0].theta; }
    const std::vector<std::vector<double>>& ensemble() const { return ensemble_; }
    PhaseDiagnostics& diagnostics() { return diag_; }
    std::vector<resgld::ChainState>& chains() { return chains_; }
    resgld::SwapController& controller() { return ctl_; }
    Rng& loader_rng() { return loader_; }
    lno::ParamStore& layout() { return params_; }
    std::vector<std::vector<double>>& ensemble_mut() { return ensemble_; }
    void set_epochs_done(int64_t e) { epoch_ = e; }

  private:
    mf::LossGraph graph_;
    lno::ParamStore params_; // binding workspace; defines the flat layout
    const Tensor* inputs_;
    const Tensor* targets_;
    Tensor norms_;
    PhaseRecipe recipe_;
    double p_;
    Rng loader_;
    std::vector<resgld::ChainState> chains_;
    resgld::SwapController ctl_;
    std::vector<std::vector<double>> ensemble_;
    PhaseDiagnostics diag_;
    int64_t epoch_ = 0;
    Tensor staged_in_, staged_out_, staged_norms_;
    Tensor cot_;

    double loss_and_grad(int chain, const std::vector<double>& theta, std::vector<double>& grad);
};

// Batched forward over a stacked input tensor; returns stacked predictions.
Tensor predict_stacked(const lno::LNOConfig& cfg, const lno::GridSpec& grid,
                       const lno::ParamStore& params, const Tensor& inputs);

Tensor predict_stacked_mf(const mf::MFModel& model, const Tensor& corrector_inputs);

// Corrector inputs [f, G_L(f)] for a stacked HF input tensor.
Tensor corrector_inputs(const lno::LNOConfig& cfg_lf, const lno::GridSpec& grid,
                        const lno::ParamStore& p_lf, const Tensor& hf_inputs);

std::vector<double> per_sample_losses(const Tensor& preds, const Tensor& targets, double p);

struct MFSnapshot {
    lno::ParamStore p_lin, p_nl;
    double alpha_logit = 0.0;
};

struct MFTrainResult {
    mf::MFModel model;
    std::vector<MFSnapshot> ensemble;
    PhaseDiagnostics phase1, phase2;
    double wall_seconds = 0;
};

struct TwoPhaseRecipe {
    PhaseRecipe phase1, phase2;
    double p = 2.0;
};

// Phase 1 fits G_L on LF pairs; phase 2 freezes it and fits the correctors
// and blend weight on HF pairs with freshly initialized chains.
MFTrainResult train_two_phase(const mf::MFModel& proto, const mf::FidelityDataset& ds,
                              const TwoPhaseRecipe& recipe, uint64_t seed);

enum class BaselineKind { LF, HF, Mix };
const char* baseline_name(BaselineKind k);

struct TrainedOperator {
    lno::LNOConfig cfg;
    lno::GridSpec grid;
    lno::ParamStore params;
    std::vector<lno::ParamStore> ensemble;
    PhaseDiagnostics diag;
    double wall_seconds = 0;
};

// Baselines share the G_L architecture. LF trains on LF pairs with the
// phase-1 recipe, HF on HF pairs with the phase-2 recipe, Mix on both sets
// (batches grouped by resolution within each epoch).
TrainedOperator train_baseline(BaselineKind kind, const lno::LNOConfig& cfg,
                               const mf::FidelityDataset& ds, const TwoPhaseRecipe& recipe,
                               uint64_t seed);

} // namespace mflap::train

#endif
