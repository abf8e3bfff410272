#ifndef MFLAP_MF_HPP
#define MFLAP_MF_HPP

#include "mflap/lno.hpp"

#include <optional>

namespace mflap::mf {

struct LossSpec {
    double p = 2.0;      // norm order
    double lambda = 1.0; // phase weight: 1 trains the LF operator, 0 the correctors
};

// Per-channel range normalization to [0,1], fitted on training statistics.
struct RangeMap {
    std::vector<double> lo, hi;

    static RangeMap fit(const Tensor& samples, int64_t channels);
    void encode(Tensor& t) const;
    void decode(Tensor& t) const;
};

// Paired low/high fidelity data. Tensors are stacked sample-major:
// [N, grid..., channels], stored raw (normalization is applied by trainers).
struct FidelityDataset {
    std::string task;
    lno::GridSpec lf_grid, hf_grid;
    int64_t in_channels = 1, out_channels = 1;
    Tensor lf_train_in, lf_train_out;
    Tensor hf_train_in, hf_train_out;
    Tensor lf_test_in, lf_test_out;
    Tensor hf_test_in, hf_test_out;
    std::optional<RangeMap> norm_in, norm_out;
    std::vector<int64_t> hf_subset; // indices of LF-train solutions reused as HF train
    std::vector<double> test_amplitudes;
    uint64_t seed = 0;

    int64_t n_lf_train() const { return lf_train_in.shape.empty() ? 0 : lf_train_in.shape[0]; }
    int64_t n_hf_train() const { return hf_train_in.shape.empty() ? 0 : hf_train_in.shape[0]; }
    int64_t n_lf_test() const { return lf_test_in.shape.empty() ? 0 : lf_test_in.shape[0]; }
    int64_t n_hf_test() const { return hf_test_in.shape.empty() ? 0 : hf_test_in.shape[0]; }
    void check() const;
};

// ||pred - target||_p / ||target||_p over all grid points and channels.
double relative_lp_loss(const Tensor& pred, const Tensor& target, double p);

// The three-operator multi-fidelity model with the learnable blend weight.
// alpha is stored as a logit and squashed to (0,1).
struct MFModel {
    lno::LNOConfig cfg_lf, cfg_lin, cfg_nl;
    lno::GridSpec lf_grid, hf_grid;
    lno::ParamStore p_lf, p_lin, p_nl;
    double alpha_logit = 0.0;

    double alpha() const { return 1.0 / (1.0 + std::exp(-alpha_logit)); }
};

// u_hat = alpha * G_l([f, G_L(f)]) + (1-alpha) * G_nl([f, G_L(f)]) at f's grid
lno::FunctionSample mf_forward(const MFModel& model, const lno::FunctionSample& f);

// Corrector input: channel-concatenated [f, G_L(f)].
lno::FunctionSample mf_corrector_input(const MFModel& model, const lno::FunctionSample& f);

// ---------------------------------------------------------------------------
// Graph builders used by the trainers. Losses are emitted as the SUM of
// per-sample relative-Lp losses over the bound micro-batch; callers divide by
// the full batch size when accumulating.
//
// Leaves: "__x" (input), "__u" (target), "__tn" (precomputed per-sample
// target norms, shape [B]) plus the operator parameter leaves.

struct LossGraph {
    ad::Graph graph;
    int64_t micro_batch = 0;
    std::vector<int64_t> in_shape, out_shape; // including batch axis
};

LossGraph build_operator_loss_graph(const lno::LNOConfig& cfg, const lno::GridSpec& grid,
                                    int64_t micro_batch, double p);

// Corrector pair + alpha blend; input "__x" carries the concatenated
// [f, G_L(f)] channels. Parameter prefixes: "gl." and "gnl.", alpha leaf
// "alpha.logit" (shape [1]).
LossGraph build_mf_loss_graph(const lno::LNOConfig& cfg_lin, const lno::LNOConfig& cfg_nl,
                              const lno::GridSpec& grid, int64_t micro_batch, double p);

struct EvalGraph {
    ad::Graph graph;
    int64_t micro_batch = 0;
};

EvalGraph build_operator_eval_graph(const lno::LNOConfig& cfg, const lno::GridSpec& grid,
                                    int64_t micro_batch);
EvalGraph build_mf_eval_graph(const lno::LNOConfig& cfg_lin, const lno::LNOConfig& cfg_nl,
                              const lno::GridSpec& grid, int64_t micro_batch);

// per-sample target norms ||u_j||_p, errors on a zero-norm target
Tensor target_norms(const Tensor& stacked_targets, double p);

// copy sample slices `idx` из a stacked tensor into a [B, ...] staging tensor
void gather_samples(const Tensor& stacked, const std::vector<int64_t>& idx, Tensor& out);

} // namespace mflap::mf

#endif
