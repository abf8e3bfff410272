#ifndef MFLAP_LNO_HPP
#define MFLAP_LNO_HPP

#include "mflap/graph.hpp"
#include "mflap/grid.hpp"
#include "mflap/rng.hpp"

#include <cstdint>
#include <optional>

namespace mflap::lno {

// Trainable Laplace-domain kernel K(s) = sum_n beta_n / (s - mu_n), one pole
// set per (input channel, output channel, retained spatial mode).
struct PoleResidueKernel {
    int c_in = 1, c_out = 1, n_modes = 1;
    std::vector<int> spatial_cut; // per grid axis, time axis entry ignored
    Tensor poles;                 // complex [c_in, c_out, S, n_modes]
    Tensor residues;              // complex, same shape

    int spatial_combos(const GridSpec& g) const {
        int s = 1;
        for (int a = 0; a < g.rank(); ++a)
            if (a != g.time_axis) s *= spatial_cut[static_cast<size_t>(a)];
        return s;
    }
};

enum class Activation { Sine, Relu, None };

const char* activation_name(Activation a);
Activation activation_from(const std::string& s);

struct LNOConfig {
    int in_channels = 1;
    int out_channels = 1;
    int lift_layers = 1;
    int lift_width = 3;
    int laplace_layers = 1;
    int laplace_width = 3;
    int laplace_modes = 8;
    int linear_path_layers = 1;
    int linear_path_width = 3;
    int projection_layers = 2;
    int projection_width = 128;
    Activation activation = Activation::Sine;

    // The linear variant (activation == None) is built without bias terms so
    // that it is an exactly linear map (superposition to roundoff).
    bool linear() const { return activation == Activation::None; }
    void validate() const;
};

// Ordered named parameter set; order defines the flat layout used by samplers.
struct ParamStore {
    std::vector<std::pair<std::string, Tensor>> items;

    void add(std::string name, Tensor t);
    Tensor* find(const std::string& name);
    const Tensor* find(const std::string& name) const;
    void merge(const ParamStore& other);
    int64_t flat_size() const; // complex tensors count 2 doubles per element
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
    ad::Graph::Bindings bindings() const;
};

// Declares parameter leaves named <prefix>... in g and wires the LNO forward
// pass from input node x (shape [B, grid..., in_channels]); returns the output
// node. `trainable`/`frozen` set the leaf gradient flags.
int build_lno(ad::Graph& g, const LNOConfig& cfg, const GridSpec& grid, int x,
              const std::string& prefix, bool trainable, bool frozen = false);

// Paper initialization: Laplace-layer parameters uniform on [0,1] (pole real
// parts negated for decaying transients), Kaiming for affine weights, zero
// biases. Deterministic in `seed`.
ParamStore init_params(const LNOConfig& cfg, const GridSpec& grid, uint64_t seed,
                       const std::string& prefix = "");

// gamma_n = beta_n * V(mu_n), V(mu_n) = sum_l alpha_l / (mu_n - i w_l)
Tensor kernel_transient_residues(const PoleResidueKernel& k, const SpectralRepresentation& spec);
// lambda_l = alpha_l * K(i w_l), K(i w_l) = sum_n beta_n / (i w_l - mu_n)
Tensor kernel_steady_residues(const PoleResidueKernel& k, const SpectralRepresentation& spec);

FunctionSample laplace_layer_forward(const FunctionSample& v, const PoleResidueKernel& k);

FunctionSample lno_forward(const LNOConfig& cfg, const ParamStore& params,
                           const FunctionSample& f, const std::string& prefix = "");

ad::PrConvSpec pr_spec_for(const LNOConfig& cfg, const GridSpec& grid, int c_in, int c_out);

} // namespace mflap::lno

#endif
