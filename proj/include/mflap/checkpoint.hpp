#ifndef MFLAP_CHECKPOINT_HPP
#define MFLAP_CHECKPOINT_HPP

#include "mflap/config.hpp"

#include <filesystem>

namespace mflap::harness {

// Full training checkpoint: model parameters (all three operators + alpha),
// sampler chain states, swap-controller buffers, loader rng, and the tail
// ensemble. Tensors live in a single params.bin addressed by the manifest.
struct Checkpoint {
    json config_echo;
    std::string kind = "mf"; // "mf" or "operator"
    int phase = 2;
    int64_t epochs_done = 0;
    lno::ParamStore params; // every named tensor, including "alpha.logit"
    lno::GridSpec lf_grid, hf_grid;

    std::vector<std::vector<double>> chain_theta, chain_m, chain_v;
    std::vector<double> chain_temp, chain_lr;
    std::vector<std::string> chain_rng;

    std::vector<double> pair_buffer;
    std::vector<int64_t> pair_gap, pair_attempts, pair_swaps;
    int64_t iteration = 0;
    std::string loader_rng;

    std::vector<std::vector<double>> ensemble; // flat phase-2 snapshots
};

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

} // namespace mflap::harness

#endif
