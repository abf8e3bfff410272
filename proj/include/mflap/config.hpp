#ifndef MFLAP_CONFIG_HPP
#define MFLAP_CONFIG_HPP

#include "mflap/systems.hpp"
#include "mflap/trainer.hpp"

#include <json.hpp>

namespace mflap::harness {

using json = nlohmann::ordered_json;

struct ExperimentConfig {
    systems::Task task = systems::Task::Lorenz;
    systems::DatasetRecipe dataset;
    lno::LNOConfig g_lf, g_lin, g_nl;
    train::TwoPhaseRecipe recipe;
    int repeats = 10;
    uint64_t seed = 1;
    bool zero_temperature = false;

    static ExperimentConfig preset(systems::Task t);
    json to_json() const;
    static ExperimentConfig from_json(const json& j);
    void apply_zero_temperature();
};

json grid_to_json(const lno::GridSpec& g);
lno::GridSpec grid_from_json(const json& j);
json lno_to_json(const lno::LNOConfig& c);
lno::LNOConfig lno_from_json(const json& j);
json sampler_to_json(const resgld::SamplerConfig& c);
resgld::SamplerConfig sampler_from_json(const json& j);
json phase_to_json(const train::PhaseRecipe& r);
train::PhaseRecipe phase_from_json(const json& j);
json recipe_to_json(const systems::DatasetRecipe& r);
systems::DatasetRecipe recipe_from_json(const json& j);

} // namespace mflap::harness

#endif
