#ifndef MFLAP_REPORT_HPP
#define MFLAP_REPORT_HPP

#include "mflap/checkpoint.hpp"
#include "mflap/dataset_io.hpp"

namespace mflap::harness {

struct MethodResult {
    std::string method;      // mf | lf | hf | mix
    double mean_loss = 0;    // ensemble predictive-mean loss over the HF test set
    double final_loss = 0;   // final cold-chain parameters only
    std::vector<double> per_sample;
};

struct RunRecord {
    std::string task;
    uint64_t seed = 0;
    json config_echo;
    std::vector<MethodResult> methods;
    double coverage95 = -1.0; // fraction of HF test points inside the 95% band
    double alpha = -1.0;
    double wall_seconds = 0;

    json to_json() const;
    static RunRecord from_json(const json& j);
    const MethodResult* find(const std::string& m) const;
};

struct ReportRow {
    std::string task, method;
    double mean_loss = 0, std_loss = 0;
    int n = 0;
};

std::vector<ReportRow> aggregate(const std::vector<RunRecord>& records);
void write_report_csv(const std::vector<ReportRow>& rows, const std::filesystem::path& file);

void write_epoch_losses_csv(const train::PhaseDiagnostics& d, const std::filesystem::path& file);
void write_swaps_csv(const train::PhaseDiagnostics& d, const std::filesystem::path& file);

// Long-format plot data (intervals for rank-1 tasks, pointwise errors for
// field tasks); `cases` test samples are selected with the record seed.
void emit_plotdata_intervals(const mf::FidelityDataset& ds, const Tensor& pred_mean,
                             const Tensor& band_lo, const Tensor& band_hi, int cases,
                             uint64_t seed, const std::filesystem::path& file);
void emit_plotdata_errors(const mf::FidelityDataset& ds, const Tensor& pred_mf,
                          const Tensor& pred_lf, const Tensor& pred_hf, int cases, uint64_t seed,
                          const std::filesystem::path& file);

// Full single-repeat experiment: two-phase MF training plus baselines,
// evaluated against the HF test set. The phase-1 operator doubles as the LF
// baseline (identical architecture, data, recipe, and seed). Artifacts are
// written under out_dir when it is non-empty.
struct ExperimentOutput {
    RunRecord record;
    mf::MFModel model;
    std::vector<train::MFSnapshot> ensemble;
    Tensor mf_pred_mean, mf_band_lo, mf_band_hi;
};

ExperimentOutput run_experiment(const ExperimentConfig& cfg, const mf::FidelityDataset& ds,
                                uint64_t run_seed, const std::filesystem::path& out_dir,
                                bool with_hf_baseline = true, bool with_mix_baseline = false);

Checkpoint checkpoint_from_mf(const ExperimentConfig& cfg, const mf::MFModel& model,
                              const std::vector<train::MFSnapshot>& ensemble);
mf::MFModel mf_from_checkpoint(const Checkpoint& c, std::vector<train::MFSnapshot>* ensemble);

} // namespace mflap::harness

#endif
