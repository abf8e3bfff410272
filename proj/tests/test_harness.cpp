#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mflap/report.hpp"

#include <fstream>

using namespace mflap;
using namespace mflap::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("mflap_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

mf::FidelityDataset tiny_dataset(uint64_t seed) {
    systems::DatasetRecipe r = systems::DatasetRecipe::preset(systems::Task::Lorenz);
    r.n_lf_train = 8;
    r.n_hf_train = 2;
    r.n_lf_test = 3;
    r.n_hf_test = 3;
    return systems::build_dataset(r, seed);
}

} // namespace

TEST_CASE("dataset save/load round-trips bitwise") {
    fs::path dir = scratch_dir("ds");
    systems::DatasetRecipe r = systems::DatasetRecipe::preset(systems::Task::Lorenz);
    r.n_lf_train = 8;
    r.n_hf_train = 2;
    r.n_lf_test = 3;
    r.n_hf_test = 3;
    mf::FidelityDataset ds = systems::build_dataset(r, 5);
    save_dataset(ds, r, dir);
    mf::FidelityDataset back = load_dataset(dir);
    CHECK(back.lf_train_in.buf == ds.lf_train_in.buf);
    CHECK(back.hf_test_out.buf == ds.hf_test_out.buf);
    CHECK(back.hf_subset == ds.hf_subset);
    CHECK(back.test_amplitudes == ds.test_amplitudes);

    // regenerating with the same seed gives byte-identical files
    fs::path dir2 = scratch_dir("ds2");
    save_dataset(systems::build_dataset(r, 5), r, dir2);
    for (const char* f : {"manifest.json", "tensors/hf_train_out.bin"}) {
        std::ifstream a(dir / f, std::ios::binary), b(dir2 / f, std::ios::binary);
        std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
    }
}

TEST_CASE("corrupted tensor bytes fail the checksum on load") {
    fs::path dir = scratch_dir("dscorrupt");
    systems::DatasetRecipe r = systems::DatasetRecipe::preset(systems::Task::Lorenz);
    r.n_lf_train = 8;
    r.n_hf_train = 2;
    r.n_lf_test = 3;
    r.n_hf_test = 3;
    save_dataset(systems::build_dataset(r, 5), r, dir);
    {
        std::fstream f(dir / "tensors" / "lf_train_out.bin",
                       std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(128);
        char byte = 0x5c;
        f.write(&byte, 1);
    }
    CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains("checksum"), Error);
}

TEST_CASE("experiment config round-trips losslessly through json") {
    for (auto task : {systems::Task::Lorenz, systems::Task::Duffing, systems::Task::Burgers,
                      systems::Task::Brusselator, systems::Task::LorenzNonlinear}) {
        ExperimentConfig c = ExperimentConfig::preset(task);
        c.seed = 424242;
        c.recipe.phase1.sampler.eta_lo = 3.14159e-5;
        json j = c.to_json();
        ExperimentConfig back = ExperimentConfig::from_json(j);
        CHECK(back.to_json().dump() == j.dump());
    }
}

TEST_CASE("checkpoint round-trips, including chain and controller state") {
    fs::path dir = scratch_dir("ckpt");
    ExperimentConfig cfg = ExperimentConfig::preset(systems::Task::Lorenz);
    Checkpoint c;
    c.kind = "mf";
    c.config_echo = cfg.to_json();
    c.phase = 2;
    c.epochs_done = 123;
    c.lf_grid = cfg.dataset.lf_grid;
    c.hf_grid = cfg.dataset.hf_grid;
    Rng rng(3);
    Tensor w = Tensor::real({4, 3});
    for (auto& v : w.buf) v = rng.normal();
    Tensor mu = Tensor::complex({1, 1, 1, 2});
    mu.cat(0) = cxd(-0.5, 1.5);
    mu.cat(1) = cxd(-0.2, 0.7);
    c.params.add("w", w);
    c.params.add("blk0.mu", mu);
    c.chain_theta = {{1.0, 2.0}, {3.0, 4.0}};
    c.chain_m = {{0.1, 0.2}, {0.3, 0.4}};
    c.chain_v = {{0.01, 0.02}, {0.03, 0.04}};
    c.chain_temp = {1e-5, 1e-4};
    c.chain_lr = {5e-6, 5e-4};
    c.chain_rng = {rng.serialize(), rng.serialize()};
    c.pair_buffer = {0.45};
    c.pair_gap = {17};
    c.pair_attempts = {10};
    c.pair_swaps = {1};
    c.iteration = 999;
    c.loader_rng = rng.serialize();
    c.ensemble = {{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}};
    save_checkpoint(c, dir);

    Checkpoint b = load_checkpoint(dir);
    CHECK(b.epochs_done == 123);
    CHECK(b.params.find("w")->buf == w.buf);
    CHECK(b.params.find("blk0.mu")->cat(1) == mu.cat(1));
    CHECK(b.chain_theta == c.chain_theta);
    CHECK(b.chain_m == c.chain_m);
    CHECK(b.chain_v == c.chain_v);
    CHECK(b.pair_buffer == c.pair_buffer);
    CHECK(b.pair_gap == c.pair_gap);
    CHECK(b.iteration == 999);
    CHECK(b.loader_rng == c.loader_rng);
    CHECK(b.ensemble == c.ensemble);
}

TEST_CASE("report aggregation equals a direct recomputation") {
    std::vector<RunRecord> recs;
    std::vector<double> losses{1e-3, 2e-3, 1.5e-3, 0.8e-3};
    for (double l : losses) {
        RunRecord r;
        r.task = "lorenz";
        r.config_echo = json::object();
        r.methods.push_back({"mf", l, l, {}});
        recs.push_back(r);
    }
    auto rows = aggregate(recs);
    REQUIRE(rows.size() == 1);
    double mean = 0;
    for (double l : losses) mean += l;
    mean /= double(losses.size());
    double var = 0;
    for (double l : losses) var += (l - mean) * (l - mean);
    var /= double(losses.size() - 1);
    CHECK(std::abs(rows[0].mean_loss - mean) < 1e-12);
    CHECK(std::abs(rows[0].std_loss - std::sqrt(var)) < 1e-12);
}

TEST_CASE("run records serialize and parse back") {
    RunRecord r;
    r.task = "duffing";
    r.seed = 9;
    r.config_echo = json{{"x", 1}};
    r.methods.push_back({"mf", 1.5e-3, 1.6e-3, {1e-3, 2e-3}});
    r.coverage95 = 0.91;
    r.alpha = 0.48;
    r.wall_seconds = 12.5;
    RunRecord b = RunRecord::from_json(r.to_json());
    CHECK(b.task == "duffing");
    CHECK(b.find("mf")->per_sample == r.find("mf")->per_sample);
    CHECK(b.coverage95 == r.coverage95);
}

TEST_CASE("interval plot data keeps the band ordered around the mean") {
    fs::path dir = scratch_dir("plot");
    mf::FidelityDataset ds = tiny_dataset(3);
    const int64_t n = ds.n_hf_test(), m = ds.hf_grid.axis_lengths[0];
    Tensor mean = Tensor::real({n, m, 1}), lo = mean, hi = mean;
    Rng rng(2);
    for (int64_t i = 0; i < mean.numel(); ++i) {
        mean.at(i) = rng.normal();
        lo.at(i) = mean.at(i) - std::abs(rng.normal());
        hi.at(i) = mean.at(i) + std::abs(rng.normal());
    }
    emit_plotdata_intervals(ds, mean, lo, hi, 6, 1, dir / "intervals.csv");
    std::ifstream is(dir / "intervals.csv");
    std::string header;
    std::getline(is, header);
    CHECK(header == "sample_id,t,ground_truth,lf_value,prediction,ci_lower,ci_upper");
    int rows = 0;
    std::string line;
    while (std::getline(is, line)) {
        double v[7];
        sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3], &v[4],
               &v[5], &v[6]);
        CHECK(v[5] <= v[4]);
        CHECK(v[4] <= v[6]);
        ++rows;
    }
    CHECK(rows == 3 * m); // only 3 test cases exist
}

TEST_CASE("error plot data columns are nonnegative") {
    fs::path dir = scratch_dir("plot2");
    mf::FidelityDataset ds = tiny_dataset(4);
    const int64_t n = ds.n_hf_test(), m = ds.hf_grid.axis_lengths[0];
    Tensor a = Tensor::real({n, m, 1}), b = a, c = a;
    Rng rng(5);
    for (int64_t i = 0; i < a.numel(); ++i) {
        a.at(i) = rng.normal();
        b.at(i) = rng.normal();
        c.at(i) = rng.normal();
    }
    emit_plotdata_errors(ds, a, b, c, 2, 1, dir / "errors.csv");
    std::ifstream is(dir / "errors.csv");
    std::string line;
    std::getline(is, line);
    int rows = 0;
    while (std::getline(is, line)) {
        double sid, t, truth, pred, e1, e2, e3;
        sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf", &sid, &t, &truth, &pred, &e1, &e2, &e3);
        CHECK(e1 >= 0.0);
        CHECK(e2 >= 0.0);
        CHECK(e3 >= 0.0);
        ++rows;
    }
    CHECK(rows == 2 * m);
}

TEST_CASE("dataset manifest version mismatch is rejected") {
    fs::path dir = scratch_dir("dsver");
    systems::DatasetRecipe r = systems::DatasetRecipe::preset(systems::Task::Lorenz);
    r.n_lf_train = 8;
    r.n_hf_train = 2;
    r.n_lf_test = 3;
    r.n_hf_test = 3;
    save_dataset(systems::build_dataset(r, 5), r, dir);
    {
        std::ifstream is(dir / "manifest.json");
        json m = json::parse(is);
        is.close();
        m["version"] = 99;
        std::ofstream os(dir / "manifest.json");
        os << m.dump(2);
    }
    CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains("version"), Error);
}
