#include "mflap/checkpoint.hpp"

#include "mflap/dataset_io.hpp"

#include <fstream>

namespace mflap::harness {

namespace fs = std::filesystem;

namespace {

void append_flat(std::vector<double>& sink, const std::vector<double>& v) {
    sink.insert(sink.end(), v.begin(), v.end());
}

} // namespace

void save_checkpoint(const Checkpoint& c, const fs::path& dir) {
    fs::create_directories(dir);
    std::vector<double> blob;
    json tensors = json::array();
    int64_t off = 0;
    for (auto& [name, t] : c.params.items) {
        tensors.push_back(json{{"name", name},
                               {"shape", t.shape},
                               {"dtype", dtype_name(t.dtype)},
                               {"offset", off},
                               {"count", static_cast<int64_t>(t.buf.size())}});
        append_flat(blob, t.buf);
        off += static_cast<int64_t>(t.buf.size());
    }
    json chains = json::array();
    for (size_t i = 0; i < c.chain_theta.size(); ++i) {
        chains.push_back(json{{"theta_offset", off}, {"size", c.chain_theta[i].size()},
                              {"temperature", c.chain_temp[i]}, {"base_lr", c.chain_lr[i]},
                              {"rng", c.chain_rng[i]}});
        append_flat(blob, c.chain_theta[i]);
        off += static_cast<int64_t>(c.chain_theta[i].size());
        append_flat(blob, c.chain_m[i]);
        off += static_cast<int64_t>(c.chain_m[i].size());
        append_flat(blob, c.chain_v[i]);
        off += static_cast<int64_t>(c.chain_v[i].size());
    }
    json ens = json::array();
    for (const auto& e : c.ensemble) {
        ens.push_back(json{{"offset", off}, {"size", e.size()}});
        append_flat(blob, e);
        off += static_cast<int64_t>(e.size());
    }
    Tensor blob_t = Tensor::from({static_cast<int64_t>(blob.size())}, blob);
    write_tensor_file(dir / "params.bin", blob_t);

    json m{{"format", "mflap-checkpoint"},
           {"version", 1},
           {"kind", c.kind},
           {"phase", c.phase},
           {"epochs_done", c.epochs_done},
           {"config", c.config_echo},
           {"lf_grid", grid_to_json(c.lf_grid)},
           {"hf_grid", grid_to_json(c.hf_grid)},
           {"tensors", tensors},
           {"chains", chains},
           {"pairs", json{{"buffer", c.pair_buffer},
                          {"gap", c.pair_gap},
                          {"attempts", c.pair_attempts},
                          {"swaps", c.pair_swaps}}},
           {"iteration", c.iteration},
           {"loader_rng", c.loader_rng},
           {"ensemble", ens},
           {"blob_checksum", checksum_bytes(blob.data(), blob.size() * sizeof(double))},
           {"blob_count", static_cast<int64_t>(blob.size())}};
    std::ofstream os(dir / "manifest.json");
    os << m.dump(2) << "\n";
}

Checkpoint load_checkpoint(const fs::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw Error("no manifest.json under " + dir.string());
    json m = json::parse(is);
    if (m.at("format") != "mflap-checkpoint" || m.at("version") != 1)
        throw Error("unsupported checkpoint version in " + dir.string());
    Checkpoint c;
    c.kind = m.at("kind");
    c.phase = m.at("phase");
    c.epochs_done = m.at("epochs_done");
    c.config_echo = m.at("config");
    c.lf_grid = grid_from_json(m.at("lf_grid"));
    c.hf_grid = grid_from_json(m.at("hf_grid"));
    const int64_t count = m.at("blob_count");
    Tensor blob = read_tensor_file(dir / "params.bin", {count}, m.at("blob_checksum").get<uint64_t>());

    for (const json& e : m.at("tensors")) {
        std::vector<int64_t> shape = e.at("shape").get<std::vector<int64_t>>();
        std::string dt = e.at("dtype");
        Tensor t = dt == "complex128" ? Tensor::complex(shape) : Tensor::real(shape);
        const int64_t off = e.at("offset");
        const int64_t n = e.at("count");
        if (static_cast<int64_t>(t.buf.size()) != n)
            throw Error("checkpoint tensor count mismatch for '" + std::string(e.at("name")) + "'");
        std::copy(blob.buf.begin() + off, blob.buf.begin() + off + n, t.buf.begin());
        c.params.add(e.at("name"), std::move(t));
    }
    for (const json& e : m.at("chains")) {
        const int64_t off = e.at("theta_offset");
        const int64_t n = static_cast<int64_t>(e.at("size").get<size_t>());
        auto grab = [&](int64_t o) {
            return std::vector<double>(blob.buf.begin() + o, blob.buf.begin() + o + n);
        };
        c.chain_theta.push_back(grab(off));
        c.chain_m.push_back(grab(off + n));
        c.chain_v.push_back(grab(off + 2 * n));
        c.chain_temp.push_back(e.at("temperature"));
        c.chain_lr.push_back(e.at("base_lr"));
        c.chain_rng.push_back(e.at("rng"));
    }
    c.pair_buffer = m.at("pairs").at("buffer").get<std::vector<double>>();
    c.pair_gap = m.at("pairs").at("gap").get<std::vector<int64_t>>();
    c.pair_attempts = m.at("pairs").at("attempts").get<std::vector<int64_t>>();
    c.pair_swaps = m.at("pairs").at("swaps").get<std::vector<int64_t>>();
    c.iteration = m.at("iteration");
    c.loader_rng = m.at("loader_rng");
    for (const json& e : m.at("ensemble")) {
        const int64_t off = e.at("offset");
        const int64_t n = static_cast<int64_t>(e.at("size").get<size_t>());
        c.ensemble.emplace_back(blob.buf.begin() + off, blob.buf.begin() + off + n);
    }
    return c;
}

} // namespace mflap::harness
