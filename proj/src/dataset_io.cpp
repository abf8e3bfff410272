#include "mflap/dataset_io.hpp"

#include <fstream>

namespace mflap::harness {

namespace fs = std::filesystem;

uint64_t checksum_bytes(const void* data, size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    uint64_t h = 1469598103934665603ULL;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

void write_tensor_file(const fs::path& p, const Tensor& t) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot write " + p.string());
    os.write(reinterpret_cast<const char*>(t.buf.data()),
             static_cast<std::streamsize>(t.buf.size() * sizeof(double)));
    if (!os) throw Error("short write to " + p.string());
}

Tensor read_tensor_file(const fs::path& p, const std::vector<int64_t>& shape,
                        uint64_t expect_checksum) {
    Tensor t = Tensor::real(shape);
    std::ifstream is(p, std::ios::binary);
    if (!is) throw Error("cannot read " + p.string());
    is.read(reinterpret_cast<char*>(t.buf.data()),
            static_cast<std::streamsize>(t.buf.size() * sizeof(double)));
    if (is.gcount() != static_cast<std::streamsize>(t.buf.size() * sizeof(double)))
        throw Error("tensor file " + p.string() + " does not match the manifest shape");
    char extra;
    if (is.read(&extra, 1))
        throw Error("tensor file " + p.string() + " does not match the manifest shape");
    const uint64_t sum = checksum_bytes(t.buf.data(), t.buf.size() * sizeof(double));
    if (sum != expect_checksum)
        throw Error("checksum mismatch in " + p.string());
    return t;
}

namespace {

json tensor_entry(const std::string& name, const Tensor& t) {
    return json{{"name", name},
                {"shape", t.shape},
                {"dtype", "real64"},
                {"file", name + ".bin"},
                {"checksum", checksum_bytes(t.buf.data(), t.buf.size() * sizeof(double))}};
}

} // namespace

void save_dataset(const mf::FidelityDataset& ds, const systems::DatasetRecipe& recipe,
                  const fs::path& dir) {
    fs::create_directories(dir / "tensors");
    const std::pair<std::string, const Tensor*> all[] = {
        {"lf_train_in", &ds.lf_train_in},   {"lf_train_out", &ds.lf_train_out},
        {"hf_train_in", &ds.hf_train_in},   {"hf_train_out", &ds.hf_train_out},
        {"lf_test_in", &ds.lf_test_in},     {"lf_test_out", &ds.lf_test_out},
        {"hf_test_in", &ds.hf_test_in},     {"hf_test_out", &ds.hf_test_out},
    };
    json tensors = json::array();
    for (auto& [name, t] : all) {
        write_tensor_file(dir / "tensors" / (name + ".bin"), *t);
        tensors.push_back(tensor_entry(name, *t));
    }
    json m{{"format", "mflap-dataset"},
           {"version", 1},
           {"task", ds.task},
           {"seed", ds.seed},
           {"recipe", recipe_to_json(recipe)},
           {"lf_grid", grid_to_json(ds.lf_grid)},
           {"hf_grid", grid_to_json(ds.hf_grid)},
           {"in_channels", ds.in_channels},
           {"out_channels", ds.out_channels},
           {"hf_subset", ds.hf_subset},
           {"test_amplitudes", ds.test_amplitudes},
           {"tensors", tensors}};
    if (ds.norm_in) m["norm_in"] = json{{"lo", ds.norm_in->lo}, {"hi", ds.norm_in->hi}};
    if (ds.norm_out) m["norm_out"] = json{{"lo", ds.norm_out->lo}, {"hi", ds.norm_out->hi}};
    std::ofstream os(dir / "manifest.json");
    os << m.dump(2) << "\n";
}

mf::FidelityDataset load_dataset(const fs::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw Error("no manifest.json under " + dir.string());
    json m = json::parse(is);
    if (m.at("format") != "mflap-dataset" || m.at("version") != 1)
        throw Error("unsupported dataset version in " + dir.string());
    mf::FidelityDataset ds;
    ds.task = m.at("task");
    ds.seed = m.at("seed");
    ds.lf_grid = grid_from_json(m.at("lf_grid"));
    ds.hf_grid = grid_from_json(m.at("hf_grid"));
    ds.in_channels = m.at("in_channels");
    ds.out_channels = m.at("out_channels");
    ds.hf_subset = m.at("hf_subset").get<std::vector<int64_t>>();
    ds.test_amplitudes = m.at("test_amplitudes").get<std::vector<double>>();
    if (m.contains("norm_in")) {
        mf::RangeMap r;
        r.lo = m["norm_in"].at("lo").get<std::vector<double>>();
        r.hi = m["norm_in"].at("hi").get<std::vector<double>>();
        ds.norm_in = r;
    }
    if (m.contains("norm_out")) {
        mf::RangeMap r;
        r.lo = m["norm_out"].at("lo").get<std::vector<double>>();
        r.hi = m["norm_out"].at("hi").get<std::vector<double>>();
        ds.norm_out = r;
    }
    std::map<std::string, Tensor*> slots{
        {"lf_train_in", &ds.lf_train_in},   {"lf_train_out", &ds.lf_train_out},
        {"hf_train_in", &ds.hf_train_in},   {"hf_train_out", &ds.hf_train_out},
        {"lf_test_in", &ds.lf_test_in},     {"lf_test_out", &ds.lf_test_out},
        {"hf_test_in", &ds.hf_test_in},     {"hf_test_out", &ds.hf_test_out},
    };
    for (const json& e : m.at("tensors")) {
        auto it = slots.find(e.at("name"));
        if (it == slots.end()) throw Error("unknown tensor '" + std::string(e.at("name")) + "'");
        *it->second = read_tensor_file(dir / "tensors" / std::string(e.at("file")),
                                       e.at("shape").get<std::vector<int64_t>>(),
                                       e.at("checksum").get<uint64_t>());
    }
    ds.check();
    return ds;
}

} // namespace mflap::harness
