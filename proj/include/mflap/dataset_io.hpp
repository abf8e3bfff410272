#ifndef MFLAP_DATASET_IO_HPP
#define MFLAP_DATASET_IO_HPP

#include "mflap/config.hpp"

#include <filesystem>

namespace mflap::harness {

// FNV-1a over the raw bytes
uint64_t checksum_bytes(const void* data, size_t len);

void write_tensor_file(const std::filesystem::path& p, const Tensor& t);
Tensor read_tensor_file(const std::filesystem::path& p, const std::vector<int64_t>& shape,
                        uint64_t expect_checksum);

// Dataset container: manifest.json plus one little-endian float64 row-major
// binary per tensor, each checksummed in the manifest.
void save_dataset(const mf::FidelityDataset& ds, const systems::DatasetRecipe& recipe,
                  const std::filesystem::path& dir);
mf::FidelityDataset load_dataset(const std::filesystem::path& dir);

} // namespace mflap::harness

#endif
