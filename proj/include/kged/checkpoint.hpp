#pragma once

// Flat binary parameter checkpoints:
//   "KGS1"
//   repeated until end of file:
//     u32 name length, name bytes (UTF-8),
//     u32 rank, rank x u64 dims,
//     product(dims) x f64 payload in row-major order
// All integers and floats little-endian.

#include "kged/tensor.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace kged {

struct NamedMatrix {
  std::string name;
  Matrix value;
};

void save_checkpoint(const std::filesystem::path& path, const std::vector<Tensor>& params);
std::vector<NamedMatrix> load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into same-named parameters; every parameter must
// be present with a matching shape.
void restore_checkpoint(const std::filesystem::path& path, std::vector<Tensor>& params);

}  // namespace kged
