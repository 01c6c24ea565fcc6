#pragma once

#include <filesystem>

#include "moelab/model/model.hpp"

namespace moelab::model {

// Binary container, little-endian:
//   8 bytes  magic "MOELABCK"
//   u32      format version (1)
//   u64      header length in bytes
//   header   JSON {"config": {...}, "init_seed": n, "params": [{"name", "shape"}...]}
//   f64[]    parameter values in header order, row-major
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace moelab::model
