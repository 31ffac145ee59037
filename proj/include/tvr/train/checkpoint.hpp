#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "tvr/core/adam.hpp"
#include "tvr/model/eam.hpp"
#include "tvr/train/config.hpp"

namespace tvr {

// Binary layout, little-endian:
//   "TVCK" | u32 version=1 | u64 config hash | u64 step
//   u32 config JSON length | config JSON
//   u32 parameter count | per parameter: name, matrix
//   i64 optimizer step | u32 moment count | per entry: name, first, second
//   u64 buffer capacity | f64 reuse prob | u64 stored | per entry: text, frames
// name = u16 length + bytes; matrix = u32 rows | u32 cols | rows*cols f64 row-major.
struct CheckpointState {
  RunConfig config;
  std::uint64_t config_hash = 0;
  std::uint64_t step = 0;
  AdamState optimizer;
  ReplayBuffer buffer;
};

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const CheckpointState& state);

struct LoadedCheckpoint {
  CheckpointState state;
  std::unique_ptr<Model> model;
};

// Rebuilds the model from the embedded config and restores every parameter.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tvr
