#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gmnmt/model/model.hpp"
#include "gmnmt/train/optimizer.hpp"

namespace gmnmt {

/// Parameter names or shapes in a checkpoint disagree with the model.
struct CheckpointMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout (all integers little-endian):
///   "GMNMTCK1", u32 version, u32 n + n bytes of `key = value` config text,
///   u32 tensor count, then per tensor: u32 name length, name, u32 rank,
///   rank x u64 dims, f32 values; finally u8 optimizer flag and, when set,
///   u64 step followed by f64 first and second moments in tensor order.
struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct OptimizerSnapshot {
  std::uint64_t steps = 0;
  std::vector<std::vector<double>> m, v;
};

struct Checkpoint {
  std::map<std::string, std::string> config;
  std::vector<CheckpointTensor> tensors;
  std::optional<OptimizerSnapshot> optimizer;
};

Checkpoint make_checkpoint(const Model& model, const std::map<std::string, std::string>& config,
                           const Adam* optimizer = nullptr);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into the model. Names, order and shapes must match
/// exactly; the first disagreement raises CheckpointMismatch naming it.
void load_parameters(Model& model, const Checkpoint& checkpoint);

}  // namespace gmnmt
