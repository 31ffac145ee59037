#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tvr/model/model.hpp"

namespace tvr {

struct DataPaths {
  std::string train;
  std::string val;
  std::string test;
};

struct EamSettings {
  bool enabled = true;
  EnergyKind energy = EnergyKind::Mlp;
  Pooling pooling = Pooling::Avg;
  Eigen::Index hidden = 0;
  int steps = 20;
  double step_size = 1.0;
  double noise_var = 0.005;
  std::size_t buffer_capacity = 8192;
  double reuse_prob = 0.95;
  double reg = 1.0;
};

struct TrainSettings {
  int batch_size = 64;
  int epochs = 5;
  int max_steps = 0;  // > 0 overrides epochs
  double lr = 1e-4;
  double weight_decay = 0.2;
  double warmup = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int eval_every = 1;  // epochs between validation passes, 0 = only at the end
};

struct RunConfig {
  DataPaths data;
  Eigen::Index dim = 512;
  Eigen::Index frames = 12;
  bool adapters = true;
  double radius_init_std = 0.02;
  FusionOptions fusion;
  FrlOptions frl;
  EamSettings eam;
  LossKind loss = LossKind::CrossEntropy;
  double lambda_sup = 0.8;
  double lambda_eam = 1.0;
  TrainSettings train;
  std::uint64_t seed = 0;
  std::uint64_t eval_seed = 0;
};

nlohmann::json to_json(const RunConfig& cfg);
// Rejects unknown keys and out-of-range values with InvalidArgument.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);

// "section.key=value"; value parses as JSON when possible, otherwise as a string.
void apply_override(nlohmann::json& j, std::string_view assignment);
RunConfig with_overrides(const RunConfig& cfg, const std::vector<std::string>& assignments);

std::uint64_t config_hash(const RunConfig& cfg);

ModelConfig model_config(const RunConfig& cfg);
LossConfig loss_config(const RunConfig& cfg);
LangevinOptions langevin_options(const RunConfig& cfg);

std::string to_string(LossKind k);
std::string to_string(EnergyKind k);
std::string to_string(Pooling p);
std::string to_string(GraphKind g);
std::string to_string(FusionKind f);

}  // namespace tvr
