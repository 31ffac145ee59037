#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tvr/core/error.hpp"
#include "tvr/eval/retrieval.hpp"
#include "tvr/io/dataset.hpp"
#include "tvr/train/checkpoint.hpp"
#include "tvr/train/config.hpp"

namespace tvr {

class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct StepRecord {
  std::int64_t step = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::int64_t step = 0;
  double mean_loss = 0.0;
  std::optional<RetrievalMetrics> val;
};

struct TrainResult {
  std::unique_ptr<Model> model;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::optional<RetrievalMetrics> best_val;
  std::size_t sampler_invocations = 0;
  std::int64_t total_steps = 0;
  AdamState optimizer;
  ReplayBuffer buffer;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: no files written
  bool verbose = false;
  std::function<void(const StepRecord&)> on_step;
};

// Model dimensions come from the training set; cfg.dim and cfg.frames are
// replaced by the dataset's values.
TrainResult train(RunConfig cfg, const EmbeddingDataset& train_set, const EmbeddingDataset* val_set,
                  const TrainOptions& opts = {});
TrainResult train(const RunConfig& cfg, const TrainOptions& opts = {});

RetrievalMetrics evaluate(const Model& model, const EmbeddingDataset& data, std::uint64_t eval_seed);

struct EnergyStats {
  double matched_mean = 0.0;
  double mismatched_mean = 0.0;
  double margin() const { return mismatched_mean - matched_mean; }
};

// Pooled energies on adapted embeddings over all matched and all mismatched pairs.
EnergyStats energy_statistics(const Model& model, const EmbeddingDataset& data);

}  // namespace tvr
