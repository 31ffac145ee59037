#pragma once

#include <string>
#include <vector>

#include "tvr/train/trainer.hpp"

namespace tvr {

// Config overrides that define a named variant; "full" has none.
std::vector<std::string> variant_overrides(const std::string& name);
const std::vector<std::string>& known_variants();

struct VariantRun {
  std::string variant;
  std::uint64_t seed = 0;
  RetrievalMetrics metrics;  // on the evaluation set
  EnergyStats energy;
  std::size_t sampler_invocations = 0;
};

struct AblationReport {
  std::vector<VariantRun> runs;
  nlohmann::json to_json() const;
  std::string table() const;  // per-variant means over seeds, plus per-seed t2v Rsum
};

// Trains every variant (with "full" always first) for every seed on shared
// data and scores it on eval_set.
AblationReport ablate(const RunConfig& base, const std::vector<std::string>& variants,
                      const std::vector<std::uint64_t>& seeds, const EmbeddingDataset& train_set,
                      const EmbeddingDataset& eval_set, bool verbose = false);

}  // namespace tvr
