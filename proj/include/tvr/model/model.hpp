#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tvr/core/autodiff.hpp"
#include "tvr/core/rng.hpp"
#include "tvr/io/dataset.hpp"
#include "tvr/model/adapters.hpp"
#include "tvr/model/eam.hpp"
#include "tvr/model/frl.hpp"
#include "tvr/model/fusion.hpp"
#include "tvr/model/losses.hpp"
#include "tvr/model/stochastic_text.hpp"

namespace tvr {

struct ModelConfig {
  Eigen::Index dim = 512;
  Eigen::Index frames = 12;
  bool adapters = true;
  double radius_init_std = 0.02;
  FusionOptions fusion;
  FrlOptions frl;
  EnergyOptions energy;
  std::uint64_t init_seed = 0;
};

class Model {
 public:
  explicit Model(const ModelConfig& config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  const AdapterParams& adapters() const { return adapters_; }
  const FusionParams& fusion() const { return fusion_; }
  const RadiusProjector& radius() const { return radius_; }
  const FrlParams& frl() const { return frl_; }
  const EnergyParams& energy() const { return energy_; }
  const LossScalars& scalars() const { return scalars_; }

 private:
  ModelConfig config_;
  ParamStore store_;
  AdapterParams adapters_;
  FusionParams fusion_;
  RadiusProjector radius_;
  FrlParams frl_;
  EnergyParams energy_;
  LossScalars scalars_;
};

struct PairForward {
  ad::Var sim_gen;      // cos(t_gen, v)
  ad::Var sim_sup;      // cos(t_sup, v)
  ad::Var enriched;     // t_gen
  ad::Var video;        // v fused under t_gen
  ad::Var radius;
  ad::Var text_weights;  // 1 x (1+S), invalid when the graph module is off
  bool degenerate_support = false;
};

// text: adapted 1 x d, frames: adapted M x d. rng drives candidates and dropout.
PairForward forward_pair(const Model& model, ad::Var text, ad::Var frames, Rng& rng, bool training);

struct AdaptedBatch {
  std::vector<ad::Var> texts;
  std::vector<ad::Var> frames;
};

AdaptedBatch adapt_batch(ad::Tape& tape, const Model& model, const PairBatch& batch);

struct SimilarityMatrices {
  ad::Var gen;  // B x B
  ad::Var sup;  // B x B
  int degenerate_support = 0;
};

// Every (text i, video j) pair runs on its own stream derive_seed(seed, i, j).
SimilarityMatrices similarity_matrices(const Model& model, const AdaptedBatch& batch, std::uint64_t seed,
                                       bool training);

struct LossConfig {
  LossKind kind = LossKind::CrossEntropy;
  double lambda_sup = 0.8;
  double lambda_eam = 1.0;
  bool eam = true;
  double eam_reg = 1.0;
};

struct LossBreakdown {
  double total = 0.0;
  double main = 0.0;
  double support = 0.0;
  double eam = 0.0;
  int degenerate_support = 0;
};

struct TotalLoss {
  ad::Var total;
  LossBreakdown parts;
};

// fakes is ignored when the energy term is off.
TotalLoss total_loss(ad::Tape& tape, const Model& model, const PairBatch& batch, const LossConfig& cfg,
                     std::span<const ChainSample> fakes, std::uint64_t seed, bool training);

}  // namespace tvr
