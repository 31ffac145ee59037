#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "tvr/core/autodiff.hpp"
#include "tvr/core/rng.hpp"
#include "tvr/model/fusion.hpp"

namespace tvr {

enum class EnergyKind { CosSim, Bilinear, Mlp };
enum class Pooling { Avg, Max, Min, Global };

struct EnergyOptions {
  EnergyKind kind = EnergyKind::Mlp;
  Pooling pooling = Pooling::Avg;
  Eigen::Index hidden = 0;  // MLP width, 0 selects d
};

struct EnergyParams {
  EnergyKind kind = EnergyKind::Mlp;
  Pooling pooling = Pooling::Avg;
  Parameter* bilinear = nullptr;  // d x d
  Parameter* mlp_w1 = nullptr;    // 2d x hidden
  Parameter* mlp_b1 = nullptr;    // 1 x hidden
  Parameter* mlp_w2 = nullptr;    // hidden x 1
  Parameter* mlp_b2 = nullptr;    // 1 x 1
};

EnergyParams register_energy(ParamStore& store, Eigen::Index dim, const EnergyOptions& opts, Rng& rng);

// Per-frame energies E(t, f_i) as an M x 1 column.
ad::Var frame_energies(ad::Var text, ad::Var frames, const EnergyParams& params);
ad::Var pair_energy(ad::Var text, ad::Var frame, const EnergyParams& params);
// Pooled text-video energy (1x1). Global pooling scores t against the
// eval-mode fused video and needs fusion parameters.
ad::Var video_energy(ad::Var text, ad::Var frames, const EnergyParams& params, const FusionParams* fusion);

struct EnergyEval {
  double energy = 0.0;
  Matrix grad_text;    // 1 x d
  Matrix grad_frames;  // M x d
};

using EnergyGradFn = std::function<EnergyEval(const Matrix& text, const Matrix& frames)>;

// Input gradients of video_energy with parameters held fixed.
EnergyGradFn model_energy_fn(const EnergyParams& params, const FusionParams* fusion);

struct LangevinOptions {
  int steps = 20;
  double step_size = 1.0;
  double noise_var = 0.005;
};

struct ChainSample {
  Matrix text;    // 1 x d
  Matrix frames;  // M x d
};

// x <- x - eta * grad E(x_prev) + N(0, sigma^2), text and frames jointly.
// energy_trace, when given, receives the energy at every pre-step state.
ChainSample langevin_sample(const EnergyGradFn& energy, ChainSample init, const LangevinOptions& opts, Rng& rng,
                            std::vector<double>* energy_trace = nullptr);

// Total langevin_sample calls in this process.
std::size_t langevin_invocations();

// Separate FIFO stores for fake texts and fake frame stacks.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 8192, double reuse_prob = 0.95);

  struct Draw {
    ChainSample init;
    bool reused_text = false;
    bool reused_frames = false;
  };

  Draw draw_init(Rng& rng, Eigen::Index frames, Eigen::Index dim) const;
  void push(const ChainSample& sample);
  void clear();

  std::size_t size() const { return texts_.size(); }
  std::size_t capacity() const { return capacity_; }
  double reuse_prob() const { return reuse_prob_; }
  const std::deque<Matrix>& texts() const { return texts_; }
  const std::deque<Matrix>& frame_stacks() const { return frames_; }

 private:
  std::size_t capacity_;
  double reuse_prob_;
  std::deque<Matrix> texts_;
  std::deque<Matrix> frames_;
};

// Runs count chains from buffer initializations, each on its own Rng stream,
// then pushes the outputs into the buffer.
std::vector<ChainSample> sample_fakes(const EnergyGradFn& energy, ReplayBuffer& buffer, std::size_t count,
                                      Eigen::Index frames, Eigen::Index dim, const LangevinOptions& opts, Rng& rng);

// mean(real) - mean(fake) + reg * (mean(real²) + mean(fake²)); inputs are k x 1 columns.
ad::Var eam_objective(ad::Var real_energies, ad::Var fake_energies, double reg);

// Real energies on the given pairs, fake energies on fixed samples.
ad::Var eam_loss(std::span<const ad::Var> texts, std::span<const ad::Var> frames, std::span<const ChainSample> fakes,
                 const EnergyParams& params, const FusionParams* fusion, double reg);

}  // namespace tvr
