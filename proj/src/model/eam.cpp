#include "tvr/model/eam.hpp"

#include <atomic>
#include <cmath>

#include "tvr/core/error.hpp"
#include "tvr/core/ops.hpp"
#include "tvr/model/init.hpp"

namespace tvr {

namespace {

std::atomic<std::size_t> g_langevin_calls{0};

void require_nonzero(const Matrix& rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    if (rows.row(i).norm() == 0.0) throw NumericalError("degenerate vector");
}

}  // namespace

EnergyParams register_energy(ParamStore& store, Eigen::Index dim, const EnergyOptions& opts, Rng& rng) {
  EnergyParams p;
  p.kind = opts.kind;
  p.pooling = opts.pooling;
  switch (opts.kind) {
    case EnergyKind::CosSim:
      break;
    case EnergyKind::Bilinear:
      p.bilinear = &store.add("eam.bilinear", Matrix::Identity(dim, dim));
      break;
    case EnergyKind::Mlp: {
      const Eigen::Index hidden = opts.hidden > 0 ? opts.hidden : dim;
      p.mlp_w1 = &store.add("eam.mlp.w1", xavier_normal(2 * dim, hidden, rng));
      p.mlp_b1 = &store.add("eam.mlp.b1", Matrix::Zero(1, hidden), true, false);
      p.mlp_w2 = &store.add("eam.mlp.w2", xavier_normal(hidden, 1, rng));
      p.mlp_b2 = &store.add("eam.mlp.b2", Matrix::Zero(1, 1), true, false);
      break;
    }
  }
  return p;
}

ad::Var frame_energies(ad::Var text, ad::Var frames, const EnergyParams& params) {
  if (text.rows() != 1 || frames.cols() != text.cols()) throw InvalidArgument("frame_energies: shape mismatch");
  if (frames.rows() < 1) throw InvalidArgument("frame_energies: empty frame stack");
  ad::Tape& tape = text.tape();
  switch (params.kind) {
    case EnergyKind::CosSim:
      return ad::neg(ad::row_cosine(frames, text));
    case EnergyKind::Bilinear: {
      require_nonzero(text.value());
      require_nonzero(frames.value());
      ad::Var projected = ad::matmul(text, tape.param(*params.bilinear));  // tᵀW
      ad::Var numer = ad::matmul_nt(frames, projected);                   // M x 1
      ad::Var denom = ad::mul_scalar(ad::row_norms(frames), ad::l2_norm(text));
      return ad::neg(ad::divide(numer, denom));
    }
    case EnergyKind::Mlp: {
      ad::Var tiled = ad::matmul(tape.constant(Matrix::Ones(frames.rows(), 1)), text);
      const ad::Var parts[] = {tiled, frames};
      ad::Var joint = ad::concat_cols(parts);
      ad::Var hidden = ad::relu(ad::add_row(ad::matmul(joint, tape.param(*params.mlp_w1)), tape.param(*params.mlp_b1)));
      return ad::add_row(ad::matmul(hidden, tape.param(*params.mlp_w2)), tape.param(*params.mlp_b2));
    }
  }
  throw InvalidArgument("unknown energy kind");
}

ad::Var pair_energy(ad::Var text, ad::Var frame, const EnergyParams& params) {
  if (frame.rows() != 1) throw InvalidArgument("pair_energy: frame must be a single row");
  return frame_energies(text, frame, params);
}

ad::Var video_energy(ad::Var text, ad::Var frames, const EnergyParams& params, const FusionParams* fusion) {
  switch (params.pooling) {
    case Pooling::Avg:
      return ad::mean(frame_energies(text, frames, params));
    case Pooling::Max:
      return ad::max_all(frame_energies(text, frames, params));
    case Pooling::Min:
      return ad::min_all(frame_energies(text, frames, params));
    case Pooling::Global: {
      if (fusion == nullptr) throw InvalidArgument("global pooling needs fusion parameters");
      ad::Var video = fuse_frames(frames, text, *fusion, false, nullptr);
      return frame_energies(text, video, params);
    }
  }
  throw InvalidArgument("unknown pooling");
}

EnergyGradFn model_energy_fn(const EnergyParams& params, const FusionParams* fusion) {
  return [params, fusion](const Matrix& text, const Matrix& frames) {
    ad::Tape tape(false);
    ad::Var t = tape.variable(text);
    ad::Var f = tape.variable(frames);
    ad::Var e = video_energy(t, f, params, fusion);
    EnergyEval out;
    out.energy = e.item();
    if (!std::isfinite(out.energy)) throw NumericalError("divergent chain");
    tape.backward(e);
    out.grad_text = tape.grad(t);
    out.grad_frames = tape.grad(f);
    return out;
  };
}

ChainSample langevin_sample(const EnergyGradFn& energy, ChainSample init, const LangevinOptions& opts, Rng& rng,
                            std::vector<double>* energy_trace) {
  if (opts.steps < 1) throw InvalidArgument("langevin steps must be at least 1");
  if (opts.noise_var < 0.0) throw InvalidArgument("langevin noise variance must be non-negative");
  g_langevin_calls.fetch_add(1, std::memory_order_relaxed);
  const double noise_sd = std::sqrt(opts.noise_var);
  ChainSample x = std::move(init);
  for (int k = 0; k < opts.steps; ++k) {
    EnergyEval eval;
    try {
      eval = energy(x.text, x.frames);
    } catch (const NumericalError&) {
      throw NumericalError("divergent chain");
    }
    if (!std::isfinite(eval.energy)) throw NumericalError("divergent chain");
    if (energy_trace != nullptr) energy_trace->push_back(eval.energy);
    x.text += -opts.step_size * eval.grad_text + rng.normal_matrix(x.text.rows(), x.text.cols(), noise_sd);
    x.frames += -opts.step_size * eval.grad_frames + rng.normal_matrix(x.frames.rows(), x.frames.cols(), noise_sd);
    if (!all_finite(x.text) || !all_finite(x.frames)) throw NumericalError("divergent chain");
  }
  return x;
}

std::size_t langevin_invocations() { return g_langevin_calls.load(std::memory_order_relaxed); }

ReplayBuffer::ReplayBuffer(std::size_t capacity, double reuse_prob) : capacity_(capacity), reuse_prob_(reuse_prob) {
  if (capacity < 1) throw InvalidArgument("replay buffer capacity must be at least 1");
  if (reuse_prob < 0.0 || reuse_prob > 1.0) throw InvalidArgument("reuse probability must lie in [0, 1]");
}

ReplayBuffer::Draw ReplayBuffer::draw_init(Rng& rng, Eigen::Index frames, Eigen::Index dim) const {
  Draw d;
  if (!texts_.empty() && rng.bernoulli(reuse_prob_)) {
    d.init.text = texts_[rng.index(texts_.size())];
    d.reused_text = true;
  } else {
    d.init.text = rng.uniform_matrix(1, dim, -1.0, 1.0);
  }
  if (!frames_.empty() && rng.bernoulli(reuse_prob_)) {
    d.init.frames = frames_[rng.index(frames_.size())];
    d.reused_frames = true;
  } else {
    d.init.frames = rng.uniform_matrix(frames, dim, -1.0, 1.0);
  }
  if (d.init.text.cols() != dim || d.init.frames.rows() != frames || d.init.frames.cols() != dim)
    throw InvalidArgument("replay buffer holds samples of a different shape");
  return d;
}

void ReplayBuffer::push(const ChainSample& sample) {
  texts_.push_back(sample.text);
  frames_.push_back(sample.frames);
  while (texts_.size() > capacity_) texts_.pop_front();
  while (frames_.size() > capacity_) frames_.pop_front();
}

void ReplayBuffer::clear() {
  texts_.clear();
  frames_.clear();
}

std::vector<ChainSample> sample_fakes(const EnergyGradFn& energy, ReplayBuffer& buffer, std::size_t count,
                                      Eigen::Index frames, Eigen::Index dim, const LangevinOptions& opts, Rng& rng) {
  std::vector<ChainSample> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    Rng chain_rng(derive_seed(rng.seed(), 0xc4a1, rng.draws() + j));
    ReplayBuffer::Draw d = buffer.draw_init(chain_rng, frames, dim);
    out.push_back(langevin_sample(energy, std::move(d.init), opts, chain_rng));
  }
  rng.uniform();  // advance so the next call derives fresh streams
  for (const ChainSample& s : out) buffer.push(s);
  return out;
}

ad::Var eam_objective(ad::Var real_energies, ad::Var fake_energies, double reg) {
  ad::Var loss = ad::sub(ad::mean(real_energies), ad::mean(fake_energies));
  if (reg == 0.0) return loss;
  ad::Var magnitude = ad::add(ad::mean(ad::square(real_energies)), ad::mean(ad::square(fake_energies)));
  return ad::add(loss, ad::scale(magnitude, reg));
}

ad::Var eam_loss(std::span<const ad::Var> texts, std::span<const ad::Var> frames, std::span<const ChainSample> fakes,
                 const EnergyParams& params, const FusionParams* fusion, double reg) {
  if (texts.empty() || texts.size() != frames.size()) throw InvalidArgument("eam_loss: need matching real pairs");
  if (fakes.empty()) throw InvalidArgument("eam_loss: no fake samples");
  ad::Tape& tape = texts.front().tape();
  std::vector<ad::Var> real;
  for (std::size_t i = 0; i < texts.size(); ++i) real.push_back(video_energy(texts[i], frames[i], params, fusion));
  std::vector<ad::Var> fake;
  for (const ChainSample& s : fakes)
    fake.push_back(video_energy(tape.constant(s.text), tape.constant(s.frames), params, fusion));
  ad::Var real_col = ad::assemble(real, static_cast<Eigen::Index>(real.size()), 1);
  ad::Var fake_col = ad::assemble(fake, static_cast<Eigen::Index>(fake.size()), 1);
  return eam_objective(real_col, fake_col, reg);
}

}  // namespace tvr
