#include "tvr/train/diagnostics.hpp"

#include "tvr/core/error.hpp"
#include "tvr/core/ops.hpp"
#include "tvr/io/dataset.hpp"

namespace tvr {

RunConfig tiny_config() {
  RunConfig c;
  c.dim = 8;
  c.frames = 3;
  c.frl.num_candidates = 2;
  c.frl.heads = 2;
  c.frl.layers = 2;
  c.train.batch_size = 3;
  c.radius_init_std = 0.3;
  return c;
}

const std::vector<std::string>& grad_check_paths() {
  static const std::vector<std::string> paths = {"ce", "sigmoid", "eam-cossim", "eam-bilinear", "eam-mlp", "total"};
  return paths;
}

GradCheckReport grad_check_path(const std::string& path, std::uint64_t seed, const GradCheckOptions& opts) {
  RunConfig cfg = tiny_config();
  cfg.seed = seed;
  bool main_terms = true;
  if (path == "ce") {
    cfg.loss = LossKind::CrossEntropy;
    cfg.eam.enabled = false;
  } else if (path == "sigmoid") {
    cfg.loss = LossKind::Sigmoid;
    cfg.eam.enabled = false;
  } else if (path.rfind("eam-", 0) == 0) {
    cfg = with_overrides(cfg, {"eam.energy=" + path.substr(4)});
    main_terms = false;
  } else if (path == "total") {
    cfg.eam.energy = EnergyKind::Mlp;
  } else {
    throw InvalidArgument("unknown grad-check path '" + path + "'");
  }

  SynthOptions so;
  so.pairs = static_cast<std::size_t>(cfg.train.batch_size);
  so.dim = static_cast<std::uint32_t>(cfg.dim);
  so.frames = static_cast<std::uint32_t>(cfg.frames);
  so.seed = derive_seed(seed, 0x9c);
  const EmbeddingDataset data = synth_generate(so);
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const PairBatch batch = make_batch(data, idx);

  Model model(model_config(cfg));
  // Move every parameter off its structured init so no gradient vanishes by symmetry.
  Rng jitter(derive_seed(seed, 0x717));
  for (Parameter* p : model.params().trainable())
    if (p->name.rfind("loss.", 0) != 0) p->value += jitter.normal_matrix(p->value.rows(), p->value.cols(), 0.05);

  std::vector<ChainSample> fakes;
  const LossConfig lcfg = loss_config(cfg);
  if (cfg.eam.enabled) {
    ReplayBuffer buffer(64);
    Rng chain(derive_seed(seed, 0xeb3));
    fakes = sample_fakes(model_energy_fn(model.energy(), &model.fusion()), buffer, batch.size(), cfg.frames, cfg.dim,
                         langevin_options(cfg), chain);
  }
  const std::uint64_t step_seed = derive_seed(seed, 0x57e9);
  Objective f = [&](bool accumulate) {
    ad::Tape tape;
    ad::Var loss;
    if (main_terms) {
      loss = total_loss(tape, model, batch, lcfg, fakes, step_seed, true).total;
    } else {
      AdaptedBatch adapted = adapt_batch(tape, model, batch);
      loss = eam_loss(adapted.texts, adapted.frames, fakes, model.energy(), &model.fusion(), cfg.eam.reg);
    }
    const double value = loss.item();
    if (accumulate) tape.backward(loss);
    return value;
  };
  return grad_check(f, model.params(), opts);
}

}  // namespace tvr
