#include "tvr/train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include "tvr/core/error.hpp"
#include "tvr/core/ops.hpp"
#include "tvr/train/schedule.hpp"

namespace tvr {

namespace {

bool grads_finite(ParamStore& store) {
  for (Parameter* p : store.trainable())
    if (p->grad.size() != 0 && !all_finite(p->grad)) return false;
  return true;
}

nlohmann::json epoch_json(const EpochRecord& e) {
  nlohmann::json j = {{"epoch", e.epoch}, {"step", e.step}, {"mean_loss", e.mean_loss}};
  if (e.val) j["val"] = to_json(*e.val);
  return j;
}

}  // namespace

RetrievalMetrics evaluate(const Model& model, const EmbeddingDataset& data, std::uint64_t eval_seed) {
  if (data.empty()) throw DataError("no queries");
  return compute_metrics(score_all(model, data, eval_seed));
}

EnergyStats energy_statistics(const Model& model, const EmbeddingDataset& data) {
  if (data.empty()) throw DataError("no queries");
  ad::Tape tape(false);
  std::vector<ad::Var> texts, frames;
  for (const EmbeddingRecord& r : data.items) {
    texts.push_back(adapt_text(tape.constant(r.text), model.adapters()));
    frames.push_back(adapt_frames(tape.constant(r.frames), model.adapters()));
  }
  EnergyStats s;
  double matched = 0.0, mismatched = 0.0;
  std::size_t n_matched = 0, n_mismatched = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    for (std::size_t j = 0; j < frames.size(); ++j) {
      const double e = video_energy(texts[i], frames[j], model.energy(), &model.fusion()).item();
      if (i == j) {
        matched += e;
        ++n_matched;
      } else {
        mismatched += e;
        ++n_mismatched;
      }
    }
  }
  s.matched_mean = matched / static_cast<double>(n_matched);
  s.mismatched_mean = n_mismatched > 0 ? mismatched / static_cast<double>(n_mismatched) : 0.0;
  return s;
}

TrainResult train(RunConfig cfg, const EmbeddingDataset& train_set, const EmbeddingDataset* val_set,
                  const TrainOptions& opts) {
  if (train_set.empty()) throw DataError("no queries");
  cfg.dim = train_set.dim;
  cfg.frames = train_set.frames_per_video;
  if (val_set != nullptr && (val_set->dim != train_set.dim || val_set->frames_per_video != train_set.frames_per_video))
    throw DataError("validation set shape does not match the training set");

  TrainResult result;
  result.model = std::make_unique<Model>(model_config(cfg));
  Model& model = *result.model;
  ParamStore& store = model.params();
  result.buffer = ReplayBuffer(cfg.eam.buffer_capacity, cfg.eam.reuse_prob);
  const LossConfig lcfg = loss_config(cfg);
  const LangevinOptions lopts = langevin_options(cfg);
  const std::uint64_t hash = config_hash(cfg);

  Rng data_rng(derive_seed(cfg.seed, 0xda7a));
  Rng chain_rng(derive_seed(cfg.seed, 0xeb3));
  BatchIterator batches(train_set, static_cast<std::size_t>(cfg.train.batch_size), true, data_rng);
  const auto per_epoch = static_cast<std::int64_t>(batches.batches_per_epoch());
  const std::int64_t total =
      cfg.train.max_steps > 0 ? cfg.train.max_steps : per_epoch * static_cast<std::int64_t>(cfg.train.epochs);
  result.total_steps = total;

  std::ofstream log;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    save_config(cfg, (opts.out_dir / "config.json").string());
    log.open(opts.out_dir / "metrics.jsonl", std::ios::trunc);
  }
  auto snapshot = [&](const std::filesystem::path& path, std::int64_t step) {
    CheckpointState st{cfg, hash, static_cast<std::uint64_t>(step), result.optimizer, result.buffer};
    save_checkpoint(path, store, st);
  };

  const std::size_t sampler_start = langevin_invocations();
  const std::vector<Parameter*> trainable = store.trainable();
  AdamOptions adam{cfg.train.lr, cfg.train.beta1, cfg.train.beta2, cfg.train.eps, cfg.train.weight_decay};
  EnergyGradFn energy_fn = model_energy_fn(model.energy(), &model.fusion());

  double epoch_loss = 0.0;
  std::int64_t epoch_steps = 0;
  for (std::int64_t step = 0; step < total; ++step) {
    PairBatch batch = batches.next();
    std::vector<ChainSample> fakes;
    if (lcfg.eam && lcfg.lambda_eam != 0.0)
      fakes = sample_fakes(energy_fn, result.buffer, batch.size(), cfg.frames, cfg.dim, lopts, chain_rng);

    store.zero_grad();
    ad::Tape tape;
    TotalLoss loss = total_loss(tape, model, batch, lcfg, fakes, derive_seed(cfg.seed, 0x57e9, step), true);
    if (!std::isfinite(loss.parts.total)) throw DivergenceError("non-finite loss at step " + std::to_string(step));
    tape.backward(loss.total);
    tape.clear();
    if (!grads_finite(store)) throw DivergenceError("non-finite gradient at step " + std::to_string(step));

    StepRecord rec{step, cfg.train.lr * warmup_cosine(step, total, cfg.train.warmup), loss.parts};
    adam.lr = rec.lr;
    adam_step(trainable, result.optimizer, adam);
    clamp_logit_scale(model.scalars());
    result.steps.push_back(rec);
    if (opts.on_step) opts.on_step(rec);
    epoch_loss += loss.parts.total;
    ++epoch_steps;

    const bool epoch_end = (step + 1) % per_epoch == 0 || step + 1 == total;
    if (!epoch_end) continue;
    EpochRecord er;
    er.epoch = result.epochs.size();
    er.step = step + 1;
    er.mean_loss = epoch_loss / static_cast<double>(epoch_steps);
    epoch_loss = 0.0;
    epoch_steps = 0;
    const bool last = step + 1 == total;
    const bool due = cfg.train.eval_every > 0 && (er.epoch + 1) % static_cast<std::size_t>(cfg.train.eval_every) == 0;
    if (val_set != nullptr && !val_set->empty() && (due || last)) {
      er.val = evaluate(model, *val_set, cfg.eval_seed);
      if (!result.best_val || er.val->t2v.rsum > result.best_val->t2v.rsum) {
        result.best_val = er.val;
        if (!opts.out_dir.empty()) snapshot(opts.out_dir / "best.ckpt", step + 1);
      }
    }
    if (!opts.out_dir.empty()) {
      snapshot(opts.out_dir / "last.ckpt", step + 1);
      log << epoch_json(er).dump() << '\n' << std::flush;
    }
    if (opts.verbose) {
      std::cerr << "epoch " << er.epoch << " step " << er.step << " loss " << er.mean_loss;
      if (er.val) std::cerr << " val t2v R@1 " << er.val->t2v.r1 << " Rsum " << er.val->t2v.rsum;
      std::cerr << '\n';
    }
    result.epochs.push_back(std::move(er));
  }
  result.sampler_invocations = langevin_invocations() - sampler_start;
  return result;
}

TrainResult train(const RunConfig& cfg, const TrainOptions& opts) {
  if (cfg.data.train.empty()) throw InvalidArgument("data.train is required");
  EmbeddingDataset train_set = load_dataset(cfg.data.train);
  std::optional<EmbeddingDataset> val;
  if (!cfg.data.val.empty()) val = load_dataset(cfg.data.val);
  return train(cfg, train_set, val ? &*val : nullptr, opts);
}

}  // namespace tvr
