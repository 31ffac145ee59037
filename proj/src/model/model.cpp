#include "tvr/model/model.hpp"

#include "tvr/core/error.hpp"
#include "tvr/core/ops.hpp"

namespace tvr {

Model::Model(const ModelConfig& config) : config_(config) {
  if (config.dim < 1 || config.frames < 1) throw InvalidArgument("model dimensions must be positive");
  Rng rng(derive_seed(config.init_seed, 0x1a17));
  adapters_ = register_adapters(store_, config.dim, config.adapters, rng);
  fusion_ = register_fusion(store_, config.dim, config.fusion, rng);
  radius_ = register_radius(store_, config.frames, config.dim, rng, config.radius_init_std);
  frl_ = register_frl(store_, config.dim, config.frames, config.frl, rng);
  energy_ = register_energy(store_, config.dim, config.energy, rng);
  scalars_ = register_loss_scalars(store_);
}

PairForward forward_pair(const Model& model, ad::Var text, ad::Var frames, Rng& rng, bool training) {
  PairForward out;
  out.radius = compute_radius(text, frames, model.radius());
  const FrlParams& frl = model.frl();
  if (frl.options.enabled) {
    ad::Tape& tape = text.tape();
    const Matrix noise = draw_candidate_noise(frl.options.num_candidates, model.config().dim, rng);
    ad::Var candidates = make_candidates(text, out.radius, noise);
    TextFrameGraph graph = build_graph(text, candidates, frames, tape.param(*frl.positional));
    GraphForwardOptions gopts;
    gopts.training = training;
    gopts.rng = &rng;
    gopts.compute_final_nodes = false;
    GraphOutput g = graph_forward(graph, frl, gopts);
    EnrichedText e = aggregate_enriched_text(g.text_frame_logits, graph.nodes, graph.num_text);
    out.enriched = e.text;
    out.text_weights = e.weights;
  } else {
    out.enriched = text;
  }
  out.video = fuse_frames(frames, out.enriched, model.fusion(), training, &rng);
  out.sim_gen = ad::cosine(out.enriched, out.video);
  SupportText sup = support_text(text, out.video, out.radius);
  out.degenerate_support = sup.degenerate;
  out.sim_sup = ad::cosine(sup.text, out.video);
  return out;
}

AdaptedBatch adapt_batch(ad::Tape& tape, const Model& model, const PairBatch& batch) {
  AdaptedBatch out;
  const Eigen::Index b = batch.texts.rows();
  if (static_cast<std::size_t>(b) != batch.frames.size()) throw InvalidArgument("adapt_batch: ragged batch");
  for (Eigen::Index i = 0; i < b; ++i) {
    out.texts.push_back(adapt_text(tape.constant(batch.texts.row(i)), model.adapters()));
    out.frames.push_back(adapt_frames(tape.constant(batch.frames[static_cast<std::size_t>(i)]), model.adapters()));
  }
  return out;
}

SimilarityMatrices similarity_matrices(const Model& model, const AdaptedBatch& batch, std::uint64_t seed,
                                       bool training) {
  const std::size_t nt = batch.texts.size();
  const std::size_t nv = batch.frames.size();
  if (nt == 0 || nv == 0) throw InvalidArgument("similarity_matrices: empty batch");
  std::vector<ad::Var> gen, sup;
  gen.reserve(nt * nv);
  sup.reserve(nt * nv);
  SimilarityMatrices out;
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nv; ++j) {
      Rng rng(derive_seed(seed, i, j));
      PairForward p = forward_pair(model, batch.texts[i], batch.frames[j], rng, training);
      gen.push_back(p.sim_gen);
      sup.push_back(p.sim_sup);
      out.degenerate_support += p.degenerate_support ? 1 : 0;
    }
  }
  out.gen = ad::assemble(gen, static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nv));
  out.sup = ad::assemble(sup, static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nv));
  return out;
}

TotalLoss total_loss(ad::Tape& tape, const Model& model, const PairBatch& batch, const LossConfig& cfg,
                     std::span<const ChainSample> fakes, std::uint64_t seed, bool training) {
  AdaptedBatch adapted = adapt_batch(tape, model, batch);
  SimilarityMatrices sims = similarity_matrices(model, adapted, seed, training);
  TotalLoss out;
  ad::Var main = contrastive_loss(cfg.kind, sims.gen, model.scalars());
  out.parts.main = main.item();
  out.parts.degenerate_support = sims.degenerate_support;
  ad::Var total = main;
  if (cfg.lambda_sup != 0.0) {
    ad::Var sup = contrastive_loss(cfg.kind, sims.sup, model.scalars());
    out.parts.support = sup.item();
    total = ad::add(total, ad::scale(sup, cfg.lambda_sup));
  }
  if (cfg.eam && cfg.lambda_eam != 0.0) {
    ad::Var eam = eam_loss(adapted.texts, adapted.frames, fakes, model.energy(), &model.fusion(), cfg.eam_reg);
    out.parts.eam = eam.item();
    total = ad::add(total, ad::scale(eam, cfg.lambda_eam));
  }
  out.parts.total = total.item();
  out.total = total;
  return out;
}

}  // namespace tvr
