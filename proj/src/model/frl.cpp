#include "tvr/model/frl.hpp"

#include <string>

#include "tvr/core/error.hpp"
#include "tvr/core/kernels.hpp"
#include "tvr/core/ops.hpp"
#include "tvr/model/init.hpp"

namespace tvr {

namespace {

const char* relation_name(int r, GraphKind kind) {
  if (kind == GraphKind::FullyConnected) return "all";
  static const char* names[] = {"tt", "ff", "tf"};
  return names[r];
}

std::vector<int> active_relations(const FrlParams& params) {
  if (params.options.graph == GraphKind::FullyConnected) return {0};
  std::vector<int> rel{kTextText};
  if (!params.options.drop_f2f) rel.push_back(kFrameFrame);
  rel.push_back(kTextFrame);
  return rel;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  const double keep = 1.0 - rate;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return m;
}

struct ScorerHalves {
  ad::Var source;  // 1 x d
  ad::Var target;  // 1 x d
  ad::Var bias;    // 1 x 1
};

ScorerHalves scorer_halves(ad::Tape& tape, const EdgeScorer& s, Eigen::Index dim) {
  ad::Var w = tape.param(*s.weight);
  return {ad::slice_cols(w, 0, dim), ad::slice_cols(w, dim, dim), tape.param(*s.bias)};
}

// Raw text-to-frame scores for one head without materializing the full
// projected node matrix: (h W^T) a^T = h (a W)^T.
ad::Var text_frame_scores(ad::Var h_in, ad::Var weight, const ScorerHalves& sc, Eigen::Index num_text,
                          Eigen::Index num_frames) {
  ad::Var src_dir = ad::matmul(sc.source, weight);  // 1 x in
  ad::Var dst_dir = ad::matmul(sc.target, weight);
  ad::Var s1 = ad::matmul_nt(ad::slice_rows(h_in, 0, num_text), src_dir);          // T x 1
  ad::Var s2 = ad::matmul_nt(ad::slice_rows(h_in, num_text, num_frames), dst_dir);  // M x 1
  return ad::add_scalar(ad::outer_add(s1, ad::transpose(s2)), sc.bias);
}

GraphOutput run_layers(const TextFrameGraph& graph, const FrlParams& params, const GraphForwardOptions& opts) {
  if (params.layers.empty()) throw InvalidArgument("graph network needs at least one layer");
  if (opts.training && params.options.dropout > 0.0 && opts.rng == nullptr)
    throw InvalidArgument("graph dropout needs an Rng");
  ad::Tape& tape = graph.nodes.tape();
  const bool relational = params.options.graph == GraphKind::Relational;
  const std::vector<int> relations = active_relations(params);
  const int heads = params.options.heads;
  const Eigen::Index dim = params.dim;
  const Eigen::Index n = graph.size();
  const Eigen::Index nt = graph.num_text;
  const Eigen::Index nf = graph.num_frames;
  const bool use_dropout = opts.training && params.options.dropout > 0.0;

  GraphOutput out;
  ad::Var h = graph.nodes;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const GraphLayer& layer = params.layers[l];
    if (h.cols() != layer.in_width) throw InvalidArgument("graph layer width mismatch");
    const bool last = layer.final;
    const bool need_nodes = !last || opts.compute_final_nodes;

    if (last) {
      const int tf_rel = relational ? kTextFrame : 0;
      const ScorerHalves sc = scorer_halves(tape, layer.scorers[tf_rel], dim);
      for (int hd = 0; hd < heads; ++hd) {
        ad::Var w = tape.param(*layer.head_weights[tf_rel][hd]);
        out.text_frame_logits.push_back(text_frame_scores(h, w, sc, nt, nf));
      }
    }
    if (!need_nodes) break;

    std::vector<ad::Var> head_out;
    head_out.reserve(heads);
    std::vector<ScorerHalves> scorers;
    for (int r : relations) scorers.push_back(scorer_halves(tape, layer.scorers[r], dim));
    for (int hd = 0; hd < heads; ++hd) {
      ad::Var msg;
      for (std::size_t ri = 0; ri < relations.size(); ++ri) {
        const int r = relations[ri];
        const BoolMatrix* mask = relational ? &graph.adjacency[r] : nullptr;
        ad::Var proj = ad::matmul_nt(h, tape.param(*layer.head_weights[r][hd]));  // n x d
        ad::Var s1 = ad::matmul_nt(proj, scorers[ri].source);
        ad::Var s2 = ad::matmul_nt(proj, scorers[ri].target);
        ad::Var logits = ad::add_scalar(ad::outer_add(s1, ad::transpose(s2)), scorers[ri].bias);
        ad::Var alpha = ad::softmax_rows(ad::leaky_relu(logits, kLeakySlope), mask, true);
        if (opts.trace != nullptr)
          opts.trace->push_back({static_cast<int>(l), r, hd, alpha.value(), mask});
        if (use_dropout) alpha = ad::mask_mul(alpha, dropout_mask(n, n, params.options.dropout, *opts.rng));
        ad::Var m = ad::matmul(alpha, proj);
        msg = msg.valid() ? ad::add(msg, m) : m;
      }
      head_out.push_back(msg);
    }
    ad::Var agg;
    if (last) {
      agg = head_out[0];
      for (int hd = 1; hd < heads; ++hd) agg = ad::add(agg, head_out[hd]);
      agg = ad::scale(agg, 1.0 / heads);
    } else {
      agg = heads == 1 ? head_out[0] : ad::concat_cols(head_out);
    }
    if (layer.residual != nullptr) agg = ad::add(ad::matmul_nt(h, tape.param(*layer.residual)), agg);
    h = ad::relu(agg);
  }
  if (opts.compute_final_nodes) out.nodes = h;
  return out;
}

}  // namespace

FrlParams register_frl(ParamStore& store, Eigen::Index dim, Eigen::Index frames, const FrlOptions& opts, Rng& rng) {
  if (opts.heads < 1) throw InvalidArgument("frl.heads must be at least 1");
  if (opts.layers < 1) throw InvalidArgument("frl.layers must be at least 1");
  if (opts.num_candidates < 0) throw InvalidArgument("frl.num_candidates must be non-negative");
  if (opts.dropout < 0.0 || opts.dropout >= 1.0) throw InvalidArgument("frl.dropout must lie in [0, 1)");
  FrlParams p;
  p.options = opts;
  p.dim = dim;
  p.frames = frames;
  if (!opts.enabled) return p;
  p.positional = &store.add("frl.positional", rng.normal_matrix(frames, dim, 0.01));
  const bool relational = opts.graph == GraphKind::Relational;
  const int rel_count = relational ? kRelationCount : 1;
  const std::string prefix = relational ? "frl.rgat." : "frl.gat.";
  for (int l = 0; l < opts.layers; ++l) {
    GraphLayer layer;
    layer.final = l + 1 == opts.layers;
    layer.in_width = static_cast<int>(l == 0 ? dim : opts.heads * dim);
    const std::string lp = prefix + std::to_string(l) + ".";
    layer.head_weights.resize(rel_count);
    for (int r = 0; r < rel_count; ++r) {
      const std::string rp = lp + relation_name(r, opts.graph) + ".";
      for (int h = 0; h < opts.heads; ++h)
        layer.head_weights[r].push_back(
            &store.add(rp + "w" + std::to_string(h), xavier_normal(dim, layer.in_width, rng)));
      EdgeScorer sc;
      sc.weight = &store.add(rp + "psi.weight", xavier_normal(1, 2 * dim, rng));
      sc.bias = &store.add(rp + "psi.bias", Matrix::Zero(1, 1), true, false);
      layer.scorers.push_back(sc);
    }
    if (relational) {
      const Eigen::Index out_width = layer.final ? dim : opts.heads * dim;
      layer.residual = &store.add(lp + "w_out", xavier_normal(out_width, layer.in_width, rng));
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

std::array<BoolMatrix, kRelationCount> relation_adjacency(Eigen::Index num_text, Eigen::Index num_frames) {
  const Eigen::Index n = num_text + num_frames;
  std::array<BoolMatrix, kRelationCount> adj;
  for (auto& a : adj) a = BoolMatrix::Constant(n, n, false);
  adj[kTextText].topLeftCorner(num_text, num_text).setConstant(true);
  adj[kFrameFrame].bottomRightCorner(num_frames, num_frames).setConstant(true);
  adj[kTextFrame].topRightCorner(num_text, num_frames).setConstant(true);
  adj[kTextFrame].bottomLeftCorner(num_frames, num_text).setConstant(true);
  return adj;
}

TextFrameGraph build_graph(ad::Var text, ad::Var candidates, ad::Var frames, ad::Var positional) {
  if (text.rows() != 1) throw InvalidArgument("build_graph: text must be a single row");
  if (candidates.cols() != text.cols() || frames.cols() != text.cols())
    throw InvalidArgument("build_graph: inconsistent embedding width");
  ad::Var frame_rows = frames;
  if (positional.valid()) {
    if (positional.rows() != frames.rows() || positional.cols() != frames.cols())
      throw InvalidArgument("build_graph: positional embedding shape mismatch");
    frame_rows = ad::add(frames, positional);
  }
  TextFrameGraph g;
  const ad::Var parts[] = {text, candidates, frame_rows};
  g.nodes = ad::concat_rows(parts);
  g.num_text = 1 + candidates.rows();
  g.num_frames = frames.rows();
  g.adjacency = relation_adjacency(g.num_text, g.num_frames);
  return g;
}

GraphOutput rgat_forward(const TextFrameGraph& graph, const FrlParams& params, const GraphForwardOptions& opts) {
  if (params.options.graph != GraphKind::Relational) throw InvalidArgument("rgat_forward: parameters are not relational");
  return run_layers(graph, params, opts);
}

GraphOutput gat_forward(const TextFrameGraph& graph, const FrlParams& params, const GraphForwardOptions& opts) {
  if (params.options.graph != GraphKind::FullyConnected) throw InvalidArgument("gat_forward: parameters are relational");
  return run_layers(graph, params, opts);
}

GraphOutput graph_forward(const TextFrameGraph& graph, const FrlParams& params, const GraphForwardOptions& opts) {
  return run_layers(graph, params, opts);
}

EnrichedText aggregate_enriched_text(const std::vector<ad::Var>& text_frame_logits, ad::Var nodes,
                                     Eigen::Index num_text) {
  if (text_frame_logits.empty()) throw InvalidArgument("aggregate_enriched_text: no heads");
  ad::Var e = text_frame_logits[0];
  for (std::size_t h = 1; h < text_frame_logits.size(); ++h) e = ad::add(e, text_frame_logits[h]);
  if (e.rows() != num_text) throw InvalidArgument("aggregate_enriched_text: score rows must match text nodes");
  e = ad::scale(e, 1.0 / static_cast<double>(text_frame_logits.size()));
  ad::Var per_text = ad::transpose(ad::row_mean(e));  // 1 x (1+S)
  ad::Var w = ad::softmax_rows(per_text);
  return {ad::matmul(w, ad::slice_rows(nodes, 0, num_text)), w};
}

}  // namespace tvr
