#pragma once

#include <array>
#include <vector>

#include "tvr/core/autodiff.hpp"
#include "tvr/core/rng.hpp"

namespace tvr {

enum class GraphKind { Relational, FullyConnected };

struct FrlOptions {
  bool enabled = true;
  GraphKind graph = GraphKind::Relational;
  bool drop_f2f = false;
  int heads = 4;
  int layers = 2;
  int num_candidates = 20;
  double dropout = 0.3;  // on attention coefficients, training only
};

enum Relation : int { kTextText = 0, kFrameFrame = 1, kTextFrame = 2 };
inline constexpr int kRelationCount = 3;

struct EdgeScorer {
  Parameter* weight = nullptr;  // 1 x 2d, halves score source and target
  Parameter* bias = nullptr;    // 1 x 1
};

struct GraphLayer {
  int in_width = 0;
  bool final = false;
  // head_weights[r][h]: d x in_width. One relation for the fully connected graph.
  std::vector<std::vector<Parameter*>> head_weights;
  std::vector<EdgeScorer> scorers;
  Parameter* residual = nullptr;  // out_width x in_width; absent for the fully connected graph
};

struct FrlParams {
  FrlOptions options;
  Eigen::Index dim = 0;
  Eigen::Index frames = 0;
  Parameter* positional = nullptr;  // M x d
  std::vector<GraphLayer> layers;
};

FrlParams register_frl(ParamStore& store, Eigen::Index dim, Eigen::Index frames, const FrlOptions& opts, Rng& rng);

struct TextFrameGraph {
  ad::Var nodes;  // n x d, rows [t, candidates..., f_1 + pe_1, ...]
  Eigen::Index num_text = 0;
  Eigen::Index num_frames = 0;
  std::array<BoolMatrix, kRelationCount> adjacency;

  Eigen::Index size() const { return num_text + num_frames; }
};

std::array<BoolMatrix, kRelationCount> relation_adjacency(Eigen::Index num_text, Eigen::Index num_frames);

// candidates is S x d (S may be zero). positional may be invalid, meaning no offset.
TextFrameGraph build_graph(ad::Var text, ad::Var candidates, ad::Var frames, ad::Var positional);

// Post-softmax coefficients per layer, relation and head, for diagnostics.
struct AttentionRecord {
  int layer = 0;
  int relation = 0;
  int head = 0;
  Matrix alpha;
  const BoolMatrix* mask = nullptr;  // null for the fully connected graph
};

struct GraphForwardOptions {
  bool training = false;
  Rng* rng = nullptr;
  bool compute_final_nodes = true;
  std::vector<AttentionRecord>* trace = nullptr;
};

struct GraphOutput {
  ad::Var nodes;  // invalid when compute_final_nodes is false
  std::vector<ad::Var> text_frame_logits;  // per head, (1+S) x M raw edge scores
};

GraphOutput rgat_forward(const TextFrameGraph& graph, const FrlParams& params, const GraphForwardOptions& opts);
GraphOutput gat_forward(const TextFrameGraph& graph, const FrlParams& params, const GraphForwardOptions& opts);
GraphOutput graph_forward(const TextFrameGraph& graph, const FrlParams& params, const GraphForwardOptions& opts);

struct EnrichedText {
  ad::Var text;     // 1 x d
  ad::Var weights;  // 1 x (1+S)
};

// Head average, then frame average of the raw scores, softmax over text
// nodes, convex combination of the text rows of nodes.
EnrichedText aggregate_enriched_text(const std::vector<ad::Var>& text_frame_logits, ad::Var nodes,
                                     Eigen::Index num_text);

}  // namespace tvr
