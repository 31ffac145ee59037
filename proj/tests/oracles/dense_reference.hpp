// Literal per-node transcriptions of the graph attention, homogeneous graph
// attention and cross-attention pooling formulas. Plain loops over Eigen
// values, no tape, no shared kernels with the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tvr/model/frl.hpp"
#include "tvr/model/fusion.hpp"

namespace oracle {

using tvr::Matrix;
using tvr::RowVector;

inline double leaky(double x) { return x > 0 ? x : 0.2 * x; }

struct GraphResult {
  Matrix nodes;
  std::vector<Matrix> tf_scores;  // per head, text x frame
};

inline bool is_text(Eigen::Index i, Eigen::Index num_text) { return i < num_text; }

// neighbor test for relation r between i and j
inline bool linked(int r, Eigen::Index i, Eigen::Index j, Eigen::Index num_text) {
  const bool ti = is_text(i, num_text), tj = is_text(j, num_text);
  if (r == 0) return ti && tj;
  if (r == 1) return !ti && !tj;
  return ti != tj;
}

inline GraphResult graph_attention(const Matrix& x, Eigen::Index num_text, const tvr::FrlParams& p) {
  const bool relational = p.options.graph == tvr::GraphKind::Relational;
  const int heads = p.options.heads;
  const Eigen::Index d = p.dim;
  const Eigen::Index n = x.rows();
  std::vector<int> rels;
  if (relational) {
    rels = {0, 2};
    if (!p.options.drop_f2f) rels = {0, 1, 2};
  } else {
    rels = {0};
  }
  GraphResult out;
  Matrix h = x;
  for (const tvr::GraphLayer& layer : p.layers) {
    const Eigen::Index width = layer.final ? d : heads * d;
    Matrix next(n, width);
    for (Eigen::Index i = 0; i < n; ++i) {
      RowVector concat(heads * d);
      RowVector avg = RowVector::Zero(d);
      for (int hd = 0; hd < heads; ++hd) {
        RowVector acc = RowVector::Zero(d);
        for (int r : rels) {
          const Matrix& w = layer.head_weights[r][hd]->value;  // d x in
          const RowVector psi = layer.scorers[r].weight->value.row(0);
          const double bias = layer.scorers[r].bias->value(0, 0);
          std::vector<Eigen::Index> nbrs;
          for (Eigen::Index j = 0; j < n; ++j)
            if (!relational || linked(r, i, j, num_text)) nbrs.push_back(j);
          if (nbrs.empty()) continue;
          const RowVector wi = (w * h.row(i).transpose()).transpose();
          std::vector<double> logits;
          for (Eigen::Index j : nbrs) {
            const RowVector wj = (w * h.row(j).transpose()).transpose();
            double e = bias;
            for (Eigen::Index k = 0; k < d; ++k) e += psi(k) * wi(k) + psi(d + k) * wj(k);
            logits.push_back(leaky(e));
          }
          const double mx = *std::max_element(logits.begin(), logits.end());
          double z = 0;
          for (double& l : logits) z += (l = std::exp(l - mx));
          for (std::size_t k = 0; k < nbrs.size(); ++k) {
            const RowVector wj = (w * h.row(nbrs[k]).transpose()).transpose();
            acc += (logits[k] / z) * wj;
          }
        }
        concat.segment(hd * d, d) = acc;
        avg += acc / heads;
      }
      RowVector pre = layer.final ? avg : concat;
      if (layer.residual != nullptr) pre += (layer.residual->value * h.row(i).transpose()).transpose();
      next.row(i) = pre.cwiseMax(0.0);
    }
    if (layer.final) {
      const int tf = relational ? 2 : 0;
      const Eigen::Index nf = n - num_text;
      for (int hd = 0; hd < heads; ++hd) {
        const Matrix& w = layer.head_weights[tf][hd]->value;
        const RowVector psi = layer.scorers[tf].weight->value.row(0);
        const double bias = layer.scorers[tf].bias->value(0, 0);
        Matrix e(num_text, nf);
        for (Eigen::Index i = 0; i < num_text; ++i) {
          const RowVector wi = (w * h.row(i).transpose()).transpose();
          for (Eigen::Index j = 0; j < nf; ++j) {
            const RowVector wj = (w * h.row(num_text + j).transpose()).transpose();
            double s = bias;
            for (Eigen::Index k = 0; k < d; ++k) s += psi(k) * wi(k) + psi(d + k) * wj(k);
            e(i, j) = s;
          }
        }
        out.tf_scores.push_back(e);
      }
    }
    h = next;
  }
  out.nodes = h;
  return out;
}

struct Enriched {
  RowVector text;
  RowVector weights;
};

inline Enriched enrich(const std::vector<Matrix>& tf_scores, const Matrix& x, Eigen::Index num_text) {
  std::vector<double> e(static_cast<std::size_t>(num_text), 0.0);
  const double heads = static_cast<double>(tf_scores.size());
  for (Eigen::Index i = 0; i < num_text; ++i) {
    double s = 0;
    for (const Matrix& m : tf_scores)
      for (Eigen::Index j = 0; j < m.cols(); ++j) s += m(i, j);
    e[static_cast<std::size_t>(i)] = s / heads / static_cast<double>(tf_scores[0].cols());
  }
  const double mx = *std::max_element(e.begin(), e.end());
  double z = 0;
  for (double v : e) z += std::exp(v - mx);
  Enriched out;
  out.weights = RowVector(num_text);
  out.text = RowVector::Zero(x.cols());
  for (Eigen::Index i = 0; i < num_text; ++i) {
    out.weights(i) = std::exp(e[static_cast<std::size_t>(i)] - mx) / z;
    out.text += out.weights(i) * x.row(i);
  }
  return out;
}

inline RowVector layer_norm(const RowVector& x, const RowVector& gain, const RowVector& bias, double eps) {
  const double n = static_cast<double>(x.size());
  double mu = 0;
  for (Eigen::Index k = 0; k < x.size(); ++k) mu += x(k);
  mu /= n;
  double var = 0;
  for (Eigen::Index k = 0; k < x.size(); ++k) var += (x(k) - mu) * (x(k) - mu);
  var /= n;
  RowVector y(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) y(k) = gain(k) * (x(k) - mu) / std::sqrt(var + eps) + bias(k);
  return y;
}

inline RowVector fuse(const Matrix& frames, const RowVector& cond, const tvr::FusionParams& p) {
  const Eigen::Index m = frames.rows();
  const RowVector q = cond * p.w_q->value;
  std::vector<double> logits;
  for (Eigen::Index j = 0; j < m; ++j) {
    const RowVector k = frames.row(j) * p.w_k->value;
    logits.push_back(q.dot(k) / std::sqrt(static_cast<double>(p.proj_dim)));
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0;
  for (double& l : logits) z += (l = std::exp(l - mx));
  RowVector pooled = RowVector::Zero(p.proj_dim);
  for (Eigen::Index j = 0; j < m; ++j) pooled += (logits[static_cast<std::size_t>(j)] / z) * (frames.row(j) * p.w_v->value);
  const RowVector zvec = layer_norm(pooled * p.w_o->value, p.ln1_gain->value.row(0), p.ln1_bias->value.row(0), 1e-5);
  RowVector fc = (p.fc_weight->value * zvec.transpose()).transpose() + p.fc_bias->value.row(0);
  return layer_norm(fc + zvec, p.ln2_gain->value.row(0), p.ln2_bias->value.row(0), 1e-5);
}

}  // namespace oracle
