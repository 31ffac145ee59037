#include "tvr/eval/retrieval.hpp"

#include <algorithm>
#include <cstdio>

#include "tvr/core/error.hpp"
#include "tvr/core/ops.hpp"

namespace tvr {

Matrix score_all(const Model& model, const Matrix& texts, const std::vector<Matrix>& videos, std::uint64_t eval_seed) {
  const Eigen::Index nt = texts.rows();
  const Eigen::Index nv = static_cast<Eigen::Index>(videos.size());
  if (nt == 0 || nv == 0) throw DataError("no queries");
  std::vector<Matrix> adapted_texts;
  std::vector<Matrix> adapted_videos;
  {
    ad::Tape tape(false);
    for (Eigen::Index i = 0; i < nt; ++i)
      adapted_texts.push_back(adapt_text(tape.constant(texts.row(i)), model.adapters()).value());
    for (const Matrix& v : videos) adapted_videos.push_back(adapt_frames(tape.constant(v), model.adapters()).value());
  }
  Matrix scores(nt, nv);
  ad::Tape tape(false);
  for (Eigen::Index i = 0; i < nt; ++i) {
    for (Eigen::Index j = 0; j < nv; ++j) {
      tape.clear();
      // Candidate noise depends on the query only, so every video faces the same draws.
      Rng rng(derive_seed(eval_seed, static_cast<std::uint64_t>(i)));
      PairForward p = forward_pair(model, tape.constant(adapted_texts[static_cast<std::size_t>(i)]),
                                   tape.constant(adapted_videos[static_cast<std::size_t>(j)]), rng, false);
      scores(i, j) = p.sim_gen.item();
    }
  }
  return scores;
}

Matrix score_all(const Model& model, const EmbeddingDataset& data, std::uint64_t eval_seed) {
  if (data.items.empty()) throw DataError("no queries");
  Matrix texts(static_cast<Eigen::Index>(data.items.size()), static_cast<Eigen::Index>(data.dim));
  std::vector<Matrix> videos;
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    texts.row(static_cast<Eigen::Index>(i)) = data.items[i].text;
    videos.push_back(data.items[i].frames);
  }
  return score_all(model, texts, videos, eval_seed);
}

std::vector<std::size_t> diagonal_ranks(const Matrix& scores, bool queries_are_rows) {
  if (scores.rows() != scores.cols()) throw InvalidArgument("diagonal ground truth needs a square score matrix");
  const Eigen::Index n = scores.rows();
  std::vector<std::size_t> ranks(static_cast<std::size_t>(n));
  for (Eigen::Index q = 0; q < n; ++q) {
    const double target = scores(q, q);
    std::size_t ahead = 0;
    for (Eigen::Index c = 0; c < n; ++c) {
      const double s = queries_are_rows ? scores(q, c) : scores(c, q);
      if (s > target || (s == target && c < q)) ++ahead;
    }
    ranks[static_cast<std::size_t>(q)] = ahead + 1;
  }
  return ranks;
}

MetricsReport metrics_from_ranks(const std::vector<std::size_t>& ranks, std::string direction) {
  if (ranks.empty()) throw DataError("no queries");
  MetricsReport m;
  m.direction = std::move(direction);
  m.queries = ranks.size();
  const double n = static_cast<double>(ranks.size());
  auto recall = [&](std::size_t k) {
    return 100.0 * static_cast<double>(std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; })) / n;
  };
  m.r1 = recall(1);
  m.r5 = recall(5);
  m.r10 = recall(10);
  m.rsum = m.r1 + m.r5 + m.r10;
  std::vector<std::size_t> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  m.median_rank = sorted.size() % 2 == 1 ? static_cast<double>(sorted[mid])
                                         : 0.5 * static_cast<double>(sorted[mid - 1] + sorted[mid]);
  double total = 0.0;
  for (std::size_t r : ranks) total += static_cast<double>(r);
  m.mean_rank = total / n;
  return m;
}

RetrievalMetrics compute_metrics(const Matrix& scores) {
  if (scores.rows() == 0 || scores.cols() == 0) throw DataError("no queries");
  return {metrics_from_ranks(diagonal_ranks(scores, true), "t2v"),
          metrics_from_ranks(diagonal_ranks(scores, false), "v2t")};
}

nlohmann::json to_json(const MetricsReport& m) {
  return {{"direction", m.direction}, {"R@1", m.r1},       {"R@5", m.r5},     {"R@10", m.r10},
          {"MdR", m.median_rank},     {"MnR", m.mean_rank}, {"Rsum", m.rsum}, {"queries", m.queries}};
}

nlohmann::json to_json(const RetrievalMetrics& m) { return {{"t2v", to_json(m.t2v)}, {"v2t", to_json(m.v2t)}}; }

MetricsReport metrics_report_from_json(const nlohmann::json& j) {
  MetricsReport m;
  m.direction = j.at("direction").get<std::string>();
  m.r1 = j.at("R@1").get<double>();
  m.r5 = j.at("R@5").get<double>();
  m.r10 = j.at("R@10").get<double>();
  m.median_rank = j.at("MdR").get<double>();
  m.mean_rank = j.at("MnR").get<double>();
  m.rsum = j.at("Rsum").get<double>();
  m.queries = j.at("queries").get<std::size_t>();
  return m;
}

std::string format_table(const RetrievalMetrics& m) {
  std::string out = "direction    R@1     R@5    R@10    MdR     MnR    Rsum  queries\n";
  char line[160];
  for (const MetricsReport* r : {&m.t2v, &m.v2t}) {
    std::snprintf(line, sizeof line, "%-9s %6.2f  %6.2f  %6.2f  %5.1f  %6.2f  %6.2f  %7zu\n", r->direction.c_str(), r->r1,
                  r->r5, r->r10, r->median_rank, r->mean_rank, r->rsum, r->queries);
    out += line;
  }
  return out;
}

}  // namespace tvr
