#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvr/core/tensor.hpp"
#include "tvr/io/dataset.hpp"
#include "tvr/model/model.hpp"

namespace tvr {

struct MetricsReport {
  std::string direction;  // "t2v" or "v2t"
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
  double median_rank = 0.0;
  double mean_rank = 0.0;
  double rsum = 0.0;
  std::size_t queries = 0;
};

struct RetrievalMetrics {
  MetricsReport t2v;
  MetricsReport v2t;
};

// Full pairwise scores in inference mode: n_texts x n_videos.
Matrix score_all(const Model& model, const Matrix& texts, const std::vector<Matrix>& videos, std::uint64_t eval_seed);
Matrix score_all(const Model& model, const EmbeddingDataset& data, std::uint64_t eval_seed);

// 1-based rank of each query's diagonal match. Equal scores held by a
// candidate with a smaller index rank ahead of the match.
std::vector<std::size_t> diagonal_ranks(const Matrix& scores, bool queries_are_rows);
MetricsReport metrics_from_ranks(const std::vector<std::size_t>& ranks, std::string direction);
RetrievalMetrics compute_metrics(const Matrix& scores);

nlohmann::json to_json(const MetricsReport& m);
nlohmann::json to_json(const RetrievalMetrics& m);
MetricsReport metrics_report_from_json(const nlohmann::json& j);
std::string format_table(const RetrievalMetrics& m);

}  // namespace tvr
