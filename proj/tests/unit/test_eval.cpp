#include <doctest.h>

#include "tvr/core/error.hpp"
#include "tvr/core/rng.hpp"
#include "tvr/eval/retrieval.hpp"

using namespace tvr;

TEST_CASE("identity scores give perfect retrieval") {
  const RetrievalMetrics m = compute_metrics(Matrix::Identity(5, 5));
  for (const MetricsReport* r : {&m.t2v, &m.v2t}) {
    CHECK(r->r1 == 100.0);
    CHECK(r->median_rank == 1.0);
    CHECK(r->mean_rank == 1.0);
    CHECK(r->rsum == 300.0);
    CHECK(r->queries == 5);
  }
}

TEST_CASE("match ranked last everywhere") {
  Matrix s = Matrix::Ones(5, 5);
  s.diagonal().setZero();
  const RetrievalMetrics m = compute_metrics(s);
  CHECK(m.t2v.r1 == 0.0);
  CHECK(m.t2v.r5 == 100.0);
  CHECK(m.t2v.mean_rank == 5.0);
  CHECK(m.v2t.mean_rank == 5.0);
}

TEST_CASE("ranks one two three") {
  const MetricsReport r = metrics_from_ranks({1, 2, 3}, "t2v");
  CHECK(r.r1 == doctest::Approx(100.0 / 3.0));
  CHECK(r.r5 == 100.0);
  CHECK(r.median_rank == 2.0);
  CHECK(r.mean_rank == 2.0);
  CHECK(r.rsum == doctest::Approx(r.r1 + r.r5 + r.r10));
  CHECK(metrics_from_ranks({1, 4}, "t2v").median_rank == 2.5);
}

TEST_CASE("ties count earlier candidates ahead") {
  const Matrix s = Matrix::Constant(3, 3, 0.5);
  const std::vector<std::size_t> rows = diagonal_ranks(s, true);
  CHECK(rows == std::vector<std::size_t>{1, 2, 3});
  CHECK(diagonal_ranks(s, false) == std::vector<std::size_t>{1, 2, 3});
  Matrix t(2, 2);
  t << 0.2, 0.9, 0.3, 0.3;
  CHECK(diagonal_ranks(t, true) == std::vector<std::size_t>{2, 2});
  CHECK(diagonal_ranks(t, false) == std::vector<std::size_t>{2, 2});
}

TEST_CASE("metrics are invariant under strictly monotone maps") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix s = rng.normal_matrix(12, 12);
    const RetrievalMetrics a = compute_metrics(s);
    const RetrievalMetrics b = compute_metrics((s.array() * 3.0 + 1.0).exp().matrix());
    CHECK(a.t2v.rsum == b.t2v.rsum);
    CHECK(a.v2t.mean_rank == b.v2t.mean_rank);
    CHECK(a.t2v.r1 <= a.t2v.r5);
    CHECK(a.t2v.r5 <= a.t2v.r10);
    CHECK(a.t2v.median_rank >= 1.0);
    // Permuting queries jointly with their matches leaves aggregates alone.
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(12);
    perm.setIdentity();
    std::swap(perm.indices()[0], perm.indices()[7]);
    std::swap(perm.indices()[3], perm.indices()[5]);
    const Matrix p = perm * s * perm.transpose();
    CHECK(compute_metrics(p).t2v.mean_rank == doctest::Approx(a.t2v.mean_rank));
  }
}

TEST_CASE("shape errors") {
  CHECK_THROWS_AS(compute_metrics(Matrix::Zero(2, 3)), InvalidArgument);
  CHECK_THROWS_AS(metrics_from_ranks({}, "t2v"), DataError);
}

TEST_CASE("json round trip and table") {
  const RetrievalMetrics m = compute_metrics(Matrix::Identity(4, 4));
  const nlohmann::json j = to_json(m.t2v);
  CHECK(j.at("R@1") == 100.0);
  CHECK(j.at("direction") == "t2v");
  const MetricsReport back = metrics_report_from_json(j);
  CHECK(back.rsum == m.t2v.rsum);
  CHECK(back.queries == 4);
  CHECK(format_table(m).find("t2v") != std::string::npos);
}

TEST_CASE("pairwise scoring") {
  ModelConfig mc;
  mc.dim = 6;
  mc.frames = 2;
  mc.frl.heads = 2;
  mc.frl.layers = 1;
  mc.frl.num_candidates = 2;
  const Model model(mc);
  Rng rng(4);
  const Matrix texts = rng.normal_matrix(3, 6);
  const Matrix video = rng.normal_matrix(2, 6);
  const std::vector<Matrix> videos = {video, rng.normal_matrix(2, 6), video};
  const Matrix s = score_all(model, texts, videos, 7);
  CHECK(s.rows() == 3);
  CHECK(s.cols() == 3);
  CHECK(s == score_all(model, texts, videos, 7));
  CHECK(s.col(0) == s.col(2));
  CHECK(s.col(0) != s.col(1));
  CHECK(score_all(model, texts.topRows(1), {video}, 7).size() == 1);
  CHECK(s.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  CHECK_THROWS_WITH_AS(score_all(model, Matrix(0, 6), {}, 7), "no queries", DataError);
}
