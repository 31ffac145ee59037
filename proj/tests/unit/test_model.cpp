#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles/dense_reference.hpp"
#include "tvr/core/error.hpp"
#include "tvr/core/kernels.hpp"
#include "tvr/core/ops.hpp"
#include "tvr/model/model.hpp"

using namespace tvr;

namespace {

FrlOptions small_frl(int heads, int layers, int candidates, GraphKind kind = GraphKind::Relational) {
  FrlOptions o;
  o.heads = heads;
  o.layers = layers;
  o.num_candidates = candidates;
  o.graph = kind;
  return o;
}

Matrix unit_rows(Matrix m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i).normalize();
  return m;
}

}  // namespace

TEST_CASE("adapters start near identity and pass through when disabled") {
  ParamStore store;
  Rng rng(1);
  const AdapterParams on = register_adapters(store, 6, true, rng);
  CHECK((on.text_weight->value - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-2);
  CHECK(on.text_bias->value.isZero());
  const AdapterParams off = register_adapters(store, 6, false, rng);
  ad::Tape tape;
  const Matrix t = rng.normal_matrix(1, 6);
  CHECK(adapt_text(tape.constant(t), off).value() == t);
  CHECK(adapt_text(tape.constant(t), on).value().isApprox(t * on.text_weight->value));
}

TEST_CASE("fusion matches the dense transcription") {
  for (int trial = 0; trial < 20; ++trial) {
    ParamStore store;
    Rng rng(100 + trial);
    FusionOptions fo;
    fo.proj_dim = trial % 2 == 0 ? 0 : 5;
    const FusionParams p = register_fusion(store, 6, fo, rng);
    for (Parameter* q : store.all()) q->value += rng.normal_matrix(q->value.rows(), q->value.cols(), 0.3);
    const Matrix frames = rng.normal_matrix(4, 6);
    const Matrix cond = rng.normal_matrix(1, 6);
    ad::Tape tape(false);
    const Matrix got = fuse_frames(tape.constant(frames), tape.constant(cond), p, false, nullptr).value();
    const RowVector want = oracle::fuse(frames, cond.row(0), p);
    CHECK((got.row(0) - want).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("fusion attention is a distribution and dropout only applies in training") {
  ParamStore store;
  Rng rng(3);
  const FusionParams p = register_fusion(store, 6, {}, rng);
  const Matrix frames = rng.normal_matrix(5, 6), cond = rng.normal_matrix(1, 6);
  ad::Tape tape(false);
  Matrix attn;
  const Matrix eval1 = fuse_frames(tape.constant(frames), tape.constant(cond), p, false, nullptr, &attn).value();
  CHECK(attn.sum() == doctest::Approx(1.0));
  CHECK(attn.minCoeff() >= 0.0);
  const Matrix eval2 = fuse_frames(tape.constant(frames), tape.constant(cond), p, false, nullptr).value();
  CHECK(eval1 == eval2);
  Rng drop(9);
  const Matrix train = fuse_frames(tape.constant(frames), tape.constant(cond), p, true, &drop).value();
  CHECK(train != eval1);
  CHECK_THROWS_AS(fuse_frames(tape.constant(frames), tape.constant(cond), p, true, nullptr), InvalidArgument);
}

TEST_CASE("mean fusion averages frames") {
  ParamStore store;
  Rng rng(3);
  FusionOptions fo;
  fo.kind = FusionKind::Mean;
  const FusionParams p = register_fusion(store, 4, fo, rng);
  CHECK(store.size() == 0);
  const Matrix frames = rng.normal_matrix(3, 4);
  ad::Tape tape(false);
  CHECK(fuse_frames(tape.constant(frames), tape.constant(frames.row(0)), p, false, nullptr).value().isApprox(
      frames.colwise().mean()));
}

TEST_CASE("radius examples") {
  ParamStore store;
  Rng rng(2);
  RadiusProjector proj = register_radius(store, 2, 4, rng);
  ad::Tape tape(false);
  Matrix t(1, 4), f(2, 4);
  t << 1, 2, 0, -1;
  f << 0.5, 0, 1, 0, -1, 1, 2, 3;
  SUBCASE("zero weights give ones") {
    proj.weight->value.setZero();
    CHECK(compute_radius(tape.constant(t), tape.constant(f), proj).value() == Matrix::Ones(1, 4));
  }
  SUBCASE("orthogonal frames give ones") {
    Matrix orth(2, 4);
    orth << 0, 0, 1, 0, 0, 0, 2, 0;
    CHECK(compute_radius(tape.constant(t), tape.constant(orth), proj).value().isApprox(Matrix::Ones(1, 4)));
  }
  SUBCASE("hand computed") {
    proj.weight->value << 0.1, -0.2, 0.3, 0.0, 0.5, 0.5, -1.0, 2.0;
    const double s0 = (0.5 * 1 + 0 + 0 + 0) / (std::sqrt(1.25) * std::sqrt(6.0));
    const double s1 = (-1 + 2 + 0 - 3) / (std::sqrt(15.0) * std::sqrt(6.0));
    Matrix want(1, 4);
    want << std::exp(0.1 * s0 + 0.5 * s1), std::exp(-0.2 * s0 + 0.5 * s1), std::exp(0.3 * s0 - 1.0 * s1),
        std::exp(0.0 * s0 + 2.0 * s1);
    const Matrix r = compute_radius(tape.constant(t), tape.constant(f), proj).value();
    CHECK((r - want).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(r.minCoeff() > 0.0);
  }
  SUBCASE("zero text is degenerate") {
    CHECK_THROWS_AS(compute_radius(tape.constant(Matrix::Zero(1, 4)), tape.constant(f), proj), NumericalError);
  }
}

TEST_CASE("candidates") {
  ad::Tape tape(false);
  Rng rng(4);
  const Matrix t = rng.normal_matrix(1, 5);
  const Matrix r = (rng.normal_matrix(1, 5).array().abs() + 0.1).matrix();
  SUBCASE("zero noise copies the text") {
    const Matrix c = make_candidates(tape.constant(t), tape.constant(r), Matrix::Zero(3, 5)).value();
    for (int k = 0; k < 3; ++k) CHECK(c.row(k) == t);
  }
  SUBCASE("S=0 gives an empty stack") {
    CHECK(make_candidates(tape.constant(t), tape.constant(r), draw_candidate_noise(0, 5, rng)).rows() == 0);
  }
  SUBCASE("sample mean converges to the text") {
    const int n = 100000;
    const Matrix c = make_candidates(tape.constant(t), tape.constant(r), draw_candidate_noise(n, 5, rng)).value();
    const Matrix mean = c.colwise().mean();
    for (int k = 0; k < 5; ++k) CHECK(std::abs(mean(0, k) - t(0, k)) < 3.0 * r(0, k) / std::sqrt(double(n)));
  }
  SUBCASE("same rng state gives the same draws") {
    Rng a(8), b(8);
    CHECK(draw_candidate_noise(4, 5, a) == draw_candidate_noise(4, 5, b));
  }
}

TEST_CASE("support text geometry") {
  ad::Tape tape(false);
  SUBCASE("unit direction example") {
    Matrix t(1, 2), v(1, 2), r(1, 2);
    t << 0, 0;
    v << 3, 4;
    r << 1, 0;
    const SupportText s = support_text(tape.constant(t), tape.constant(v), tape.constant(r));
    CHECK_FALSE(s.degenerate);
    CHECK(s.text.value()(0, 0) == doctest::Approx(0.6));
    CHECK(s.text.value()(0, 1) == doctest::Approx(0.8));
  }
  SUBCASE("radius equal to the gap reaches v") {
    Matrix t(1, 2), v(1, 2), r(1, 2);
    t << 1, 1;
    v << 4, 5;
    r << 3, 4;
    CHECK(support_text(tape.constant(t), tape.constant(v), tape.constant(r)).text.value().isApprox(v));
  }
  SUBCASE("zero radius keeps t") {
    Matrix t(1, 2), v(1, 2);
    t << 1, 2;
    v << 0, 5;
    CHECK(support_text(tape.constant(t), tape.constant(v), tape.constant(Matrix::Zero(1, 2))).text.value() == t);
  }
  SUBCASE("coincident v flags degeneracy") {
    Matrix t(1, 2);
    t << 1, 2;
    const SupportText s = support_text(tape.constant(t), tape.constant(t), tape.constant(Matrix::Ones(1, 2)));
    CHECK(s.degenerate);
    CHECK(s.text.value() == t);
  }
  SUBCASE("distance from t equals the radius norm") {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
      const Matrix t = rng.normal_matrix(1, 6), v = rng.normal_matrix(1, 6);
      const Matrix r = rng.normal_matrix(1, 6).array().exp().matrix();
      const Matrix s = support_text(tape.constant(t), tape.constant(v), tape.constant(r)).text.value();
      CHECK(std::abs((s - t).norm() - r.norm()) < 1e-9);
    }
  }
}

TEST_CASE("graph construction") {
  ad::Tape tape(false);
  Rng rng(6);
  const Matrix t = rng.normal_matrix(1, 4), cand = rng.normal_matrix(20, 4), f = rng.normal_matrix(12, 4);
  const TextFrameGraph g =
      build_graph(tape.constant(t), tape.constant(cand), tape.constant(f), tape.constant(Matrix::Zero(12, 4)));
  CHECK(g.size() == 33);
  CHECK(g.adjacency[kTextText].count() == 441);
  CHECK(g.adjacency[kFrameFrame].count() == 144);
  CHECK(g.adjacency[kTextFrame].count() == 2 * 21 * 12);
  CHECK(g.nodes.value().bottomRows(12) == f);
  CHECK(g.nodes.value().row(0) == t.row(0));
  for (Eigen::Index i = 0; i < 33; ++i) {
    for (Eigen::Index j = 0; j < 33; ++j) {
      const int covered = g.adjacency[0](i, j) + g.adjacency[1](i, j) + g.adjacency[2](i, j);
      CHECK(covered == 1);
      CHECK(g.adjacency[kTextFrame](i, j) == g.adjacency[kTextFrame](j, i));
    }
  }
  const Matrix pe = rng.normal_matrix(12, 4);
  const TextFrameGraph g2 = build_graph(tape.constant(t), tape.constant(cand), tape.constant(f), tape.constant(pe));
  CHECK(g2.nodes.value().bottomRows(12).isApprox(f + pe));
}

TEST_CASE("constant edge scores give uniform attention") {
  ParamStore store;
  Rng rng(7);
  const FrlParams p = register_frl(store, 4, 3, small_frl(1, 1, 2), rng);
  for (const auto& sc : p.layers[0].scorers) sc.weight->value.setZero();
  ad::Tape tape(false);
  const Matrix x = rng.normal_matrix(6, 4);
  TextFrameGraph g;
  g.nodes = tape.constant(x);
  g.num_text = 3;
  g.num_frames = 3;
  g.adjacency = relation_adjacency(3, 3);
  const GraphOutput out = rgat_forward(g, p, {});
  Matrix want(6, 4);
  for (Eigen::Index i = 0; i < 6; ++i) {
    RowVector pre = (p.layers[0].residual->value * x.row(i).transpose()).transpose();
    for (int r = 0; r < 3; ++r) {
      RowVector mean = RowVector::Zero(4);
      int count = 0;
      for (Eigen::Index j = 0; j < 6; ++j) {
        if (!g.adjacency[r](i, j)) continue;
        mean += (p.layers[0].head_weights[r][0]->value * x.row(j).transpose()).transpose();
        ++count;
      }
      if (count > 0) pre += mean / count;
    }
    want.row(i) = pre.cwiseMax(0.0);
  }
  CHECK((out.nodes.value() - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("graph networks match the dense transcription") {
  for (GraphKind kind : {GraphKind::Relational, GraphKind::FullyConnected}) {
    for (int trial = 0; trial < 10; ++trial) {
      CAPTURE(trial);
      ParamStore store;
      Rng rng(500 + trial);
      FrlOptions o = small_frl(2, 2, 2, kind);
      o.drop_f2f = trial % 3 == 2;
      const FrlParams p = register_frl(store, 6, 3, o, rng);
      ad::Tape tape(false);
      const Matrix x = rng.normal_matrix(6, 6);
      TextFrameGraph g;
      g.nodes = tape.constant(x);
      g.num_text = 3;
      g.num_frames = 3;
      g.adjacency = relation_adjacency(3, 3);
      const GraphOutput got = graph_forward(g, p, {});
      const oracle::GraphResult want = oracle::graph_attention(x, 3, p);
      CHECK((got.nodes.value() - want.nodes).cwiseAbs().maxCoeff() < 1e-10);
      for (int h = 0; h < 2; ++h)
        CHECK((got.text_frame_logits[h].value() - want.tf_scores[h]).cwiseAbs().maxCoeff() < 1e-10);
      GraphForwardOptions lean;
      lean.compute_final_nodes = false;
      const GraphOutput fast = graph_forward(g, p, lean);
      CHECK_FALSE(fast.nodes.valid());
      for (int h = 0; h < 2; ++h)
        CHECK((fast.text_frame_logits[h].value() - want.tf_scores[h]).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("fully connected graph with a single node") {
  ParamStore store;
  Rng rng(8);
  const FrlParams p = register_frl(store, 3, 1, small_frl(1, 1, 0, GraphKind::FullyConnected), rng);
  ad::Tape tape(false);
  TextFrameGraph g;
  g.nodes = tape.constant(rng.normal_matrix(1, 3));
  g.num_text = 1;
  g.num_frames = 0;
  g.adjacency = relation_adjacency(1, 0);
  std::vector<AttentionRecord> trace;
  GraphForwardOptions o;
  o.trace = &trace;
  graph_forward(g, p, o);
  REQUIRE(trace.size() == 1);
  CHECK(trace[0].alpha(0, 0) == 1.0);
}

TEST_CASE("enriched text aggregation") {
  ad::Tape tape(false);
  SUBCASE("hand softmax") {
    // Both heads average to [0, ln2, ln4] over frames.
    Matrix h1(3, 2), h2(3, 2);
    h1 << 1, -1, std::log(2.0), std::log(2.0), 2 * std::log(4.0), 0;
    h2 << 0, 0, std::log(2.0), std::log(2.0), std::log(4.0), std::log(4.0);
    const Matrix x = Matrix::Identity(3, 3);
    const EnrichedText e = aggregate_enriched_text({tape.constant(h1), tape.constant(h2)}, tape.constant(x), 3);
    CHECK(e.weights.value()(0, 0) == doctest::Approx(1.0 / 7.0));
    CHECK(e.weights.value()(0, 1) == doctest::Approx(2.0 / 7.0));
    CHECK(e.weights.value()(0, 2) == doctest::Approx(4.0 / 7.0));
    CHECK(e.text.value().isApprox(e.weights.value()));
  }
  SUBCASE("equal scores average the text rows") {
    Rng rng(9);
    const Matrix x = rng.normal_matrix(5, 4);
    const EnrichedText e = aggregate_enriched_text({tape.constant(Matrix::Constant(3, 2, 0.7))}, tape.constant(x), 3);
    CHECK(e.text.value().isApprox(x.topRows(3).colwise().mean()));
  }
  SUBCASE("single text node is returned exactly") {
    Rng rng(9);
    const Matrix x = rng.normal_matrix(4, 4);
    const EnrichedText e = aggregate_enriched_text({tape.constant(rng.normal_matrix(1, 3))}, tape.constant(x), 1);
    CHECK(e.weights.value()(0, 0) == 1.0);
    CHECK(e.text.value().row(0) == x.row(0));
  }
}

TEST_CASE("pair energies and pooling") {
  ParamStore store;
  Rng rng(10);
  const EnergyParams cos = register_energy(store, 4, {EnergyKind::CosSim, Pooling::Avg, 0}, rng);
  const EnergyParams bil = register_energy(store, 4, {EnergyKind::Bilinear, Pooling::Avg, 0}, rng);
  ad::Tape tape(false);
  Matrix t(1, 4), orth(1, 4);
  t << 1, 2, 3, 4;
  orth << 2, -1, 0, 0;
  CHECK(pair_energy(tape.constant(t), tape.constant(t), cos).item() == doctest::Approx(-1.0));
  CHECK(pair_energy(tape.constant(t), tape.constant(orth), cos).item() == doctest::Approx(0.0));
  for (int i = 0; i < 50; ++i) {
    const Matrix a = rng.normal_matrix(1, 4), f = rng.normal_matrix(3, 4);
    CHECK(frame_energies(tape.constant(a), tape.constant(f), bil)
              .value()
              .isApprox(frame_energies(tape.constant(a), tape.constant(f), cos).value()));
  }
  CHECK_THROWS_AS(pair_energy(tape.constant(Matrix::Zero(1, 4)), tape.constant(t), bil), NumericalError);

  SUBCASE("pooling order statistics") {
    EnergyParams mlp = register_energy(store, 4, {EnergyKind::Mlp, Pooling::Avg, 6}, rng);
    for (int i = 0; i < 1000; ++i) {
      const Matrix a = rng.normal_matrix(1, 4), f = rng.normal_matrix(5, 4);
      EnergyParams e = i % 2 == 0 ? mlp : cos;
      e.pooling = Pooling::Min;
      const double lo = video_energy(tape.constant(a), tape.constant(f), e, nullptr).item();
      e.pooling = Pooling::Avg;
      const double mid = video_energy(tape.constant(a), tape.constant(f), e, nullptr).item();
      e.pooling = Pooling::Max;
      const double hi = video_energy(tape.constant(a), tape.constant(f), e, nullptr).item();
      CHECK(lo <= mid + 1e-15);
      CHECK(mid <= hi + 1e-15);
      tape.clear();
    }
  }
  SUBCASE("two-frame example") {
    // cos energies -0.9 and -0.1 via frames at chosen angles to t = e1
    Matrix e1(1, 2), f(2, 2);
    e1 << 1, 0;
    f << 0.9, std::sqrt(1 - 0.81), 0.1, std::sqrt(1 - 0.01);
    EnergyParams e = cos;
    e.pooling = Pooling::Avg;
    CHECK(video_energy(tape.constant(e1), tape.constant(f), e, nullptr).item() == doctest::Approx(-0.5));
    e.pooling = Pooling::Min;
    CHECK(video_energy(tape.constant(e1), tape.constant(f), e, nullptr).item() == doctest::Approx(-0.9));
    e.pooling = Pooling::Max;
    CHECK(video_energy(tape.constant(e1), tape.constant(f), e, nullptr).item() == doctest::Approx(-0.1));
  }
  SUBCASE("single frame pools identically") {
    const Matrix a = rng.normal_matrix(1, 4), f = rng.normal_matrix(1, 4);
    EnergyParams e = cos;
    std::vector<double> vals;
    for (Pooling p : {Pooling::Avg, Pooling::Max, Pooling::Min}) {
      e.pooling = p;
      vals.push_back(video_energy(tape.constant(a), tape.constant(f), e, nullptr).item());
    }
    CHECK(vals[0] == vals[1]);
    CHECK(vals[1] == vals[2]);
    FusionOptions fo;
    fo.kind = FusionKind::Mean;
    ParamStore s2;
    const FusionParams mean = register_fusion(s2, 4, fo, rng);
    e.pooling = Pooling::Global;
    CHECK(video_energy(tape.constant(a), tape.constant(f), e, &mean).item() == doctest::Approx(vals[0]));
    CHECK_THROWS_AS(video_energy(tape.constant(a), tape.constant(f), e, nullptr), InvalidArgument);
  }
}

TEST_CASE("langevin chains") {
  const EnergyGradFn flat = [](const Matrix& t, const Matrix& f) {
    return EnergyEval{0.0, Matrix::Zero(t.rows(), t.cols()), Matrix::Zero(f.rows(), f.cols())};
  };
  LangevinOptions o;
  o.steps = 7;
  o.noise_var = 0.04;
  ChainSample init{Matrix::Constant(1, 3, 0.5), Matrix::Constant(2, 3, -0.5)};

  SUBCASE("flat energy is a random walk of summed draws") {
    Rng a(11), b(11);
    const ChainSample s = langevin_sample(flat, init, o, a);
    Matrix t = init.text, f = init.frames;
    for (int k = 0; k < 7; ++k) {
      t += b.normal_matrix(1, 3, 0.2);
      f += b.normal_matrix(2, 3, 0.2);
    }
    CHECK((s.text - t).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((s.frames - f).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("fixed seed reproduces the chain") {
    Rng a(12), b(12);
    const ChainSample s1 = langevin_sample(flat, init, o, a), s2 = langevin_sample(flat, init, o, b);
    CHECK(s1.text == s2.text);
    CHECK(s1.frames == s2.frames);
  }
  SUBCASE("gradients are taken at the pre-step pair") {
    // E = <t, f_0>: grad_t = f_0, grad_f0 = t. One noiseless step swaps in the old partner.
    const EnergyGradFn bilinear = [](const Matrix& t, const Matrix& f) {
      Matrix gf = Matrix::Zero(f.rows(), f.cols());
      gf.row(0) = t;
      return EnergyEval{t.row(0).dot(f.row(0)), f.topRows(1), gf};
    };
    LangevinOptions one;
    one.steps = 1;
    one.noise_var = 0.0;
    Rng rng(1);
    ChainSample x{Matrix::Constant(1, 3, 1.0), Matrix::Constant(2, 3, 2.0)};
    const ChainSample s = langevin_sample(bilinear, x, one, rng);
    CHECK(s.text.isApprox(Matrix::Constant(1, 3, -1.0)));
    CHECK(s.frames.row(0).isApprox(RowVector::Constant(3, 1.0)));
    CHECK(s.frames.row(1).isApprox(RowVector::Constant(3, 2.0)));
  }
  SUBCASE("non-finite energy aborts") {
    const EnergyGradFn bad = [](const Matrix& t, const Matrix& f) {
      return EnergyEval{std::nan(""), Matrix::Zero(t.rows(), t.cols()), Matrix::Zero(f.rows(), f.cols())};
    };
    Rng rng(1);
    CHECK_THROWS_WITH_AS(langevin_sample(bad, init, o, rng), "divergent chain", NumericalError);
  }
  SUBCASE("model energy gradient matches finite differences") {
    ParamStore store;
    Rng rng(13);
    const EnergyParams e = register_energy(store, 4, {EnergyKind::Mlp, Pooling::Avg, 5}, rng);
    const EnergyGradFn fn = model_energy_fn(e, nullptr);
    const Matrix t = rng.normal_matrix(1, 4), f = rng.normal_matrix(3, 4);
    const EnergyEval ev = fn(t, f);
    const double h = 1e-6;
    for (int k = 0; k < 4; ++k) {
      Matrix up = t, dn = t;
      up(0, k) += h;
      dn(0, k) -= h;
      CHECK(ev.grad_text(0, k) == doctest::Approx((fn(up, f).energy - fn(dn, f).energy) / (2 * h)).epsilon(1e-6));
    }
    Matrix up = f, dn = f;
    up(2, 1) += h;
    dn(2, 1) -= h;
    CHECK(ev.grad_frames(2, 1) == doctest::Approx((fn(t, up).energy - fn(t, dn).energy) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("replay buffer") {
  Rng rng(14);
  SUBCASE("empty buffer always draws fresh uniform inits") {
    ReplayBuffer buf(4);
    for (int i = 0; i < 200; ++i) {
      const ReplayBuffer::Draw d = buf.draw_init(rng, 2, 3);
      CHECK_FALSE(d.reused_text);
      CHECK_FALSE(d.reused_frames);
      CHECK(d.init.text.cwiseAbs().maxCoeff() <= 1.0);
      CHECK(d.init.frames.cwiseAbs().maxCoeff() <= 1.0);
    }
  }
  SUBCASE("FIFO eviction") {
    ReplayBuffer buf(3);
    for (int i = 0; i < 5; ++i) buf.push({Matrix::Constant(1, 2, i), Matrix::Constant(1, 2, -i)});
    CHECK(buf.size() == 3);
    CHECK(buf.texts().front()(0, 0) == 2.0);
    CHECK(buf.frame_stacks().back()(0, 0) == -4.0);
  }
  SUBCASE("reuse probability") {
    ReplayBuffer buf(16, 0.95);
    for (int i = 0; i < 16; ++i) buf.push({Matrix::Constant(1, 2, i), Matrix::Constant(1, 2, i)});
    int reused = 0;
    for (int i = 0; i < 10000; ++i) reused += buf.draw_init(rng, 1, 2).reused_text ? 1 : 0;
    CHECK(reused / 10000.0 >= 0.94);
    CHECK(reused / 10000.0 <= 0.96);
  }
  SUBCASE("sample_fakes pushes chain outputs") {
    ReplayBuffer buf(10);
    const EnergyGradFn flat = [](const Matrix& t, const Matrix& f) {
      return EnergyEval{0.0, Matrix::Zero(t.rows(), t.cols()), Matrix::Zero(f.rows(), f.cols())};
    };
    const auto before = langevin_invocations();
    const auto fakes = sample_fakes(flat, buf, 4, 2, 3, {}, rng);
    CHECK(langevin_invocations() - before == 4);
    CHECK(fakes.size() == 4);
    CHECK(buf.size() == 4);
    CHECK(buf.texts().back() == fakes.back().text);
  }
}

TEST_CASE("energy objective values") {
  ad::Tape tape(false);
  const Matrix e = Matrix::Constant(3, 1, 0.4);
  CHECK(eam_objective(tape.constant(e), tape.constant(e), 0.0).item() == 0.0);
  CHECK(eam_objective(tape.constant(Matrix::Constant(1, 1, -1.0)), tape.constant(Matrix::Constant(1, 1, 1.0)), 1.0)
            .item() == doctest::Approx(0.0));
  CHECK(eam_objective(tape.constant(Matrix::Constant(1, 1, -1.0)), tape.constant(Matrix::Constant(1, 1, 1.0)), 0.0)
            .item() == doctest::Approx(-2.0));
}

TEST_CASE("fake samples carry no parameter gradient path") {
  ParamStore store;
  Rng rng(15);
  const EnergyParams e = register_energy(store, 3, {EnergyKind::Bilinear, Pooling::Avg, 0}, rng);
  const Matrix t = rng.normal_matrix(1, 3), f = rng.normal_matrix(2, 3);
  const std::vector<ChainSample> fakes = {{rng.normal_matrix(1, 3), rng.normal_matrix(2, 3)}};
  store.zero_grad();
  ad::Tape tape;
  const ad::Var texts[] = {tape.constant(t)};
  const ad::Var frames[] = {tape.constant(f)};
  tape.backward(eam_loss(texts, frames, fakes, e, nullptr, 0.0));
  const Matrix full = e.bilinear->grad;
  // Real term alone minus the fake energy's gradient at the fixed sample.
  store.zero_grad();
  ad::Tape t2;
  tape.clear();
  ad::Var real = video_energy(t2.constant(t), t2.constant(f), e, nullptr);
  ad::Var fake = video_energy(t2.constant(fakes[0].text), t2.constant(fakes[0].frames), e, nullptr);
  t2.backward(ad::sub(real, fake));
  CHECK((full - e.bilinear->grad).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("contrastive losses") {
  ParamStore store;
  const LossScalars s = register_loss_scalars(store);
  ad::Tape tape(false);
  CHECK(ce_loss(tape.constant(Matrix::Constant(1, 1, 0.3)), tape.constant(Matrix::Constant(1, 1, 14.0))).item() == 0.0);
  Matrix m(2, 2);
  m << 5, 0, 0, 5;
  CHECK(ce_loss(tape.constant(m), tape.constant(Matrix::Ones(1, 1))).item() ==
        doctest::Approx(std::log1p(std::exp(-5.0))).epsilon(1e-12));
  CHECK(ce_loss(tape.constant(Matrix::Constant(4, 4, 0.2)), tape.constant(Matrix::Ones(1, 1))).item() ==
        doctest::Approx(std::log(4.0)));
  // zero logit positive term
  CHECK(sigmoid_loss(tape.constant(Matrix::Zero(1, 1)), tape.constant(Matrix::Zero(1, 1)),
                     tape.constant(Matrix::Zero(1, 1)))
            .item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const double s0 = 12.93 / std::exp(4.77);
  CHECK(sigmoid_loss(tape.constant(Matrix::Constant(1, 1, s0)), tape.param(*s.sigmoid_temp_log),
                     tape.param(*s.sigmoid_bias))
            .item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  Matrix sep = Matrix::Constant(3, 3, -1.0);
  sep.diagonal().setConstant(1.0);
  CHECK(sigmoid_loss(tape.constant(sep), tape.constant(Matrix::Constant(1, 1, std::log(100.0))),
                     tape.constant(Matrix::Zero(1, 1)))
            .item() < 1e-40);
  CHECK(std::exp(s.logit_scale_log->value(0, 0)) == doctest::Approx(1.0 / 0.07));
}

TEST_CASE("loss shift behaviour and monotonicity") {
  Rng rng(16);
  ad::Tape tape(false);
  const Matrix sims = rng.normal_matrix(4, 4, 0.3);
  const ad::Var one = tape.constant(Matrix::Ones(1, 1)), zero = tape.constant(Matrix::Zero(1, 1));
  const double base = ce_loss(tape.constant(sims), one).item();
  CHECK(ce_loss(tape.constant((sims.array() + 0.7).matrix()), one).item() == doctest::Approx(base).epsilon(1e-12));
  const double sig = sigmoid_loss(tape.constant(sims), zero, zero).item();
  CHECK(sigmoid_loss(tape.constant((sims.array() + 0.7).matrix()), zero, zero).item() != doctest::Approx(sig));
  Matrix up = sims;
  up(2, 2) += 0.1;
  CHECK(sigmoid_loss(tape.constant(up), zero, zero).item() < sig);
  up = sims;
  up(1, 3) += 0.1;
  CHECK(sigmoid_loss(tape.constant(up), zero, zero).item() > sig);
}

TEST_CASE("logit scale clamp") {
  ParamStore store;
  const LossScalars s = register_loss_scalars(store);
  s.logit_scale_log->value(0, 0) = 9.0;
  clamp_logit_scale(s);
  CHECK(std::exp(s.logit_scale_log->value(0, 0)) == doctest::Approx(100.0));
}

TEST_CASE("pairwise pipeline") {
  ModelConfig mc;
  mc.dim = 6;
  mc.frames = 3;
  mc.frl = small_frl(2, 2, 2);
  Rng rng(17);
  PairBatch batch;
  batch.texts = unit_rows(rng.normal_matrix(3, 6));
  for (int i = 0; i < 3; ++i) batch.frames.push_back(unit_rows(rng.normal_matrix(3, 6)));

  SUBCASE("single pair similarity is a cosine") {
    Model model(mc);
    ad::Tape tape(false);
    PairBatch one;
    one.texts = batch.texts.topRows(1);
    one.frames = {batch.frames[0]};
    const SimilarityMatrices s = similarity_matrices(model, adapt_batch(tape, model, one), 1, false);
    CHECK(s.gen.rows() == 1);
    CHECK(std::abs(s.gen.item()) <= 1.0);
  }
  SUBCASE("without the graph and candidates the enriched text is the text") {
    mc.frl.enabled = false;
    mc.frl.num_candidates = 0;
    Model model(mc);
    ad::Tape tape(false);
    Rng r(1);
    const ad::Var t = tape.constant(batch.texts.row(0));
    const PairForward p = forward_pair(model, t, tape.constant(batch.frames[1]), r, false);
    CHECK(p.enriched.value() == t.value());
  }
  SUBCASE("graph on with no candidates also returns the text") {
    mc.frl.num_candidates = 0;
    mc.frl.drop_f2f = true;
    Model model(mc);
    ad::Tape tape(false);
    Rng r(1);
    const ad::Var t = tape.constant(batch.texts.row(0));
    const PairForward p = forward_pair(model, t, tape.constant(batch.frames[1]), r, true);
    CHECK(p.enriched.value() == t.value());
  }
  SUBCASE("permuting videos permutes columns") {
    Model model(mc);
    ad::Tape tape(false);
    const AdaptedBatch a = adapt_batch(tape, model, batch);
    AdaptedBatch b = a;
    std::swap(b.frames[0], b.frames[2]);
    // Seeds are per (i, j) position, so compare with eval-mode scoring per pair.
    Matrix sa(3, 3), sb(3, 3);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        Rng r1(99), r2(99);
        sa(i, j) = forward_pair(model, a.texts[i], a.frames[j], r1, false).sim_gen.item();
        sb(i, j) = forward_pair(model, b.texts[i], b.frames[j], r2, false).sim_gen.item();
      }
    }
    CHECK(sa.col(0) == sb.col(2));
    CHECK(sa.col(2) == sb.col(0));
    CHECK(sa.col(1) == sb.col(1));
  }
  SUBCASE("loss weights") {
    Model model(mc);
    ad::Tape tape;
    LossConfig lc;
    lc.eam = false;
    lc.lambda_sup = 0.0;
    const TotalLoss only_main = total_loss(tape, model, batch, lc, {}, 4, true);
    CHECK(only_main.parts.total == only_main.parts.main);
    CHECK(only_main.parts.support == 0.0);
    lc.lambda_sup = 0.8;
    const TotalLoss with_sup = total_loss(tape, model, batch, lc, {}, 4, true);
    CHECK(with_sup.parts.total == doctest::Approx(with_sup.parts.main + 0.8 * with_sup.parts.support));
    CHECK(with_sup.parts.main == only_main.parts.main);
  }
}
