#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "graphident/datagen.hpp"
#include "graphident/errors.hpp"
#include "graphident/graph.hpp"
#include "graphident/solver.hpp"
#include "graphident/trainer.hpp"

using namespace graphident;

namespace {

TrajectoryTensor random_trajectory(std::size_t n, std::size_t s, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  TrajectoryTensor X(n, s, d);
  for (auto& v : X.values()) v = g(rng);
  return X;
}

std::vector<Eigen::MatrixXd> zero_grads(const EncoderParams& p) {
  std::vector<Eigen::MatrixXd> g;
  for (const auto* t : p.tensors()) g.push_back(Eigen::MatrixXd::Zero(t->rows(), t->cols()));
  return g;
}

}  // namespace

TEST_CASE("graph loss") {
  const Eigen::VectorXd w = (Eigen::VectorXd(3) << 1, 0, 0).finished();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  CHECK(graph_loss(w, w, 3) == 0.0);
  // |w|_1 = 1; the symmetrized adjoint of a single edge has vech [0, 1/2, 1/2]
  CHECK(graph_loss(w, zero, 3) == doctest::Approx(2.0));
  CHECK(graph_loss(w, zero, 3) == graph_loss(zero, w, 3));
  CHECK_THROWS_AS(graph_loss(w, Eigen::VectorXd::Zero(4), 3), DimensionError);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd a(10), b(10);
    for (Eigen::Index e = 0; e < 10; ++e) {
      a(e) = u(rng) < 0.4 ? 0.0 : u(rng);
      b(e) = u(rng) < 0.4 ? 0.0 : u(rng);
    }
    CHECK(graph_loss(a, b, 5) >= 0.0);
    CHECK(graph_loss(a, b, 5) == doctest::Approx(graph_loss(b, a, 5)));
    ad::Tape tape;
    const ad::Var wa = tape.variable(a);
    CHECK(record_graph_loss(wa, b, 5).scalar() == doctest::Approx(graph_loss(a, b, 5)).epsilon(1e-12));
  }
}

TEST_CASE("recorded loss gradient") {
  Eigen::VectorXd a(10), b(10);
  a << 0.3, 0, 0.8, 0.25, 0, 0.6, 0.9, 0, 0.45, 0.15;
  b << 0.5, 0.2, 0, 0.7, 0, 0.1, 0.35, 0.05, 0, 0.95;
  // probe only the nonzero coordinates; zeros change the adjoint's support
  std::vector<ad::Coordinate> coords;
  for (Eigen::Index e = 0; e < 10; ++e) {
    if (a(e) != 0.0) coords.push_back({0, e});
  }
  const auto report = ad::gradient_check(
      [&b](ad::Tape&, const std::vector<ad::Var>& p) { return record_graph_loss(p[0], b, 5); }, {a}, 1e-6, 1e-4,
      coords);
  CHECK(report.passed);
}

TEST_CASE("single unrolled step from identical features") {
  const EncoderParams p = init_params(EncoderArchitecture::formation(), 3);
  TrajectoryTensor X(4, 2, 6, std::vector<double>(48, 0.7));
  const EncoderOutput enc = encode(X, p);
  const DualState s0 = DualState::initial(4, 17);
  const Eigen::VectorXd w = unrolled_identify(X, p, 1, 17);
  const Eigen::VectorXd expected = (sum_operator(4).transpose() * s0.omega / (2.0 * enc.beta)).cwiseMax(0.0);
  CHECK((w - expected).cwiseAbs().maxCoeff() <= 1e-12 * expected.cwiseAbs().maxCoeff());
}

TEST_CASE("unrolled forward equals the plain solver") {
  const EncoderParams p = init_params(EncoderArchitecture::formation(), 4);
  const TrajectoryTensor X = random_trajectory(6, 2, 8, 5);
  const EncoderOutput enc = encode(X, p);
  SolverConfig cfg;
  cfg.alpha = enc.alpha;
  cfg.beta = enc.beta;
  cfg.max_iters = 30;
  cfg.tol = std::numeric_limits<double>::min();
  cfg.seed = 9;
  const Eigen::VectorXd y = half_vectorize(enc.distances);
  for (long k : {1L, 5L, 30L}) {
    cfg.max_iters = k;
    const SolveResult plain = identify_graph(y, 6, cfg);
    REQUIRE(plain.iters_run == k);
    const Eigen::VectorXd unrolled = unrolled_identify(X, p, static_cast<int>(k), 9);
    CHECK((plain.w - unrolled).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, plain.w.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("end-to-end gradient") {
  const EncoderParams p = init_params(EncoderArchitecture::formation(), 11);
  const TrajectoryTensor X = random_trajectory(5, 2, 4, 12);
  const Eigen::MatrixXd W = sample_er_graph(5, 0.4, 13);
  const DualState s0 = DualState::initial(5, 14);
  std::vector<Eigen::MatrixXd> values;
  for (const auto* t : p.tensors()) values.push_back(*t);
  const auto f = [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
    const UnrolledSolve solve = record_unrolled_identify(tape, p, vars, X, 10, s0);
    return record_graph_loss(solve.w, half_vectorize(W), 5);
  };
  std::mt19937_64 rng(15);
  std::vector<ad::Coordinate> coords;
  while (coords.size() < 5) {
    const std::size_t k = rng() % values.size();
    if (values[k].size() == 0) continue;
    coords.push_back({k, static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(values[k].size()))});
  }
  const auto report = ad::gradient_check(f, values, 1e-6, 1e-3, coords);
  CHECK(report.max_relative_error < 1e-3);
}

TEST_CASE("adam") {
  TrainConfig cfg;
  cfg.clip_norm = 0;
  TrainState s = TrainState::fresh(init_params(EncoderArchitecture::formation(), 1));
  const EncoderParams before = s.params;

  CHECK(adam_update(s, zero_grads(s.params), cfg));
  for (std::size_t k = 0; k < before.tensors().size(); ++k) CHECK(*s.params.tensors()[k] == *before.tensors()[k]);
  CHECK(s.step == 1);

  TrainState one = TrainState::fresh(before);
  auto grads = zero_grads(before);
  grads[0](0, 0) = 0.37;
  grads[0](1, 2) = -2.5;
  CHECK(adam_update(one, grads, cfg));
  const Eigen::MatrixXd delta = *one.params.tensors()[0] - *before.tensors()[0];
  CHECK(delta(0, 0) == doctest::Approx(-cfg.learning_rate * 0.37 / (0.37 + cfg.adam_epsilon)).epsilon(1e-10));
  CHECK(delta(1, 2) == doctest::Approx(cfg.learning_rate * 2.5 / (2.5 + cfg.adam_epsilon)).epsilon(1e-10));

  TrainState many = TrainState::fresh(before);
  auto g = zero_grads(before);
  g[1](0, 0) = -0.02;
  for (int k = 0; k < 10000; ++k) adam_update(many, g, cfg);
  const double prev = (*many.params.tensors()[1])(0, 0);
  adam_update(many, g, cfg);
  CHECK((*many.params.tensors()[1])(0, 0) - prev == doctest::Approx(cfg.learning_rate).epsilon(1e-3));

  TrainState bad = TrainState::fresh(before);
  auto nan = zero_grads(before);
  nan[2](0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(adam_update(bad, nan, cfg));
  CHECK(bad.step == 0);
  CHECK(*bad.params.tensors()[0] == *before.tensors()[0]);

  auto wrong = zero_grads(before);
  wrong.pop_back();
  CHECK_THROWS_AS(adam_update(bad, wrong, cfg), DimensionError);
}

TEST_CASE("gradient clipping") {
  TrainConfig cfg;
  cfg.clip_norm = 1.0;
  TrainState a = TrainState::fresh(init_params(EncoderArchitecture::formation(), 1));
  auto g = zero_grads(a.params);
  g[0](0, 0) = 300.0;
  adam_update(a, g, cfg);
  CHECK(a.adam_m[0](0, 0) == doctest::Approx(0.1 * 1.0));
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.unroll_steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.learning_rate = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.sample_refresh_period = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("record picking") {
  TrainConfig cfg;
  for (long s = 0; s < 12; ++s) CHECK(pick_record(s, 5, cfg) == static_cast<std::size_t>(s % 5));
  cfg.policy = SamplePolicy::Uniform;
  cfg.sample_refresh_period = 4;
  for (long s = 0; s < 40; s += 4) {
    const std::size_t k = pick_record(s, 7, cfg);
    CHECK(k < 7);
    for (long j = 1; j < 4; ++j) CHECK(pick_record(s + j, 7, cfg) == k);
  }
  CHECK_THROWS(pick_record(0, 0, cfg));
}

TEST_CASE("training loop") {
  FormationSpec spec;
  spec.n = 6;
  spec.d = 30;
  spec.windows = 3;
  const auto data = generate_formation(spec);
  TrainConfig cfg;
  cfg.total_steps = 8;
  cfg.unroll_steps = 5;

  SUBCASE("zero learning rate keeps parameters") {
    cfg.learning_rate = 0.0;
    TrainState s = TrainState::fresh(init_params(EncoderArchitecture::formation(), 2));
    const EncoderParams before = s.params;
    train(data, cfg, s);
    CHECK(s.step == 8);
    for (std::size_t k = 0; k < before.tensors().size(); ++k) CHECK(*s.params.tensors()[k] == *before.tensors()[k]);
  }

  SUBCASE("identical seeds give identical metrics") {
    auto run = [&] {
      std::vector<MetricsRow> rows;
      TrainState s = TrainState::fresh(init_params(EncoderArchitecture::formation(), 2));
      train(data, cfg, s, [&rows](const MetricsRow& r) { rows.push_back(r); });
      return rows;
    };
    const auto a = run(), b = run();
    REQUIRE(a.size() == 8);
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].step == static_cast<long>(k + 1));
      CHECK(a[k].loss == b[k].loss);
      CHECK(a[k].mae == b[k].mae);
      CHECK(a[k].sample_id == b[k].sample_id);
    }
  }

  SUBCASE("dual state persists within a graph") {
    TrainState s = TrainState::fresh(init_params(EncoderArchitecture::formation(), 2));
    train(data, cfg, s);
    CHECK(s.dual.iter == 8 * 5);
    CHECK(s.active_graph == 0);
  }

  SUBCASE("failures exhaust the retry budget") {
    auto broken = data;
    broken[0].X.values()[0] = std::numeric_limits<double>::quiet_NaN();
    TrainState s = TrainState::fresh(init_params(EncoderArchitecture::formation(), 2));
    cfg.retry_budget = 2;
    CHECK_THROWS_AS(train(broken, cfg, s), NumericalError);
    CHECK(s.step == 0);
  }

  SUBCASE("streamed records match the materialized dataset") {
    cfg.total_steps = 3;
    std::vector<MetricsRow> listed, streamed;
    TrainState a = TrainState::fresh(init_params(EncoderArchitecture::formation(), 2));
    train(data, cfg, a, [&](const MetricsRow& r) { listed.push_back(r); });
    const FormationSource source(spec);
    TrainState b = TrainState::fresh(init_params(EncoderArchitecture::formation(), 2));
    train([&](long step) { return source.window(step); }, cfg, b, [&](const MetricsRow& r) { streamed.push_back(r); });
    REQUIRE(streamed.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(streamed[k].loss == listed[k].loss);
      CHECK(streamed[k].sample_id == static_cast<std::int64_t>(k));
    }
  }

  SUBCASE("empty dataset") {
    TrainState s = TrainState::fresh(init_params(EncoderArchitecture::formation(), 2));
    CHECK_THROWS(train(std::span<const SampleRecord>{}, cfg, s));
  }
}

TEST_CASE("learning progress on a small formation graph") {
  FormationSpec spec;
  spec.n = 10;
  spec.p = 0.2;
  spec.d = 200;
  spec.windows = 20;
  spec.seed = 4;
  const auto data = generate_formation(spec);
  TrainConfig cfg;
  cfg.total_steps = 2000;
  std::vector<double> maes;
  TrainState s = TrainState::fresh(init_params(EncoderArchitecture::formation(), 1));
  train(data, cfg, s, [&maes](const MetricsRow& r) { maes.push_back(r.mae); });
  double tail = 0.0;
  for (std::size_t k = maes.size() - 50; k < maes.size(); ++k) tail += maes[k] / 50.0;
  MESSAGE("first mae " << maes.front() << ", mean of last 50 " << tail);
  CHECK(tail <= 0.5 * maes.front());
}
