#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "test_support.hpp"

using namespace lapmrf;
using Catch::Matchers::WithinAbs;

namespace {

// concave quadratic -(x-3)^2
double parabola(const std::vector<double>& x, std::vector<double>& g) {
  g[0] = -2.0 * (x[0] - 3.0);
  return -(x[0] - 3.0) * (x[0] - 3.0);
}

// badly scaled concave bowl
double bowl(const std::vector<double>& x, std::vector<double>& g) {
  g[0] = -2.0 * x[0];
  g[1] = -20.0 * x[1];
  return -(x[0] * x[0] + 10.0 * x[1] * x[1]);
}

// smooth non-quadratic: -log cosh(x) + 0.4 x, maximum at atanh(0.4)
double logcosh(const std::vector<double>& x, std::vector<double>& g) {
  g[0] = -std::tanh(x[0]) + 0.4;
  return -std::log(std::cosh(x[0])) + 0.4 * x[0];
}

}  // namespace

TEST_CASE("quadratic maxima", "[optimize]") {
  OptimizerConfig cfg;
  cfg.tol_grad_inf = 1e-10;
  SECTION("one dimension") {
    auto [x, diag] = maximize(parabola, {0.0}, cfg);
    CHECK(diag.converged);
    CHECK_THAT(x[0], WithinAbs(3.0, 1e-8));
    CHECK_THAT(diag.final_value, WithinAbs(0.0, 1e-12));
  }
  SECTION("two dimensions, poorly scaled") {
    auto [x, diag] = maximize(bowl, {5.0, -4.0}, cfg);
    CHECK(diag.converged);
    CHECK_THAT(x[0], WithinAbs(0.0, 1e-8));
    CHECK_THAT(x[1], WithinAbs(0.0, 1e-8));
  }
  SECTION("already optimal start returns immediately") {
    auto [x, diag] = maximize(parabola, {3.0}, cfg);
    CHECK(diag.converged);
    CHECK(diag.iterations == 0);
    CHECK(x[0] == 3.0);
  }
}

TEST_CASE("non-quadratic objective", "[optimize]") {
  OptimizerConfig cfg;
  cfg.tol_grad_inf = 1e-9;
  auto [x, diag] = maximize(logcosh, {-2.0}, cfg);
  CHECK(diag.converged);
  CHECK_THAT(x[0], WithinAbs(std::atanh(0.4), 1e-7));
}

TEST_CASE("single-site likelihood recovers the log-odds", "[optimize]") {
  // empirical mean 0.8 for one binary variable: theta = log(0.8/0.2) = ln 4
  Graph g(1);
  CliqueSystem cs = CliqueSystem::from_maximal(g, {{0}});
  LogLinearModel m(std::move(g), std::move(cs));
  auto obj = [&](const std::vector<double>& th, std::vector<double>& grad) {
    m.params()[0] = th[0];
    InferenceResult r = brute_force(m);
    grad[0] = 0.8 - r.feature_means[0];
    return 0.8 * th[0] - r.log_z;
  };
  auto [x, diag] = maximize(obj, {0.0}, OptimizerConfig{});
  CHECK(diag.converged);
  CHECK_THAT(x[0], WithinAbs(std::log(4.0), 1e-6));
}

TEST_CASE("ascent is monotone in the iteration cap", "[optimize]") {
  double prev = -1e300;
  for (int cap = 1; cap <= 6; ++cap) {
    OptimizerConfig cfg;
    cfg.max_iters = cap;
    cfg.tol_grad_inf = 1e-14;
    auto [x, diag] = maximize(bowl, {5.0, -4.0}, cfg);
    CHECK(diag.final_value >= prev - 1e-12);
    CHECK(diag.iterations <= cap);
    prev = diag.final_value;
  }
}

TEST_CASE("optimizer determinism", "[optimize]") {
  LogLinearModel m = ts::seeded_model(build_grid2d(2, 3), 19);
  Dataset data = ts::quick_data(m, 200, 5);
  SufficientStats stats = sufficient_stats(m.cliques(), data);
  auto run = [&] {
    LogLinearModel work = m;
    auto obj = [&](const std::vector<double>& th, std::vector<double>& grad) {
      work.set_params(th);
      auto [v, g] = ml_objective_grad(work, stats);
      grad = std::move(g);
      return v;
    };
    return maximize(obj, std::vector<double>(m.params().size(), 0.0), OptimizerConfig{});
  };
  auto [x1, d1] = run();
  auto [x2, d2] = run();
  CHECK(x1 == x2);  // bitwise identical
  CHECK(d1.iterations == d2.iterations);
  CHECK(d1.final_value == d2.final_value);
}

TEST_CASE("optimizer failure modes", "[optimize]") {
  SECTION("non-finite objective reports the point") {
    auto bad = [](const std::vector<double>& x, std::vector<double>& g) {
      g[0] = 1.0;
      return std::log(x[0]);  // -inf at the origin
    };
    try {
      maximize(bad, {0.0}, OptimizerConfig{});
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(e.point.size() == 1);
      CHECK(e.point[0] == 0.0);
    }
  }
  SECTION("non-finite gradient") {
    auto bad = [](const std::vector<double>& x, std::vector<double>& g) {
      g[0] = 1.0 / x[0];
      return 0.0;
    };
    CHECK_THROWS_AS(maximize(bad, {0.0}, OptimizerConfig{}), NumericalError);
  }
  SECTION("iteration cap leaves converged unset") {
    OptimizerConfig cfg;
    cfg.max_iters = 1;
    cfg.tol_grad_inf = 1e-14;
    auto [x, diag] = maximize(bowl, {5.0, -4.0}, cfg);
    CHECK_FALSE(diag.converged);
    CHECK(diag.iterations == 1);
  }
  SECTION("config validation") {
    OptimizerConfig cfg;
    cfg.tol_grad_inf = 0.0;
    CHECK_THROWS_AS(maximize(parabola, {0.0}, cfg), DimensionError);
    cfg.tol_grad_inf = 1e-6;
    cfg.max_iters = 0;
    CHECK_THROWS_AS(maximize(parabola, {0.0}, cfg), DimensionError);
  }
}
