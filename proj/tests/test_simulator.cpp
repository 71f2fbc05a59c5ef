#include <doctest.h>

#include <cstdlib>

#include "netlqr/dynamic_solver.hpp"
#include "netlqr/simulator.hpp"
#include "netlqr/static_solver.hpp"
#include "oracles.hpp"

using namespace netlqr;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SwitchedSystemd coin(double a0, double a1) {
  SwitchedSystemd sys;
  sys.n = 1;
  sys.u_dim = 1;
  sys.modes = {{MatrixXd::Constant(1, 1, a0), 0.5, 0}, {MatrixXd::Constant(1, 1, a1), 0.5, 1}};
  sys.actions = {MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1)};
  sys.action_names = {"idle", "send"};
  sys.action_masks = {0, 1};
  return sys;
}

CostWeightsd unit_weights(Index n, Index m, int N) {
  return {MatrixXd::Identity(n, n), MatrixXd::Identity(m, m), MatrixXd::Identity(n, n), N};
}

SimConfig config(std::size_t reps, std::uint64_t seed, const VectorXd& x0) {
  SimConfig c;
  c.replicates = reps;
  c.seed = seed;
  c.x0 = x0;
  return c;
}

}  // namespace

TEST_CASE("lossless plant: every replicate costs the expected value") {
  std::mt19937_64 gen(61);
  auto sys = oracle::random_switched(gen, 3, 1, 1, 1, false);
  const auto w = unit_weights(3, 1, 20);
  const auto g = solve_static(sys, w, constant_schedule(0, 20));
  const VectorXd x0 = VectorXd::Ones(3);
  const auto rep = simulate_static(sys, w, g, config(5, 1, x0));
  const double expected = expected_cost(g, x0);
  for (double c : rep.costs) CHECK(c == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("the same seed reproduces costs for any thread count") {
  const auto sys = coin(0.0, 2.0);
  const auto w = unit_weights(1, 1, 10);
  const auto g = solve_static(sys, w, constant_schedule(1, 10));
  auto cfg = config(300, 42, VectorXd::Ones(1));
  cfg.record_trajectories = cfg.record_inputs = true;
  cfg.threads = 1;
  const auto a = simulate_static(sys, w, g, cfg);
  cfg.threads = 4;
  const auto b = simulate_static(sys, w, g, cfg);
  CHECK(a.costs == b.costs);
  CHECK(a.trajectory->mean == b.trajectory->mean);
  CHECK(*a.actuation_mean == *b.actuation_mean);
  cfg.seed = 43;
  CHECK(simulate_static(sys, w, g, cfg).costs != a.costs);
}

TEST_CASE("Monte Carlo means are unbiased") {
  const auto sys = coin(0.5, 1.5);
  const auto w = unit_weights(1, 1, 5);
  const auto g = solve_static(sys, w, RoutingSchedule{1, 0, 1, 1, 0});
  const VectorXd x0 = VectorXd::Ones(1);
  const double truth = expected_cost(g, x0);
  int within = 0;
  const int batches = 300;
  for (int b = 0; b < batches; ++b) {
    const auto rep = simulate_static(sys, w, g, config(1000, 1000 + b, x0));
    if (std::abs(rep.mean_cost - truth) <= 3.0 * rep.std_error) ++within;
  }
  CHECK(within >= static_cast<int>(0.99 * batches));
}

TEST_CASE("exhaustive enumeration equals the quadratic expected cost") {
  std::mt19937_64 gen(67);
  for (int trial = 0; trial < 5; ++trial) {
    const auto sys = oracle::random_switched(gen, 2, 1, 3, 2, true);
    const auto w = unit_weights(2, 1, 5);
    const auto g = solve_static(sys, w, RoutingSchedule{1, 0, 1, 1, 0});
    const VectorXd x0 = oracle::random_matrix(gen, 2, 1);
    CHECK(exhaustive_expected_cost(sys, w, g, x0) == doctest::Approx(expected_cost(g, x0)).epsilon(1e-9));
  }
  const auto sys = coin(0.0, 2.0);
  const auto w = unit_weights(1, 1, 1);
  const auto g = solve_static(sys, w, constant_schedule(1, 1));
  CHECK(exhaustive_expected_cost(sys, w, g, VectorXd::Ones(1)) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("enumeration respects its cap") {
  const auto sys = coin(0.0, 2.0);
  const auto w = unit_weights(1, 1, 20);
  const auto g = solve_static(sys, w, constant_schedule(1, 20));
  CHECK_THROWS_AS(exhaustive_expected_cost(sys, w, g, VectorXd::Ones(1)), BudgetError);
  CHECK_NOTHROW(exhaustive_expected_cost(sys, w, g, VectorXd::Ones(1), std::size_t{1} << 21));
}

TEST_CASE("a single-action policy simulates like its static schedule") {
  std::mt19937_64 gen(71);
  const auto sys = oracle::random_switched(gen, 2, 1, 2, 1, false);
  const auto w = unit_weights(2, 1, 4);
  const auto pol = solve_dynamic(sys, w);
  const auto g = solve_static(sys, w, constant_schedule(0, 4));
  const auto cfg = config(200, 5, VectorXd::Ones(2));
  const auto a = simulate_dynamic(sys, w, pol, cfg);
  const auto b = simulate_static(sys, w, g, cfg);
  for (std::size_t i = 0; i < a.costs.size(); ++i) CHECK(a.costs[i] == doctest::Approx(b.costs[i]).epsilon(1e-9));
  CHECK(a.fallback_count == 0);
}

TEST_CASE("dynamic policy expectation by enumeration matches its value") {
  const auto sys = coin(0.0, 2.0);
  const auto w = unit_weights(1, 1, 2);
  const auto pol = solve_dynamic(sys, w);
  const VectorXd x0 = VectorXd::Ones(1);
  const auto d = evaluate_policy(pol, 0, x0);
  REQUIRE(d.optimal);
  CHECK(exhaustive_expected_cost(sys, w, pol, x0) == doctest::Approx(x0.dot(*d.value * x0)).epsilon(1e-9));
}

TEST_CASE("idle routing with sign-flip dynamics keeps the state magnitude") {
  // Mean dynamics are zero, yet every realization has |x(k)| = |x(0)|.
  const auto sys = coin(-1.0, 1.0);
  const int N = 6;
  const auto w = unit_weights(1, 1, N);
  const auto g = solve_static(sys, w, constant_schedule(0, N));
  const double x0 = 1.5;
  CHECK(expected_cost(g, VectorXd(VectorXd::Constant(1, x0))) == doctest::Approx((N + 1) * x0 * x0));
  auto cfg = config(100, 3, VectorXd::Constant(1, x0));
  cfg.record_trajectories = true;
  const auto rep = simulate_static(sys, w, g, cfg);
  for (double c : rep.costs) CHECK(c == doctest::Approx((N + 1) * x0 * x0));
  CHECK(rep.trajectory->max.maxCoeff() == doctest::Approx(x0));
  CHECK(rep.trajectory->min.minCoeff() == doctest::Approx(-x0));
  for (const auto& row : rep.action_counts) CHECK(row[0] == 100);
}

TEST_CASE("actuation follows the register cells that reach the plant") {
  NetworkSpecd spec{{MatrixXd::Constant(1, 1, 0.5), MatrixXd::Ones(1, 1)}, {{2, 0.0}}};
  const PathMask send[] = {0b1};
  const auto sys = build_augmented(spec, std::span<const PathMask>(send));
  const int N = 5;
  CostWeightsd w{leading_identity<double>(sys.n, 1), MatrixXd::Identity(1, 1), leading_identity<double>(sys.n, 1), N};
  GainScheduled g;
  g.actions = constant_schedule(0, N);
  for (int k = 0; k < N; ++k) g.K.push_back(MatrixXd::Constant(1, sys.n, 0.0));
  for (int k = 0; k < N; ++k) g.K[k](0, 0) = -(k + 1.0);
  g.P.assign(N + 1, MatrixXd::Zero(sys.n, sys.n));
  auto cfg = config(1, 0, VectorXd::Zero(sys.n));
  cfg.x0(0) = 1.0;
  cfg.record_inputs = cfg.record_trajectories = true;
  const auto rep = simulate_static(sys, w, g, cfg);
  // v(k) = u(k-2); with x(0)=1 the first inputs are -1*x(0) and -2*x(1).
  const auto& v = *rep.actuation_mean;
  CHECK(v(0, 0) == 0.0);
  CHECK(v(1, 0) == 0.0);
  CHECK(v(2, 0) == doctest::Approx(-1.0));
  CHECK(v(3, 0) == doctest::Approx(-2.0 * 0.5));
  CHECK(rep.trajectory->mean.cols() == 1);
}

TEST_CASE("bad simulation inputs are rejected") {
  const auto sys = coin(0.0, 2.0);
  const auto w = unit_weights(1, 1, 2);
  const auto g = solve_static(sys, w, constant_schedule(1, 2));
  CHECK_THROWS_AS(simulate_static(sys, w, g, config(0, 1, VectorXd::Ones(1))), ConfigError);
  CHECK_THROWS_AS(simulate_static(sys, w, g, config(3, 1, VectorXd::Ones(2))), ConfigError);
}
