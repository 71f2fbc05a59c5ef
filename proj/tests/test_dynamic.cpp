#include <doctest.h>

#include "netlqr/dynamic_solver.hpp"
#include "netlqr/simulator.hpp"
#include "netlqr/static_solver.hpp"
#include "oracles.hpp"

using namespace netlqr;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SwitchedSystemd scalar_coin() {
  SwitchedSystemd sys;
  sys.n = 1;
  sys.u_dim = 1;
  sys.modes = {{MatrixXd::Constant(1, 1, 0.0), 0.5, 0}, {MatrixXd::Constant(1, 1, 2.0), 0.5, 1}};
  sys.actions = {MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1)};
  sys.action_names = {"idle", "send"};
  sys.action_masks = {0, 1};
  return sys;
}

// Stable scalar plant where sending is expensive: idling wins near the origin
// only through the input weight, so both actions keep live regions.
SwitchedSystemd scalar_choice() {
  SwitchedSystemd sys;
  sys.n = 2;
  sys.u_dim = 1;
  MatrixXd A0(2, 2), A1(2, 2);
  A0 << 0.9, 0.3, 0.0, 0.5;
  A1 << 1.1, 0.0, 0.2, 0.4;
  sys.modes = {{A0, 0.6, 0}, {A1, 0.4, 1}};
  MatrixXd B0(2, 1), B1(2, 1);
  B0 << 1.0, 0.0;
  B1 << 0.0, 1.0;
  sys.actions = {B0, B1};
  sys.action_names = {"x", "y"};
  sys.action_masks = {0, 1};
  return sys;
}

CostWeightsd unit_weights(Index n, int N) {
  return {MatrixXd::Identity(n, n), MatrixXd::Identity(1, 1), MatrixXd::Identity(n, n), N};
}

// Value of the policy's own partition at step k.
double policy_value(const PartitionPolicy& pol, int k, const VectorXd& x) {
  if (k == pol.horizon()) return x.dot(pol.terminal * x);
  return x.dot(*evaluate_policy(pol, k, x).value * x);
}

}  // namespace

TEST_CASE("last step has one optimal region per action") {
  const auto sys = scalar_coin();
  const auto regions = last_step_partition(sys, unit_weights(1, 1));
  REQUIRE(regions.size() == 2);
  for (std::size_t a = 0; a < 2; ++a) {
    CHECK(regions[a].action == a);
    CHECK(regions[a].optimal);
  }
  CHECK(regions[1].value(0, 0) == doctest::Approx(2.5));
  CHECK(regions[0].value(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("horizon one: every region is optimal") {
  const auto pol = solve_dynamic(scalar_choice(), unit_weights(2, 1));
  REQUIRE(pol.horizon() == 1);
  for (const auto& r : pol.steps[0]) CHECK(r.optimal);
  CHECK(optimal_initial_set(pol).size() == pol.steps[0].size());
}

TEST_CASE("scalar coin-flip census: sending dominates before the last step") {
  const auto pol = solve_dynamic(scalar_coin(), unit_weights(1, 3));
  const auto census = region_census(pol);
  REQUIRE(census.size() == 3);
  CHECK(census[2].regions == 2);
  CHECK(census[1].regions == 1);
  CHECK(census[0].regions == 1);
  CHECK(pol.steps[0][0].action == 1);
  CHECK(pol.steps[0][0].optimal);
  const auto g = solve_static(scalar_coin(), unit_weights(1, 3), constant_schedule(1, 3));
  CHECK(pol.steps[0][0].value(0, 0) == doctest::Approx(g.P[0](0, 0)).epsilon(1e-12));
}

TEST_CASE("a single action collapses to the static recursion") {
  std::mt19937_64 gen(41);
  for (int trial = 0; trial < 6; ++trial) {
    const long n = 1 + trial % 3;
    const auto sys = oracle::random_switched(gen, n, 1, 2, 1, false);
    const int N = 4;
    const auto w = unit_weights(n, N);
    const auto pol = solve_dynamic(sys, w);
    const auto g = solve_static(sys, w, constant_schedule(0, N));
    for (int k = 0; k < N; ++k) {
      REQUIRE(pol.steps[k].size() == 1);
      CHECK(pol.steps[k][0].constraints.empty());
      CHECK(oracle::rel_diff(pol.steps[k][0].value, g.P[k]) <= 1e-10);
      CHECK(oracle::rel_diff(pol.steps[k][0].gain, g.K[k]) <= 1e-10);
    }
  }
}

TEST_CASE("optimal regions satisfy the Bellman identity") {
  const auto sys = scalar_choice();
  const auto w = unit_weights(2, 3);
  const auto pol = solve_dynamic(sys, w);
  const auto xs = sample_states(2, 2000, 99);
  std::size_t checked = 0;
  for (int k = 0; k + 1 < pol.horizon(); ++k)
    for (const auto& x : xs) {
      const auto d = evaluate_policy(pol, k, x);
      if (!d.optimal || d.fallback) continue;
      const VectorXd u = *d.gain * x;
      double rhs = x.dot(w.M * x) + u.dot(w.R * u);
      for (const auto& m : sys.modes) rhs += m.prob * policy_value(pol, k + 1, m.A * x + sys.actions[d.action] * u);
      const double lhs = x.dot(*d.value * x);
      CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(lhs)));
      ++checked;
    }
  CHECK(checked > 1000);
}

TEST_CASE("scalar two-step value matches a brute-force dynamic program") {
  const auto sys = scalar_coin();
  const auto w = unit_weights(1, 2);
  const auto pol = solve_dynamic(sys, w);
  const auto last = last_step_partition(sys, w);
  auto V1 = [&](double y) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : last) best = std::min(best, r.value(0, 0) * y * y);
    return best;
  };
  for (double x : {-2.0, -0.3, 0.7, 1.0, 3.0}) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < sys.num_actions(); ++a)
      for (double u = -8.0; u <= 8.0; u += 1e-4) {
        double c = x * x + u * u;
        for (const auto& m : sys.modes) c += m.prob * V1(m.A(0, 0) * x + sys.actions[a](0, 0) * u);
        best = std::min(best, c);
      }
    const auto d = evaluate_policy(pol, 0, VectorXd::Constant(1, x));
    REQUIRE(d.optimal);
    CHECK(std::abs(d.value->coeff(0, 0) * x * x - best) <= 1e-3 * std::max(1.0, best));
  }
}

TEST_CASE("dynamic routing is never worse than the best static sequence") {
  std::mt19937_64 gen(53);
  for (int trial = 0; trial < 12; ++trial) {
    const long n = 1 + trial % 2;
    const int q = 1 + trial % 2;
    const int N = 1 + trial % 3;
    const auto sys = oracle::random_switched(gen, n, 1, q, 2, trial % 3 == 0);
    const auto w = unit_weights(n, N);
    const auto pol = solve_dynamic(sys, w);
    std::size_t tested = 0;
    for (const auto& x : sample_states(n, 200, 7 + trial)) {
      const VectorXd x0 = x / x.norm();
      const auto d = evaluate_policy(pol, 0, x0);
      if (!d.optimal || d.fallback) continue;
      const double dyn = exhaustive_expected_cost(sys, w, pol, x0);
      const double stat = oracle::best_static_cost(sys, w.M, w.R, w.Q, N, x0);
      CHECK(stat - dyn >= -1e-8);
      CHECK(dyn == doctest::Approx(x0.dot(*d.value * x0)).epsilon(1e-9));
      if (++tested == 10) break;
    }
    CHECK(tested > 0);
  }
}

TEST_CASE("partitions cover sampled states exactly once") {
  const auto pol = solve_dynamic(scalar_choice(), unit_weights(2, 3));
  for (int k = 0; k < pol.horizon(); ++k) {
    const auto cov = partition_coverage(pol, k, 10000, 1234);
    CHECK(cov.samples == 10000);
    CHECK(cov.fallback_rate() < 1e-3);
  }
}

TEST_CASE("the origin resolves to the lowest-index region") {
  const auto pol = solve_dynamic(scalar_choice(), unit_weights(2, 3));
  for (int k = 0; k < pol.horizon(); ++k) CHECK(evaluate_policy(pol, k, VectorXd::Zero(2)).region == 0);
}

TEST_CASE("exceeding the region budget aborts") {
  DynamicOptions opts;
  opts.region_budget = 1;
  CHECK_THROWS_AS(solve_dynamic(scalar_choice(), unit_weights(2, 3), opts), BudgetError);
  opts.region_budget = 10000;
  opts.candidate_budget = 1;
  CHECK_THROWS_AS(solve_dynamic(scalar_choice(), unit_weights(2, 3), opts), BudgetError);
}

TEST_CASE("solving is deterministic") {
  const auto a = solve_dynamic(scalar_choice(), unit_weights(2, 3));
  const auto b = solve_dynamic(scalar_choice(), unit_weights(2, 3));
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    REQUIRE(a.steps[k].size() == b.steps[k].size());
    for (std::size_t i = 0; i < a.steps[k].size(); ++i) CHECK(a.steps[k][i].value == b.steps[k][i].value);
  }
}
