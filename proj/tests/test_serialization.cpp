#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "netlqr/dynamic_solver.hpp"
#include "netlqr/serialization.hpp"
#include "oracles.hpp"

using namespace netlqr;
using Eigen::MatrixXd;

TEST_CASE("doubles survive formatting bit for bit") {
  std::mt19937_64 gen(81);
  std::normal_distribution<double> nd(0.0, 1e3);
  std::vector<double> values{0.1, 1.0 / 3.0, -2.5e-300, 1.7976931348623157e308, 5e-324, 0.0, -0.0};
  for (int i = 0; i < 1000; ++i) values.push_back(nd(gen));
  for (double v : values) {
    const double back = parse_double(format_double(v));
    CHECK(std::signbit(back) == std::signbit(v));
    CHECK(back == v);
  }
  CHECK(parse_double("+1.5") == 1.5);
  CHECK_THROWS_AS(parse_double("1.5x"), ConfigError);
}

TEST_CASE("policies round-trip exactly") {
  std::mt19937_64 gen(83);
  const auto sys = oracle::random_switched(gen, 2, 1, 2, 2, true);
  const CostWeightsd w{MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1), MatrixXd::Identity(2, 2), 3};
  const auto pol = solve_dynamic(sys, w);
  std::stringstream ss;
  write_policy(ss, pol);
  const std::string text = ss.str();
  std::istringstream kind_in(text);
  CHECK(document_kind(kind_in) == "partition_policy");
  std::istringstream in(text);
  const auto back = read_policy(in);
  CHECK(back.num_modes == pol.num_modes);
  CHECK(back.terminal == pol.terminal);
  REQUIRE(back.steps.size() == pol.steps.size());
  for (std::size_t k = 0; k < pol.steps.size(); ++k) {
    REQUIRE(back.steps[k].size() == pol.steps[k].size());
    for (std::size_t i = 0; i < pol.steps[k].size(); ++i) {
      const auto& a = pol.steps[k][i];
      const auto& b = back.steps[k][i];
      CHECK(a.action == b.action);
      CHECK(a.candidate == b.candidate);
      CHECK(a.optimal == b.optimal);
      CHECK(a.successors == b.successors);
      CHECK(a.gain == b.gain);
      CHECK(a.value == b.value);
      REQUIRE(a.constraints.size() == b.constraints.size());
      for (std::size_t c = 0; c < a.constraints.size(); ++c) {
        CHECK(a.constraints[c].Y == b.constraints[c].Y);
        CHECK(a.constraints[c].relation == b.constraints[c].relation);
      }
    }
  }
  std::stringstream again;
  write_policy(again, back);
  CHECK(again.str() == text);
}

TEST_CASE("gain schedules round-trip exactly") {
  std::mt19937_64 gen(89);
  GainFile f;
  f.schedule = "both";
  f.gains.actions = {0, 1, 1};
  for (int k = 0; k < 3; ++k) f.gains.K.push_back(oracle::random_matrix(gen, 2, 3));
  for (int k = 0; k < 4; ++k) f.gains.P.push_back(oracle::random_spd(gen, 3, 0.1));
  std::stringstream ss;
  write_gains(ss, f);
  const auto back = read_gains(ss);
  CHECK(back.schedule == "both");
  CHECK(back.gains.actions == f.gains.actions);
  for (int k = 0; k < 3; ++k) CHECK(back.gains.K[k] == f.gains.K[k]);
  for (int k = 0; k < 4; ++k) CHECK(back.gains.P[k] == f.gains.P[k]);
}

TEST_CASE("malformed documents are rejected") {
  std::istringstream wrong("kind: something_else\n");
  CHECK_THROWS_AS(read_policy(wrong), ConfigError);
  std::istringstream broken("kind: gain_schedule\nschedule: a\nhorizon: 2\nactions: [0]\ngains: []\nvalues: []\n");
  CHECK_THROWS_AS(read_gains(broken), ConfigError);
  std::istringstream ragged("kind: partition_policy\nmodes: 1\nhorizon: 0\nterminal: [[1, 2], [3]]\nsteps: []\n");
  CHECK_THROWS_AS(read_policy(ragged), ConfigError);
}
