#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "netlqr/dynamic_solver.hpp"
#include "netlqr/model.hpp"
#include "netlqr/static_solver.hpp"

namespace netlqr {

struct SimConfig {
  std::size_t replicates = 1;
  std::uint64_t seed = 0;
  Eigen::VectorXd x0;
  bool record_trajectories = false;
  bool record_inputs = false;
  /// Record every augmented state component instead of only the plant part.
  bool full_state = false;
  /// 0 = NETLQR_THREADS or hardware concurrency.
  unsigned threads = 0;
};

/// Per-step statistics across replicates; row k is time k = 0..N.
struct TrajectoryStats {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd min;
  Eigen::MatrixXd max;
};

struct SimReport {
  std::vector<double> costs;
  double mean_cost = 0.0;
  double std_error = 0.0;
  std::optional<TrajectoryStats> trajectory;
  /// Row k: mean applied actuation at step k. For network systems this is the
  /// sum of the register head cells (what the paths deliver at k); otherwise u(k).
  std::optional<Eigen::MatrixXd> actuation_mean;
  /// action_counts[k][a]: replicates that used action a at step k.
  std::vector<std::vector<std::size_t>> action_counts;
  /// Dynamic policies only: evaluations that needed the boundary fallback.
  std::size_t fallback_count = 0;
};

SimReport simulate_static(const SwitchedSystemd& sys, const CostWeightsd& w, const GainScheduled& g,
                          const SimConfig& cfg);

SimReport simulate_dynamic(const SwitchedSystemd& sys, const CostWeightsd& w,
                           const PartitionPolicy& pol, const SimConfig& cfg);

inline constexpr std::size_t kDefaultEnumerationCap = std::size_t{1} << 16;

/// Exact expectation of the realized cost over all q^N loss sequences.
double exhaustive_expected_cost(const SwitchedSystemd& sys, const CostWeightsd& w,
                                const GainScheduled& g, const Eigen::VectorXd& x0,
                                std::size_t cap = kDefaultEnumerationCap);

double exhaustive_expected_cost(const SwitchedSystemd& sys, const CostWeightsd& w,
                                const PartitionPolicy& pol, const Eigen::VectorXd& x0,
                                std::size_t cap = kDefaultEnumerationCap);

}  // namespace netlqr
