#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "netlqr/model.hpp"

namespace netlqr {

enum class Relation { less, less_equal, greater_equal, greater };

Relation complement(Relation r);
const char* relation_symbol(Relation r);
Relation parse_relation(const std::string& symbol);

/// x'Yx ~ 0.
struct QuadConstraint {
  Eigen::MatrixXd Y;
  Relation relation = Relation::less_equal;

  bool holds(const Eigen::VectorXd& x) const;
};

/// A cell of the step-k partition with the control prescribed on it.
struct Region {
  std::vector<QuadConstraint> constraints;
  std::size_t action = 0;
  Eigen::MatrixXd gain;
  Eigen::MatrixXd value;
  bool optimal = false;
  /// Per loss mode sigma, the step k+1 region the candidate was designed for.
  /// Empty at the last step.
  std::vector<std::size_t> successors;
  /// Regions of one step with the same candidate id share (action, gain, value).
  std::size_t candidate = 0;

  bool contains(const Eigen::VectorXd& x) const;
  double cost(const Eigen::VectorXd& x) const { return x.dot(value * x); }
};

struct PartitionPolicy {
  std::vector<std::vector<Region>> steps;  ///< k = 0..N-1
  Eigen::MatrixXd terminal;                ///< P(N) = Q
  std::size_t num_modes = 0;

  int horizon() const { return static_cast<int>(steps.size()); }
};

struct DynamicOptions {
  std::size_t region_budget = 10000;
  std::size_t candidate_budget = 1000000;
  std::size_t samples = 10000;
  std::uint64_t seed = 0x6e65746c7172ULL;
};

/// Optimal partition at k = N-1: one argmin region per action, all optimal.
std::vector<Region> last_step_partition(const SwitchedSystemd& sys, const CostWeightsd& w);

/// Regions at step k from the step k+1 partition. Candidates are all pairs
/// (action a, successor assignment mu) where mu maps each loss mode to one of
/// the value groups of `next`; each gets its Bellman-optimal gain and value.
/// Cells are argmin regions of the candidates that win somewhere on a seeded
/// state sample, split by whether the closed-loop successors land in the
/// certified regions mu names (optimal) or not (suboptimal completion).
std::vector<Region> backward_step(const SwitchedSystemd& sys, const CostWeightsd& w,
                                  const std::vector<Region>& next, const DynamicOptions& opts,
                                  int step = 0);

PartitionPolicy solve_dynamic(const SwitchedSystemd& sys, const CostWeightsd& w,
                              const DynamicOptions& opts = {});

struct PolicyDecision {
  std::size_t region = 0;
  std::size_t action = 0;
  const Eigen::MatrixXd* gain = nullptr;
  const Eigen::MatrixXd* value = nullptr;
  bool optimal = false;
  /// Set when floating-point evaluation matched zero or several regions and
  /// the minimal-cost region was picked instead.
  bool fallback = false;
};

PolicyDecision evaluate_policy(const PartitionPolicy& pol, int k, const Eigen::VectorXd& x);

/// Step-0 regions flagged optimal.
std::vector<Region> optimal_initial_set(const PartitionPolicy& pol);

struct StepCensus {
  std::size_t regions = 0;
  std::size_t optimal = 0;
};
std::vector<StepCensus> region_census(const PartitionPolicy& pol);

struct CoverageStats {
  std::size_t samples = 0;
  std::size_t exactly_one = 0;
  std::size_t none = 0;
  std::size_t multiple = 0;

  double fallback_rate() const {
    return samples ? static_cast<double>(none + multiple) / static_cast<double>(samples) : 0.0;
  }
};

/// Counts how many sampled states match exactly one region at step k.
CoverageStats partition_coverage(const PartitionPolicy& pol, int k, std::size_t samples,
                                 std::uint64_t seed);

/// Directions uniform on the unit sphere scaled by log-spaced radii in
/// [1e-3, 1e3]. Deterministic in (n, count, seed).
std::vector<Eigen::VectorXd> sample_states(Index n, std::size_t count, std::uint64_t seed);

}  // namespace netlqr
