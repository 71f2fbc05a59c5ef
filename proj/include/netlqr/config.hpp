#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "netlqr/dynamic_solver.hpp"
#include "netlqr/model.hpp"
#include "netlqr/static_solver.hpp"

namespace netlqr {

/// A weight given either explicitly or by shorthand. "plant-identity" is the
/// identity on the plant states and zero on the network registers.
struct WeightSpec {
  enum class Kind { matrix, identity, plant_identity, scaled_identity };
  Kind kind = Kind::identity;
  Eigen::MatrixXd matrix;
  double scale = 1.0;

  Eigen::MatrixXd resolve(Index dim, Index plant_dim) const;
};

/// A fixed routing schedule. Network configs name the paths used at every
/// step (1-based in the file, 0-based here); explicit systems give one action
/// for all steps or a per-step sequence.
struct ScheduleSpec {
  std::string name;
  std::vector<int> paths;
  std::vector<std::string> sequence;
  int line = 0;
};

struct DynamicSettings {
  bool enabled = false;
  std::vector<PathMask> catalog;  ///< network configs only
  std::optional<int> horizon;
  DynamicOptions options;
};

struct SimSettings {
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
};

struct ExperimentConfig {
  std::string name;
  std::optional<NetworkSpecd> network;
  std::optional<SwitchedSystemd> system;
  WeightSpec M{WeightSpec::Kind::plant_identity, {}, 1.0};
  WeightSpec Q{WeightSpec::Kind::plant_identity, {}, 1.0};
  WeightSpec R{WeightSpec::Kind::identity, {}, 1.0};
  int horizon = 1;
  Eigen::VectorXd x0;
  std::vector<ScheduleSpec> schedules;
  DynamicSettings dynamic;
  SimSettings simulation;
  std::string output_dir = "out";
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Everything needed to solve or simulate one routing setup.
struct Experiment {
  std::string name;
  SwitchedSystemd system;
  CostWeightsd weights;
  RoutingSchedule schedule;  ///< empty for dynamic routing
  Eigen::VectorXd x0;
};

Experiment schedule_experiment(const ExperimentConfig& cfg, const std::string& schedule);
Experiment dynamic_experiment(const ExperimentConfig& cfg);

/// System with every path and the dynamic catalog (or all schedule actions).
SwitchedSystemd overview_system(const ExperimentConfig& cfg);

}  // namespace netlqr
