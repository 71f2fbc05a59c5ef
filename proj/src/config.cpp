#include "netlqr/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "yaml_util.hpp"

namespace netlqr {

using detail::need;
using detail::read_index;
using detail::read_integer;
using detail::read_matrix;
using detail::read_number;
using detail::read_vector;
using detail::where;

Eigen::MatrixXd WeightSpec::resolve(Index dim, Index plant_dim) const {
  switch (kind) {
    case Kind::matrix:
      if (matrix.rows() != dim || matrix.cols() != dim)
        throw ConfigError("weight matrix is " + std::to_string(matrix.rows()) + "x" +
                          std::to_string(matrix.cols()) + ", expected " + std::to_string(dim) + "x" +
                          std::to_string(dim));
      return matrix;
    case Kind::identity: return Eigen::MatrixXd::Identity(dim, dim);
    case Kind::scaled_identity: return scale * Eigen::MatrixXd::Identity(dim, dim);
    case Kind::plant_identity: return leading_identity<double>(dim, std::min(dim, plant_dim));
  }
  return {};
}

namespace {

void reject_unknown(const YAML::Node& map, std::initializer_list<const char*> known, const std::string& ctx) {
  const std::set<std::string> ok(known.begin(), known.end());
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) throw ConfigError(where(kv.first) + ": unknown field '" + ctx + key + "'");
  }
}

WeightSpec read_weight(const YAML::Node& node, const std::string& field) {
  WeightSpec w;
  if (node.IsScalar()) {
    const std::string s = node.Scalar();
    if (s == "identity") {
      w.kind = WeightSpec::Kind::identity;
    } else if (s == "plant-identity") {
      w.kind = WeightSpec::Kind::plant_identity;
    } else {
      w.kind = WeightSpec::Kind::scaled_identity;
      w.scale = read_number(node, field);
    }
    return w;
  }
  w.kind = WeightSpec::Kind::matrix;
  w.matrix = read_matrix(node, field);
  return w;
}

NetworkSpecd read_network(const YAML::Node& root) {
  NetworkSpecd spec;
  const YAML::Node plant = need(root, "plant");
  reject_unknown(plant, {"A", "B"}, "plant.");
  spec.plant.A = read_matrix(need(plant, "A"), "plant.A");
  spec.plant.B = read_matrix(need(plant, "B"), "plant.B");
  if (spec.plant.A.rows() != spec.plant.A.cols())
    throw ConfigError(where(plant["A"]) + ": field 'plant.A' must be square");
  if (spec.plant.B.rows() != spec.plant.A.rows())
    throw ConfigError(where(plant["B"]) + ": field 'plant.B' has " + std::to_string(spec.plant.B.rows()) +
                      " rows, expected " + std::to_string(spec.plant.A.rows()));
  const YAML::Node paths = need(root, "paths");
  if (!paths.IsSequence() || paths.size() == 0)
    throw ConfigError(where(paths) + ": field 'paths' must be a non-empty list");
  for (const auto& p : paths) {
    reject_unknown(p, {"delay", "loss"}, "paths[].");
    RoutePath<double> rp;
    rp.delay = static_cast<int>(read_integer(need(p, "delay"), "paths.delay"));
    rp.loss_prob = read_number(need(p, "loss"), "paths.loss");
    if (rp.delay < 1) throw ConfigError(where(p) + ": field 'paths.delay' must be >= 1");
    if (!(rp.loss_prob >= 0.0 && rp.loss_prob <= 1.0))
      throw ConfigError(where(p) + ": field 'paths.loss' must lie in [0,1]");
    spec.paths.push_back(rp);
  }
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(where(paths) + ": " + e.what());
  }
  return spec;
}

SwitchedSystemd read_system(const YAML::Node& node) {
  reject_unknown(node, {"modes", "actions"}, "system.");
  SwitchedSystemd sys;
  const YAML::Node modes = need(node, "modes");
  if (!modes.IsSequence() || modes.size() == 0)
    throw ConfigError(where(modes) + ": field 'system.modes' must be a non-empty list");
  std::uint32_t idx = 0;
  for (const auto& m : modes) {
    Mode<double> mode{read_matrix(need(m, "A"), "system.modes.A"), read_number(need(m, "prob"), "system.modes.prob"),
                      idx++};
    if (mode.prob == 0.0) continue;
    sys.modes.push_back(std::move(mode));
  }
  const YAML::Node actions = need(node, "actions");
  if (!actions.IsSequence() || actions.size() == 0)
    throw ConfigError(where(actions) + ": field 'system.actions' must be a non-empty list");
  for (const auto& a : actions) {
    sys.actions.push_back(read_matrix(need(a, "B"), "system.actions.B"));
    sys.action_names.push_back(a["name"] ? a["name"].as<std::string>()
                                         : std::to_string(sys.actions.size() - 1));
    sys.action_masks.push_back(static_cast<PathMask>(sys.actions.size() - 1));
  }
  if (sys.modes.empty()) throw ConfigError(where(modes) + ": every mode has zero probability");
  sys.n = sys.modes.front().A.rows();
  sys.u_dim = sys.actions.front().cols();
  try {
    sys.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(where(node) + ": " + e.what());
  }
  return sys;
}

PathMask read_mask(const YAML::Node& node, int r, const std::string& field) {
  if (!node.IsSequence() || static_cast<int>(node.size()) != r)
    throw ConfigError(where(node) + ": field '" + field + "' must list one 0/1 entry per path");
  PathMask mask = 0;
  for (int i = 0; i < r; ++i) {
    const long v = read_integer(node[static_cast<std::size_t>(i)], field);
    if (v != 0 && v != 1) throw ConfigError(where(node) + ": field '" + field + "' entries must be 0 or 1");
    if (v) mask |= PathMask{1} << i;
  }
  return mask;
}

ExperimentConfig parse_root(const YAML::Node& root) {
  if (!root.IsMap()) throw ConfigError("configuration must be a key-value map");
  reject_unknown(root, {"name", "plant", "paths", "system", "weights", "horizon", "x0", "schedules", "dynamic",
                        "simulation", "output"},
                 "");
  ExperimentConfig cfg;
  cfg.name = root["name"] ? root["name"].as<std::string>() : "experiment";

  const bool has_network = root["plant"] || root["paths"];
  if (has_network && root["system"])
    throw ConfigError(where(root["system"]) + ": give either 'plant'/'paths' or 'system', not both");
  if (has_network) cfg.network = read_network(root);
  else if (root["system"]) cfg.system = read_system(root["system"]);
  else throw ConfigError("configuration needs 'plant' and 'paths', or 'system'");

  if (const YAML::Node w = root["weights"]) {
    reject_unknown(w, {"M", "Q", "R"}, "weights.");
    if (w["M"]) cfg.M = read_weight(w["M"], "weights.M");
    if (w["Q"]) cfg.Q = read_weight(w["Q"], "weights.Q");
    if (w["R"]) cfg.R = read_weight(w["R"], "weights.R");
  }

  const YAML::Node horizon = need(root, "horizon");
  cfg.horizon = static_cast<int>(read_integer(horizon, "horizon"));
  if (cfg.horizon < 1) throw ConfigError(where(horizon) + ": field 'horizon' must be at least 1");

  cfg.x0 = read_vector(need(root, "x0"), "x0");

  if (const YAML::Node list = root["schedules"]) {
    if (!list.IsSequence()) throw ConfigError(where(list) + ": field 'schedules' must be a list");
    std::set<std::string> seen;
    for (const auto& s : list) {
      reject_unknown(s, {"name", "paths", "action", "sequence"}, "schedules[].");
      ScheduleSpec spec;
      spec.name = need(s, "name").as<std::string>();
      spec.line = s.Mark().line + 1;
      if (!seen.insert(spec.name).second)
        throw ConfigError(where(s) + ": duplicate schedule name '" + spec.name + "'");
      if (cfg.network) {
        const YAML::Node paths = need(s, "paths");
        if (!paths.IsSequence() || paths.size() == 0)
          throw ConfigError(where(paths) + ": field 'schedules.paths' must be a non-empty list");
        for (const auto& p : paths) {
          const long id = read_integer(p, "schedules.paths");
          if (id < 1 || id > cfg.network->num_paths())
            throw ConfigError(where(p) + ": field 'schedules.paths' refers to unknown path " + std::to_string(id));
          spec.paths.push_back(static_cast<int>(id - 1));
        }
      } else if (s["action"]) {
        spec.sequence.push_back(s["action"].as<std::string>());
      } else {
        const YAML::Node seq = need(s, "sequence");
        if (!seq.IsSequence() || seq.size() == 0)
          throw ConfigError(where(seq) + ": field 'schedules.sequence' must be a non-empty list");
        for (const auto& a : seq) spec.sequence.push_back(a.as<std::string>());
      }
      cfg.schedules.push_back(std::move(spec));
    }
  }

  if (const YAML::Node dyn = root["dynamic"]) {
    reject_unknown(dyn, {"actions", "horizon", "samples", "budget", "seed"}, "dynamic.");
    cfg.dynamic.enabled = true;
    if (cfg.network) {
      const int r = cfg.network->num_paths();
      if (const YAML::Node acts = dyn["actions"]) {
        if (!acts.IsSequence() || acts.size() == 0)
          throw ConfigError(where(acts) + ": field 'dynamic.actions' must be a non-empty list");
        for (const auto& a : acts) cfg.dynamic.catalog.push_back(read_mask(a, r, "dynamic.actions"));
      } else {
        for (PathMask m = 0; m < (PathMask{1} << r); ++m) cfg.dynamic.catalog.push_back(m);
      }
    }
    if (dyn["horizon"]) {
      cfg.dynamic.horizon = static_cast<int>(read_integer(dyn["horizon"], "dynamic.horizon"));
      if (*cfg.dynamic.horizon < 1)
        throw ConfigError(where(dyn["horizon"]) + ": field 'dynamic.horizon' must be at least 1");
    }
    if (dyn["samples"]) cfg.dynamic.options.samples = read_index(dyn["samples"], "dynamic.samples");
    if (dyn["budget"]) cfg.dynamic.options.region_budget = read_index(dyn["budget"], "dynamic.budget");
    if (dyn["seed"]) cfg.dynamic.options.seed = dyn["seed"].as<std::uint64_t>();
    if (cfg.dynamic.options.samples == 0)
      throw ConfigError(where(dyn) + ": field 'dynamic.samples' must be positive");
  }

  if (const YAML::Node sim = root["simulation"]) {
    reject_unknown(sim, {"replicates", "seed"}, "simulation.");
    if (sim["replicates"]) cfg.simulation.replicates = read_index(sim["replicates"], "simulation.replicates");
    if (sim["seed"]) cfg.simulation.seed = sim["seed"].as<std::uint64_t>();
    if (cfg.simulation.replicates < 1)
      throw ConfigError(where(sim) + ": field 'simulation.replicates' must be at least 1");
  }
  if (root["output"]) cfg.output_dir = root["output"].as<std::string>();
  return cfg;
}

Eigen::VectorXd initial_state(const ExperimentConfig& cfg, const SwitchedSystemd& sys) {
  if (cfg.x0.size() == sys.n) return cfg.x0;
  if (sys.layout && cfg.x0.size() == sys.layout->plant_dim) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.n);
    x.head(cfg.x0.size()) = cfg.x0;
    return x;
  }
  throw ConfigError("field 'x0' has " + std::to_string(cfg.x0.size()) + " entries; expected " +
                    (sys.layout ? std::to_string(sys.layout->plant_dim) + " (plant) or " : std::string()) +
                    std::to_string(sys.n));
}

CostWeightsd weights_for(const ExperimentConfig& cfg, const SwitchedSystemd& sys, int horizon) {
  const Index plant = sys.layout ? sys.layout->plant_dim : sys.n;
  CostWeightsd w;
  try {
    w.M = cfg.M.resolve(sys.n, plant);
    w.Q = cfg.Q.resolve(sys.n, plant);
    w.R = cfg.R.resolve(sys.u_dim, sys.u_dim);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("weights: ") + e.what());
  }
  w.horizon = horizon;
  try {
    w.validate(sys.n, sys.u_dim);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("weights: ") + e.what());
  }
  return w;
}

std::size_t action_index(const SwitchedSystemd& sys, const std::string& token, int line) {
  for (std::size_t i = 0; i < sys.action_names.size(); ++i)
    if (sys.action_names[i] == token) return i;
  try {
    std::size_t pos = 0;
    const unsigned long v = std::stoul(token, &pos);
    if (pos == token.size() && v < sys.num_actions()) return v;
  } catch (...) {
  }
  throw ConfigError("line " + std::to_string(line) + ": unknown action '" + token + "'");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  try {
    return parse_root(root);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Experiment schedule_experiment(const ExperimentConfig& cfg, const std::string& name) {
  const auto it = std::find_if(cfg.schedules.begin(), cfg.schedules.end(),
                               [&](const ScheduleSpec& s) { return s.name == name; });
  if (it == cfg.schedules.end()) throw ConfigError("unknown schedule '" + name + "'");
  Experiment ex;
  ex.name = name;
  if (cfg.network) {
    PathMask mask = 0;
    for (int p : it->paths) mask |= PathMask{1} << p;
    const PathMask catalog[] = {mask};
    ex.system = build_augmented(*cfg.network, std::span<const PathMask>(catalog), PathSelection::used);
    ex.system.action_names.front() = name;
    ex.schedule = constant_schedule(0, cfg.horizon);
  } else {
    ex.system = *cfg.system;
    const auto N = static_cast<std::size_t>(cfg.horizon);
    if (it->sequence.size() != 1 && it->sequence.size() != N)
      throw ConfigError("line " + std::to_string(it->line) + ": schedule '" + name + "' has " +
                        std::to_string(it->sequence.size()) + " steps, horizon is " + std::to_string(N));
    for (std::size_t k = 0; k < N; ++k)
      ex.schedule.push_back(action_index(ex.system, it->sequence[it->sequence.size() == 1 ? 0 : k], it->line));
  }
  ex.weights = weights_for(cfg, ex.system, cfg.horizon);
  ex.x0 = initial_state(cfg, ex.system);
  return ex;
}

Experiment dynamic_experiment(const ExperimentConfig& cfg) {
  if (!cfg.dynamic.enabled) throw ConfigError("configuration has no 'dynamic' section");
  Experiment ex;
  ex.name = "dynamic";
  ex.system = cfg.network ? build_augmented(*cfg.network, std::span<const PathMask>(cfg.dynamic.catalog))
                          : *cfg.system;
  ex.weights = weights_for(cfg, ex.system, cfg.dynamic.horizon.value_or(cfg.horizon));
  ex.x0 = initial_state(cfg, ex.system);
  return ex;
}

SwitchedSystemd overview_system(const ExperimentConfig& cfg) {
  if (!cfg.network) return *cfg.system;
  std::vector<PathMask> catalog = cfg.dynamic.catalog;
  if (catalog.empty()) {
    for (const auto& s : cfg.schedules) {
      PathMask mask = 0;
      for (int p : s.paths) mask |= PathMask{1} << p;
      if (std::find(catalog.begin(), catalog.end(), mask) == catalog.end()) catalog.push_back(mask);
    }
  }
  if (catalog.empty()) catalog.push_back((PathMask{1} << cfg.network->num_paths()) - 1);
  return build_augmented(*cfg.network, std::span<const PathMask>(catalog));
}

}  // namespace netlqr
