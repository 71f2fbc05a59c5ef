#include "netlqr/simulator.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "parallel.hpp"
#include "rng.hpp"

namespace netlqr {
namespace {

constexpr std::size_t kChunk = 64;

struct Decision {
  std::size_t action;
  const Eigen::MatrixXd* gain;
  bool fallback;
};

struct ChunkAccum {
  Eigen::MatrixXd traj_sum, traj_min, traj_max, act_sum;
  std::vector<std::vector<std::size_t>> action_counts;
  std::size_t fallbacks = 0;
};

Index recorded_dim(const SwitchedSystemd& sys, const SimConfig& cfg) {
  if (cfg.full_state || !sys.layout) return sys.n;
  return sys.layout->plant_dim;
}

Index actuation_dim(const SwitchedSystemd& sys) {
  return sys.layout ? sys.layout->input_width : sys.u_dim;
}

Eigen::VectorXd applied_actuation(const SwitchedSystemd& sys, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u) {
  if (!sys.layout) return u;
  const auto& L = *sys.layout;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(L.input_width);
  for (Index off : L.register_offset) v += x.segment(off, L.input_width);
  return v;
}

std::vector<double> cumulative_probs(const SwitchedSystemd& sys) {
  std::vector<double> cum;
  double acc = 0.0;
  for (const auto& m : sys.modes) cum.push_back(acc += m.prob);
  return cum;
}

std::size_t draw_mode(const std::vector<double>& cum, std::mt19937_64& gen) {
  const double u = detail::unit_uniform(gen) * cum.back();
  for (std::size_t i = 0; i + 1 < cum.size(); ++i)
    if (u < cum[i]) return i;
  return cum.size() - 1;
}

void check_inputs(const SwitchedSystemd& sys, const CostWeightsd& w, const SimConfig& cfg) {
  sys.validate();
  w.validate(sys.n, sys.u_dim);
  if (cfg.replicates < 1) throw ConfigError("replicates must be at least 1");
  if (cfg.x0.size() != sys.n)
    throw ConfigError("initial state has dimension " + std::to_string(cfg.x0.size()) +
                      ", system has " + std::to_string(sys.n));
}

template <typename Controller>
SimReport run(const SwitchedSystemd& sys, const CostWeightsd& w, const SimConfig& cfg,
              Controller&& control) {
  check_inputs(sys, w, cfg);
  const auto N = static_cast<std::size_t>(w.horizon);
  const Index dim = recorded_dim(sys, cfg);
  const Index adim = actuation_dim(sys);
  const auto cum = cumulative_probs(sys);
  const std::size_t R = cfg.replicates;
  const std::size_t chunks = (R + kChunk - 1) / kChunk;

  SimReport report;
  report.costs.assign(R, 0.0);
  std::vector<ChunkAccum> acc(chunks);

  detail::parallel_for(
      chunks,
      [&](std::size_t c) {
        ChunkAccum& a = acc[c];
        if (cfg.record_trajectories) {
          a.traj_sum = Eigen::MatrixXd::Zero(N + 1, dim);
          a.traj_min = Eigen::MatrixXd::Constant(N + 1, dim, std::numeric_limits<double>::infinity());
          a.traj_max = Eigen::MatrixXd::Constant(N + 1, dim, -std::numeric_limits<double>::infinity());
        }
        if (cfg.record_inputs) a.act_sum = Eigen::MatrixXd::Zero(N, adim);
        a.action_counts.assign(N, std::vector<std::size_t>(sys.num_actions(), 0));

        auto record = [&](std::size_t k, const Eigen::VectorXd& x) {
          if (!cfg.record_trajectories) return;
          const auto xs = x.head(dim).transpose();
          a.traj_sum.row(static_cast<Index>(k)) += xs;
          a.traj_min.row(static_cast<Index>(k)) = a.traj_min.row(static_cast<Index>(k)).cwiseMin(xs);
          a.traj_max.row(static_cast<Index>(k)) = a.traj_max.row(static_cast<Index>(k)).cwiseMax(xs);
        };

        const std::size_t end = std::min(R, (c + 1) * kChunk);
        for (std::size_t rep = c * kChunk; rep < end; ++rep) {
          auto gen = detail::make_stream(cfg.seed, rep);
          Eigen::VectorXd x = cfg.x0;
          double cost = 0.0;
          for (std::size_t k = 0; k < N; ++k) {
            record(k, x);
            const Decision d = control(k, x);
            if (d.fallback) ++a.fallbacks;
            ++a.action_counts[k][d.action];
            const Eigen::VectorXd u = *d.gain * x;
            if (cfg.record_inputs)
              a.act_sum.row(static_cast<Index>(k)) += applied_actuation(sys, x, u).transpose();
            cost += x.dot(w.M * x) + u.dot(w.R * u);
            const std::size_t s = draw_mode(cum, gen);
            x = sys.modes[s].A * x + sys.actions[d.action] * u;
          }
          record(N, x);
          cost += x.dot(w.Q * x);
          report.costs[rep] = cost;
        }
      },
      cfg.threads);

  double sum = 0.0;
  for (double c : report.costs) sum += c;
  report.mean_cost = sum / static_cast<double>(R);
  if (R > 1) {
    double ss = 0.0;
    for (double c : report.costs) ss += (c - report.mean_cost) * (c - report.mean_cost);
    report.std_error = std::sqrt(ss / static_cast<double>(R - 1)) / std::sqrt(static_cast<double>(R));
  }

  report.action_counts.assign(N, std::vector<std::size_t>(sys.num_actions(), 0));
  if (cfg.record_trajectories) {
    TrajectoryStats t{Eigen::MatrixXd::Zero(N + 1, dim),
                      Eigen::MatrixXd::Constant(N + 1, dim, std::numeric_limits<double>::infinity()),
                      Eigen::MatrixXd::Constant(N + 1, dim, -std::numeric_limits<double>::infinity())};
    for (const auto& a : acc) {
      t.mean += a.traj_sum;
      t.min = t.min.cwiseMin(a.traj_min);
      t.max = t.max.cwiseMax(a.traj_max);
    }
    t.mean /= static_cast<double>(R);
    report.trajectory = std::move(t);
  }
  if (cfg.record_inputs) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(N, adim);
    for (const auto& a : acc) m += a.act_sum;
    report.actuation_mean = m / static_cast<double>(R);
  }
  for (const auto& a : acc) {
    report.fallback_count += a.fallbacks;
    for (std::size_t k = 0; k < N; ++k)
      for (std::size_t j = 0; j < sys.num_actions(); ++j) report.action_counts[k][j] += a.action_counts[k][j];
  }
  return report;
}

void check_schedule(const SwitchedSystemd& sys, const CostWeightsd& w, const GainScheduled& g) {
  if (g.horizon() != w.horizon || g.actions.size() != g.K.size())
    throw ConfigError("gain schedule horizon does not match the weights");
  for (std::size_t k = 0; k < g.K.size(); ++k) {
    if (g.actions[k] >= sys.num_actions()) throw ConfigError("gain schedule refers to an unknown action");
    if (g.K[k].rows() != sys.u_dim || g.K[k].cols() != sys.n)
      throw ConfigError("gain matrix has wrong dimension at step " + std::to_string(k));
  }
}

void check_policy(const SwitchedSystemd& sys, const CostWeightsd& w, const PartitionPolicy& pol) {
  if (pol.horizon() != w.horizon) throw ConfigError("policy horizon does not match the weights");
  if (pol.num_modes != sys.num_modes()) throw ConfigError("policy was built for a different mode count");
  for (const auto& regions : pol.steps) {
    if (regions.empty()) throw ConfigError("policy step without regions");
    for (const auto& r : regions)
      if (r.action >= sys.num_actions() || r.gain.rows() != sys.u_dim || r.gain.cols() != sys.n)
        throw ConfigError("policy region does not match the system");
  }
}

std::size_t sequence_count(std::size_t q, std::size_t N, std::size_t cap) {
  std::size_t total = 1;
  for (std::size_t k = 0; k < N; ++k) {
    if (total > cap / std::max<std::size_t>(q, 1)) {
      throw BudgetError("exhaustive enumeration needs " + std::to_string(q) + "^" + std::to_string(N) +
                        " loss sequences, cap is " + std::to_string(cap));
    }
    total *= q;
  }
  return total;
}

template <typename Controller>
double enumerate(const SwitchedSystemd& sys, const CostWeightsd& w, const Eigen::VectorXd& x0,
                 std::size_t cap, Controller&& control) {
  if (x0.size() != sys.n) throw ConfigError("initial state has wrong dimension");
  const auto N = static_cast<std::size_t>(w.horizon);
  sequence_count(sys.num_modes(), N, cap);
  auto recurse = [&](auto&& self, std::size_t k, const Eigen::VectorXd& x) -> double {
    if (k == N) return x.dot(w.Q * x);
    const Decision d = control(k, x);
    const Eigen::VectorXd u = *d.gain * x;
    double future = 0.0;
    for (const auto& mode : sys.modes)
      future += mode.prob * self(self, k + 1, mode.A * x + sys.actions[d.action] * u);
    return x.dot(w.M * x) + u.dot(w.R * u) + future;
  };
  return recurse(recurse, 0, x0);
}

}  // namespace

SimReport simulate_static(const SwitchedSystemd& sys, const CostWeightsd& w, const GainScheduled& g,
                          const SimConfig& cfg) {
  check_schedule(sys, w, g);
  return run(sys, w, cfg, [&](std::size_t k, const Eigen::VectorXd&) {
    return Decision{g.actions[k], &g.K[k], false};
  });
}

SimReport simulate_dynamic(const SwitchedSystemd& sys, const CostWeightsd& w, const PartitionPolicy& pol,
                           const SimConfig& cfg) {
  check_policy(sys, w, pol);
  return run(sys, w, cfg, [&](std::size_t k, const Eigen::VectorXd& x) {
    const auto d = evaluate_policy(pol, static_cast<int>(k), x);
    return Decision{d.action, d.gain, d.fallback};
  });
}

double exhaustive_expected_cost(const SwitchedSystemd& sys, const CostWeightsd& w, const GainScheduled& g,
                                const Eigen::VectorXd& x0, std::size_t cap) {
  sys.validate();
  check_schedule(sys, w, g);
  return enumerate(sys, w, x0, cap, [&](std::size_t k, const Eigen::VectorXd&) {
    return Decision{g.actions[k], &g.K[k], false};
  });
}

double exhaustive_expected_cost(const SwitchedSystemd& sys, const CostWeightsd& w, const PartitionPolicy& pol,
                                const Eigen::VectorXd& x0, std::size_t cap) {
  sys.validate();
  check_policy(sys, w, pol);
  return enumerate(sys, w, x0, cap, [&](std::size_t k, const Eigen::VectorXd& x) {
    const auto d = evaluate_policy(pol, static_cast<int>(k), x);
    return Decision{d.action, d.gain, d.fallback};
  });
}

}  // namespace netlqr
