#include "netlqr/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "netlqr/config.hpp"
#include "netlqr/errors.hpp"
#include "netlqr/serialization.hpp"
#include "netlqr/simulator.hpp"

namespace netlqr {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string out;
  std::string schedule;
  std::string policy;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::optional<std::size_t> budget;
  bool enumerate = false;
};

fs::path output_dir(const Options& o, const ExperimentConfig& cfg) {
  fs::path dir = o.out.empty() ? fs::path(cfg.output_dir) : fs::path(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

std::ofstream open_file(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write '" + p.string() + "'");
  return f;
}

std::vector<std::string> selected_schedules(const Options& o, const ExperimentConfig& cfg) {
  if (!o.schedule.empty()) return {o.schedule};
  std::vector<std::string> names;
  for (const auto& s : cfg.schedules) names.push_back(s.name);
  if (names.empty()) throw ConfigError("configuration defines no schedules");
  return names;
}

DynamicOptions dynamic_options(const Options& o, const ExperimentConfig& cfg) {
  DynamicOptions opts = cfg.dynamic.options;
  if (o.budget) opts.region_budget = *o.budget;
  return opts;
}

SimConfig sim_config(const Options& o, const ExperimentConfig& cfg, const Eigen::VectorXd& x0) {
  SimConfig sc;
  sc.replicates = o.replicates.value_or(cfg.simulation.replicates);
  sc.seed = o.seed.value_or(cfg.simulation.seed);
  sc.x0 = x0;
  return sc;
}

// One directory per simulated schedule or policy, holding the fixed CSV bundle.
void write_sim_files(const fs::path& root, const std::string& name, const SimReport& rep) {
  const fs::path dir = root / name;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  {
    auto f = open_file(dir / "costs.csv");
    f << "replicate,cost\n";
    for (std::size_t i = 0; i < rep.costs.size(); ++i) f << i << ',' << format_double(rep.costs[i]) << '\n';
  }
  if (rep.trajectory) {
    const auto& t = *rep.trajectory;
    auto f = open_file(dir / "traj_mean.csv");
    f << 'k';
    for (const char* stat : {"mean", "min", "max"})
      for (Index j = 0; j < t.mean.cols(); ++j) f << ',' << stat << '_' << j + 1;
    f << '\n';
    for (Index k = 0; k < t.mean.rows(); ++k) {
      f << k;
      for (const auto* m : {&t.mean, &t.min, &t.max})
        for (Index j = 0; j < m->cols(); ++j) f << ',' << format_double((*m)(k, j));
      f << '\n';
    }
  }
  if (rep.actuation_mean) {
    const auto& a = *rep.actuation_mean;
    auto f = open_file(dir / "actuation.csv");
    f << 'k';
    for (Index j = 0; j < a.cols(); ++j) f << ",v_" << j + 1;
    f << '\n';
    for (Index k = 0; k < a.rows(); ++k) {
      f << k;
      for (Index j = 0; j < a.cols(); ++j) f << ',' << format_double(a(k, j));
      f << '\n';
    }
  }
  auto f = open_file(dir / "actions.csv");
  f << "k,action,frequency\n";
  const double R = static_cast<double>(rep.costs.size());
  for (std::size_t k = 0; k < rep.action_counts.size(); ++k)
    for (std::size_t a = 0; a < rep.action_counts[k].size(); ++a)
      if (rep.action_counts[k][a])
        f << k << ',' << a << ',' << format_double(static_cast<double>(rep.action_counts[k][a]) / R)
          << '\n';
}

int cmd_build(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o.config);
  const auto sys = overview_system(cfg);
  out << "system " << cfg.name << "\n";
  out << "states " << sys.n << "\ninputs " << sys.u_dim << "\n";
  out << "modes " << sys.num_modes() << "\n";
  const int r = cfg.network ? cfg.network->num_paths() : 0;
  for (const auto& m : sys.modes)
    out << "  " << (cfg.network ? mask_label(m.arrivals, r) : std::to_string(m.arrivals)) << ' '
        << format_double(m.prob) << "\n";
  out << "actions " << sys.num_actions() << "\n";
  for (const auto& name : sys.action_names) out << "  " << name << "\n";
  if (sys.layout) {
    const auto& L = *sys.layout;
    out << "plant_states " << L.plant_dim << "\n";
    for (std::size_t i = 0; i < L.path_ids.size(); ++i)
      out << "  path " << L.path_ids[i] + 1 << " delay " << L.delays[i] << " head_row " << L.register_offset[i]
          << "\n";
  }
  return 0;
}

int cmd_solve_static(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o.config);
  const auto dir = output_dir(o, cfg);
  for (const auto& name : selected_schedules(o, cfg)) {
    const auto ex = schedule_experiment(cfg, name);
    const auto g = solve_static(ex.system, ex.weights, ex.schedule);
    auto f = open_file(dir / ("gains_" + name + ".yaml"));
    write_gains(f, GainFile{name, g});
    out << "expected_cost " << name << ' ' << format_double(expected_cost(g, ex.x0)) << "\n";
  }
  return 0;
}

int cmd_solve_dynamic(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o.config);
  const auto ex = dynamic_experiment(cfg);
  const auto pol = solve_dynamic(ex.system, ex.weights, dynamic_options(o, cfg));
  const auto dir = output_dir(o, cfg);
  {
    auto f = open_file(dir / "policy.yaml");
    write_policy(f, pol);
  }
  const auto census = region_census(pol);
  out << "k,regions,optimal\n";
  for (std::size_t k = 0; k < census.size(); ++k)
    out << k << ',' << census[k].regions << ',' << census[k].optimal << "\n";
  out << "initial_optimal_regions " << optimal_initial_set(pol).size() << "\n";
  const auto d = evaluate_policy(pol, 0, ex.x0);
  out << "expected_cost dynamic " << format_double(ex.x0.dot(*d.value * ex.x0)) << "\n";
  return 0;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o.config);
  const auto dir = output_dir(o, cfg);
  if (!o.policy.empty()) {
    const auto ex = dynamic_experiment(cfg);
    std::ifstream in(o.policy);
    if (!in) throw ConfigError("cannot open policy '" + o.policy + "'");
    const auto pol = read_policy(in);
    auto sc = sim_config(o, cfg, ex.x0);
    sc.record_trajectories = sc.record_inputs = true;
    const auto rep = simulate_dynamic(ex.system, ex.weights, pol, sc);
    write_sim_files(dir, "dynamic", rep);
    out << "mean_cost dynamic " << format_double(rep.mean_cost) << " stderr " << format_double(rep.std_error)
        << " fallbacks " << rep.fallback_count << "\n";
    if (o.enumerate)
      out << "exhaustive_cost dynamic " << format_double(exhaustive_expected_cost(ex.system, ex.weights, pol, ex.x0))
          << "\n";
    return 0;
  }
  for (const auto& name : selected_schedules(o, cfg)) {
    const auto ex = schedule_experiment(cfg, name);
    const auto g = solve_static(ex.system, ex.weights, ex.schedule);
    auto sc = sim_config(o, cfg, ex.x0);
    sc.record_trajectories = sc.record_inputs = true;
    const auto rep = simulate_static(ex.system, ex.weights, g, sc);
    write_sim_files(dir, name, rep);
    out << "mean_cost " << name << ' ' << format_double(rep.mean_cost) << " stderr "
        << format_double(rep.std_error) << "\n";
    if (o.enumerate)
      out << "exhaustive_cost " << name << ' '
          << format_double(exhaustive_expected_cost(ex.system, ex.weights, g, ex.x0)) << "\n";
  }
  return 0;
}

struct Ranked {
  std::string name;
  double expected;
  double mean;
  double stderr_;
};

int cmd_compare(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o.config);
  const auto dir = output_dir(o, cfg);
  std::vector<Ranked> rows;
  for (const auto& s : cfg.schedules) {
    const auto ex = schedule_experiment(cfg, s.name);
    const auto g = solve_static(ex.system, ex.weights, ex.schedule);
    const auto rep = simulate_static(ex.system, ex.weights, g, sim_config(o, cfg, ex.x0));
    rows.push_back({s.name, expected_cost(g, ex.x0), rep.mean_cost, rep.std_error});
  }
  if (cfg.dynamic.enabled) {
    const auto ex = dynamic_experiment(cfg);
    if (ex.weights.horizon == cfg.horizon) {
      const auto pol = solve_dynamic(ex.system, ex.weights, dynamic_options(o, cfg));
      const auto rep = simulate_dynamic(ex.system, ex.weights, pol, sim_config(o, cfg, ex.x0));
      const auto d = evaluate_policy(pol, 0, ex.x0);
      rows.push_back({"dynamic", ex.x0.dot(*d.value * ex.x0), rep.mean_cost, rep.std_error});
    }
  }
  if (rows.empty()) throw ConfigError("nothing to compare");
  std::stable_sort(rows.begin(), rows.end(), [](const Ranked& a, const Ranked& b) { return a.expected < b.expected; });
  auto f = open_file(dir / "ranking.csv");
  f << "rank,name,expected_cost,mean_cost,stderr\n";
  out << std::left << std::setw(6) << "rank" << std::setw(16) << "name" << std::setw(26) << "expected_cost"
      << std::setw(26) << "mean_cost" << "stderr\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    f << i + 1 << ',' << r.name << ',' << format_double(r.expected) << ',' << format_double(r.mean) << ','
      << format_double(r.stderr_) << '\n';
    out << std::setw(6) << i + 1 << std::setw(16) << r.name << std::setw(26) << format_double(r.expected)
        << std::setw(26) << format_double(r.mean) << format_double(r.stderr_) << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Co-design of LQR gains and routing redundancy over lossy multipath networks"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "experiment configuration (YAML)")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", o.out, "output directory (default: config 'output')");
  };
  auto* build = app.add_subcommand("build", "print the augmented switched system");
  build->add_option("-c,--config", o.config, "experiment configuration (YAML)")->required()->check(CLI::ExistingFile);

  auto* stat = app.add_subcommand("solve-static", "solve the fixed-schedule Riccati recursion");
  add_common(stat);
  stat->add_option("-s,--schedule", o.schedule, "schedule name (default: all)");

  auto* dyn = app.add_subcommand("solve-dynamic", "compute the state-dependent routing partition");
  add_common(dyn);
  dyn->add_option("--budget", o.budget, "maximum regions per step");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo evaluation of a schedule or policy");
  add_common(sim);
  sim->add_option("-s,--schedule", o.schedule, "schedule name (default: all)");
  sim->add_option("-p,--policy", o.policy, "policy file from solve-dynamic");
  sim->add_option("--seed", o.seed, "random seed");
  sim->add_option("-r,--replicates", o.replicates, "number of replicates")->check(CLI::PositiveNumber);
  sim->add_flag("--enumerate", o.enumerate, "also compute the exact expectation by enumeration");

  auto* cmp = app.add_subcommand("compare", "rank all schedules (and the dynamic policy)");
  add_common(cmp);
  cmp->add_option("--seed", o.seed, "random seed");
  cmp->add_option("-r,--replicates", o.replicates, "number of replicates")->check(CLI::PositiveNumber);
  cmp->add_option("--budget", o.budget, "maximum regions per step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    if (*build) return cmd_build(o, out);
    if (*stat) return cmd_solve_static(o, out);
    if (*dyn) return cmd_solve_dynamic(o, out);
    if (*sim) return cmd_simulate(o, out);
    return cmd_compare(o, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const BudgetError& e) {
    err << "budget exceeded: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace netlqr
