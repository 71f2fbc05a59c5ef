#include "netlqr/dynamic_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>

#include "netlqr/static_solver.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace netlqr {

Relation complement(Relation r) {
  switch (r) {
    case Relation::less: return Relation::greater_equal;
    case Relation::less_equal: return Relation::greater;
    case Relation::greater_equal: return Relation::less;
    case Relation::greater: return Relation::less_equal;
  }
  return r;
}

const char* relation_symbol(Relation r) {
  switch (r) {
    case Relation::less: return "<";
    case Relation::less_equal: return "<=";
    case Relation::greater_equal: return ">=";
    case Relation::greater: return ">";
  }
  return "?";
}

Relation parse_relation(const std::string& s) {
  if (s == "<") return Relation::less;
  if (s == "<=") return Relation::less_equal;
  if (s == ">=") return Relation::greater_equal;
  if (s == ">") return Relation::greater;
  throw ConfigError("unknown relation symbol '" + s + "'");
}

bool QuadConstraint::holds(const Eigen::VectorXd& x) const {
  const double v = x.dot(Y * x);
  switch (relation) {
    case Relation::less: return v < 0.0;
    case Relation::less_equal: return v <= 0.0;
    case Relation::greater_equal: return v >= 0.0;
    case Relation::greater: return v > 0.0;
  }
  return false;
}

bool Region::contains(const Eigen::VectorXd& x) const {
  return std::all_of(constraints.begin(), constraints.end(),
                     [&](const QuadConstraint& c) { return c.holds(x); });
}

std::vector<Eigen::VectorXd> sample_states(Index n, std::size_t count, std::uint64_t seed) {
  auto gen = detail::make_stream(seed, 0);
  std::normal_distribution<double> normal;
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::VectorXd d(n);
    double norm = 0.0;
    do {
      for (Index j = 0; j < n; ++j) d(j) = normal(gen);
      norm = d.norm();
    } while (norm == 0.0);
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    out.push_back(d * (std::pow(10.0, -3.0 + 6.0 * u) / norm));
  }
  return out;
}

namespace {

struct Candidate {
  std::size_t action = 0;
  std::vector<std::size_t> mu;  // value group per mode
  Eigen::MatrixXd gain;
  Eigen::MatrixXd value;
};

struct Group {
  const Eigen::MatrixXd* value = nullptr;
  std::size_t first_region = 0;
  std::optional<std::size_t> certified;
};

std::vector<Group> value_groups(const std::vector<Region>& next) {
  std::vector<Group> groups;
  std::map<std::size_t, std::size_t> by_id;
  for (std::size_t i = 0; i < next.size(); ++i) {
    auto [it, fresh] = by_id.emplace(next[i].candidate, groups.size());
    if (fresh) groups.push_back({&next[i].value, i, std::nullopt});
    Group& g = groups[it->second];
    if (next[i].optimal && !g.certified) g.certified = i;
  }
  return groups;
}

/// Pairwise argmin constraints among candidates with the given values, in the
/// order given: lower positions win ties. The constraint for the higher
/// position reuses the negated matrix so the two sides are exact complements.
std::vector<std::vector<QuadConstraint>> argmin_constraints(
    const std::vector<const Eigen::MatrixXd*>& values) {
  const std::size_t c = values.size();
  std::vector<std::vector<QuadConstraint>> out(c);
  for (auto& list : out) list.reserve(c ? c - 1 : 0);
  // Iterating the winner in the outer loop appends opponents in index order.
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (j == i) continue;
      if (j < i) {
        // Complement of j's constraint against i: exactly the negated matrix.
        const auto& mirror = out[j][i - 1];
        out[i].push_back({-mirror.Y, Relation::less});
      } else {
        out[i].push_back({*values[i] - *values[j], Relation::less_equal});
      }
    }
  }
  return out;
}

bool same_constraint(const QuadConstraint& a, const QuadConstraint& b) {
  return a.relation == b.relation && a.Y.rows() == b.Y.rows() && a.Y == b.Y;
}

std::size_t checked_power(std::size_t base, std::size_t exp, std::size_t cap) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (base != 0 && out > cap / base) return cap + 1;
    out *= base;
  }
  return out;
}

std::uint64_t step_seed(std::uint64_t seed, int step) {
  return detail::splitmix64(seed ^ detail::splitmix64(static_cast<std::uint64_t>(step) + 1));
}

}  // namespace

std::vector<Region> last_step_partition(const SwitchedSystemd& sys, const CostWeightsd& w) {
  sys.validate();
  w.validate(sys.n, sys.u_dim);
  const Eigen::MatrixXd terminal = (w.Q + w.Q.transpose()) / 2.0;
  std::vector<const Eigen::MatrixXd*> successor(sys.num_modes(), &terminal);

  std::vector<Region> regions(sys.num_actions());
  for (std::size_t a = 0; a < sys.num_actions(); ++a) {
    auto step = detail::bellman_step<double>(sys, sys.actions[a], successor, w.M, w.R);
    regions[a].action = a;
    regions[a].candidate = a;
    regions[a].gain = std::move(step.gain);
    regions[a].value = std::move(step.value);
    regions[a].optimal = true;
  }
  std::vector<const Eigen::MatrixXd*> values;
  for (const auto& r : regions) values.push_back(&r.value);
  auto constraints = argmin_constraints(values);
  for (std::size_t a = 0; a < regions.size(); ++a) regions[a].constraints = std::move(constraints[a]);
  return regions;
}

std::vector<Region> backward_step(const SwitchedSystemd& sys, const CostWeightsd& w,
                                  const std::vector<Region>& next, const DynamicOptions& opts,
                                  int step) {
  if (next.empty()) throw ConfigError("successor partition is empty");
  const std::size_t q = sys.num_modes();
  const std::size_t p = sys.num_actions();
  const auto groups = value_groups(next);
  const std::size_t G = groups.size();

  const std::size_t per_action = checked_power(G, q, opts.candidate_budget);
  if (per_action > opts.candidate_budget || p * per_action > opts.candidate_budget)
    throw BudgetError("candidate budget exceeded at step " + std::to_string(step) + ": " +
                      std::to_string(p) + " actions x " + std::to_string(G) + "^" +
                      std::to_string(q) + " successor assignments > budget " +
                      std::to_string(opts.candidate_budget));
  const std::size_t total = p * per_action;

  // Candidate index = a * G^q + mu read as a base-G number, mu_0 most significant.
  std::vector<Candidate> cands(total);
  detail::parallel_for(total, [&](std::size_t idx) {
    Candidate& c = cands[idx];
    c.action = idx / per_action;
    c.mu.assign(q, 0);
    std::size_t rest = idx % per_action;
    for (std::size_t s = q; s-- > 0;) {
      c.mu[s] = rest % G;
      rest /= G;
    }
    std::vector<const Eigen::MatrixXd*> successor(q);
    for (std::size_t s = 0; s < q; ++s) successor[s] = groups[c.mu[s]].value;
    auto bs = detail::bellman_step<double>(sys, sys.actions[c.action], successor, w.M, w.R);
    c.gain = std::move(bs.gain);
    c.value = std::move(bs.value);
  });

  // Winner (lowest index among minimizers) for each sampled state.
  const auto samples = sample_states(sys.n, opts.samples, step_seed(opts.seed, step));
  std::vector<std::size_t> winner(samples.size());
  detail::parallel_for(samples.size(), [&](std::size_t i) {
    const Eigen::VectorXd& x = samples[i];
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < total; ++c) {
      const double v = x.dot(cands[c].value * x);
      if (v < best) {
        best = v;
        arg = c;
      }
    }
    winner[i] = arg;
  });

  std::vector<std::size_t> live(winner.begin(), winner.end());
  std::sort(live.begin(), live.end());
  live.erase(std::unique(live.begin(), live.end()), live.end());
  if (live.size() > opts.region_budget)
    throw BudgetError("region budget exceeded at step " + std::to_string(step) + ": " +
                      std::to_string(live.size()) + " regions > budget " +
                      std::to_string(opts.region_budget));
  std::map<std::size_t, std::size_t> live_pos;
  for (std::size_t i = 0; i < live.size(); ++i) live_pos[live[i]] = i;

  std::vector<const Eigen::MatrixXd*> live_values;
  for (std::size_t c : live) live_values.push_back(&cands[c].value);
  auto argmin = argmin_constraints(live_values);

  // Certification: the closed-loop successor under every mode lies in the
  // certified region of the value group mu assigns to it.
  std::vector<std::optional<std::vector<QuadConstraint>>> cert(live.size());
  detail::parallel_for(live.size(), [&](std::size_t i) {
    const Candidate& c = cands[live[i]];
    std::vector<QuadConstraint> out;
    for (std::size_t s = 0; s < q; ++s) {
      const auto& grp = groups[c.mu[s]];
      if (!grp.certified) return;
      const Eigen::MatrixXd F = sys.modes[s].A + sys.actions[c.action] * c.gain;
      for (const auto& succ : next[*grp.certified].constraints) {
        Eigen::MatrixXd Y = F.transpose() * succ.Y * F;
        Y = (Y + Y.transpose()) / 2.0;
        const bool strict = succ.relation == Relation::less || succ.relation == Relation::greater;
        if (!strict && Y.isZero(0.0)) continue;
        QuadConstraint pushed{std::move(Y), succ.relation};
        if (std::none_of(out.begin(), out.end(),
                         [&](const QuadConstraint& e) { return same_constraint(e, pushed); }))
          out.push_back(std::move(pushed));
      }
    }
    cert[i] = std::move(out);
  });

  // Which certification piece each sample falls in: -1 certified, t >= 0 the
  // first violated certification constraint, -2 not certifiable at all.
  std::vector<std::set<long>> pieces(live.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::size_t pos = live_pos[winner[i]];
    long piece = -2;
    if (cert[pos]) {
      piece = -1;
      const auto& cs = *cert[pos];
      for (std::size_t t = 0; t < cs.size(); ++t)
        if (!cs[t].holds(samples[i])) {
          piece = static_cast<long>(t);
          break;
        }
    }
    pieces[pos].insert(piece);
  }

  std::size_t region_count = 0;
  for (const auto& s : pieces) region_count += s.size();
  if (region_count > opts.region_budget)
    throw BudgetError("region budget exceeded at step " + std::to_string(step) + ": " +
                      std::to_string(region_count) + " regions > budget " +
                      std::to_string(opts.region_budget));

  std::vector<Region> regions;
  regions.reserve(region_count);
  for (std::size_t pos = 0; pos < live.size(); ++pos) {
    const Candidate& c = cands[live[pos]];
    std::vector<std::size_t> successors(q);
    for (std::size_t s = 0; s < q; ++s) {
      const auto& grp = groups[c.mu[s]];
      successors[s] = grp.certified ? *grp.certified : grp.first_region;
    }
    for (long piece : pieces[pos]) {
      Region r;
      r.action = c.action;
      r.gain = c.gain;
      r.value = c.value;
      r.successors = successors;
      r.candidate = pos;
      r.constraints = argmin[pos];
      if (piece >= -1) {
        const auto& cs = *cert[pos];
        const std::size_t upto = piece == -1 ? cs.size() : static_cast<std::size_t>(piece);
        r.constraints.insert(r.constraints.end(), cs.begin(), cs.begin() + static_cast<long>(upto));
        if (piece >= 0) {
          QuadConstraint violated = cs[static_cast<std::size_t>(piece)];
          violated.relation = complement(violated.relation);
          r.constraints.push_back(std::move(violated));
        }
      }
      r.optimal = piece == -1;
      regions.push_back(std::move(r));
    }
  }
  return regions;
}

PartitionPolicy solve_dynamic(const SwitchedSystemd& sys, const CostWeightsd& w,
                              const DynamicOptions& opts) {
  sys.validate();
  w.validate(sys.n, sys.u_dim);
  PartitionPolicy pol;
  pol.terminal = (w.Q + w.Q.transpose()) / 2.0;
  pol.num_modes = sys.num_modes();
  const auto N = static_cast<std::size_t>(w.horizon);
  pol.steps.resize(N);
  pol.steps[N - 1] = last_step_partition(sys, w);
  if (pol.steps[N - 1].size() > opts.region_budget)
    throw BudgetError("region budget exceeded at step " + std::to_string(N - 1) + ": " +
                      std::to_string(pol.steps[N - 1].size()) + " regions > budget " +
                      std::to_string(opts.region_budget));
  for (std::size_t k = N - 1; k-- > 0;)
    pol.steps[k] = backward_step(sys, w, pol.steps[k + 1], opts, static_cast<int>(k));
  return pol;
}

PolicyDecision evaluate_policy(const PartitionPolicy& pol, int k, const Eigen::VectorXd& x) {
  if (k < 0 || k >= pol.horizon()) throw ConfigError("policy step out of range");
  const auto& regions = pol.steps[static_cast<std::size_t>(k)];
  std::vector<std::size_t> matches;
  for (std::size_t i = 0; i < regions.size(); ++i)
    if (regions[i].contains(x)) matches.push_back(i);

  PolicyDecision d;
  if (matches.size() == 1) {
    d.region = matches.front();
  } else {
    d.fallback = true;
    if (matches.empty()) {
      matches.resize(regions.size());
      for (std::size_t i = 0; i < regions.size(); ++i) matches[i] = i;
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i : matches) {
      const double v = regions[i].cost(x);
      if (v < best) {
        best = v;
        d.region = i;
      }
    }
  }
  const Region& r = regions[d.region];
  d.action = r.action;
  d.gain = &r.gain;
  d.value = &r.value;
  d.optimal = r.optimal;
  return d;
}

std::vector<Region> optimal_initial_set(const PartitionPolicy& pol) {
  std::vector<Region> out;
  if (pol.steps.empty()) return out;
  for (const auto& r : pol.steps.front())
    if (r.optimal) out.push_back(r);
  return out;
}

std::vector<StepCensus> region_census(const PartitionPolicy& pol) {
  std::vector<StepCensus> out;
  for (const auto& regions : pol.steps) {
    StepCensus c;
    c.regions = regions.size();
    c.optimal = static_cast<std::size_t>(
        std::count_if(regions.begin(), regions.end(), [](const Region& r) { return r.optimal; }));
    out.push_back(c);
  }
  return out;
}

CoverageStats partition_coverage(const PartitionPolicy& pol, int k, std::size_t samples,
                                 std::uint64_t seed) {
  if (k < 0 || k >= pol.horizon()) throw ConfigError("policy step out of range");
  const auto& regions = pol.steps[static_cast<std::size_t>(k)];
  const Index n = pol.terminal.rows();
  CoverageStats stats;
  for (const auto& x : sample_states(n, samples, seed)) {
    std::size_t hits = 0;
    for (const auto& r : regions)
      if (r.contains(x) && ++hits > 1) break;
    ++stats.samples;
    if (hits == 0) ++stats.none;
    else if (hits == 1) ++stats.exactly_one;
    else ++stats.multiple;
  }
  return stats;
}

}  // namespace netlqr
