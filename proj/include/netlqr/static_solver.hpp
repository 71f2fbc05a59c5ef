#pragma once

#include <span>
#include <string>
#include <vector>

#include "netlqr/model.hpp"

namespace netlqr {

/// Routing action index per step k = 0..N-1.
using RoutingSchedule = std::vector<std::size_t>;

inline RoutingSchedule constant_schedule(std::size_t action, int horizon) {
  return RoutingSchedule(static_cast<std::size_t>(std::max(horizon, 0)), action);
}

/// Time-varying gains K(0..N-1) and value matrices P(0..N), P(N) = Q.
template <typename Scalar>
struct GainSchedule {
  std::vector<Mat<Scalar>> K;
  std::vector<Mat<Scalar>> P;
  RoutingSchedule actions;

  int horizon() const { return static_cast<int>(K.size()); }
};

using GainScheduled = GainSchedule<double>;

namespace detail {

template <typename Scalar>
struct BellmanStep {
  Mat<Scalar> gain;
  Mat<Scalar> value;
};

/// One backward Bellman step for action matrix B when the state reached under
/// mode sigma is valued by *successor[sigma]. Minimizes
///   x'Mx + u'Ru + sum_s pi_s (A_s x + B u)' P_s (A_s x + B u)
/// over u = K x. When every successor is the same matrix the mean/second-moment
/// form of the fixed-routing recursion is used verbatim.
template <typename Scalar>
BellmanStep<Scalar> bellman_step(const SwitchedSystem<Scalar>& sys, const Mat<Scalar>& B,
                                 std::span<const Mat<Scalar>* const> successor,
                                 const Mat<Scalar>& M, const Mat<Scalar>& R) {
  const Index n = sys.n;
  bool shared = true;
  for (const auto* p : successor) shared = shared && p == successor.front();

  Mat<Scalar> p_mean;    // sum_s pi_s P_s
  Mat<Scalar> coupling;  // sum_s pi_s P_s A_s
  Mat<Scalar> second;    // sum_s pi_s A_s' P_s A_s
  if (shared) {
    const Mat<Scalar>& P = *successor.front();
    auto ex = expected_matrices(sys, P);
    p_mean = P;
    coupling = P * ex.mean_A;
    second = std::move(ex.second_moment);
  } else {
    p_mean = Mat<Scalar>::Zero(n, n);
    coupling = Mat<Scalar>::Zero(n, n);
    second = Mat<Scalar>::Zero(n, n);
    for (std::size_t s = 0; s < sys.modes.size(); ++s) {
      const auto& mode = sys.modes[s];
      const Mat<Scalar>& P = *successor[s];
      p_mean.noalias() += mode.prob * P;
      coupling.noalias() += mode.prob * (P * mode.A);
      second.noalias() += mode.prob * (mode.A.transpose() * P * mode.A);
    }
    second = (second + second.transpose()) / Scalar(2);
  }

  const Mat<Scalar> BtP = B.transpose() * p_mean;
  Mat<Scalar> S = R + BtP * B;
  S = (S + S.transpose()) / Scalar(2);
  Eigen::LLT<Mat<Scalar>> llt(S);
  if (llt.info() != Eigen::Success)
    throw NumericalError("R + B'PB is not positive definite");

  const Mat<Scalar> cross = B.transpose() * coupling;  // B' sum pi P A
  BellmanStep<Scalar> out;
  out.gain = -llt.solve(cross);
  Mat<Scalar> value = M + second + cross.transpose() * out.gain;
  out.value = (value + value.transpose()) / Scalar(2);
  return out;
}

}  // namespace detail

/// Finite-horizon LQR for a routing schedule fixed in advance. Backward from
/// P(N) = Q:
///   K(k) = -[R + B'P(k+1)B]^{-1} B'P(k+1) Abar
///   P(k) = M + Phi(k) - Abar'P(k+1)B [R + B'P(k+1)B]^{-1} B'P(k+1) Abar
/// with B = B_{a_k}, Abar the mean dynamics and Phi(k) = E[A'P(k+1)A].
template <typename Scalar>
GainSchedule<Scalar> solve_static(const SwitchedSystem<Scalar>& sys, const CostWeights<Scalar>& w,
                                  const RoutingSchedule& schedule) {
  sys.validate();
  w.validate(sys.n, sys.u_dim);
  const auto N = static_cast<std::size_t>(w.horizon);
  if (schedule.size() != N)
    throw ConfigError("routing schedule length " + std::to_string(schedule.size()) +
                      " does not match horizon " + std::to_string(N));
  for (std::size_t a : schedule)
    if (a >= sys.num_actions()) throw ConfigError("routing schedule refers to an unknown action");

  GainSchedule<Scalar> g;
  g.actions = schedule;
  g.K.resize(N);
  g.P.resize(N + 1);
  g.P[N] = (w.Q + w.Q.transpose()) / Scalar(2);
  std::vector<const Mat<Scalar>*> successor(sys.num_modes());
  for (std::size_t k = N; k-- > 0;) {
    std::fill(successor.begin(), successor.end(), &g.P[k + 1]);
    auto step = detail::bellman_step<Scalar>(sys, sys.actions[schedule[k]], successor, w.M, w.R);
    if (!detail::is_psd<Scalar>(step.value, Scalar(1e-9)))
      throw NumericalError("value matrix lost positive semidefiniteness at step " + std::to_string(k));
    g.K[k] = std::move(step.gain);
    g.P[k] = std::move(step.value);
  }
  return g;
}

/// x0' P(0) x0.
template <typename Scalar>
Scalar expected_cost(const GainSchedule<Scalar>& g, const Vec<Scalar>& x0) {
  if (g.P.empty()) throw ConfigError("gain schedule is empty");
  if (x0.size() != g.P.front().rows()) throw ConfigError("initial state has wrong dimension");
  return x0.dot(g.P.front() * x0);
}

}  // namespace netlqr
