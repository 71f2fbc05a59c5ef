#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netlqr/errors.hpp"

namespace netlqr {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

/// Bit i set <=> path i is involved (packet sent for actions, packet
/// delivered for loss modes).
using PathMask = std::uint32_t;

inline constexpr int kMaxPaths = 16;

/// Discrete-time LTI plant x_P(k+1) = A x_P(k) + B v(k).
template <typename Scalar>
struct PlantModel {
  Mat<Scalar> A;
  Mat<Scalar> B;

  Index states() const { return A.rows(); }
  Index inputs() const { return B.cols(); }

  void validate() const {
    if (A.rows() < 1 || A.rows() != A.cols())
      throw ConfigError("plant A must be square and non-empty");
    if (B.rows() != A.rows())
      throw ConfigError("plant B row count must equal the plant state dimension");
    if (B.cols() < 1) throw ConfigError("plant B must have at least one column");
  }
};

template <typename Scalar>
struct RoutePath {
  int delay = 1;
  Scalar loss_prob = Scalar(0);
};

template <typename Scalar>
struct NetworkSpec {
  PlantModel<Scalar> plant;
  std::vector<RoutePath<Scalar>> paths;

  int num_paths() const { return static_cast<int>(paths.size()); }

  void validate() const {
    plant.validate();
    if (paths.empty()) throw ConfigError("network needs at least one routing path");
    if (paths.size() > static_cast<std::size_t>(kMaxPaths))
      throw ConfigError("at most 16 routing paths are supported");
    for (std::size_t i = 0; i < paths.size(); ++i) {
      if (paths[i].delay < 1)
        throw ConfigError("path " + std::to_string(i + 1) + ": delay must be >= 1");
      const Scalar p = paths[i].loss_prob;
      if (!(p >= Scalar(0) && p <= Scalar(1)))
        throw ConfigError("path " + std::to_string(i + 1) + ": loss probability must lie in [0,1]");
    }
  }
};

template <typename Scalar>
struct ModeMass {
  PathMask arrivals = 0;
  Scalar prob = Scalar(0);
};

/// One loss mode of the switched system: dynamics matrix and its probability.
template <typename Scalar>
struct Mode {
  Mat<Scalar> A;
  Scalar prob = Scalar(0);
  PathMask arrivals = 0;
};

/// Where the plant state and each path's shift register live inside the
/// augmented state. Only present for systems built from a network.
struct NetworkLayout {
  Index plant_dim = 0;
  Index input_width = 0;
  std::vector<int> path_ids;           // indices into the originating NetworkSpec
  std::vector<int> delays;
  std::vector<Index> register_offset;  // row of register cell 1 (the head)
};

/// x(k+1) = A_sigma x(k) + B_a u(k) with sigma i.i.d. over `modes`.
template <typename Scalar>
struct SwitchedSystem {
  std::vector<Mode<Scalar>> modes;
  std::vector<Mat<Scalar>> actions;
  std::vector<std::string> action_names;
  std::vector<PathMask> action_masks;
  Index n = 0;
  Index u_dim = 0;
  std::optional<NetworkLayout> layout;

  std::size_t num_modes() const { return modes.size(); }
  std::size_t num_actions() const { return actions.size(); }

  void validate() const {
    if (n < 1 || u_dim < 1) throw ConfigError("switched system dimensions must be positive");
    if (modes.empty()) throw ConfigError("switched system has no modes");
    if (actions.empty()) throw ConfigError("switched system has no actions");
    Scalar total(0);
    for (const auto& m : modes) {
      if (m.A.rows() != n || m.A.cols() != n) throw ConfigError("mode matrix has wrong dimension");
      if (!(m.prob >= Scalar(0))) throw ConfigError("mode probability must be non-negative");
      total += m.prob;
    }
    using std::abs;
    if (abs(total - Scalar(1)) > Scalar(1e-12))
      throw ConfigError("mode probabilities must sum to one");
    for (const auto& b : actions)
      if (b.rows() != n || b.cols() != u_dim) throw ConfigError("action matrix has wrong dimension");
  }
};

template <typename Scalar>
struct CostWeights {
  Mat<Scalar> M;  ///< stage state weight
  Mat<Scalar> R;  ///< stage input weight
  Mat<Scalar> Q;  ///< terminal weight
  int horizon = 1;

  void validate(Index n, Index u_dim) const;
};

using PlantModeld = PlantModel<double>;
using NetworkSpecd = NetworkSpec<double>;
using SwitchedSystemd = SwitchedSystem<double>;
using CostWeightsd = CostWeights<double>;

namespace detail {

template <typename Derived>
typename Derived::Scalar symmetry_defect(const Eigen::MatrixBase<Derived>& m) {
  using S = typename Derived::Scalar;
  const S scale = std::max(S(1), m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

template <typename Scalar>
Scalar min_eigenvalue(const Mat<Scalar>& sym) {
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

template <typename Scalar>
bool is_psd(const Mat<Scalar>& sym, Scalar rel_tol) {
  if (sym.size() == 0) return true;
  const Scalar scale = std::max(Scalar(1), sym.cwiseAbs().maxCoeff());
  return min_eigenvalue(sym) >= -rel_tol * scale;
}

}  // namespace detail

template <typename Scalar>
void CostWeights<Scalar>::validate(Index n, Index u_dim) const {
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (M.rows() != n || M.cols() != n) throw ConfigError("weight M must be n x n");
  if (Q.rows() != n || Q.cols() != n) throw ConfigError("weight Q must be n x n");
  if (R.rows() != u_dim || R.cols() != u_dim) throw ConfigError("weight R must be u_dim x u_dim");
  const Scalar tol(1e-10);
  if (detail::symmetry_defect(M) > tol) throw ConfigError("weight M must be symmetric");
  if (detail::symmetry_defect(Q) > tol) throw ConfigError("weight Q must be symmetric");
  if (detail::symmetry_defect(R) > tol) throw ConfigError("weight R must be symmetric");
  if (!detail::is_psd<Scalar>(M, tol)) throw ConfigError("weight M must be positive semidefinite");
  if (!detail::is_psd<Scalar>(Q, tol)) throw ConfigError("weight Q must be positive semidefinite");
  Eigen::LLT<Mat<Scalar>> llt(R);
  if (llt.info() != Eigen::Success) throw ConfigError("weight R must be positive definite");
}

/// All 2^r loss patterns with their product-Bernoulli probabilities.
/// Bit i of `arrivals` is sigma_i (1 = delivered).
template <typename Scalar>
std::vector<ModeMass<Scalar>> mode_distribution(const NetworkSpec<Scalar>& spec) {
  spec.validate();
  const int r = spec.num_paths();
  std::vector<ModeMass<Scalar>> out;
  out.reserve(std::size_t{1} << r);
  for (PathMask mask = 0; mask < (PathMask{1} << r); ++mask) {
    Scalar prob(1);
    for (int i = 0; i < r; ++i) {
      const Scalar p = spec.paths[i].loss_prob;
      prob *= (mask >> i) & 1u ? Scalar(1) - p : p;
    }
    out.push_back({mask, prob});
  }
  return out;
}

enum class PathSelection {
  all,   ///< keep every path of the network
  used,  ///< drop paths that no action in the catalog sends on
};

/// Label "(s1,s2,...)" for a mask over r paths.
inline std::string mask_label(PathMask mask, int r) {
  std::string s = "(";
  for (int i = 0; i < r; ++i) {
    if (i) s += ',';
    s += ((mask >> i) & 1u) ? '1' : '0';
  }
  return s + ")";
}

/// Assemble the augmented switched system of a plant actuated over r delayed
/// lossy paths. Augmented state: plant state followed by one shift register
/// of d_i cells (m rows each) per path. A packet enters the last cell, moves
/// one cell per step toward cell 1, and cell 1 drives the plant when the
/// path delivers. Loss modes with zero probability are dropped.
template <typename Scalar>
SwitchedSystem<Scalar> build_augmented(const NetworkSpec<Scalar>& spec,
                                       std::span<const PathMask> catalog,
                                       PathSelection selection = PathSelection::all) {
  spec.validate();
  if (catalog.empty()) throw ConfigError("action catalog is empty");
  const int r = spec.num_paths();
  const PathMask all_paths = (PathMask{1} << r) - 1;
  PathMask used = 0;
  for (PathMask a : catalog) {
    if (a & ~all_paths) throw ConfigError("action refers to a path outside the network");
    used |= a;
  }

  std::vector<int> keep;
  for (int i = 0; i < r; ++i)
    if (selection == PathSelection::all || ((used >> i) & 1u)) keep.push_back(i);
  if (keep.empty()) throw ConfigError("no path is used by the action catalog");

  const Index ell = spec.plant.states();
  const Index m = spec.plant.inputs();
  NetworkLayout layout;
  layout.plant_dim = ell;
  layout.input_width = m;
  Index n = ell;
  for (int i : keep) {
    layout.path_ids.push_back(i);
    layout.delays.push_back(spec.paths[i].delay);
    layout.register_offset.push_back(n);
    n += m * spec.paths[i].delay;
  }
  const int r_kept = static_cast<int>(keep.size());

  NetworkSpec<Scalar> kept_spec{spec.plant, {}};
  for (int i : keep) kept_spec.paths.push_back(spec.paths[i]);

  SwitchedSystem<Scalar> sys;
  sys.n = n;
  sys.u_dim = m * r_kept;

  // Mode-independent part: plant block and the register shifts.
  Mat<Scalar> base = Mat<Scalar>::Zero(n, n);
  base.topLeftCorner(ell, ell) = spec.plant.A;
  for (int j = 0; j < r_kept; ++j) {
    const Index off = layout.register_offset[j];
    for (int c = 0; c + 1 < layout.delays[j]; ++c)
      base.block(off + c * m, off + (c + 1) * m, m, m).setIdentity();
  }

  for (const auto& mm : mode_distribution(kept_spec)) {
    if (mm.prob == Scalar(0)) continue;
    Mode<Scalar> mode{base, mm.prob, 0};
    for (int j = 0; j < r_kept; ++j) {
      if (!((mm.arrivals >> j) & 1u)) continue;
      mode.A.block(0, layout.register_offset[j], ell, m) = spec.plant.B;
      mode.arrivals |= PathMask{1} << keep[j];
    }
    sys.modes.push_back(std::move(mode));
  }

  for (PathMask a : catalog) {
    Mat<Scalar> B = Mat<Scalar>::Zero(n, sys.u_dim);
    for (int j = 0; j < r_kept; ++j) {
      if (!((a >> keep[j]) & 1u)) continue;
      const Index tail = layout.register_offset[j] + (layout.delays[j] - 1) * m;
      B.block(tail, j * m, m, m).setIdentity();
    }
    sys.actions.push_back(std::move(B));
    sys.action_masks.push_back(a);
    sys.action_names.push_back(mask_label(a, r));
  }
  sys.layout = std::move(layout);
  sys.validate();
  return sys;
}

/// Mean dynamics and second moment of the mode distribution for a value matrix.
template <typename Scalar>
struct ExpectedMatrices {
  Mat<Scalar> mean_A;         ///< sum_i pi_i A_i
  Mat<Scalar> second_moment;  ///< sum_i pi_i A_i' P A_i
};

template <typename Scalar>
ExpectedMatrices<Scalar> expected_matrices(const SwitchedSystem<Scalar>& sys, const Mat<Scalar>& P) {
  if (P.rows() != sys.n || P.cols() != sys.n)
    throw ConfigError("value matrix dimension does not match the system");
  ExpectedMatrices<Scalar> out{Mat<Scalar>::Zero(sys.n, sys.n), Mat<Scalar>::Zero(sys.n, sys.n)};
  for (const auto& mode : sys.modes) {
    out.mean_A.noalias() += mode.prob * mode.A;
    out.second_moment.noalias() += mode.prob * (mode.A.transpose() * P * mode.A);
  }
  out.second_moment = (out.second_moment + out.second_moment.transpose()) / Scalar(2);
  return out;
}

/// Weight with identity on the leading `block` states and zeros elsewhere.
template <typename Scalar>
Mat<Scalar> leading_identity(Index n, Index block) {
  Mat<Scalar> w = Mat<Scalar>::Zero(n, n);
  w.topLeftCorner(block, block).setIdentity();
  return w;
}

}  // namespace netlqr
