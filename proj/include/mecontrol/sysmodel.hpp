#pragma once

// Discrete-time LTI plant x(t+1) = A x(t) + B u(t), y(t) = C x(t).
//
// Stacked inputs follow the ordering u = [u(T-1); ...; u(0)], which pairs with
// the block order C_T = [B, AB, ..., A^{T-1}B] so that
// x(T) = A^T x0 + C_T u.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mecontrol/matops.hpp"

namespace mecontrol {

class LtiSystem {
 public:
  LtiSystem(Matrix a, Matrix b, std::optional<Matrix> c = std::nullopt)
      : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
    if (a_.rows() < 1 || a_.rows() != a_.cols()) {
      throw DimensionMismatch("A must be square and non-empty");
    }
    if (b_.rows() != a_.rows() || b_.cols() < 1) {
      throw DimensionMismatch("B must have as many rows as A and >= 1 column");
    }
    if (c_ && (c_->cols() != a_.rows() || c_->rows() < 1)) {
      throw DimensionMismatch("C must have as many columns as A");
    }
    require_finite(a_, "A");
    require_finite(b_, "B");
    if (c_) require_finite(*c_, "C");
  }

  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  const std::optional<Matrix>& C() const { return c_; }
  bool has_output() const { return c_.has_value(); }

  Eigen::Index n() const { return a_.rows(); }
  Eigen::Index m() const { return b_.cols(); }
  Eigen::Index p() const { return c_ ? c_->rows() : 0; }

  LtiSystem with_output(Matrix c) const { return LtiSystem(a_, b_, std::move(c)); }

 private:
  Matrix a_;
  Matrix b_;
  std::optional<Matrix> c_;
};

/// Inputs over a horizon, stacked latest-first: [u(T-1); ...; u(0)].
class StackedInput {
 public:
  StackedInput(Vector u, Eigen::Index m) : u_(std::move(u)), m_(m) {
    if (m_ < 1 || u_.size() == 0 || u_.size() % m_ != 0) {
      throw DimensionMismatch("stacked input length must be a positive multiple of m");
    }
    require_finite(u_, "input");
  }

  /// Builds the stacked vector from per-step inputs given in time order
  /// u(0), u(1), ..., u(T-1).
  static StackedInput from_time_ordered(const std::vector<Vector>& steps) {
    if (steps.empty()) throw InvalidHorizon("horizon must be at least 1");
    const Eigen::Index m = steps.front().size();
    const auto horizon = static_cast<Eigen::Index>(steps.size());
    Vector u(m * horizon);
    for (Eigen::Index t = 0; t < horizon; ++t) {
      if (steps[t].size() != m) throw DimensionMismatch("ragged input steps");
      u.segment((horizon - 1 - t) * m, m) = steps[t];
    }
    return StackedInput(std::move(u), m);
  }

  Eigen::Index horizon() const { return u_.size() / m_; }
  Eigen::Index m() const { return m_; }
  const Vector& stacked() const { return u_; }

  /// u(t) for t in [0, T).
  Vector at(Eigen::Index t) const {
    return u_.segment((horizon() - 1 - t) * m_, m_);
  }

 private:
  Vector u_;
  Eigen::Index m_;
};

struct Trajectory {
  std::vector<Vector> states;  // x(0) ... x(T)
  Vector inputs;               // stacked, latest-first

  const Vector& final_state() const { return states.back(); }
};

inline void require_horizon(Eigen::Index horizon) {
  if (horizon < 1) throw InvalidHorizon("horizon T must be at least 1");
}

/// [B, AB, ..., A^{T-1}B], powers by repeated multiplication.
inline Matrix ctrb_matrix(const LtiSystem& sys, Eigen::Index horizon) {
  require_horizon(horizon);
  const Eigen::Index m = sys.m();
  Matrix ct(sys.n(), m * horizon);
  ct.leftCols(m) = sys.B();
  for (Eigen::Index k = 1; k < horizon; ++k) {
    ct.middleCols(k * m, m).noalias() = sys.A() * ct.middleCols((k - 1) * m, m);
  }
  return ct;
}

/// T-step controllability Gramian, sum_t A^t B B^T (A^T)^t.
inline Matrix gramian(const LtiSystem& sys, Eigen::Index horizon) {
  const Matrix ct = ctrb_matrix(sys, horizon);
  Matrix w = Matrix::Zero(sys.n(), sys.n());
  for (Eigen::Index k = 0; k < horizon; ++k) {
    const auto block = ct.middleCols(k * sys.m(), sys.m());
    w.noalias() += block * block.transpose();
  }
  return w;
}

inline Matrix output_ctrb_matrix(const LtiSystem& sys, Eigen::Index horizon) {
  if (!sys.has_output()) {
    throw ConfigurationError("system has no output matrix C");
  }
  return *sys.C() * ctrb_matrix(sys, horizon);
}

inline Matrix matrix_power(const Matrix& a, Eigen::Index k) {
  Matrix p = Matrix::Identity(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < k; ++i) p = a * p;
  return p;
}

/// A^T x0 by repeated matrix-vector products.
inline Vector free_response(const LtiSystem& sys, const Vector& x0,
                            Eigen::Index horizon) {
  if (x0.size() != sys.n()) throw DimensionMismatch("x0 has wrong length");
  Vector x = x0;
  for (Eigen::Index t = 0; t < horizon; ++t) x = sys.A() * x;
  return x;
}

inline Trajectory simulate(const LtiSystem& sys, const Vector& x0,
                           const StackedInput& u) {
  if (x0.size() != sys.n()) throw DimensionMismatch("x0 has wrong length");
  if (u.m() != sys.m()) throw DimensionMismatch("input width differs from m");
  require_finite(x0, "x0");
  Trajectory traj;
  traj.inputs = u.stacked();
  traj.states.reserve(static_cast<std::size_t>(u.horizon() + 1));
  traj.states.push_back(x0);
  for (Eigen::Index t = 0; t < u.horizon(); ++t) {
    traj.states.push_back(sys.A() * traj.states.back() + sys.B() * u.at(t));
  }
  return traj;
}

inline Trajectory simulate(const LtiSystem& sys, const Vector& x0,
                           const Vector& stacked_u) {
  return simulate(sys, x0, StackedInput(stacked_u, sys.m()));
}

struct Reachability {
  bool reachable = false;
  double residual = 0.0;  // ||(I - C_T C_T^+)(xf - A^T x0)||
};

inline Reachability reachable(const LtiSystem& sys, const Vector& x0,
                              const Vector& xf, Eigen::Index horizon,
                              double tol = 1e-8) {
  require_horizon(horizon);
  if (xf.size() != sys.n()) throw DimensionMismatch("xf has wrong length");
  require_finite(xf, "xf");
  const Vector d = xf - free_response(sys, x0, horizon);
  const Vector r = coimage_projector(ctrb_matrix(sys, horizon)) * d;
  Reachability out;
  out.residual = r.norm();
  out.reachable = out.residual <= tol * (1.0 + d.norm());
  return out;
}

}  // namespace mecontrol
