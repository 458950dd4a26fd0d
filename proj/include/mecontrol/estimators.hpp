#pragma once

// Minimum-energy input computations.
//
// Model-based:
//   me_gramian     u = C_T^T W_T^+ (xf - A^T x0)
//   me_ctrb        u = C_T^+ (xf - A^T x0)
//
// Data-driven, from experiments X = A^T x0 1^T + C_T U:
//   dd_kernel      u = (I - UK (UK)^+) U X^+ xf,   K = Ker(X)
//   dd_pinv        u = (X U^+)^+ xf
//   dd_asymptotic  u = U X^+ xf
//
// The *_x0 variants replace (X, xf) by the augmented pair ([X; 1^T], [xf; 1]),
// which absorbs the unknown drift A^T x0; the pseudoinverse route additionally
// augments the inputs to [U; 1^T] and keeps the leading mT entries. dd_output
// substitutes the measured outputs Y and an output target yf.

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "mecontrol/datagen.hpp"
#include "mecontrol/matops.hpp"
#include "mecontrol/sysmodel.hpp"

namespace mecontrol {

enum class TargetKind { kState, kOutput };

struct ControlTask {
  Vector x0;
  Vector target;
  Eigen::Index T = 1;
  TargetKind kind = TargetKind::kState;

  static ControlTask to_state(Vector x0, Vector xf, Eigen::Index horizon) {
    return {std::move(x0), std::move(xf), horizon, TargetKind::kState};
  }
  static ControlTask to_output(Vector x0, Vector yf, Eigen::Index horizon) {
    return {std::move(x0), std::move(yf), horizon, TargetKind::kOutput};
  }
};

struct Diagnostics {
  std::optional<Eigen::Index> rank_U;
  std::optional<Eigen::Index> rank_X;
  std::optional<bool> u_full_row_rank;
  std::optional<bool> x_full_row_rank;
  /// Rank tolerance passed to every pseudoinverse; empty means the default
  /// max(rows, cols) * eps * sigma_max of each factor.
  std::optional<double> tolerance;
  /// ||target - Z Z^+ target|| for the data matrix Z actually used, i.e. the
  /// part of the target outside the span of the measured final states.
  std::optional<double> data_residual;
  /// Model-side reachability residual (model-based methods only).
  std::optional<double> reach_residual;
  std::map<std::string, bool> assumptions;
};

struct ControlSolution {
  Vector u;  // stacked [u(T-1); ...; u(0)]
  Eigen::Index m = 1;
  double input_norm = 0.0;
  std::optional<Vector> achieved_final;
  std::optional<double> final_error;
  std::string method;
  Diagnostics diagnostics;

  Eigen::Index horizon() const { return u.size() / m; }
  StackedInput stacked() const { return StackedInput(u, m); }
  bool finite() const { return u.allFinite(); }
};

/// The three data-driven expressions.
enum class DataMethod { kKernel, kPinv, kAsymptotic };

inline const char* to_string(DataMethod method) {
  switch (method) {
    case DataMethod::kKernel: return "dd-kernel";
    case DataMethod::kPinv: return "dd-pinv";
    case DataMethod::kAsymptotic: return "dd-asymptotic";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Raw formulas over plain matrices. `Z` is the data matrix whose columns are
// measured final states (or outputs, or their augmented versions).

namespace formulas {

/// (U K)^+ with K an orthonormal basis of Ker(Z).
///
/// Coefficients c with U K c = 0 correspond to Ker(U) & Ker(Z), so
/// rank(U K) = rank([U; Z]) - rank(Z) exactly. Truncating at that rank keeps
/// the rounding noise in U K (of order eps * ||U|| * cond(Z)) out of the
/// projector, which a tolerance relative to ||U K|| cannot do when U K is
/// (numerically) zero. The two blocks are normalized before stacking so the
/// rank of the stack does not depend on their relative scale. An explicit
/// tolerance bypasses this and is applied to U K directly.
inline Matrix projected_inputs_pinv(const Matrix& U, const Matrix& Z, const Matrix& UK,
                                    Eigen::Index rank_Z, std::optional<double> tol) {
  if (tol) return pinv(UK, tol);
  const double su = U.norm(), sz = Z.norm();
  if (su == 0.0) return Matrix::Zero(UK.cols(), UK.rows());
  Matrix stack(U.rows() + Z.rows(), U.cols());
  stack.topRows(U.rows()) = U / su;
  stack.bottomRows(Z.rows()) = sz > 0.0 ? Matrix(Z / sz) : Matrix::Zero(Z.rows(), Z.cols());
  return truncated_pinv(UK, rank_info(stack).numerical_rank - rank_Z);
}

inline Vector kernel_form(const Matrix& U, const Matrix& Z, const Vector& target,
                          std::optional<double> tol = std::nullopt) {
  const Matrix K = kernel_basis(Z, tol).basis;
  const Matrix UK = U * K;
  const Vector v = U * (pinv(Z, tol) * target);
  if (UK.cols() == 0) return v;
  const Eigen::Index rank_Z = Z.cols() - K.cols();
  return v - UK * (projected_inputs_pinv(U, Z, UK, rank_Z, tol) * v);
}

inline Vector pinv_form(const Matrix& U, const Matrix& Z, const Vector& target,
                        std::optional<double> tol = std::nullopt) {
  const Matrix estimate = Z * pinv(U, tol);  // data-driven C_T
  return pinv(estimate, tol) * target;
}

inline Vector asymptotic_form(const Matrix& U, const Matrix& Z, const Vector& target,
                              std::optional<double> tol = std::nullopt) {
  return U * (pinv(Z, tol) * target);
}

inline Vector apply(DataMethod method, const Matrix& U, const Matrix& Z,
                    const Vector& target, std::optional<double> tol) {
  switch (method) {
    case DataMethod::kKernel: return kernel_form(U, Z, target, tol);
    case DataMethod::kPinv: return pinv_form(U, Z, target, tol);
    case DataMethod::kAsymptotic: return asymptotic_form(U, Z, target, tol);
  }
  return {};
}

}  // namespace formulas

// ---------------------------------------------------------------------------
// Model-based

/// Fills achieved_final / final_error by simulating the stored input on the
/// ground-truth plant.
inline void evaluate(const LtiSystem& sys, const ControlTask& task,
                     ControlSolution& sol) {
  if (!sol.finite()) {
    sol.achieved_final.reset();
    sol.final_error = std::numeric_limits<double>::infinity();
    return;
  }
  const Vector xT = simulate(sys, task.x0, sol.stacked()).final_state();
  if (task.kind == TargetKind::kOutput) {
    if (!sys.has_output()) throw ConfigurationError("output target needs C");
    sol.achieved_final = *sys.C() * xT;
  } else {
    sol.achieved_final = xT;
  }
  sol.final_error = (*sol.achieved_final - task.target).norm();
}

namespace detail {

inline void check_state_task(const LtiSystem& sys, const ControlTask& task) {
  require_horizon(task.T);
  if (task.kind != TargetKind::kState) {
    throw ConfigurationError("model-based state formula needs a state target");
  }
  if (task.x0.size() != sys.n() || task.target.size() != sys.n()) {
    throw DimensionMismatch("x0 and xf must have length n = " + std::to_string(sys.n()));
  }
  require_finite(task.x0, "x0");
  require_finite(task.target, "xf");
}

inline ControlSolution finish(Vector u, Eigen::Index m, std::string method) {
  ControlSolution sol;
  sol.input_norm = u.norm();
  sol.u = std::move(u);
  sol.m = m;
  sol.method = std::move(method);
  return sol;
}

}  // namespace detail

inline ControlSolution me_gramian(const LtiSystem& sys, const ControlTask& task,
                                  std::optional<double> tol = std::nullopt) {
  detail::check_state_task(sys, task);
  const Matrix ct = ctrb_matrix(sys, task.T);
  const Matrix w = gramian(sys, task.T);
  const Vector d = task.target - free_response(sys, task.x0, task.T);
  auto sol = detail::finish(ct.transpose() * (pinv(w, tol) * d), sys.m(), "gramian");
  sol.diagnostics.tolerance = tol;
  sol.diagnostics.reach_residual = (coimage_projector(ct, tol) * d).norm();
  evaluate(sys, task, sol);
  return sol;
}

inline ControlSolution me_ctrb(const LtiSystem& sys, const ControlTask& task,
                               std::optional<double> tol = std::nullopt) {
  detail::check_state_task(sys, task);
  const Matrix ct = ctrb_matrix(sys, task.T);
  const Vector d = task.target - free_response(sys, task.x0, task.T);
  auto sol = detail::finish(pinv(ct, tol) * d, sys.m(), "ctrb");
  sol.diagnostics.tolerance = tol;
  sol.diagnostics.reach_residual = (coimage_projector(ct, tol) * d).norm();
  evaluate(sys, task, sol);
  return sol;
}

/// C_{O,T}^+ (yf - C A^T x0).
inline ControlSolution me_output_ctrb(const LtiSystem& sys, const ControlTask& task,
                                      std::optional<double> tol = std::nullopt) {
  require_horizon(task.T);
  if (task.kind != TargetKind::kOutput) {
    throw ConfigurationError("output formula needs an output target");
  }
  const Matrix cot = output_ctrb_matrix(sys, task.T);
  if (task.target.size() != sys.p()) throw DimensionMismatch("yf must have length p");
  const Vector d = task.target - *sys.C() * free_response(sys, task.x0, task.T);
  auto sol = detail::finish(pinv(cot, tol) * d, sys.m(), "ctrb-output");
  sol.diagnostics.tolerance = tol;
  sol.diagnostics.reach_residual = (coimage_projector(cot, tol) * d).norm();
  evaluate(sys, task, sol);
  return sol;
}

// ---------------------------------------------------------------------------
// Data-driven

struct AugmentedData {
  Matrix Xbar;  // [X; 1^T]
  Vector xbar_f;  // [xf; 1]
};

inline AugmentedData augment(const Matrix& X, const Vector& xf) {
  AugmentedData aug;
  aug.Xbar.resize(X.rows() + 1, X.cols());
  aug.Xbar.topRows(X.rows()) = X;
  aug.Xbar.row(X.rows()).setOnes();
  aug.xbar_f.resize(xf.size() + 1);
  aug.xbar_f.head(xf.size()) = xf;
  aug.xbar_f(xf.size()) = 1.0;
  return aug;
}

struct AugmentedAssumptions {
  bool u_full_row_rank = false;
  /// Some w with U w = 0 has 1^T w != 0.
  bool kernel_reaches_ones = false;
  double ones_residual = 0.0;  // ||(I - U^+ U) 1||

  bool hold() const { return u_full_row_rank && kernel_reaches_ones; }
};

/// Numerical check of the two experiment-design conditions that make the
/// augmented formulas exact for x0 != 0. Default threshold 1e-8 * sqrt(N).
inline AugmentedAssumptions check_augmented_assumptions(
    const Matrix& U, std::optional<double> tol = std::nullopt,
    std::optional<double> ones_tol = std::nullopt) {
  AugmentedAssumptions a;
  a.u_full_row_rank = rank_info(U, tol).full_row_rank();
  const Vector ones = Vector::Ones(U.cols());
  a.ones_residual = (ones - pinv(U, tol) * (U * ones)).norm();
  const double threshold = ones_tol.value_or(1e-8 * std::sqrt(static_cast<double>(U.cols())));
  a.kernel_reaches_ones = a.ones_residual > threshold;
  return a;
}

struct DataOptions {
  std::optional<double> tol;
  /// Raise AssumptionViolated instead of returning a best-effort answer when
  /// the augmented assumptions fail.
  bool enforce_assumptions = true;
};

namespace detail {

inline void check_data(const ExperimentSet& data) {
  if (data.N() == 0) throw EmptyData("experiment set has no experiments");
  data.validate();
}

inline ControlSolution with_diagnostics(Vector u, const Matrix& U, const Matrix& Z,
                                        const Vector& target, Eigen::Index m,
                                        std::optional<double> tol, std::string tag) {
  auto sol = detail::finish(std::move(u), m, std::move(tag));
  const RankInfo ru = rank_info(U, tol);
  const RankInfo rz = rank_info(Z, tol);
  auto& d = sol.diagnostics;
  d.rank_U = ru.numerical_rank;
  d.rank_X = rz.numerical_rank;
  d.u_full_row_rank = ru.full_row_rank();
  d.x_full_row_rank = rz.full_row_rank();
  d.tolerance = tol;
  d.data_residual = (target - image_projector(Z, tol) * target).norm();
  d.assumptions["u_full_row_rank"] = ru.full_row_rank();
  return sol;
}

inline ControlSolution data_driven(DataMethod method, const Matrix& U, const Matrix& Z,
                                   const Vector& target, Eigen::Index m,
                                   std::optional<double> tol, std::string tag) {
  return with_diagnostics(formulas::apply(method, U, Z, target, tol), U, Z, target, m, tol,
                          std::move(tag));
}

inline ControlSolution plain(DataMethod method, const ExperimentSet& data,
                             const Vector& xf, std::optional<double> tol) {
  check_data(data);
  if (!data.x0_known_zero) {
    throw ConfigurationError(
        "experiments were run from a nonzero initial state; use the augmented "
        "(x0) variant");
  }
  if (xf.size() != data.n()) {
    throw DimensionMismatch("xf must have length n = " + std::to_string(data.n()));
  }
  require_finite(xf, "xf");
  return data_driven(method, data.U, data.X, xf, data.m(), tol, to_string(method));
}

inline ControlSolution augmented(DataMethod method, const Matrix& U, const Matrix& Z,
                                 const Vector& target, Eigen::Index m,
                                 const DataOptions& opts, std::string tag) {
  if (U.cols() == 0) throw EmptyData("experiment set has no experiments");
  require_finite(target, "target");
  const AugmentedAssumptions a = check_augmented_assumptions(U, opts.tol);
  if (opts.enforce_assumptions && !a.hold()) {
    std::string what = "augmented data-driven formula needs:";
    if (!a.u_full_row_rank) what += " U full row rank (rank(U) < mT);";
    if (!a.kernel_reaches_ones) {
      what += " a kernel vector w of U with 1^T w != 0 (||(I - U^+U)1|| = " +
              std::to_string(a.ones_residual) + ");";
    }
    throw AssumptionViolated(what);
  }
  const AugmentedData aug = augment(Z, target);
  Vector u;
  if (method == DataMethod::kPinv) {
    // Xbar = [C_T, A^T x0; 0, 1] [U; 1^T], so the pseudoinverse route has to
    // factor out the augmented inputs. Its minimum-norm solution is [u*; 1].
    Matrix ubar(U.rows() + 1, U.cols());
    ubar.topRows(U.rows()) = U;
    ubar.row(U.rows()).setOnes();
    u = formulas::pinv_form(ubar, aug.Xbar, aug.xbar_f, opts.tol).head(U.rows());
  } else {
    u = formulas::apply(method, U, aug.Xbar, aug.xbar_f, opts.tol);
  }
  auto sol = with_diagnostics(std::move(u), U, aug.Xbar, aug.xbar_f, m, opts.tol,
                              std::move(tag));
  sol.diagnostics.assumptions["u_full_row_rank"] = a.u_full_row_rank;
  sol.diagnostics.assumptions["kernel_reaches_ones"] = a.kernel_reaches_ones;
  return sol;
}

}  // namespace detail

inline ControlSolution dd_kernel(const ExperimentSet& data, const Vector& xf,
                                 std::optional<double> tol = std::nullopt) {
  return detail::plain(DataMethod::kKernel, data, xf, tol);
}

inline ControlSolution dd_pinv(const ExperimentSet& data, const Vector& xf,
                               std::optional<double> tol = std::nullopt) {
  return detail::plain(DataMethod::kPinv, data, xf, tol);
}

inline ControlSolution dd_asymptotic(const ExperimentSet& data, const Vector& xf,
                                     std::optional<double> tol = std::nullopt) {
  return detail::plain(DataMethod::kAsymptotic, data, xf, tol);
}

/// Any of the three expressions on augmented data, valid for unknown x0.
inline ControlSolution dd_x0(DataMethod method, const ExperimentSet& data,
                             const Vector& xf, const DataOptions& opts = {}) {
  detail::check_data(data);
  if (xf.size() != data.n()) {
    throw DimensionMismatch("xf must have length n = " + std::to_string(data.n()));
  }
  return detail::augmented(method, data.U, data.X, xf, data.m(), opts,
                           std::string(to_string(method)) + "-x0");
}

inline ControlSolution dd_kernel_x0(const ExperimentSet& data, const Vector& xf,
                                    const DataOptions& opts = {}) {
  return dd_x0(DataMethod::kKernel, data, xf, opts);
}

inline ControlSolution dd_pinv_x0(const ExperimentSet& data, const Vector& xf,
                                  const DataOptions& opts = {}) {
  return dd_x0(DataMethod::kPinv, data, xf, opts);
}

inline ControlSolution dd_asymptotic_x0(const ExperimentSet& data, const Vector& xf,
                                        const DataOptions& opts = {}) {
  return dd_x0(DataMethod::kAsymptotic, data, xf, opts);
}

/// Same expressions with (Y, yf) in place of (X, xf). Data recorded from a
/// nonzero initial state goes through the augmented form.
inline ControlSolution dd_output(const ExperimentSet& data, const Vector& yf,
                                 DataMethod method, const DataOptions& opts = {}) {
  detail::check_data(data);
  if (!data.Y) throw ConfigurationError("experiment set has no output data Y");
  if (yf.size() != data.Y->rows()) {
    throw DimensionMismatch("yf must have length p = " + std::to_string(data.Y->rows()));
  }
  require_finite(yf, "yf");
  const std::string tag = std::string(to_string(method)) + "-output";
  if (data.x0_known_zero) {
    return detail::data_driven(method, data.U, *data.Y, yf, data.m(), opts.tol, tag);
  }
  return detail::augmented(method, data.U, *data.Y, yf, data.m(), opts, tag + "-x0");
}

struct CombinationWeights {
  Vector alpha;
};

/// alpha* = X^+ xf - K (UK)^+ U X^+ xf, so that U alpha* is the dd_kernel input
/// and X alpha* = X X^+ xf.
inline CombinationWeights combination_weights(const ExperimentSet& data, const Vector& xf,
                                              std::optional<double> tol = std::nullopt) {
  detail::check_data(data);
  if (!data.x0_known_zero) {
    throw ConfigurationError("combination weights need experiments from x0 = 0");
  }
  if (xf.size() != data.n()) throw DimensionMismatch("xf must have length n");
  const Matrix K = kernel_basis(data.X, tol).basis;
  const Vector base = pinv(data.X, tol) * xf;
  CombinationWeights w;
  w.alpha = base;
  if (K.cols() > 0) {
    const Matrix UK = data.U * K;
    const Eigen::Index rank_X = data.X.cols() - K.cols();
    w.alpha -= K * (formulas::projected_inputs_pinv(data.U, data.X, UK, rank_X, tol) *
                    (data.U * base));
  }
  return w;
}

}  // namespace mecontrol
