#pragma once

// Dense linear-algebra primitives built on a full SVD: pseudoinverse,
// numerical rank, null-space basis and the projector onto the orthogonal
// complement of a column space.

#include <algorithm>
#include <limits>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "mecontrol/errors.hpp"

namespace mecontrol {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline void require_finite(const Eigen::Ref<const Matrix>& m,
                           const char* what = "matrix") {
  if (!m.allFinite()) {
    throw InvalidInput(std::string(what) + " has non-finite entries");
  }
}

inline void require_positive_tol(const std::optional<double>& tol) {
  if (tol && !(*tol > 0.0)) {
    throw InvalidInput("rank tolerance must be positive");
  }
}

/// Orthonormal basis of the numerical null space. A full-rank source yields a
/// basis with zero columns.
struct KernelBasis {
  Eigen::Index ambient_dim = 0;
  Matrix basis;

  Eigen::Index dim() const { return basis.cols(); }
};

struct RankInfo {
  Eigen::Index numerical_rank = 0;
  Vector singular_values;  // nonincreasing
  double tolerance_used = 0.0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  bool full_row_rank() const { return numerical_rank == rows; }
  bool full_column_rank() const { return numerical_rank == cols; }
};

/// max(rows, cols) * eps * sigma_max.
inline double default_rank_tolerance(Eigen::Index rows, Eigen::Index cols,
                                     double sigma_max) {
  return static_cast<double>(std::max(rows, cols)) *
         std::numeric_limits<double>::epsilon() * sigma_max;
}

namespace detail {

inline Eigen::Index count_above(const Vector& sv, double tol) {
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > tol) ++r;
  return r;
}

inline double resolve_tol(const Vector& sv, Eigen::Index rows, Eigen::Index cols,
                          const std::optional<double>& tol) {
  if (tol) return *tol;
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  return default_rank_tolerance(rows, cols, smax);
}

}  // namespace detail

inline RankInfo rank_info(const Eigen::Ref<const Matrix>& m,
                          std::optional<double> tol = std::nullopt) {
  require_finite(m);
  require_positive_tol(tol);
  RankInfo info;
  info.rows = m.rows();
  info.cols = m.cols();
  if (m.size() == 0) {
    info.singular_values = Vector(0);
    info.tolerance_used = tol.value_or(0.0);
    return info;
  }
  Eigen::BDCSVD<Matrix> svd(m);
  info.singular_values = svd.singularValues();
  info.tolerance_used = detail::resolve_tol(info.singular_values, m.rows(),
                                            m.cols(), tol);
  info.numerical_rank =
      detail::count_above(info.singular_values, info.tolerance_used);
  return info;
}

/// Moore-Penrose pseudoinverse. Singular values at or below the tolerance are
/// treated as zero. Matrices with a zero dimension map to their (empty)
/// transpose shape.
inline Matrix pinv(const Eigen::Ref<const Matrix>& m,
                   std::optional<double> tol = std::nullopt) {
  require_finite(m);
  require_positive_tol(tol);
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double t = detail::resolve_tol(sv, m.rows(), m.cols(), tol);
  const Eigen::Index r = detail::count_above(sv, t);
  if (r == 0) return Matrix::Zero(m.cols(), m.rows());
  const Vector inv = sv.head(r).cwiseInverse();
  return svd.matrixV().leftCols(r) * inv.asDiagonal() *
         svd.matrixU().leftCols(r).transpose();
}

/// Pseudoinverse keeping exactly the `rank` largest singular values.
inline Matrix truncated_pinv(const Eigen::Ref<const Matrix>& m, Eigen::Index rank) {
  require_finite(m);
  rank = std::clamp<Eigen::Index>(rank, 0, std::min(m.rows(), m.cols()));
  if (rank == 0) return Matrix::Zero(m.cols(), m.rows());
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector inv = svd.singularValues().head(rank).cwiseInverse();
  return svd.matrixV().leftCols(rank) * inv.asDiagonal() *
         svd.matrixU().leftCols(rank).transpose();
}

inline KernelBasis kernel_basis(const Eigen::Ref<const Matrix>& m,
                                std::optional<double> tol = std::nullopt) {
  require_finite(m);
  require_positive_tol(tol);
  KernelBasis k;
  k.ambient_dim = m.cols();
  if (m.cols() == 0) {
    k.basis = Matrix(0, 0);
    return k;
  }
  if (m.rows() == 0) {
    k.basis = Matrix::Identity(m.cols(), m.cols());
    return k;
  }
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double t = detail::resolve_tol(sv, m.rows(), m.cols(), tol);
  const Eigen::Index r = detail::count_above(sv, t);
  k.basis = svd.matrixV().rightCols(m.cols() - r);
  return k;
}

/// I - M M^+, the orthogonal projector onto the complement of Im(M).
inline Matrix coimage_projector(const Eigen::Ref<const Matrix>& m,
                                std::optional<double> tol = std::nullopt) {
  Matrix p = Matrix::Identity(m.rows(), m.rows());
  if (m.cols() == 0) return p;
  p.noalias() -= m * pinv(m, tol);
  return p;
}

/// M M^+, the orthogonal projector onto Im(M).
inline Matrix image_projector(const Eigen::Ref<const Matrix>& m,
                              std::optional<double> tol = std::nullopt) {
  if (m.cols() == 0) return Matrix::Zero(m.rows(), m.rows());
  return m * pinv(m, tol);
}

}  // namespace mecontrol
