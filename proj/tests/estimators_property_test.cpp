// Randomized invariants of the data-driven estimators. Each property draws
// its own instance family from a fixed seed so failures are replayable.

#include <random>

#include <gtest/gtest.h>

#include "mecontrol/estimators.hpp"

namespace mecontrol {
namespace {

struct Instance {
  LtiSystem sys;
  Eigen::Index T;
  Matrix U;
  ExperimentSet data;
  Vector xf;
};

/// Random plant with n <= 10, m <= 3, mT >= n, T <= 15 and N experiments from
/// x0 = 0 (N defaults to mT).
Instance draw(std::mt19937_64& rng, std::uint64_t seed, Eigen::Index N_extra = 0,
              std::optional<Eigen::Index> N_fixed = std::nullopt) {
  const int n = std::uniform_int_distribution<int>(2, 10)(rng);
  const int m = std::uniform_int_distribution<int>(1, 3)(rng);
  const int t_min = (n + m - 1) / m;
  const int T = std::uniform_int_distribution<int>(t_min, 15)(rng);
  const Eigen::Index N = N_fixed.value_or(m * T + N_extra);
  LtiSystem sys = random_system(n, m, seed);
  Matrix U = design_inputs(InputDesign::iid_gaussian(N, seed + 1), m, T).U;
  ExperimentSet data = run_experiments(sys, Vector::Zero(n), U, T);
  Rng xr(derive_seed(seed, 99));
  Vector xf = standard_normal(n, xr);
  return {std::move(sys), T, std::move(U), std::move(data), std::move(xf)};
}

TEST(EstimatorProperties, KernelAndPinvFormsAgree) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const Instance in = draw(rng, 10 * trial);
    const auto k = dd_kernel(in.data, in.xf);
    const auto p = dd_pinv(in.data, in.xf);
    EXPECT_LE((k.u - p.u).norm(), 1e-8 * (1.0 + k.input_norm)) << "trial " << trial;
  }
}

TEST(EstimatorProperties, SquareDesignIsOptimal) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const Instance in = draw(rng, 7 * trial + 3);
    const auto task = ControlTask::to_state(Vector::Zero(in.sys.n()), in.xf, in.T);
    const auto mb = me_ctrb(in.sys, task);
    auto dd = dd_kernel(in.data, in.xf);
    evaluate(in.sys, task, dd);
    EXPECT_NEAR(dd.input_norm, mb.input_norm, 1e-8 * mb.input_norm) << "trial " << trial;
    EXPECT_LE(*dd.final_error, 1e-8 * in.xf.norm()) << "trial " << trial;
  }
}

TEST(EstimatorProperties, KernelInputIsOrthogonalToCtrbKernel) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const Instance in = draw(rng, 13 * trial + 1, 5);
    const auto dd = dd_kernel(in.data, in.xf);
    const KernelBasis kc = kernel_basis(ctrb_matrix(in.sys, in.T));
    EXPECT_LE((kc.basis.transpose() * dd.u).norm(), 1e-8 * (1.0 + dd.input_norm))
        << "trial " << trial;
  }
}

TEST(EstimatorProperties, InputsTimesDataKernelSpanCtrbKernel) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    const Instance in = draw(rng, 17 * trial + 2, 4);
    const Matrix UK = in.U * kernel_basis(in.data.X).basis;
    const Matrix kc = kernel_basis(ctrb_matrix(in.sys, in.T)).basis;
    // Rank of U K judged against the scale of U, since K is orthonormal.
    const double tol = 1e-10 * rank_info(in.U).singular_values(0);
    EXPECT_LE((image_projector(UK, tol) - kc * kc.transpose()).norm(), 1e-8) << "trial " << trial;
  }
}

TEST(EstimatorProperties, ProjectionFallbackAndMonotoneError) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    const Instance in = draw(rng, 19 * trial + 5, 0, 1);
    const Eigen::Index n = in.sys.n();
    const Matrix U_all = design_inputs(InputDesign::iid_gaussian(n, 19 * trial + 6),
                                       in.sys.m(), in.T).U;
    double previous = std::numeric_limits<double>::infinity();
    for (Eigen::Index N = 1; N <= n; ++N) {
      const ExperimentSet data =
          run_experiments(in.sys, Vector::Zero(n), U_all.leftCols(N), in.T);
      auto sol = dd_kernel(data, in.xf);
      evaluate(in.sys, ControlTask::to_state(Vector::Zero(n), in.xf, in.T), sol);
      const Vector projected = image_projector(data.X) * in.xf;
      EXPECT_LE((*sol.achieved_final - projected).norm(), 1e-8 * (1.0 + in.xf.norm()))
          << "trial " << trial << " N " << N;
      EXPECT_LE(*sol.final_error, previous + 1e-10);
      previous = *sol.final_error;
    }
    EXPECT_LE(previous, 1e-8 * in.xf.norm());
  }
}

TEST(EstimatorProperties, FewerExperimentsThanStatesMissSomeTarget) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const Instance probe = draw(rng, 23 * trial + 7);
    const Eigen::Index n = probe.sys.n();
    const Matrix U = design_inputs(InputDesign::iid_gaussian(n - 1, 23 * trial + 8),
                                   probe.sys.m(), probe.T).U;
    const ExperimentSet data = run_experiments(probe.sys, Vector::Zero(n), U, probe.T);
    Vector xf = coimage_projector(data.X) * probe.xf;
    ASSERT_GT(xf.norm(), 1e-6);
    for (auto* method : {&dd_kernel, &dd_pinv, &dd_asymptotic}) {
      auto sol = (*method)(data, xf, std::nullopt);
      evaluate(probe.sys, ControlTask::to_state(Vector::Zero(n), xf, probe.T), sol);
      EXPECT_GE(*sol.final_error, 0.1 * xf.norm()) << sol.method;
    }
  }
}

TEST(EstimatorProperties, AsymptoticFormReachesButOverspends) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    const Instance in = draw(rng, 29 * trial + 4, 3);
    const auto task = ControlTask::to_state(Vector::Zero(in.sys.n()), in.xf, in.T);
    auto sol = dd_asymptotic(in.data, in.xf);
    ASSERT_TRUE(*sol.diagnostics.x_full_row_rank);
    evaluate(in.sys, task, sol);
    EXPECT_LE(*sol.final_error, 1e-8 * (1.0 + in.xf.norm())) << "trial " << trial;
    EXPECT_GE(sol.input_norm - me_ctrb(in.sys, task).input_norm, -1e-10);
  }
}

TEST(EstimatorProperties, AugmentedFormsAreExactForNonzeroInitialState) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const Instance probe = draw(rng, 31 * trial + 9);
    const Eigen::Index n = probe.sys.n(), m = probe.sys.m();
    Rng xr(derive_seed(31 * trial, 1));
    const Vector x0 = standard_normal(n, xr);
    const Matrix U =
        design_inputs(InputDesign::iid_gaussian(m * probe.T + 1, 31 * trial + 10), m, probe.T).U;
    const ExperimentSet data = run_experiments(probe.sys, x0, U, probe.T);
    const auto task = ControlTask::to_state(x0, probe.xf, probe.T);
    const double optimal = me_ctrb(probe.sys, task).input_norm;
    for (auto method : {DataMethod::kKernel, DataMethod::kPinv}) {
      auto sol = dd_x0(method, data, probe.xf);
      evaluate(probe.sys, task, sol);
      EXPECT_LE(*sol.final_error, 1e-8 * probe.xf.norm()) << to_string(method);
      EXPECT_NEAR(sol.input_norm, optimal, 1e-8 * optimal) << to_string(method);
    }
  }
}

}  // namespace
}  // namespace mecontrol
