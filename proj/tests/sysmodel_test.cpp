#include "mecontrol/sysmodel.hpp"

#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "mecontrol/io.hpp"
#include "test_support.hpp"

namespace mecontrol {
namespace {

using testing::gaussian;

LtiSystem three_state_system() {
  Matrix A(3, 3);
  // clang-format off
  A << -0.8, 0,   0,
        2,   0.1, 0,
        0.2, 1,   0.5;
  // clang-format on
  Matrix B(3, 1);
  B << 1, 0, 0;
  return LtiSystem(A, B);
}

LtiSystem scalar_system(double a, double b) {
  return LtiSystem(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, b));
}

TEST(LtiSystem, DimensionChecks) {
  EXPECT_THROW(LtiSystem(Matrix::Zero(2, 3), Matrix::Zero(2, 1)), DimensionMismatch);
  EXPECT_THROW(LtiSystem(Matrix::Zero(2, 2), Matrix::Zero(3, 1)), DimensionMismatch);
  EXPECT_THROW(LtiSystem(Matrix::Zero(2, 2), Matrix::Zero(2, 1), Matrix::Zero(1, 3)),
               DimensionMismatch);
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(LtiSystem(bad, Matrix::Zero(2, 1)), InvalidInput);
}

TEST(StackedInput, OrderingIsLatestFirst) {
  Vector u0(2), u1(2);
  u0 << 1, 2;
  u1 << 3, 4;
  const StackedInput u = StackedInput::from_time_ordered({u0, u1});
  Vector expected(4);
  expected << 3, 4, 1, 2;
  EXPECT_EQ(u.stacked(), expected);
  EXPECT_EQ(u.at(0), u0);
  EXPECT_EQ(u.at(1), u1);
  EXPECT_THROW(StackedInput(Vector::Ones(3), 2), DimensionMismatch);
}

TEST(CtrbMatrix, Examples) {
  Matrix expected(1, 3);
  expected << 1, 0, 0;
  EXPECT_EQ(ctrb_matrix(scalar_system(0, 1), 3), expected);

  const LtiSystem id(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  Matrix two(2, 4);
  two << Matrix::Identity(2, 2), Matrix::Identity(2, 2);
  EXPECT_EQ(ctrb_matrix(id, 2), two);

  Matrix c2(3, 2);
  c2 << 1, -0.8, 0, 2, 0, 0.2;
  EXPECT_LE((ctrb_matrix(three_state_system(), 2) - c2).norm(), 1e-15);

  EXPECT_THROW(ctrb_matrix(id, 0), InvalidHorizon);
}

TEST(CtrbMatrix, MatchesReferenceAndPrefix) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 8, m = 1 + trial % 3, T = 1 + trial % 12;
    const LtiSystem sys(gaussian(n, n, rng) / std::sqrt(n), gaussian(n, m, rng));
    const Matrix ct = ctrb_matrix(sys, T);
    EXPECT_LE(testing::rel_diff(ct, testing::reference_ctrb(sys.A(), sys.B(), T)), 1e-12);
    EXPECT_EQ(ctrb_matrix(sys, T + 1).leftCols(m * T), ct);
  }
}

TEST(Gramian, Examples) {
  EXPECT_EQ(gramian(scalar_system(0, 1), 3)(0, 0), 1.0);
  const LtiSystem id(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  EXPECT_EQ(gramian(id, 2), 2.0 * Matrix::Identity(2, 2));

  Matrix w2(3, 3);
  // clang-format off
  w2 <<  1.64, -1.6, -0.16,
        -1.6,   4.0,  0.4,
        -0.16,  0.4,  0.04;
  // clang-format on
  EXPECT_LE((gramian(three_state_system(), 2) - w2).norm(), 1e-14);
  EXPECT_THROW(gramian(id, 0), InvalidHorizon);
}

TEST(Gramian, EqualsCtrbTimesTransposeRandom) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 20, m = 1 + trial % 3, T = 1 + (trial * 3) % 40;
    const LtiSystem sys(gaussian(n, n, rng) / std::sqrt(n), gaussian(n, m, rng));
    // Direct sum with powers recomputed per term.
    Matrix w = Matrix::Zero(n, n);
    for (int t = 0; t < T; ++t) {
      Matrix p = Matrix::Identity(n, n);
      for (int i = 0; i < t; ++i) p = p * sys.A();
      w += p * sys.B() * sys.B().transpose() * p.transpose();
    }
    const Matrix ct = ctrb_matrix(sys, T);
    const Matrix g = gramian(sys, T);
    EXPECT_LE((g - ct * ct.transpose()).norm(), 1e-10 * g.norm());
    EXPECT_LE((g - w).norm(), 1e-10 * w.norm());
    EXPECT_LE((g - g.transpose()).norm(), 1e-12 * g.norm());
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(g).eigenvalues().minCoeff(),
              -1e-10 * g.norm());
  }
}

TEST(OutputCtrb, Examples) {
  const LtiSystem fig = three_state_system();
  EXPECT_THROW(output_ctrb_matrix(fig, 2), ConfigurationError);
  EXPECT_EQ(output_ctrb_matrix(fig.with_output(Matrix::Identity(3, 3)), 4),
            ctrb_matrix(fig, 4));
  EXPECT_EQ(output_ctrb_matrix(fig.with_output(Matrix::Zero(2, 3)), 3).norm(), 0.0);
  Matrix c(1, 3);
  c << 1, 0, 0;
  Matrix expected(1, 2);
  expected << 1, -0.8;
  EXPECT_LE((output_ctrb_matrix(fig.with_output(c), 2) - expected).norm(), 1e-15);
}

TEST(Simulate, Examples) {
  Vector u(1);
  u << 2;
  EXPECT_EQ(simulate(scalar_system(0, 1), Vector::Zero(1), u).final_state()(0), 2.0);

  const LtiSystem id(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  Vector x0(2), u0(2), expected(2);
  x0 << 1, 0;
  u0 << 0, 1;
  expected << 1, 1;
  EXPECT_EQ(simulate(id, x0, u0).final_state(), expected);
}

TEST(Simulate, ImpulseResponse) {
  const LtiSystem fig = three_state_system();
  const int T = 8;
  Vector u = Vector::Zero(T);
  u(T - 1) = 1.0;  // u(0) sits last in the stacked vector
  const Trajectory traj = simulate(fig, Vector::Zero(3), u);
  ASSERT_EQ(traj.states.size(), 9u);
  Vector ref = fig.B().col(0);
  for (int k = 0; k < 7; ++k) ref = fig.A() * ref;
  EXPECT_LE((traj.final_state() - ref).norm(), 1e-14);
}

TEST(Simulate, FinalStateMatchesCtrbRandom) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 10, m = 1 + trial % 3, T = 1 + trial % 15;
    const LtiSystem sys(gaussian(n, n, rng) / std::sqrt(n), gaussian(n, m, rng));
    const Vector x0 = gaussian(n, 1, rng);
    const Vector u = gaussian(m * T, 1, rng);
    const Vector xT = simulate(sys, x0, u).final_state();
    const Vector ref = matrix_power(sys.A(), T) * x0 + ctrb_matrix(sys, T) * u;
    EXPECT_LE((xT - ref).norm(), 1e-10 * std::max(1.0, ref.norm()));
  }
}

TEST(Simulate, DimensionMismatch) {
  const LtiSystem fig = three_state_system();
  EXPECT_THROW(simulate(fig, Vector::Zero(2), Vector::Zero(4)), DimensionMismatch);
  const LtiSystem two_inputs(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  EXPECT_THROW(simulate(two_inputs, Vector::Zero(2), StackedInput(Vector::Zero(3), 1)),
               DimensionMismatch);
}

TEST(Reachable, Examples) {
  const LtiSystem id(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  Vector xf(2);
  xf << 3, -7;
  EXPECT_TRUE(reachable(id, Vector::Zero(2), xf, 1).reachable);

  Matrix e1 = Matrix::Zero(2, 1);
  e1(0) = 1;
  const LtiSystem deficient(Matrix::Zero(2, 2), e1);
  Vector target(2);
  target << 0, 1;
  const Reachability r = reachable(deficient, Vector::Zero(2), target, 1);
  EXPECT_FALSE(r.reachable);
  EXPECT_NEAR(r.residual, 1.0, 1e-15);

  Vector fig_xf(3);
  fig_xf << 0.3, 1, 0.5;
  EXPECT_EQ(rank_info(ctrb_matrix(three_state_system(), 8)).numerical_rank, 3);
  EXPECT_TRUE(reachable(three_state_system(), Vector::Zero(3), fig_xf, 8).reachable);
}

TEST(SystemJson, RoundTripAndErrors) {
  const LtiSystem fig = three_state_system().with_output(Matrix::Identity(1, 3));
  const LtiSystem back = system_from_json(nlohmann::json::parse(system_to_json(fig).dump()));
  EXPECT_EQ(back.A(), fig.A());
  EXPECT_EQ(back.B(), fig.B());
  ASSERT_TRUE(back.C().has_value());
  EXPECT_EQ(*back.C(), *fig.C());
  EXPECT_THROW(system_from_json(nlohmann::json::parse(R"({"A": [[1]]})")), InvalidInput);
  EXPECT_THROW(system_from_json(nlohmann::json::parse(R"({"A": [[1, 2], [3]], "B": [[1], [1]]})")),
               InvalidInput);
  EXPECT_THROW(system_from_json(nlohmann::json::parse(R"({"A": [[1, 0], [0, 1]], "B": [[1]]})")),
               DimensionMismatch);
}

TEST(Csv, ParsesAndRejectsRagged) {
  std::istringstream good("1,2,3\n4,5,6\n");
  const Matrix m = parse_csv(good);
  EXPECT_EQ(m.rows(), 2);
  EXPECT_EQ(m(1, 2), 6.0);
  std::istringstream ragged("1,2\n3\n");
  EXPECT_THROW(parse_csv(ragged), InvalidInput);
  std::istringstream nan("1,nan\n");
  EXPECT_THROW(parse_csv(nan), InvalidInput);
  std::istringstream text("1,x\n");
  EXPECT_THROW(parse_csv(text), InvalidInput);
}

TEST(Csv, WriteIsExactRoundTrip) {
  std::mt19937_64 rng(1);
  const Matrix m = gaussian(4, 3, rng);
  std::stringstream ss;
  write_csv(ss, m);
  EXPECT_EQ(parse_csv(ss), m);
}

}  // namespace
}  // namespace mecontrol
