#include "mmd_drccp/conic.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mmd_drccp;

namespace {

LinExpr v(int i, double c = 1.0) { return LinExpr::var(i, c); }
LinExpr k(double c) { return LinExpr(c); }

// Random program touching every IR feature.
ConicProgram random_program(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_int_distribution<int> nv(1, 6);
  ConicProgram p;
  const int n = nv(rng);
  p.add_variables(n, "z");
  auto expr = [&]() {
    LinExpr e(u(rng));
    for (int j = 0; j < n; ++j)
      if (rng() % 2) e.add(j, u(rng));
    return e;
  };
  p.set_objective(expr(), rng() % 2 ? Sense::Minimize : Sense::Maximize);
  for (int r = 0, R = static_cast<int>(rng() % 3); r < R; ++r) p.add_eq(expr());
  for (int r = 0, R = static_cast<int>(rng() % 4); r < R; ++r) p.add_le(expr());
  for (int r = 0, R = static_cast<int>(rng() % 3); r < R; ++r) {
    std::vector<LinExpr> us;
    for (int d = 0, D = 1 + static_cast<int>(rng() % 3); d < D; ++d) us.push_back(expr());
    p.add_soc(us, expr());
  }
  if (rng() % 2) p.mark_binary(0);
  return p;
}

// Best vertex of a bounded 2-D LP {min c'z : A z <= b} by enumerating all row pairs.
double lp2d_vertex_oracle(const Matrix& A, const Vector& b, const Vector& c, bool& feasible) {
  double best = std::numeric_limits<double>::infinity();
  feasible = false;
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = i + 1; j < A.rows(); ++j) {
      Eigen::Matrix2d M;
      M << A(i, 0), A(i, 1), A(j, 0), A(j, 1);
      if (std::abs(M.determinant()) < 1e-9) continue;
      const Eigen::Vector2d z = M.inverse() * Eigen::Vector2d(b[i], b[j]);
      if (((A * z - b).array() <= 1e-9).all()) {
        feasible = true;
        best = std::min(best, c.dot(z));
      }
    }
  return best;
}

}  // namespace

TEST(LinExprTest, NormalizeMergesAndDropsZeros) {
  LinExpr e;
  e.add(3, 1.0).add(1, 2.0).add(3, -1.0).add(1, 0.5);
  e.normalize();
  ASSERT_EQ(e.terms.size(), 1u);
  EXPECT_EQ(e.terms[0].first, 1);
  EXPECT_DOUBLE_EQ(e.terms[0].second, 2.5);
}

TEST(LinExprTest, Arithmetic) {
  const LinExpr e = 2.0 * (v(0) + k(1.0)) - v(1, 3.0);
  Vector z(2);
  z << 1.5, -1.0;
  EXPECT_DOUBLE_EQ(e.evaluate(z), 2.0 * 2.5 + 3.0);
}

TEST(ConicProgramTest, ValidateRejectsBadIndices) {
  ConicProgram p;
  p.add_variable("x");
  p.add_le(v(3));
  EXPECT_THROW(p.validate(), std::invalid_argument);
  ConicProgram q;
  q.add_variable("x");
  EXPECT_THROW(q.add_soc({}, v(0)), std::invalid_argument);
  q.add_soc({v(2)}, v(0));
  EXPECT_THROW(q.validate(), std::invalid_argument);
}

TEST(SolveContinuous, OneVariableLp) {
  ConicProgram p;
  const int x = p.add_variable("x");
  p.set_objective(v(x), Sense::Minimize);
  p.add_le(k(3.0) - v(x));  // x >= 3
  const auto s = solve_continuous(p);
  ASSERT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_NEAR(s.primal[x], 3.0, 1e-7);
  EXPECT_NEAR(s.objective_value, 3.0, 1e-7);
}

TEST(SolveContinuous, NormOfConstantVector) {
  ConicProgram p;
  const int t = p.add_variable("t");
  p.set_objective(v(t), Sense::Minimize);
  p.add_soc({k(3.0), k(4.0)}, v(t));
  const auto s = solve_continuous(p);
  ASSERT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_NEAR(s.primal[t], 5.0, 1e-7);
}

TEST(SolveContinuous, Infeasible) {
  ConicProgram p;
  const int x = p.add_variable("x");
  p.set_objective(v(x), Sense::Minimize);
  p.add_le(v(x) + k(1.0));  // x <= -1
  p.add_le(k(1.0) - v(x));  // x >= 1
  const auto s = solve_continuous(p);
  EXPECT_EQ(s.status, SolveStatus::Infeasible);
  EXPECT_EQ(s.primal.size(), 0);
}

TEST(SolveContinuous, Unbounded) {
  ConicProgram p;
  const int x = p.add_variable("x");
  const int y = p.add_variable("y");
  p.set_objective(v(x) + v(y), Sense::Maximize);
  p.add_le(v(x) - v(y));  // x <= y
  EXPECT_EQ(solve_continuous(p).status, SolveStatus::Unbounded);
}

TEST(SolveContinuous, RejectsBinaries) {
  ConicProgram p;
  p.add_variable();
  p.mark_binary(0);
  EXPECT_THROW(solve_continuous(p), std::invalid_argument);
}

TEST(SolveContinuous, MaximizeReportsOwnSense) {
  ConicProgram p;
  const int x = p.add_variable();
  p.set_objective(v(x, 2.0), Sense::Maximize);
  p.add_le(v(x) - k(1.5));
  const auto s = solve_continuous(p);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.objective_value, 3.0, 1e-7);
}

TEST(SolveContinuousProperty, FeasibilityProgramsSatisfyAllRows) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 30; ++trial) {
    // build rows around a known interior point so the program is feasible
    const int n = 2 + trial % 5;
    Vector z0(n);
    for (auto& e : z0) e = nd(rng);
    ConicProgram p;
    p.add_variables(n, "z");
    p.set_objective(LinExpr(), Sense::Minimize);
    for (int r = 0; r < 6; ++r) {
      LinExpr e;
      double at = 0.0;
      for (int j = 0; j < n; ++j) {
        const double a = nd(rng);
        e.add(j, a);
        at += a * z0[j];
      }
      e += -at - std::abs(nd(rng));
      p.add_le(e);
    }
    std::vector<LinExpr> u;
    for (int j = 0; j < n; ++j) u.push_back(v(j) - k(z0[j]));
    p.add_soc(u, k(1.0 + std::abs(nd(rng))));
    LinExpr eq(-z0.sum());
    for (int j = 0; j < n; ++j) eq.add(j, 1.0);
    p.add_eq(eq);
    const auto s = solve_continuous(p);
    ASSERT_EQ(s.status, SolveStatus::Optimal) << "trial " << trial;
    EXPECT_LE(p.max_violation(s.primal), 1e-8);
  }
}

TEST(SolveContinuousOracle, TwoDimensionalLpsMatchVertexEnumeration) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 5 + trial % 4;
    Matrix A(m + 4, 2);
    Vector b(m + 4);
    for (int r = 0; r < m; ++r) {
      A(r, 0) = ud(rng);
      A(r, 1) = ud(rng);
      b[r] = ud(rng) + 0.3;
    }
    // bounding box |z| <= 5
    A.bottomRows(4) << 1, 0, -1, 0, 0, 1, 0, -1;
    b.tail(4).setConstant(5.0);
    Vector c(2);
    c << ud(rng), ud(rng);
    bool feasible = false;
    const double expected = lp2d_vertex_oracle(A, b, c, feasible);

    ConicProgram p;
    p.add_variables(2, "z");
    p.set_objective(v(0, c[0]) + v(1, c[1]), Sense::Minimize);
    for (Index r = 0; r < A.rows(); ++r) p.add_le(v(0, A(r, 0)) + v(1, A(r, 1)) - k(b[r]));
    const auto s = solve_continuous(p);
    if (!feasible) {
      EXPECT_EQ(s.status, SolveStatus::Infeasible);
      continue;
    }
    ASSERT_EQ(s.status, SolveStatus::Optimal);
    EXPECT_NEAR(s.objective_value, expected, 1e-7 * (1.0 + std::abs(expected)));
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(SolveContinuousOracle, LinearObjectiveOverBall) {
  // min c'z s.t. ||z - a|| <= r  ->  c'a - r ||c||
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 6;
    Vector a(n), c(n);
    for (int j = 0; j < n; ++j) {
      a[j] = nd(rng);
      c[j] = nd(rng);
    }
    const double r = 0.5 + std::abs(nd(rng));
    ConicProgram p;
    p.add_variables(n, "z");
    LinExpr obj;
    std::vector<LinExpr> u;
    for (int j = 0; j < n; ++j) {
      obj.add(j, c[j]);
      u.push_back(v(j) - k(a[j]));
    }
    p.set_objective(obj, Sense::Minimize);
    p.add_soc(u, k(r));
    const auto s = solve_continuous(p);
    ASSERT_TRUE(s.optimal());
    const double expected = c.dot(a) - r * c.norm();
    EXPECT_NEAR(s.objective_value, expected, 1e-7 * (1.0 + std::abs(expected)));
  }
}

TEST(TextFormat, RoundTripRandomPrograms) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_program(rng);
    const auto text = to_text(p);
    const auto q = parse_program(text);
    EXPECT_TRUE(p == q) << text;
    EXPECT_EQ(to_text(q), text);
  }
}

TEST(TextFormat, RejectsGarbage) {
  EXPECT_THROW(parse_program("not a program\n"), std::invalid_argument);
  EXPECT_THROW(parse_program("conic_program v1\nvars 1\nle 3*z9\nend\n"), std::invalid_argument);
}

TEST(Enumerate, ZeroBinariesMatchesContinuous) {
  ConicProgram p;
  const int x = p.add_variable("x");
  p.set_objective(v(x), Sense::Minimize);
  p.add_le(k(2.0) - v(x));
  const auto a = solve_binary_enumerate(p);
  const auto b = solve_continuous(p);
  ASSERT_TRUE(a.optimal());
  EXPECT_EQ(a.status, b.status);
  EXPECT_NEAR(a.objective_value, b.objective_value, 1e-12);
}

TEST(Enumerate, TwoBinariesWithAssignmentRow) {
  ConicProgram p;
  const int x = p.add_variable("x");
  const int m1 = p.add_variable("mu1");
  const int m2 = p.add_variable("mu2");
  p.mark_binary(m1);
  p.mark_binary(m2);
  p.set_objective(v(x), Sense::Minimize);
  p.add_eq(v(m1) + v(m2) - k(1.0));
  p.add_le(v(m1) - v(x));  // x >= mu1
  p.add_le(k(-5.0) - v(x));
  const auto s = solve_binary_enumerate(p);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.primal[x], 0.0, 1e-7);
  EXPECT_NEAR(s.primal[m1], 0.0, 1e-12);
  EXPECT_NEAR(s.primal[m2], 1.0, 1e-12);
  EXPECT_EQ(s.leaves_pruned, 2);
}

TEST(Enumerate, AllLeavesInfeasible) {
  ConicProgram p;
  const int x = p.add_variable("x");
  const int b = p.add_variable("b");
  p.mark_binary(b);
  p.set_objective(v(x), Sense::Minimize);
  p.add_le(v(x) + k(1.0));
  p.add_le(k(1.0) - v(x));
  EXPECT_EQ(solve_binary_enumerate(p).status, SolveStatus::Infeasible);
}

TEST(Enumerate, CapacityError) {
  ConicProgram p;
  p.add_variables(5, "b");
  for (int i = 0; i < 5; ++i) p.mark_binary(i);
  EnumerationOptions o;
  o.max_binaries = 4;
  EXPECT_THROW(solve_binary_enumerate(p, {}, o), CapacityError);
}

TEST(EnumerateProperty, PruningMatchesBruteForce) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  for (int trial = 0; trial < 12; ++trial) {
    const int nb = 2 + trial % 9;  // up to 10 binaries
    ConicProgram p;
    const int x0 = p.add_variables(2, "x");
    const int b0 = p.add_variables(nb, "b");
    for (int i = 0; i < nb; ++i) p.mark_binary(b0 + i);
    LinExpr obj = v(x0, ud(rng)) + v(x0 + 1, ud(rng));
    for (int i = 0; i < nb; ++i) obj.add(b0 + i, ud(rng));
    p.set_objective(obj, trial % 2 ? Sense::Minimize : Sense::Maximize);
    // pure-binary rows: pairs sum to one, plus a cardinality cap
    for (int i = 0; i + 1 < nb; i += 2) p.add_eq(v(b0 + i) + v(b0 + i + 1) - k(1.0));
    LinExpr card(-(nb / 2 + 1.0));
    for (int i = 0; i < nb; ++i) card.add(b0 + i, 1.0);
    p.add_le(card);
    // mixed rows coupling x and binaries, and a ball for x
    for (int r = 0; r < 3; ++r) {
      LinExpr e = v(x0, ud(rng)) + v(x0 + 1, ud(rng)) + k(ud(rng) - 0.5);
      for (int i = 0; i < nb; ++i) e.add(b0 + i, 0.5 * ud(rng));
      p.add_le(e);
    }
    p.add_soc({v(x0), v(x0 + 1)}, k(2.0));

    EnumerationOptions with, without;
    with.prune = true;
    without.prune = false;
    const auto a = solve_binary_enumerate(p, {}, with);
    const auto b = solve_binary_enumerate(p, {}, without);
    ASSERT_EQ(a.status, b.status) << "trial " << trial;
    if (a.optimal()) EXPECT_NEAR(a.objective_value, b.objective_value, 1e-9);
    EXPECT_EQ(b.leaves_pruned, 0);
  }
}

TEST(FixVariables, SubstitutesAndKeepsViolatedConstants) {
  ConicProgram p;
  const int x = p.add_variable("x");
  const int y = p.add_variable("y");
  p.set_objective(v(x) + v(y), Sense::Minimize);
  p.add_le(v(y) - k(2.0));  // y <= 2
  p.add_le(v(x) + v(y));    // x + y <= 0
  const auto ok = fix_variables(p, {{y, 1.0}});
  EXPECT_EQ(ok.program.num_vars(), 1);
  EXPECT_EQ(ok.kept, std::vector<int>{x});
  EXPECT_FALSE(ok.has_violated_constant_row);
  EXPECT_EQ(ok.program.les().size(), 1u);
  const auto bad = fix_variables(p, {{y, 3.0}});
  EXPECT_TRUE(bad.has_violated_constant_row);
}
