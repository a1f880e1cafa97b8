#include <gtest/gtest.h>

#include "ktrunc/dirichlet.hpp"

using namespace ktrunc;

namespace {

DirichletProblem disk(FieldPtr f, Sign sign = Sign::plus, std::vector<int> blocks = {1, 1}, double h = 0.125) {
  DirichletProblem P;
  P.domain = Domain::ball({0.0, 0.0}, 1.0);
  P.partition = make_partition(2, std::move(blocks));
  P.sign = sign;
  P.s = 0.5;
  P.f = std::move(f);
  P.h = h;
  P.solver.tol = 1e-10;
  return P;
}

FieldPtr constant(double c) { return std::make_shared<ConstantField>(2, c); }

FieldPtr bumpy_rhs() {
  auto b = std::make_shared<BumpField>(2, 1.0, std::vector<double>{0.2, -0.1});
  return std::make_shared<LinearCombination>(std::vector<FieldPtr>{constant(1.0), b}, std::vector<double>{-2.0, 0.8});
}

void expect_healthy(const SolveReport& r) {
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(r.residual_monotone);
  EXPECT_EQ(r.envelope_violations, 0);
}

}  // namespace

TEST(Dirichlet, ZeroRightHandSideGivesZero) {
  auto r = solve_dirichlet(disk(constant(0.0)));
  expect_healthy(r);
  for (double v : r.solution->values()) EXPECT_EQ(v, 0.0);
}

TEST(Dirichlet, ComparisonPrinciple) {
  // f1 <= f2 implies u1 >= u2.
  for (Sign sg : {Sign::plus, Sign::minus}) {
    auto r1 = solve_dirichlet(disk(constant(-2.5), sg));
    auto r2 = solve_dirichlet(disk(bumpy_rhs(), sg));
    expect_healthy(r1);
    expect_healthy(r2);
    const auto &a = r1.solution->values(), &b = r2.solution->values();
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_GE(a[i], b[i] - 1e-9);
  }
}

TEST(Dirichlet, SolutionLiesBetweenEnvelopes) {
  auto r = solve_dirichlet(disk(bumpy_rhs(), Sign::minus));
  expect_healthy(r);
  const auto& u = r.solution->values();
  for (std::size_t i = 0; i < u.size(); ++i) {
    EXPECT_LE(r.envelope.sub[i], u[i] + 1e-8);
    EXPECT_GE(r.envelope.super[i], u[i] - 1e-8);
  }
  EXPECT_GT(r.envelope.M, 0);
  EXPECT_GE(r.envelope.M_discrete, r.envelope.M * (1 - 1e-12));
}

TEST(Dirichlet, PositiveHomogeneity) {
  auto a = solve_dirichlet(disk(bumpy_rhs()));
  auto b = solve_dirichlet(disk(scaled(bumpy_rhs(), 2.0)));
  const auto &u = a.solution->values(), &v = b.solution->values();
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(v[i], 2 * u[i], 1e-8);
  auto pa = disk(bumpy_rhs()), pb = disk(scaled(bumpy_rhs(), 2.0));
  EXPECT_NEAR(hopf_fit(b, pb), 2 * hopf_fit(a, pa), 1e-7);
}

TEST(Dirichlet, SignDuality) {
  // K^+ u = f  iff  K^- (-u) = -f.
  auto a = solve_dirichlet(disk(bumpy_rhs(), Sign::plus));
  auto b = solve_dirichlet(disk(scaled(bumpy_rhs(), -1.0), Sign::minus));
  const auto &u = a.solution->values(), &v = b.solution->values();
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(v[i], -u[i], 1e-8);
}

TEST(Dirichlet, StrictPositivityInside) {
  auto r = solve_dirichlet(disk(bumpy_rhs(), Sign::plus));
  const auto& g = *r.solution;
  std::vector<double> x(2);
  for (std::size_t i = 0; i < g.lattice().size(); ++i) {
    g.lattice().position(i, x);
    if (g.domain().contains(x) && g.domain().distance_to_boundary(x) > 1e-6) {
      EXPECT_GT(g.values()[i], 0.0);
    }
  }
}

TEST(Dirichlet, DeterministicAcrossJobCounts) {
  auto P = disk(bumpy_rhs(), Sign::plus);
  P.seed = 3;
  auto a = solve_dirichlet(P);
  P.solver.jobs = 3;
  auto b = solve_dirichlet(P);
  EXPECT_EQ(a.solution->values(), b.solution->values());
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(DiscreteOperator, ExtremalBoundsEveryCandidate) {
  auto dom = Domain::ball({0.0, 0.0, 0.0}, 1.0);
  auto L = Lattice::covering(dom, 0.25);
  SolverOptions opt;
  DiscreteOperator op(dom, L, make_partition(3, {1, 1}), 0.5, opt, 1);
  std::vector<double> u(L.size(), 0.0);
  std::vector<double> x(3);
  for (std::size_t i = 0; i < L.size(); ++i) {
    L.position(i, x);
    if (dom.contains(x)) u[i] = std::exp(-(x[0] * x[0] + 2 * x[1] * x[1] + 0.5 * x[2] * x[2])) + 0.3 * x[0];
  }
  ASSERT_FALSE(op.interior().empty());
  for (std::size_t k = 0; k < op.interior().size(); ++k) {
    EXPECT_GT(op.diagonal(k), 0);
    EXPECT_GE(op.candidate_count(k), 1u);
    const double hi = op.extremal(u, k, Sign::plus), lo = op.extremal(u, k, Sign::minus);
    for (std::size_t c = 0; c < op.candidate_count(k); ++c) {
      const double v = op.apply(u, k, c);
      EXPECT_LE(v, hi + 1e-12);
      EXPECT_GE(v, lo - 1e-12);
    }
  }
}

TEST(DiscreteOperator, MonotoneInOffDiagonalValues) {
  // Raising u at one node away from p cannot lower any candidate value at p.
  auto dom = Domain::ball({0.0, 0.0}, 1.0);
  auto L = Lattice::covering(dom, 0.125);
  DiscreteOperator op(dom, L, make_partition(2, {1, 1}), 0.5, SolverOptions{}, 0);
  std::vector<double> u(L.size(), 0.0);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (std::size_t idx : op.interior()) u[idx] = U(rng);
  for (std::size_t k = 0; k < op.interior().size(); k += 7) {
    std::vector<double> base(op.candidate_count(k));
    for (std::size_t c = 0; c < base.size(); ++c) base[c] = op.apply(u, k, c);
    for (int trial = 0; trial < 5; ++trial) {
      std::size_t j = op.interior()[rng() % op.interior().size()];
      if (j == op.interior()[k]) continue;
      auto v = u;
      v[j] += 0.5;
      for (std::size_t c = 0; c < base.size(); ++c) EXPECT_GE(op.apply(v, k, c), base[c] - 1e-12);
    }
  }
}

TEST(Dirichlet, BarrierConstant) {
  EXPECT_NEAR(barrier_constant(make_partition(2, {1, 1}), 0.5), 2.0, 1e-14);
  EXPECT_NEAR(barrier_constant(make_partition(3, {2}), 0.5), M_PI / 2, 1e-14);
}

TEST(Dirichlet, InputValidation) {
  auto P = disk(constant(-1.0));
  P.h = 0.2;  // 11 nodes across
  EXPECT_THROW(solve_dirichlet(P), std::invalid_argument);
  P = disk(constant(-1.0));
  P.domain = Domain::box({-1, -1}, {1, 1});
  EXPECT_THROW(solve_dirichlet(P), std::invalid_argument);
  P = disk(constant(-1.0));
  P.partition = make_partition(3, {1});
  EXPECT_THROW(solve_dirichlet(P), std::invalid_argument);
  P = disk(nullptr);
  EXPECT_THROW(solve_dirichlet(P), std::invalid_argument);
  P = disk(constant(-1.0));
  P.solver.dt_safety = 1.5;
  EXPECT_THROW(solve_dirichlet(P), std::invalid_argument);
}

TEST(Dirichlet, SmallnessConditionOnZeroOrderTerm) {
  auto P = disk(constant(-1.0));
  const double thr = smallness_threshold(P.domain, P.partition, P.s);
  P.c = constant(1.01 * thr);
  EXPECT_THROW(solve_dirichlet(P), std::invalid_argument);
  P.c = constant(0.5 * thr);
  auto r = solve_dirichlet(P);
  expect_healthy(r);
  // A positive c increases the solution of K u + c u = f with f < 0.
  auto r0 = solve_dirichlet(disk(constant(-1.0)));
  for (std::size_t i = 0; i < r.solution->values().size(); ++i)
    EXPECT_GE(r.solution->values()[i], r0.solution->values()[i] - 1e-9);
}

TEST(Dirichlet, NonConvergenceIsReported) {
  auto P = disk(constant(-1.0));
  P.solver.max_iter = 3;
  auto r = solve_dirichlet(P);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3);
}

TEST(Hopf, RefusesMinimalOperatorBelowFullRank) {
  auto P = disk(constant(-1.0), Sign::minus, {1});
  auto r = solve_dirichlet(P);
  EXPECT_THROW(hopf_fit(r, P), RegimeMismatch);
  auto Q = disk(constant(-1.0), Sign::plus, {1});
  EXPECT_GT(hopf_fit(solve_dirichlet(Q), Q), 0.0);
}

TEST(Hopf, NeedsNonPositiveNonZeroData) {
  auto P = disk(constant(0.0));
  auto r = solve_dirichlet(P);
  EXPECT_THROW(hopf_fit(r, P), std::invalid_argument);
  auto Q = disk(constant(1.0));
  EXPECT_THROW(hopf_fit(solve_dirichlet(Q), Q), std::invalid_argument);
}

TEST(Eigen, UpperBoundIndependentOfBumpScale) {
  auto dom = Domain::ball({0.0, 0.0}, 1.0);
  auto p = make_partition(2, {1, 1});
  auto a = eigen_upper_bound(dom, p, Sign::minus, 0.5, 0.125);
  auto b = eigen_upper_bound(dom, p, Sign::minus, 0.5, 0.125, {}, 0, 3.0);
  EXPECT_GT(a.rho0, 0);
  EXPECT_NEAR(b.rho0, a.rho0, 1e-6 * a.rho0);
  EXPECT_THROW(eigen_upper_bound(dom, make_partition(2, {1}), Sign::minus, 0.5, 0.125), RegimeMismatch);
}

TEST(Eigen, EstimateBracketsAreOrdered) {
  auto dom = Domain::ball({0.0, 0.0}, 1.0);
  auto e = eigen_estimate(dom, make_partition(2, {1, 1}), Sign::plus, 0.5, 0.125);
  EXPECT_GT(e.mu_lower, 0);
  EXPECT_LE(e.mu_lower, e.mu_upper);
}

TEST(Eigen, LowerScanFindsWitnessBelowFullRank) {
  auto dom = Domain::ball({0.0, 0.0}, 1.0);
  auto w = eigen_lower_scan(dom, make_partition(2, {1}), 0.5, 5.0);
  ASSERT_TRUE(w.has_value());
  EXPECT_LE(w->worst, 0.0);
  EXPECT_GT(w->samples, 10);
  EXPECT_THROW(eigen_lower_scan(dom, make_partition(2, {2}), 0.5, 5.0), RegimeMismatch);
}
