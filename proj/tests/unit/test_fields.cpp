#include <gtest/gtest.h>

#include "ktrunc/catalog.hpp"
#include "ktrunc/verify.hpp"

using namespace ktrunc;

namespace {

std::vector<FieldPtr> smooth_fields(int N) { return detail::duality_catalog(N); }

// Central differences of the analytic gradient.
void check_derivatives(const ScalarField& u, std::vector<double> x) {
  const int N = u.dim();
  const double h = 1e-5;
  std::vector<double> g(N), gp(N), gm(N), H(N * N);
  u.gradient(x, g);
  u.hessian(x, H);
  for (int i = 0; i < N; ++i) {
    auto xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (u.value(xp) - u.value(xm)) / (2 * h);
    EXPECT_NEAR(g[i], fd, 1e-6 * std::max(1.0, std::abs(fd))) << u.tag() << " grad " << i;
    u.gradient(xp, gp);
    u.gradient(xm, gm);
    for (int j = 0; j < N; ++j) {
      const double fdh = (gp[j] - gm[j]) / (2 * h);
      EXPECT_NEAR(H[j * N + i], fdh, 1e-5 * std::max(1.0, std::abs(fdh))) << u.tag() << " hess " << i << j;
    }
  }
}

}  // namespace

TEST(Fields, AnalyticDerivativesMatchFiniteDifferences) {
  for (int N : {2, 3}) {
    std::vector<double> x(N, 0.0);
    x[0] = 0.31;
    x[1] = -0.17;
    for (auto& u : smooth_fields(N))
      if (u->has_hessian() && u->smooth_at(x)) check_derivatives(*u, x);
  }
}

TEST(Fields, ValuesRespectBound) {
  std::mt19937_64 rng(2);
  for (auto& u : smooth_fields(3))
    for (int i = 0; i < 200; ++i) {
      auto x = detail::random_in_ball(rng, 3, 3.0);
      EXPECT_LE(std::abs(u->value(x)), u->bound() * (1 + 1e-12)) << u->tag();
    }
}

TEST(Fields, BarrierValues) {
  BarrierField b(2, 2.0, 0.5);
  std::vector<double> o{0, 0}, x{1, 0}, out{2.5, 0};
  EXPECT_DOUBLE_EQ(b.value(o), 2.0);
  EXPECT_DOUBLE_EQ(b.value(x), std::sqrt(3.0));
  EXPECT_EQ(b.value(out), 0.0);
  EXPECT_TRUE(b.frame_invariant_at(x));
  EXPECT_FALSE(b.frame_invariant_at(out));
}

TEST(Fields, BumpProfile) {
  BumpField b(2, 1.0);
  std::vector<double> in{0.4, 0}, mid{0.625, 0}, out{0.8, 0};
  EXPECT_EQ(b.value(in), 1.0);
  EXPECT_NEAR(b.value(mid), 0.5, 1e-15);
  EXPECT_EQ(b.value(out), 0.0);
}

TEST(Fields, ConvexityFlags) {
  EXPECT_TRUE(exp_decay_field(2, 1.0)->radial()->convex());
  EXPECT_TRUE(liouville_power_field(2, 1.0, 1.0, 2.0, 0.5)->radial()->convex());
  EXPECT_FALSE(BarrierField(2, 1.0, 0.5).radial()->convex());
  EXPECT_TRUE(compact_power_field(2, 1.0, 1.0, 0.2, 0.9)->radial()->convex());  // exponent > 1
  EXPECT_FALSE(compact_power_field(2, 1.0, 1.0, 0.5, 0.25)->radial()->convex());
}

TEST(Fields, MovedFieldIsRigidMotion) {
  std::mt19937_64 rng(4);
  auto u = std::make_shared<AnisotropicGaussian>(Eigen::Matrix3d(Eigen::Vector3d(1, 2, 3).asDiagonal()));
  Eigen::MatrixXd Q = sample_frame(make_partition(3, {3}), rng).M;
  Eigen::VectorXd t(3);
  t << 0.1, -0.2, 0.3;
  MovedField m(u, Q, t);
  for (int i = 0; i < 20; ++i) {
    auto y = detail::random_in_ball(rng, 3, 1.0);
    Eigen::VectorXd x = Q * Eigen::Map<Eigen::VectorXd>(y.data(), 3) + t;
    EXPECT_NEAR(m.value(std::span<const double>(x.data(), 3)), u->value(y), 1e-14);
  }
}

TEST(Fields, LinearCombinationAndScaling) {
  auto a = exp_decay_field(2, 1.0), b = exp_decay_field(2, 2.0);
  LinearCombination c({a, b}, {2.0, -3.0});
  std::vector<double> x{0.3, 0.4};
  EXPECT_NEAR(c.value(x), 2 * a->value(x) - 3 * b->value(x), 1e-15);
  EXPECT_NEAR(scaled(a, -1.5)->value(x), -1.5 * a->value(x), 1e-15);
  EXPECT_THROW(LinearCombination({a}, {1.0, 2.0}), std::invalid_argument);
}

TEST(Fixtures, DiscontinuityExampleValues) {
  auto u = discontinuity_example(make_partition(3, {1, 1}));
  EXPECT_TRUE(u->discontinuous());
  EXPECT_THROW(discontinuity_example(make_partition(3, {3})), std::invalid_argument);
}

TEST(Fixtures, NonattainSupport) {
  auto u = nonattain_example(make_partition(3, {1, 1}));
  std::vector<double> on{0, 0, 1.5}, off{0.1, 0, 1.5}, inside{0, 0, 0.5};
  EXPECT_NEAR(u->value(on), std::exp(-1.5), 1e-15);
  EXPECT_EQ(u->value(off), 0.0);
  EXPECT_EQ(u->value(inside), 0.0);
}

TEST(Fixtures, ExpTailMatchesDirectSum) {
  // int_1^inf e^{-y tau} tau^{-1-2s} d tau by substitution tau = 1/v^(1/2s):
  // = (1/2s) int_0^1 exp(-y v^{-1/2s}) dv.
  for (double s : {0.3, 0.5, 0.7})
    for (double y : {0.5, 1.0, 2.0}) {
      const auto& gl = gauss_legendre01(200);
      double ref = 0;
      for (std::size_t i = 0; i < gl.size(); ++i) ref += gl.w[i] * std::exp(-y * std::pow(gl.x[i], -1 / (2 * s)));
      ref /= 2 * s;
      EXPECT_NEAR(detail::exp_tail(y, s), ref, 1e-10) << s << " " << y;
    }
}

TEST(Fixtures, SmpRegimeChecks) {
  EXPECT_NO_THROW(smp_counterexample(make_partition(2, {1}), SmpKind::profile));
  EXPECT_THROW(smp_counterexample(make_partition(2, {2}), SmpKind::profile), RegimeMismatch);
  EXPECT_NO_THROW(smp_counterexample(make_partition(2, {1, 1}), SmpKind::indicator));
  EXPECT_THROW(smp_counterexample(make_partition(3, {1, 1}), SmpKind::indicator), RegimeMismatch);
}

TEST(Catalog, FieldFromJson) {
  std::vector<double> x{0.2, 0.1};
  EXPECT_EQ(field_from_json(json(-2.0), 2)->value(x), -2.0);
  auto b = field_from_json(json::parse(R"({"type":"barrier","R":1,"s":0.5})"), 2);
  EXPECT_NEAR(b->value(x), std::sqrt(1 - 0.05), 1e-15);
  auto g = field_from_json(json::parse(R"({"type":"anisotropic_gaussian","A":[[2,0],[0,1]]})"), 2);
  EXPECT_NEAR(g->value(x), std::exp(-0.09), 1e-15);
  auto c = field_from_json(json::parse(R"({"type":"combination","terms":[1,{"type":"gaussian","alpha":1}],"coef":[2,3]})"), 2);
  EXPECT_NEAR(c->value(x), 2 + 3 * std::exp(-0.05), 1e-14);
  EXPECT_NO_THROW(field_from_json(json::parse(R"({"type":"smp_profile","partition":[1]})"), 2));
}

TEST(Catalog, RejectsMalformed) {
  EXPECT_THROW(field_from_json(json::parse(R"({"type":"nope"})"), 2), std::invalid_argument);
  EXPECT_THROW(field_from_json(json::parse(R"("text")"), 2), std::invalid_argument);
  EXPECT_THROW(field_from_json(json::parse(R"({"type":"discontinuity"})"), 3), std::invalid_argument);
  EXPECT_THROW(field_from_json(json::parse(R"({"type":"bump","center":[0,0,0]})"), 2), std::invalid_argument);
  EXPECT_ANY_THROW(field_from_json(json::parse(R"({"type":"barrier","R":1})"), 2));
}
