#include <gtest/gtest.h>

#include "ktrunc/verify.hpp"

using namespace ktrunc;

TEST(Liouville, QuadraticPowerCalibratesToTwoOverPi) {
  LiouvilleParams L;
  L.p = 2.0;
  L.samples = 6;
  auto r = liouville_study(L);
  EXPECT_NEAR(r.constant, 2 / M_PI, 1e-6);
  EXPECT_LE(r.max_relative, r.tolerance);
  EXPECT_EQ(r.rows.size(), 6u);
}

TEST(Liouville, GaussianRateIsQuarterPi) {
  LiouvilleParams L;
  L.p = 1.0;
  L.samples = 6;
  auto r = liouville_study(L);
  EXPECT_NEAR(r.constant, M_PI / 4, 1e-6);
  EXPECT_LE(r.max_relative, r.tolerance);
}

TEST(Liouville, SublinearCompactProfile) {
  LiouvilleParams L;
  L.p = 0.5;
  L.samples = 6;
  auto r = liouville_study(L);
  EXPECT_NEAR(r.constant, 0.61685, 1e-4);
  EXPECT_LE(r.max_relative, r.tolerance);
  for (auto& row : r.rows) EXPECT_LT(norm2(row.x), L.R - L.min_boundary_distance + 1e-12);
}

TEST(Liouville, RejectsFullRankAndBadParameters) {
  LiouvilleParams L;
  L.blocks = {2};
  EXPECT_THROW(liouville_study(L), RegimeMismatch);
  L.blocks = {1};
  L.p = -1;
  EXPECT_THROW(liouville_study(L), std::invalid_argument);
  L.p = 0.5;
  L.min_boundary_distance = 2.0;
  EXPECT_THROW(liouville_study(L), std::invalid_argument);
}

TEST(Verify, RestrictedPartitionRunsApplicableSuites) {
  VerifyConfig c;
  c.partition = make_partition(2, {2});
  auto reps = run_verify(c);
  ASSERT_EQ(reps.size(), 1u);
  EXPECT_EQ(reps[0].name, "barrier");
  EXPECT_TRUE(reps[0].passed);
}

TEST(Verify, UnknownSuiteIsRejected) {
  VerifyConfig c;
  c.suites = {"nope"};
  EXPECT_THROW(run_verify(c), std::invalid_argument);
}

TEST(Verify, FixturesSuitePasses) {
  VerifyConfig c;
  c.suites = {"fixtures"};
  auto reps = run_verify(c);
  ASSERT_EQ(reps.size(), 1u);
  for (auto& row : reps[0].rows) EXPECT_TRUE(row.at("pass").get<bool>()) << row.dump();
}
