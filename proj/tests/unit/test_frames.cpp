#include <gtest/gtest.h>

#include "ktrunc/frames.hpp"

using namespace ktrunc;

TEST(Partition, Validation) {
  EXPECT_NO_THROW(make_partition(3, {1, 2}));
  EXPECT_THROW(make_partition(3, {2, 2}), std::invalid_argument);
  EXPECT_THROW(make_partition(3, {}), std::invalid_argument);
  EXPECT_THROW(make_partition(3, {0, 1}), std::invalid_argument);
  auto p = make_partition(4, {1, 2});
  EXPECT_EQ(p.k(), 3);
  EXPECT_EQ(p.ell(), 2);
  EXPECT_EQ(block_index(p, 1), std::make_pair(1, 3));
}

TEST(Frames, SampledFramesAreOrthonormal) {
  std::mt19937_64 rng(7);
  for (auto blocks : {std::vector<int>{1}, {1, 1}, {2, 1}, {1, 1, 1, 1}, {3}}) {
    auto p = make_partition(4, blocks);
    for (int i = 0; i < 50; ++i) {
      auto F = sample_frame(p, rng);
      EXPECT_LT(orthonormality_defect(F.M), 1e-13);
      EXPECT_NO_THROW(validate_frame(F));
    }
  }
}

TEST(Frames, SamplingIsSeedDeterministic) {
  auto p = make_partition(3, {1, 1});
  std::mt19937_64 a(42), b(42);
  EXPECT_EQ((sample_frame(p, a).M - sample_frame(p, b).M).norm(), 0.0);
}

TEST(Frames, RetractWithZeroStepIsIdentity) {
  std::mt19937_64 rng(1);
  auto p = make_partition(3, {1, 1});
  auto F = sample_frame(p, rng);
  Eigen::MatrixXd P = Eigen::MatrixXd::Random(3, 2);
  EXPECT_EQ((retract(F, P, 0.0).M - F.M).norm(), 0.0);
}

TEST(Frames, RetractStaysOnManifoldAndIsFirstOrder) {
  std::mt19937_64 rng(3);
  auto p = make_partition(4, {2, 1});
  auto F = sample_frame(p, rng);
  Eigen::MatrixXd P = Eigen::MatrixXd::Random(4, 3);
  // Project to the tangent space: P - F sym(F^T P).
  Eigen::MatrixXd S = F.M.transpose() * P;
  P -= F.M * 0.5 * (S + S.transpose());
  for (double t : {1e-1, 1e-2, 1e-3}) {
    auto G = retract(F, P, t);
    EXPECT_LT(orthonormality_defect(G.M), 1e-13);
    EXPECT_LT((G.M - F.M - t * P).norm(), 10 * t * t * (1 + P.squaredNorm()));
  }
}

TEST(Frames, RetractRejectsShapeMismatch) {
  std::mt19937_64 rng(3);
  auto F = sample_frame(make_partition(3, {1}), rng);
  EXPECT_THROW(retract(F, Eigen::MatrixXd::Zero(3, 2), 0.1), std::invalid_argument);
}

TEST(Frames, CanonicalizeSignsIsIdempotentAndSignInvariant) {
  std::mt19937_64 rng(5);
  auto F = sample_frame(make_partition(3, {1, 1, 1}), rng);
  Eigen::MatrixXd A = F.M, B = -F.M;
  canonicalize_signs(A);
  canonicalize_signs(B);
  EXPECT_EQ((A - B).norm(), 0.0);
  Eigen::MatrixXd C = A;
  canonicalize_signs(C);
  EXPECT_EQ((A - C).norm(), 0.0);
}

TEST(Frames, CompleteBasisIsOrthonormal) {
  std::mt19937_64 rng(9);
  for (int k = 1; k <= 3; ++k) {
    auto F = sample_frame(make_partition(4, {k}), rng);
    Eigen::MatrixXd Q = complete_basis(F.M);
    EXPECT_LT(orthonormality_defect(Q), 1e-12);
    EXPECT_EQ((Q.leftCols(k) - F.M).norm(), 0.0);
  }
}

TEST(Frames, OrthonormalizeHandlesRankDeficiency) {
  std::mt19937_64 rng(11);
  Eigen::MatrixXd A(3, 2);
  A << 1, 2, 0, 0, 0, 0;  // parallel columns
  Eigen::MatrixXd Q = orthonormalize(A, &rng);
  EXPECT_LT(orthonormality_defect(Q), 1e-12);
}

TEST(Frames, ValidateRejectsNonOrthonormal) {
  BlockFrame F{make_partition(2, {1, 1}), Eigen::MatrixXd::Ones(2, 2)};
  EXPECT_ANY_THROW(validate_frame(F));
}
