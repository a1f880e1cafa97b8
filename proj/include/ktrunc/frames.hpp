#pragma once

#include <Eigen/Dense>
#include <random>
#include <utility>
#include <vector>

#include "ktrunc/core.hpp"

namespace ktrunc {

struct Partition {
  int N = 0;
  std::vector<int> blocks;

  int k() const {
    int t = 0;
    for (int b : blocks) t += b;
    return t;
  }
  int ell() const { return static_cast<int>(blocks.size()); }
};

inline Partition make_partition(int N, std::vector<int> blocks) {
  check_dim(N);
  if (blocks.empty()) throw std::invalid_argument("partition needs at least one block");
  int k = 0;
  for (int b : blocks) {
    if (b < 1) throw std::invalid_argument("block sizes must be >= 1");
    k += b;
  }
  if (k > N) throw std::invalid_argument("block sizes sum to more than the ambient dimension");
  return Partition{N, std::move(blocks)};
}

// Half-open column range [first, last) of block i.
inline std::pair<int, int> block_index(const Partition& p, int i) {
  if (i < 0 || i >= p.ell()) throw std::out_of_range("block index out of range");
  int first = 0;
  for (int j = 0; j < i; ++j) first += p.blocks[j];
  return {first, first + p.blocks[i]};
}

struct BlockFrame {
  Partition partition;
  Eigen::MatrixXd M;  // N x k, orthonormal columns

  Eigen::MatrixXd block(int i) const {
    auto [a, b] = block_index(partition, i);
    return M.middleCols(a, b - a);
  }
};

inline double orthonormality_defect(const Eigen::MatrixXd& M) {
  const auto k = M.cols();
  return (M.transpose() * M - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff();
}

inline void validate_frame(const BlockFrame& F, double tol = 1e-12) {
  const auto& p = F.partition;
  if (F.M.rows() != p.N || F.M.cols() != p.k())
    throw std::invalid_argument("frame shape does not match its partition");
  if (!F.M.allFinite()) throw std::invalid_argument("frame has non-finite entries");
  if (orthonormality_defect(F.M) > tol) throw std::invalid_argument("frame columns are not orthonormal");
}

// Gram-Schmidt with one reorthogonalisation pass.  Equivalent to a thin QR
// with diag(R) > 0.  Columns that collapse are replaced by random directions.
inline Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& A, std::mt19937_64* rng = nullptr) {
  const auto N = A.rows();
  const auto k = A.cols();
  Eigen::MatrixXd Q(N, k);
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  std::normal_distribution<double> normal;
  std::mt19937_64 fallback(0x5eed);
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::VectorXd v = A.col(j);
    for (int attempt = 0;; ++attempt) {
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index i = 0; i < j; ++i) v -= Q.col(i).dot(v) * Q.col(i);
      const double nv = v.norm();
      if (nv > 1e-10 * scale) {
        Q.col(j) = v / nv;
        break;
      }
      if (attempt > 16) throw Error("orthonormalize: could not complete frame");
      auto& g = rng ? *rng : fallback;
      for (Eigen::Index i = 0; i < N; ++i) v(i) = normal(g);
    }
  }
  return Q;
}

// Haar-distributed block frame.
inline BlockFrame sample_frame(const Partition& p, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd G(p.N, p.k());
  for (Eigen::Index j = 0; j < G.cols(); ++j)
    for (Eigen::Index i = 0; i < G.rows(); ++i) G(i, j) = normal(rng);
  return BlockFrame{p, orthonormalize(G, &rng)};
}

inline BlockFrame retract(const BlockFrame& F, const Eigen::MatrixXd& P, double step,
                          std::mt19937_64* rng = nullptr) {
  if (P.rows() != F.M.rows() || P.cols() != F.M.cols())
    throw std::invalid_argument("retract: direction shape mismatch");
  if (step == 0.0) return F;
  return BlockFrame{F.partition, orthonormalize(F.M + step * P, rng)};
}

// Flip columns so that the largest-magnitude entry of each is positive.
// Symmetric integrals do not see column signs; this only makes output stable.
inline void canonicalize_signs(Eigen::MatrixXd& M) {
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    Eigen::Index imax = 0;
    M.col(j).cwiseAbs().maxCoeff(&imax);
    if (M(imax, j) < 0) M.col(j) = -M.col(j);
  }
}

// Completes the columns of A (orthonormal) to an orthonormal basis of R^N,
// using standard basis vectors in order.
inline Eigen::MatrixXd complete_basis(const Eigen::MatrixXd& A) {
  const auto N = A.rows();
  Eigen::MatrixXd Q(N, N);
  Q.leftCols(A.cols()) = A;
  Eigen::Index filled = A.cols();
  for (Eigen::Index e = 0; e < N && filled < N; ++e) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(N, e);
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index i = 0; i < filled; ++i) v -= Q.col(i).dot(v) * Q.col(i);
    const double nv = v.norm();
    if (nv > 1e-8) Q.col(filled++) = v / nv;
  }
  return Q;
}

}  // namespace ktrunc
