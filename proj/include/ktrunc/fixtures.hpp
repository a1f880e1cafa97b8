#pragma once

// Indicator-type fields whose subspace integrals are computed region by
// region: the sets where they are non-zero are bounded by a sphere and by
// coordinate subspaces or half-spaces, so each ray is split exactly.

#include "ktrunc/fields.hpp"
#include "ktrunc/kernels.hpp"
#include "ktrunc/rules.hpp"

namespace ktrunc {

class AnalyticFixture {
 public:
  virtual ~AnalyticFixture() = default;
  // int_V (u(x+z) - u(x)) |z|^{-n-2s} dz without the normalising constant,
  // V spanned by the orthonormal columns of B.
  virtual double unit_subspace_integral(std::span<const double> x, const Eigen::MatrixXd& B, double s,
                                        int angular) const = 0;
};

namespace detail {

// Column ranges of the coordinate blocks A_i = consecutive indices.
inline bool in_coordinate_block(std::span<const double> x, int first, int last, double tol) {
  for (int i = 0; i < static_cast<int>(x.size()); ++i)
    if ((i < first || i >= last) && std::abs(x[i]) > tol) return false;
  return true;
}

inline bool columns_in_coordinate_block(const Eigen::MatrixXd& B, int first, int last, double tol) {
  for (Eigen::Index j = 0; j < B.cols(); ++j)
    for (Eigen::Index i = 0; i < B.rows(); ++i)
      if ((i < first || i >= last) && std::abs(B(i, j)) > tol) return false;
  return true;
}

// int_1^inf e^{-y r} r^{-1-2s} dr for y > 0, via r = e^v.
inline double exp_tail(double y, double s) {
  const Rule& gl = gauss_legendre01(16);
  double acc = 0;
  for (int j = 0; j < 4000; ++j) {
    double part = 0;
    for (std::size_t q = 0; q < gl.size(); ++q) {
      const double v = j + gl.x[q];
      part += gl.w[q] * std::exp(-y * std::exp(v) - 2 * s * v);
    }
    acc += part;
    const double a = j + 1.0;
    if (y * std::exp(a) > 60.0 || std::exp(-2 * s * a) / (2 * s) < 1e-17 * acc) break;
  }
  return acc;
}

}  // namespace detail

// 0 on the closed unit ball and on the coordinate block subspaces
// <e_j : j in A_i>; `outside` elsewhere.
class BallSubspaceIndicator final : public ScalarField, public AnalyticFixture {
 public:
  BallSubspaceIndicator(Partition p, double outside, std::string tag)
      : ScalarField(p.N), p_(std::move(p)), outside_(outside), tag_(std::move(tag)) {}
  std::string tag() const override { return tag_; }
  json params() const override { return {{"partition", p_.blocks}, {"N", p_.N}}; }
  double value(std::span<const double> x) const override {
    if (norm2(x) <= 1.0) return 0.0;
    for (int i = 0; i < p_.ell(); ++i) {
      auto [a, b] = block_index(p_, i);
      if (detail::in_coordinate_block(x, a, b, 0.0)) return 0.0;
    }
    return outside_;
  }
  double bound() const override { return std::abs(outside_); }
  bool discontinuous() const override { return true; }
  bool smooth_at(std::span<const double> x) const override { return norm2(x) < 1.0; }

  double unit_subspace_integral(std::span<const double> x, const Eigen::MatrixXd& B, double s,
                                int angular) const override {
    const int N = dim();
    const double rx2 = dot(x, x);
    if (!(rx2 < 1.0)) throw QuadratureRefused(tag_ + ": analytic decomposition needs |x| < 1");
    for (int i = 0; i < p_.ell(); ++i) {
      auto [a, b] = block_index(p_, i);
      if (detail::in_coordinate_block(x, a, b, 1e-14) && detail::columns_in_coordinate_block(B, a, b, 1e-13))
        return 0.0;
    }
    // Every ray leaves the ball at tau(theta) and then sees `outside`, except
    // on a null set of directions.
    const int n = static_cast<int>(B.cols());
    const SphereRule& S = sphere_rule(n, angular, false);
    double acc = 0;
    for (std::size_t q = 0; q < S.count(); ++q) {
      Buf d{};
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < n; ++j) d[i] += B(i, j) * S.point(q)[j];
      const double b = dot(x, std::span<const double>(d.data(), N));
      const double tau = (1.0 - rx2) / (b + std::sqrt(b * b + 1.0 - rx2));
      acc += S.w[q] * std::pow(tau, -2 * s) / (2 * s);
    }
    return outside_ * acc;
  }

 private:
  Partition p_;
  double outside_;
  std::string tag_;
};

// e^{-x_N} on {x in S : x_N > 0, |x| > 1}, 0 elsewhere; S = R^N for a single
// block, otherwise S = span(e_{N-k_1}, ..., e_N).
class NonattainField final : public ScalarField, public AnalyticFixture {
 public:
  explicit NonattainField(Partition p) : ScalarField(p.N), p_(std::move(p)) {
    zero_coords_ = p_.ell() == 1 ? 0 : p_.N - p_.blocks[0] - 1;
    if (zero_coords_ < 0) throw std::invalid_argument("nonattain_example: first block too large");
  }
  std::string tag() const override { return "nonattain"; }
  json params() const override { return {{"partition", p_.blocks}, {"N", p_.N}}; }
  double value(std::span<const double> x) const override {
    for (int i = 0; i < zero_coords_; ++i)
      if (x[i] != 0.0) return 0.0;
    const double xn = x[dim() - 1];
    if (xn > 0 && norm2(x) > 1.0) return std::exp(-xn);
    return 0.0;
  }
  double bound() const override { return 1.0; }
  bool discontinuous() const override { return true; }
  bool smooth_at(std::span<const double> x) const override { return norm2(x) < 1.0; }

  double unit_subspace_integral(std::span<const double> x, const Eigen::MatrixXd& B, double s,
                                int) const override {
    if (norm2(x) > 0.0) throw QuadratureRefused("nonattain: analytic decomposition is implemented at the origin");
    const int N = dim();
    const int n = static_cast<int>(B.cols());
    for (Eigen::Index j = 0; j < B.cols(); ++j)
      for (int i = 0; i < zero_coords_; ++i)
        if (std::abs(B(i, j)) > 1e-13) return 0.0;  // V meets the support in a null set
    const double bn = B.row(N - 1).norm();
    if (bn == 0.0) return 0.0;
    if (n == 1) return detail::exp_tail(bn, s);
    // Rotate so that only the first direction sees e_N; integrate over the
    // angle psi to that direction.
    const TanhSinhTable& T = tanh_sinh_table();
    const double L = 0.5 * kPi;
    double acc = 0;
    for (std::size_t q = 0; q < T.w.size(); ++q) {
      const double psi = T.left[q] ? L * T.off[q] : L - L * T.off[q];
      const double cpsi = T.left[q] ? std::cos(psi) : std::sin(L * T.off[q]);
      const double y = bn * cpsi;
      if (!(y > 0)) continue;
      acc += L * T.w[q] * detail::exp_tail(y, s) * std::pow(std::sin(psi), n - 2);
    }
    return sphere_measure(n - 1) * acc;
  }

 private:
  Partition p_;
  int zero_coords_;
};

inline std::shared_ptr<BallSubspaceIndicator> discontinuity_example(const Partition& p) {
  if (p.ell() == 1 && p.blocks[0] == p.N)
    throw std::invalid_argument("discontinuity_example: a single block of full dimension has no counterexample");
  return std::make_shared<BallSubspaceIndicator>(p, -1.0, "discontinuity");
}

inline std::shared_ptr<NonattainField> nonattain_example(const Partition& p) {
  return std::make_shared<NonattainField>(p);
}

enum class SmpKind { profile, indicator };

inline FieldPtr smp_counterexample(const Partition& p, SmpKind kind) {
  if (kind == SmpKind::profile) {
    if (!(p.k() < p.N)) throw RegimeMismatch("smp profile counterexample needs k < N");
    return std::make_shared<LastCoordinateProfile>(p.N);
  }
  if (!(p.k() == p.N && p.ell() > 1))
    throw RegimeMismatch("smp indicator counterexample needs k = N and more than one block");
  return std::make_shared<BallSubspaceIndicator>(p, 1.0, "smp_indicator");
}

}  // namespace ktrunc
