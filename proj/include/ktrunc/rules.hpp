#pragma once

// Fixed quadrature rules: Gauss-Jacobi (Golub-Welsch), tanh-sinh node
// tables and product rules on spheres.  Rules are cached per thread-safe map.

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "ktrunc/core.hpp"
#include "ktrunc/kernels.hpp"

namespace ktrunc {

struct Rule {
  std::vector<double> x;
  std::vector<double> w;
  std::size_t size() const { return x.size(); }
};

// Nodes and weights for int_{-1}^{1} f(x) (1-x)^a (1+x)^b dx.
inline Rule compute_gauss_jacobi(int m, double a, double b) {
  if (m < 1) throw std::invalid_argument("gauss_jacobi needs m >= 1");
  if (!(a > -1 && b > -1)) throw std::invalid_argument("gauss_jacobi needs a, b > -1");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, m);
  const double ab = a + b;
  for (int k = 0; k < m; ++k) {
    const double d = 2.0 * k + ab;
    J(k, k) = (k == 0) ? (b - a) / (ab + 2.0) : (b * b - a * a) / (d * (d + 2.0));
    if (k + 1 < m) {
      const double n = k + 1.0;
      const double dn = 2.0 * n + ab;
      double off;
      if (k == 0)
        off = 4.0 * (1 + a) * (1 + b) / ((2 + ab) * (2 + ab) * (3 + ab));
      else
        off = 4.0 * n * (n + a) * (n + b) * (n + ab) / (dn * dn * (dn + 1.0) * (dn - 1.0));
      J(k, k + 1) = J(k + 1, k) = std::sqrt(off);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(a + 1.0) +
                              std::lgamma(b + 1.0) - std::lgamma(ab + 2.0));
  Rule r;
  r.x.resize(m);
  r.w.resize(m);
  for (int i = 0; i < m; ++i) {
    r.x[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    r.w[i] = mu0 * v0 * v0;
  }
  return r;
}

namespace detail {
template <class Key, class Make>
const Rule& cached_rule(const Key& key, Make make) {
  static std::mutex mu;
  static std::map<Key, Rule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, make()).first;
  return it->second;
}
}  // namespace detail

inline const Rule& gauss_jacobi(int m, double a, double b) {
  return detail::cached_rule(std::make_tuple(m, a, b), [&] { return compute_gauss_jacobi(m, a, b); });
}

// int_0^1 f(t) dt
inline const Rule& gauss_legendre01(int m) {
  return detail::cached_rule(m, [&] {
    Rule r = compute_gauss_jacobi(m, 0.0, 0.0);
    for (std::size_t i = 0; i < r.size(); ++i) {
      r.x[i] = 0.5 * (r.x[i] + 1.0);
      r.w[i] *= 0.5;
    }
    return r;
  });
}

// int_0^1 f(t) t^beta dt
inline const Rule& gauss_jacobi01(int m, double beta) {
  return detail::cached_rule(std::make_pair(m, beta), [&] {
    Rule r = compute_gauss_jacobi(m, 0.0, beta);
    const double scale = std::pow(2.0, -beta - 1.0);
    for (std::size_t i = 0; i < r.size(); ++i) {
      r.x[i] = 0.5 * (r.x[i] + 1.0);
      r.w[i] *= scale;
    }
    return r;
  });
}

// Tanh-sinh on [0,1] in endpoint-offset form: node k sits at distance
// off[k] from the left end (left[k]) or from the right end.  Weights are for
// the unit interval.  Even positions form the rule with twice the step.
struct TanhSinhTable {
  std::vector<double> off;
  std::vector<bool> left;
  std::vector<double> w;
  std::vector<bool> coarse;
};

inline TanhSinhTable make_tanh_sinh(double step, double tmax) {
  TanhSinhTable T;
  const int K = static_cast<int>(std::floor(tmax / step));
  for (int k = -K; k <= K; ++k) {
    const double t = k * step;
    const double u = 0.5 * kPi * std::sinh(std::abs(t));
    const double e = std::exp(-2.0 * u);
    const double off = e / (1.0 + e);
    const double w = 0.5 * step * 0.5 * kPi * std::cosh(t) * 4.0 * e / ((1.0 + e) * (1.0 + e));
    T.off.push_back(k == 0 ? 0.5 : off);
    T.left.push_back(k <= 0);
    T.w.push_back(w);
    T.coarse.push_back(k % 2 == 0);
  }
  return T;
}

inline const TanhSinhTable& tanh_sinh_table() {
  static const TanhSinhTable T = make_tanh_sinh(0.125, 4.0);
  return T;
}

// Point set on S^{n-1} subset R^n, weights summing to omega_n, antipodally
// symmetric.  The half rule keeps one point of each antipodal pair.
struct SphereRule {
  int n = 0;
  std::vector<double> pts;  // row-major, size count*n
  std::vector<double> w;
  std::size_t count() const { return w.size(); }
  const double* point(std::size_t i) const { return pts.data() + i * n; }
};

inline SphereRule compute_sphere_rule(int n, int m) {
  SphereRule S;
  S.n = n;
  if (n == 1) {
    S.pts = {1.0, -1.0};
    S.w = {1.0, 1.0};
    return S;
  }
  if (n == 2) {
    const int M = 2 * std::max(1, m / 2);
    for (int j = 0; j < M; ++j) {
      const double th = (j + 0.5) * 2.0 * kPi / M;
      S.pts.push_back(std::cos(th));
      S.pts.push_back(std::sin(th));
      S.w.push_back(2.0 * kPi / M);
    }
    return S;
  }
  const double a = 0.5 * (n - 3);
  const Rule gj = compute_gauss_jacobi(m, a, a);
  const SphereRule sub = compute_sphere_rule(n - 1, m);
  for (std::size_t i = 0; i < gj.size(); ++i) {
    const double t = gj.x[i];
    const double c = std::sqrt(std::max(0.0, 1.0 - t * t));
    for (std::size_t j = 0; j < sub.count(); ++j) {
      S.pts.push_back(t);
      for (int d = 0; d < n - 1; ++d) S.pts.push_back(c * sub.point(j)[d]);
      S.w.push_back(gj.w[i] * sub.w[j]);
    }
  }
  return S;
}

inline SphereRule half_of(const SphereRule& S) {
  SphereRule H;
  H.n = S.n;
  for (std::size_t i = 0; i < S.count(); ++i) {
    const double* p = S.point(i);
    int lead = 0;
    while (lead < S.n && std::abs(p[lead]) < 1e-14) ++lead;
    if (lead < S.n && p[lead] > 0) {
      H.pts.insert(H.pts.end(), p, p + S.n);
      H.w.push_back(S.w[i]);
    }
  }
  return H;
}

inline const SphereRule& sphere_rule(int n, int m, bool half) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, bool>, SphereRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(n, m, half);
  auto it = cache.find(key);
  if (it == cache.end()) {
    SphereRule S = compute_sphere_rule(n, m);
    it = cache.emplace(key, half ? half_of(S) : S).first;
  }
  return it->second;
}

}  // namespace ktrunc
