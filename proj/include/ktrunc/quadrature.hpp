#pragma once

#include "ktrunc/fields.hpp"
#include "ktrunc/fixtures.hpp"
#include "ktrunc/kernels.hpp"
#include "ktrunc/rules.hpp"

namespace ktrunc {

struct QuadratureSpec {
  int core_nodes = 16;        // Gauss-Jacobi nodes on [0, rho]
  double core_radius = 0.25;  // rho in units of the field length scale
  int panel_nodes = 10;       // Gauss-Legendre nodes per smooth panel
  double panel_ratio = 2.0;   // geometric growth of panels
  double truncation = 40.0;   // T for fields without compact support, in length scales
  int angular = 32;           // sphere rule nodes per angular dimension
  bool estimate_error = true;
  double fd_step = 1e-4;      // relative step for missing derivatives

  void validate() const {
    if (core_nodes < 2 || panel_nodes < 2 || angular < 2 || !(core_radius > 0) || !(panel_ratio > 1) ||
        !(truncation > 0) || !(fd_step > 0))
      throw std::invalid_argument("invalid quadrature spec");
  }
};

enum class Normalization { standard, unit };

struct IntegralResult {
  double value = 0;
  double error_estimate = 0;
};

// -u_x omega_n T^{-2s} / (2s): the exact contribution of |z| > T when the
// field vanishes there.
inline double tail_correction(double ux, double T, int n, double s) {
  check_order(s);
  if (!(T > 0)) throw std::invalid_argument("tail_correction needs T > 0");
  return -ux * sphere_measure(n) * std::pow(T, -2 * s) / (2 * s);
}

namespace detail {

struct Ray {
  const ScalarField* u = nullptr;
  std::span<const double> x;
  Buf d{};
  int N = 0;
  double s = 0;
  bool two_sided = true;
  double ux = 0;

  // u(x + r d) (+ u(x - r d))
  double sample(double r) const {
    Buf y{};
    for (int i = 0; i < N; ++i) y[i] = x[i] + r * d[i];
    double v = u->value(std::span<const double>(y.data(), N));
    if (two_sided) {
      for (int i = 0; i < N; ++i) y[i] = x[i] - r * d[i];
      v += u->value(std::span<const double>(y.data(), N));
    }
    return v;
  }
  std::span<const double> dir() const { return {d.data(), static_cast<std::size_t>(N)}; }
};

inline std::vector<double> ray_knots(const Ray& ray) {
  std::vector<double> b;
  ray.u->ray_breaks(ray.x, ray.dir(), b);
  if (ray.two_sided) {
    Buf m{};
    for (int i = 0; i < ray.N; ++i) m[i] = -ray.d[i];
    ray.u->ray_breaks(ray.x, std::span<const double>(m.data(), ray.N), b);
  }
  std::sort(b.begin(), b.end());
  std::vector<double> out;
  for (double r : b) {
    if (!(r > 0) || !std::isfinite(r)) continue;
    if (!out.empty() && r - out.back() <= 1e-13 * r) continue;
    out.push_back(r);
  }
  return out;
}

// Integral of f over [a,b] with tanh-sinh, clustering at the endpoints.
template <class F>
double tanh_sinh(double a, double b, bool coarse, F&& f) {
  const TanhSinhTable& T = tanh_sinh_table();
  const double L = b - a;
  double acc = 0;
  for (std::size_t q = 0; q < T.w.size(); ++q) {
    if (coarse && !T.coarse[q]) continue;
    const double r = T.left[q] ? a + L * T.off[q] : b - L * T.off[q];
    acc += T.w[q] * f(r);
  }
  return (coarse ? 2.0 : 1.0) * L * acc;
}

template <class F>
double gauss_panel(double a, double b, int m, F&& f) {
  const Rule& gl = gauss_legendre01(m);
  double acc = 0;
  for (std::size_t q = 0; q < gl.size(); ++q) acc += gl.w[q] * f(a + (b - a) * gl.x[q]);
  return (b - a) * acc;
}

// FP int_0^inf (sample(r) - m u_x) r^{-1-2s} dr, m = 2 or 1.
inline double ray_integral(const Ray& ray, const QuadratureSpec& spec, bool half) {
  const ScalarField& u = *ray.u;
  const double s = ray.s;
  const double mult = ray.two_sided ? 2.0 : 1.0;
  const auto knots = ray_knots(ray);
  const double L = u.length_scale();
  double rho = spec.core_radius * L;
  if (!knots.empty()) rho = std::min(rho, 0.5 * knots.front());

  // Taylor term removed on the core and added back in closed form.
  const int N = ray.N;
  double coef = 0;
  const double eps = spec.fd_step * std::min(L, rho);
  if (ray.two_sided) {
    if (u.has_hessian()) {
      std::array<double, kMaxDim * kMaxDim> H{};
      u.hessian(ray.x, std::span<double>(H.data(), N * N));
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) coef += ray.d[i] * H[i * N + j] * ray.d[j];
    } else {
      coef = (ray.sample(eps) - 2 * ray.ux) / (eps * eps);
    }
  } else {
    if (u.has_gradient()) {
      Buf g{};
      u.gradient(ray.x, std::span<double>(g.data(), N));
      for (int i = 0; i < N; ++i) coef += g[i] * ray.d[i];
    } else {
      Ray back = ray;
      for (int i = 0; i < N; ++i) back.d[i] = -ray.d[i];
      coef = (ray.sample(eps) - back.sample(eps)) / (2 * eps);
    }
    if (std::abs(s - 0.5) < 1e-14 && std::abs(coef) > 1e-13 * std::max(1.0, u.bound()) / L)
      throw QuadratureRefused("one-sided integral diverges at s = 1/2 with a non-zero slope");
  }
  const int p = ray.two_sided ? 2 : 1;
  const double core_fp = coef * std::pow(rho, p - 2 * s) / (p - 2 * s);
  const Rule& gj = gauss_jacobi01(half ? spec.core_nodes / 2 : spec.core_nodes, 1 - 2 * s);
  double core = 0;
  for (std::size_t q = 0; q < gj.size(); ++q) {
    const double t = gj.x[q], r = rho * t;
    const double rem = ray.sample(r) - mult * ray.ux - coef * (ray.two_sided ? r * r : r);
    core += gj.w[q] * rem / (t * t);
  }
  core *= std::pow(rho, -2 * s);

  // Far field up to T, split at the knots.
  const double Rsupp = u.support_radius();
  const bool compact = std::isfinite(Rsupp);
  double T;
  if (compact) {
    auto c = u.support_center();
    T = std::sqrt(dist2(ray.x, c)) + Rsupp;
  } else {
    T = spec.truncation * L;
    if (!knots.empty()) T = std::max(T, 2 * knots.back());
  }
  T = std::max(T, 2 * rho);
  std::vector<double> pts{rho};
  std::vector<bool> singular{false};
  for (double k : knots)
    if (k > rho * (1 + 1e-12) && k < T * (1 - 1e-12)) {
      pts.push_back(k);
      singular.push_back(true);
    }
  pts.push_back(T);
  singular.push_back(false);

  auto integrand = [&](double r) { return (ray.sample(r) - mult * ray.ux) * std::pow(r, -1 - 2 * s); };
  const int m = half ? spec.panel_nodes / 2 : spec.panel_nodes;
  double far = 0;
  for (std::size_t seg = 0; seg + 1 < pts.size(); ++seg) {
    const double a = pts[seg], b = pts[seg + 1];
    double p0 = a;
    while (p0 < b) {
      double p1 = p0 * spec.panel_ratio;
      if (p1 * std::sqrt(spec.panel_ratio) >= b) p1 = b;
      const bool ts = (p0 == a && singular[seg]) || (p1 == b && singular[seg + 1]);
      far += ts ? tanh_sinh(p0, p1, half, integrand) : gauss_panel(p0, p1, m, integrand);
      p0 = p1;
    }
  }

  double tail = -mult * ray.ux * std::pow(T, -2 * s) / (2 * s);
  if (!compact) {
    // r = T/t maps (T, inf) onto (0, 1).
    tail += std::pow(T, -2 * s) *
            tanh_sinh(0.0, 1.0, half, [&](double t) { return ray.sample(T / t) * std::pow(t, 2 * s - 1); });
  }
  return core_fp + core + far + tail;
}

inline void require_regular(const ScalarField& u, std::span<const double> x) {
  if (u.discontinuous()) throw QuadratureRefused(u.tag() + ": discontinuous field without analytic decomposition");
  if (!u.smooth_at(x)) throw QuadratureRefused(u.tag() + ": field is not smooth at the evaluation point");
}

inline double unnormalized_subspace(const ScalarField& u, std::span<const double> x, const Eigen::MatrixXd& B,
                                    double s, const QuadratureSpec& spec, bool half) {
  const int N = u.dim(), n = static_cast<int>(B.cols());
  const SphereRule& S = sphere_rule(n, half ? std::max(2, spec.angular / 2) : spec.angular, true);
  Ray ray;
  ray.u = &u;
  ray.x = x;
  ray.N = N;
  ray.s = s;
  ray.two_sided = true;
  ray.ux = u.value(x);
  double acc = 0;
  for (std::size_t q = 0; q < S.count(); ++q) {
    for (int i = 0; i < N; ++i) {
      double v = 0;
      for (int j = 0; j < n; ++j) v += B(i, j) * S.point(q)[j];
      ray.d[i] = v;
    }
    acc += S.w[q] * ray_integral(ray, spec, half);
  }
  return acc;
}

}  // namespace detail

inline void check_point(const ScalarField& u, std::span<const double> x) {
  if (static_cast<int>(x.size()) != u.dim()) throw std::invalid_argument("point has wrong dimension");
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("point has non-finite coordinates");
}

// J_V u(x) = C_{n,s} PV int_V (u(x+z) - u(x)) |z|^{-n-2s} dz.
inline IntegralResult subspace_integral(const ScalarField& u, std::span<const double> x, const Eigen::MatrixXd& B,
                                        double s, const QuadratureSpec& spec = {},
                                        Normalization norm = Normalization::standard) {
  check_point(u, x);
  check_order(s);
  spec.validate();
  const int n = static_cast<int>(B.cols());
  if (B.rows() != u.dim() || n < 1) throw std::invalid_argument("subspace basis has wrong shape");
  if (orthonormality_defect(B) > 1e-10) throw std::invalid_argument("subspace basis is not orthonormal");
  const double C = norm == Normalization::standard ? normalizing_constant(n, s) : 1.0;
  if (auto* fx = dynamic_cast<const AnalyticFixture*>(&u)) {
    IntegralResult r;
    r.value = C * fx->unit_subspace_integral(x, B, s, spec.angular);
    if (spec.estimate_error)
      r.error_estimate = std::abs(r.value - C * fx->unit_subspace_integral(x, B, s, std::max(2, spec.angular / 2)));
    return r;
  }
  detail::require_regular(u, x);
  IntegralResult r;
  r.value = C * detail::unnormalized_subspace(u, x, B, s, spec, false);
  if (spec.estimate_error) {
    const double coarse = C * detail::unnormalized_subspace(u, x, B, s, spec, true);
    r.error_estimate = std::abs(r.value - coarse) + 1e-15 * std::abs(r.value);
  }
  return r;
}

// One-sided C_{1,s} FP int_0^inf (u(x + r xi) - u(x)) r^{-1-2s} dr.  The two
// rays of a line add up to the one-dimensional subspace integral.
inline IntegralResult directional_integral(const ScalarField& u, std::span<const double> x,
                                           std::span<const double> xi, double s, const QuadratureSpec& spec = {},
                                           Normalization norm = Normalization::standard) {
  check_point(u, x);
  check_order(s);
  spec.validate();
  if (static_cast<int>(xi.size()) != u.dim()) throw std::invalid_argument("direction has wrong dimension");
  if (std::abs(norm2(xi) - 1.0) > 1e-12) throw std::invalid_argument("direction must be a unit vector");
  detail::require_regular(u, x);
  detail::Ray ray;
  ray.u = &u;
  ray.x = x;
  ray.N = u.dim();
  ray.s = s;
  ray.two_sided = false;
  ray.ux = u.value(x);
  for (int i = 0; i < ray.N; ++i) ray.d[i] = xi[i];
  const double C = norm == Normalization::standard ? normalizing_constant(1, s) : 1.0;
  IntegralResult r;
  r.value = C * detail::ray_integral(ray, spec, false);
  if (spec.estimate_error)
    r.error_estimate = std::abs(r.value - C * detail::ray_integral(ray, spec, true)) + 1e-15 * std::abs(r.value);
  return r;
}

inline IntegralResult subspace_integral(const ScalarField& u, const Eigen::VectorXd& x, const Eigen::MatrixXd& B,
                                        double s, const QuadratureSpec& spec = {},
                                        Normalization norm = Normalization::standard) {
  return subspace_integral(u, std::span<const double>(x.data(), x.size()), B, s, spec, norm);
}

}  // namespace ktrunc
