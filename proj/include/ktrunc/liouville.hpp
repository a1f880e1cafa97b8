#pragma once

// Explicit radial solutions of K^- u + u^p = 0 (k < N).  The free constant of
// each family is fixed at one reference point by a bracketed root find on the
// line-integral representation; residuals at other points use eval_K.

#include <boost/math/tools/roots.hpp>

#include "ktrunc/operators.hpp"

namespace ktrunc {

struct LiouvilleParams {
  double p = 2.0;
  int N = 2;
  std::vector<int> blocks{1};
  double s = 0.5;
  double a = 1.0;  // p > 1
  double R = 1.0;  // p < 1
  int samples = 20;
  double min_boundary_distance = 0.1;  // p < 1 samples
  double sample_radius = 2.0;          // p >= 1 samples lie in 0.1 <= |x| <= sample_radius
  std::uint64_t seed = 0;
  QuadratureSpec quad;
  OptimizerOptions opt;
};

struct LiouvilleRow {
  std::vector<double> x;
  double K = 0;
  double up = 0;
  double residual = 0;      // |K^- u + u^p|
  double relative = 0;      // residual / u^p
};

struct LiouvilleResult {
  std::string family;
  double constant = 0;      // calibrated alpha (p != 1) or beta (p == 1)
  std::vector<double> reference;
  std::vector<LiouvilleRow> rows;
  double max_relative = 0;
  double tolerance = 0;
};

inline FieldPtr liouville_field(const LiouvilleParams& L, double constant) {
  if (L.p > 1) return liouville_power_field(L.N, constant, L.a, L.p, L.s);
  if (L.p == 1) return exp_decay_field(L.N, constant);
  return compact_power_field(L.N, constant, L.R, L.p, L.s);
}

inline double liouville_tolerance(const LiouvilleParams& L) { return L.p < 1 ? 1e-2 : 1e-3; }

namespace detail {

inline void validate_liouville(const LiouvilleParams& L) {
  if (!(L.p > 0) || !std::isfinite(L.p)) throw std::invalid_argument("liouville needs p > 0");
  check_order(L.s);
  Partition part = make_partition(L.N, L.blocks);
  if (!(part.k() < L.N)) throw RegimeMismatch("liouville families need k < N");
  if (L.p > 1 && !(L.a != 0)) throw std::invalid_argument("liouville p > 1 needs a != 0");
  if (L.p < 1 && !(L.R > 0)) throw std::invalid_argument("liouville p < 1 needs R > 0");
  if (L.samples < 1) throw std::invalid_argument("liouville needs at least one sample");
  if (L.p < 1 && !(L.min_boundary_distance > 0 && L.min_boundary_distance < L.R))
    throw std::invalid_argument("liouville sample margin must lie in (0, R)");
}

// F(c) = (K^- u_c + u_c^p)(x0) / u_c(x0) computed with the representation.
inline double liouville_defect(const LiouvilleParams& L, const Partition& part, std::span<const double> x0, double c) {
  auto u = liouville_field(L, c);
  const double ux = u->value(x0);
  const double K = representation_K_minus_radial(*u, x0, part, L.s, L.quad).value;
  return K / ux + std::pow(ux, L.p - 1);
}

}  // namespace detail

inline LiouvilleResult liouville_study(const LiouvilleParams& L) {
  detail::validate_liouville(L);
  const Partition part = make_partition(L.N, L.blocks);
  LiouvilleResult out;
  out.family = L.p > 1 ? "power" : L.p == 1 ? "gaussian" : "compact";
  out.tolerance = liouville_tolerance(L);

  const double scale = L.p > 1 ? std::abs(L.a) : L.p == 1 ? 1.0 : L.R;
  out.reference.assign(L.N, 0.0);
  out.reference[0] = 0.5 * scale;

  // The defect is monotone in the constant for every family; scan a geometric
  // grid for a sign change, then refine.
  auto F = [&](double c) { return detail::liouville_defect(L, part, out.reference, c); };
  double lo = 1e-6, flo = F(lo), hi = lo, fhi = flo;
  bool bracketed = false;
  for (int i = 0; i < 60; ++i) {
    hi = lo * 2;
    fhi = F(hi);
    if ((flo < 0) != (fhi < 0)) {
      bracketed = true;
      break;
    }
    lo = hi;
    flo = fhi;
  }
  if (!bracketed) throw Error("liouville calibration root not bracketed");
  boost::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(F, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(50), iters);
  out.constant = 0.5 * (r.first + r.second);
  auto u = liouville_field(L, out.constant);

  OperatorSpec spec;
  spec.partition = part;
  spec.sign = Sign::minus;
  spec.s = L.s;
  spec.quad = L.quad;
  spec.opt = L.opt;
  std::mt19937_64 rng(L.seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  while (static_cast<int>(out.rows.size()) < L.samples) {
    std::vector<double> x(L.N);
    for (auto& v : x) v = gauss(rng);
    const double nx = norm2(x);
    if (!(nx > 0)) continue;
    double rad;
    if (L.p < 1) {
      rad = (L.R - L.min_boundary_distance) * std::pow(unif(rng), 1.0 / L.N);
    } else {
      rad = 0.1 + (L.sample_radius - 0.1) * unif(rng);
    }
    for (auto& v : x) v *= rad / nx;
    LiouvilleRow row;
    row.x = x;
    row.K = eval_K(*u, x, spec).value;
    row.up = std::pow(u->value(x), L.p);
    row.residual = std::abs(row.K + row.up);
    row.relative = row.residual / row.up;
    out.max_relative = std::max(out.max_relative, row.relative);
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace ktrunc
