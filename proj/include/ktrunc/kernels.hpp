#pragma once

#include <cmath>

#include "ktrunc/core.hpp"

namespace ktrunc {

// C_{n,s}: normalises the n-dimensional fractional Laplacian so that its
// symbol is |xi|^{2s}.
inline double normalizing_constant(int n, double s) {
  check_dim(n);
  check_order(s);
  return s * std::pow(4.0, s) * std::tgamma(0.5 * n + s) /
         (std::pow(kPi, 0.5 * n) * std::tgamma(1.0 - s));
}

// B(1-s, s) = Gamma(1-s) Gamma(s).
inline double beta_1ms_s(double s) {
  check_order(s);
  return kPi / std::sin(kPi * s);
}

// Surface measure of the unit sphere S^{k-1}; omega_1 = 2 (two points).
inline double sphere_measure(int k) {
  if (k < 1) throw std::invalid_argument("sphere_measure needs k >= 1");
  return 2.0 * std::pow(kPi, 0.5 * k) / std::tgamma(0.5 * k);
}

// C_{k,s} omega_k / (4 k (1-s)); tends to 1 as s -> 1.
inline double asymptotic_ratio(int k, double s) {
  return normalizing_constant(k, s) * sphere_measure(k) / (4.0 * k * (1.0 - s));
}

}  // namespace ktrunc
