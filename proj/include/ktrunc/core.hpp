#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

namespace ktrunc {

inline constexpr int kMaxDim = 8;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

using Buf = std::array<double, kMaxDim>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quadrature cannot be applied to the field at the requested point.
class QuadratureRefused : public Error {
 public:
  using Error::Error;
};

// A structural hypothesis (sign/partition regime) does not hold.
class RegimeMismatch : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

enum class Sign { plus, minus };

inline Sign parse_sign(const std::string& s) {
  if (s == "+" || s == "plus") return Sign::plus;
  if (s == "-" || s == "minus") return Sign::minus;
  throw std::invalid_argument("sign must be 'plus' or 'minus', got '" + s + "'");
}

inline std::string to_string(Sign s) { return s == Sign::plus ? "plus" : "minus"; }

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline void check_dim(int n) {
  if (n < 1 || n > kMaxDim)
    throw std::invalid_argument("dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
}

inline void check_order(double s) {
  if (!(s > 0.0 && s < 1.0))
    throw std::invalid_argument("fractional order s must lie in (0,1)");
}

}  // namespace ktrunc
