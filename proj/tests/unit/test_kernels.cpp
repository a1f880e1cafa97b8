#include <gtest/gtest.h>

#include "ktrunc/kernels.hpp"

using namespace ktrunc;

namespace {

// Reference values from 30-digit arbitrary-precision evaluation.
struct ConstRow {
  int n;
  double s;
  double value;
};

const ConstRow kConstants[] = {
    {1, 0.25, 0.19947114020071633897},  {1, 0.5, 0.31830988618379067154},  {1, 0.75, 0.29920671030107450845},
    {1, 0.3, 0.23009638168163210465},   {1, 0.7, 0.31988109866734784016},  {2, 0.25, 0.083241983875425065489},
    {2, 0.5, 0.15915494309189533577},   {2, 0.75, 0.17116712969055234293}, {2, 0.3, 0.10007289206487783637},
    {2, 0.7, 0.17860038243844473381},   {3, 0.25, 0.047620226950680727339}, {3, 0.5, 0.10132118364233777144},
    {3, 0.75, 0.11905056737670181835},  {3, 0.3, 0.058593562451505897626}, {3, 0.7, 0.12218557933097928583},
    {4, 0.25, 0.033120933016374363642}, {4, 0.5, 0.075990887731753328583}, {4, 0.75, 0.095347331747860243213},
    {4, 0.3, 0.041410448148230242555}, {4, 0.7, 0.096645454590816810086},
};

}  // namespace

TEST(Kernels, NormalizingConstantMatchesHighPrecision) {
  for (const auto& r : kConstants) EXPECT_NEAR(normalizing_constant(r.n, r.s) / r.value, 1.0, 1e-12) << r.n << " " << r.s;
}

TEST(Kernels, BetaFunctionAtHalfIsPi) {
  EXPECT_NEAR(beta_1ms_s(0.5), M_PI, 1e-14);
  EXPECT_NEAR(beta_1ms_s(0.25), 4.44288293815836624702, 1e-13);
  EXPECT_NEAR(beta_1ms_s(0.75), 4.44288293815836624702, 1e-13);
}

TEST(Kernels, BetaIsSymmetricInS) {
  for (double s : {0.1, 0.2, 0.35, 0.45}) EXPECT_NEAR(beta_1ms_s(s), beta_1ms_s(1 - s), 1e-12 * beta_1ms_s(s));
}

TEST(Kernels, SphereMeasure) {
  EXPECT_NEAR(sphere_measure(1), 2.0, 1e-15);
  EXPECT_NEAR(sphere_measure(2), 6.2831853071795864769, 1e-14);
  EXPECT_NEAR(sphere_measure(3), 12.566370614359172954, 1e-13);
  EXPECT_NEAR(sphere_measure(4), 19.739208802178717238, 1e-13);
}

TEST(Kernels, ConstantVanishesLinearlyAsSGoesToZero) {
  // C_{n,s} / s tends to a finite positive limit.
  for (int n = 1; n <= 4; ++n) {
    const double a = normalizing_constant(n, 1e-4) / 1e-4, b = normalizing_constant(n, 2e-4) / 2e-4;
    EXPECT_GT(a, 0);
    EXPECT_NEAR(a / b, 1.0, 1e-3);
  }
}

TEST(Kernels, ConstantNearOneMatchesLocalLimit) {
  // C_{n,s} ~ 4 n (1-s) / omega_n, so that the operator tends to -Laplacian.
  for (int n = 1; n <= 4; ++n) {
    const double s = 1 - 1e-6;
    EXPECT_NEAR(normalizing_constant(n, s) / ((1 - s) * 4.0 * n / sphere_measure(n)), 1.0, 1e-4) << n;
  }
}

TEST(Kernels, AsymptoticRatioTendsToOne) {
  for (int k = 1; k <= 3; ++k) {
    EXPECT_NEAR(asymptotic_ratio(k, 0.999999), 1.0, 1e-4);
    EXPECT_LT(std::abs(asymptotic_ratio(k, 0.99) - 1), std::abs(asymptotic_ratio(k, 0.9) - 1));
  }
}

TEST(Kernels, RejectsBadArguments) {
  EXPECT_THROW(normalizing_constant(0, 0.5), std::invalid_argument);
  EXPECT_THROW(normalizing_constant(2, 0.0), std::invalid_argument);
  EXPECT_THROW(normalizing_constant(2, 1.0), std::invalid_argument);
  EXPECT_THROW(beta_1ms_s(std::nan("")), std::invalid_argument);
}
