#include <cmath>
#include <random>
#include <gtest/gtest.h>
#include "cavityforge/analytic.hpp"
#include "cavityforge/physcore.hpp"
#include "cavityforge/special.hpp"

namespace cf = cavityforge;
namespace an = cavityforge::analytic;
namespace sp = cavityforge::special;
using cf::constants::c;
using cf::constants::pi;

namespace
{

// Oracle: bracket a zero of the standard-library Bessel function by bisection.
double OracleBesselZero(int m, double lo, double hi)
{
  for (int i = 0; i < 200; i++)
  {
    const double mid = 0.5 * (lo + hi);
    if ((std::cyl_bessel_j(m, lo) < 0) == (std::cyl_bessel_j(m, mid) < 0))
    {
      lo = mid;
    }
    else
    {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

const an::ModeIndex kTM010{0, 1, 0, an::ModeFamily::TM};
const an::ModeIndex kTM110{1, 1, 0, an::ModeFamily::TM};

}  // namespace

TEST(Special, BesselMatchesStandardLibrary)
{
  for (int m = 0; m <= 6; m++)
  {
    for (double x = 0.0; x <= 40.0; x += 0.37)
    {
      EXPECT_NEAR(sp::BesselJ(m, x), std::cyl_bessel_j(m, x), 1e-12) << m << " " << x;
    }
  }
}

TEST(Special, BesselZerosMatchBisectionOracle)
{
  EXPECT_NEAR(sp::BesselJZero(0, 1), OracleBesselZero(0, 2.0, 3.0), 1e-10);
  EXPECT_NEAR(sp::BesselJZero(0, 2), OracleBesselZero(0, 5.0, 6.0), 1e-10);
  EXPECT_NEAR(sp::BesselJZero(1, 1), OracleBesselZero(1, 3.5, 4.0), 1e-10);
  EXPECT_NEAR(sp::BesselJZero(2, 1), OracleBesselZero(2, 5.0, 5.3), 1e-10);
  // J'_1 zero (location of max |J'_0| = |J_1|).
  EXPECT_NEAR(sp::BesselJPrimeZero(1, 1), 1.8411837813406593, 1e-10);
}

TEST(Special, EllipticEMatchesStandardLibrary)
{
  for (double k = 0.0; k < 1.0; k += 0.0625)
  {
    EXPECT_NEAR(sp::EllipticE(k), std::comp_ellint_2(k), 1e-13) << k;
  }
  EXPECT_DOUBLE_EQ(sp::EllipticE(1.0), 1.0);
  EXPECT_NEAR(sp::EllipticE(0.0), pi / 2, 1e-15);
}

TEST(ResonanceFrequency, TM010TwoCentimetreRadius)
{
  EXPECT_NEAR(an::ResonanceFrequency(kTM010, 0.02, 0.02) / 5.74e9, 1.0, 1e-3);
}

TEST(ResonanceFrequency, TM110FromBesselZeroOracle)
{
  // c j11 / (2 pi a), j11 from the bisection oracle: 9.1412 GHz.
  const double expected = c * OracleBesselZero(1, 3.5, 4.0) / (2 * pi * 0.02);
  EXPECT_NEAR(an::ResonanceFrequency(kTM110, 0.02, 0.02) / expected, 1.0, 1e-10);
  EXPECT_NEAR(expected, 9.1412e9, 0.001e9);
}

TEST(ResonanceFrequency, HeightIndependentWhenPIsZero)
{
  EXPECT_EQ(an::ResonanceFrequency(kTM010, 0.02, 0.02), an::ResonanceFrequency(kTM010, 0.02, 0.005));
}

TEST(ResonanceFrequency, ScaleInvariance)
{
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> len(1e-3, 0.1);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int i = 0; i < 50; i++)
  {
    const an::ModeIndex idx{i % 3, 1 + i % 2, i % 4, i % 5 == 0 && i % 4 ? an::ModeFamily::TE : an::ModeFamily::TM};
    const double a = len(rng);
    const double h = len(rng);
    const double s = scale(rng);
    EXPECT_NEAR(an::ResonanceFrequency(idx, s * a, s * h) * s / an::ResonanceFrequency(idx, a, h), 1.0,
                1e-12);
  }
}

TEST(ResonanceFrequency, InvalidIndexThrows)
{
  EXPECT_THROW(an::ResonanceFrequency({0, 0, 0, an::ModeFamily::TM}, 0.02, 0.02), cf::DomainError);
  EXPECT_THROW(an::ResonanceFrequency({1, 1, 0, an::ModeFamily::TE}, 0.02, 0.02), cf::DomainError);
  EXPECT_THROW(an::ResonanceFrequency(kTM010, -0.02, 0.02), cf::DomainError);
}

TEST(TmModeFields, AxisAndWallValues)
{
  const auto mode = an::CylindricalMode::Make(kTM010, 0.02, 0.02, 1.0);
  EXPECT_EQ(an::TmModeFields(mode, 0.0, 0.0, 0.01).Bphi, 0.0);
  EXPECT_NEAR(an::TmModeFields(mode, 0.02, 0.3, 0.01).Ez, 0.0, 1e-10);
  EXPECT_THROW(an::TmModeFields(mode, 0.03, 0.0, 0.01), cf::DomainError);
  EXPECT_THROW(an::TmModeFields(mode, 0.01, 0.0, -0.01), cf::DomainError);
}

TEST(TmModeFields, MaximumMagneticFieldLocation)
{
  const double a = 0.02;
  const auto mode = an::CylindricalMode::Make(kTM010, a, 0.01, 1.0);
  // Brute-force scan for the |B_phi| maximum.
  double best = 0.0;
  double best_r = 0.0;
  for (int i = 0; i <= 200000; i++)
  {
    const double r = a * i / 200000.0;
    const double b = std::abs(an::TmModeFields(mode, r, 0.0, 0.0).Bphi);
    if (b > best)
    {
      best = b;
      best_r = r;
    }
  }
  const double j01 = sp::BesselJZero(0, 1);
  EXPECT_NEAR(best_r, 1.8412 * a / j01, 2e-7);
  const double kc_over_omega = 1.0 / c;
  EXPECT_NEAR(best / kc_over_omega, 0.582, 5e-4);
  EXPECT_NEAR(an::MaxAbsJ0Prime(), 0.582, 5e-4);
}

TEST(TmModeFields, PecBoundaryConditionsOnThousandSamples)
{
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const an::ModeIndex idx : {an::ModeIndex{0, 1, 1, an::ModeFamily::TM},
                                  an::ModeIndex{1, 2, 2, an::ModeFamily::TM},
                                  an::ModeIndex{2, 1, 3, an::ModeFamily::TM}})
  {
    const auto mode = an::CylindricalMode::Make(idx, 0.02, 0.013, 1.0);
    // Reference scale: maximum |E_z|.
    const double ref = 1.0;
    for (int i = 0; i < 1000; i++)
    {
      const double phi = 2 * pi * u(rng);
      const double z = mode.h * u(rng);
      const double r = mode.a * u(rng);
      const auto wall = an::TmModeFields(mode, mode.a, phi, z);
      EXPECT_LT(std::abs(wall.Ez), 1e-9 * ref);
      EXPECT_LT(std::abs(wall.Ephi), 1e-9 * ref);
      for (double zc : {0.0, mode.h})
      {
        const auto cap = an::TmModeFields(mode, r, phi, zc);
        EXPECT_LT(std::abs(cap.Er), 1e-9 * ref);
        EXPECT_LT(std::abs(cap.Ephi), 1e-9 * ref);
      }
    }
  }
}

TEST(Tm010ModeVolume, SqueezedCylinderValues)
{
  const double f = an::ResonanceFrequency(kTM010, 0.02, 0.02);
  const double lambda3 = std::pow(c / f, 3);
  EXPECT_NEAR(an::Tm010ModeVolume(0.02, f) / lambda3 / 0.140, 1.0, 5e-3);
  EXPECT_NEAR(an::Tm010ModeVolume(0.005, f) / lambda3 / 0.0349, 1.0, 5e-3);
}

TEST(Tm010ModeVolume, MatchesQuadratureOfFieldIntegral)
{
  // Oracle: Simpson integration of |B|^2 r dr from the analytic field, divided by max |B|^2.
  const double a = 0.02;
  const double h = 0.007;
  const auto mode = an::CylindricalMode::Make(kTM010, a, h, 1.0);
  const int n = 20000;
  double integral = 0.0;
  double bmax = 0.0;
  for (int i = 0; i <= n; i++)
  {
    const double r = a * i / n;
    const double b = an::TmModeFields(mode, r, 0.0, 0.0).Bphi;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    integral += w * b * b * r;
    bmax = std::max(bmax, std::abs(b));
  }
  integral *= (a / n) / 3.0 * 2 * pi * h;
  // Grid max underestimates the true max by O(dr^2); tolerance covers it.
  EXPECT_NEAR(an::Tm010ModeVolume(h, mode.f) / (integral / (bmax * bmax)), 1.0, 1e-6);
}

TEST(Tm010ModeVolume, ApproximateClosedForm)
{
  const double f = 5.74e9;
  const double lambda = c / f;
  EXPECT_NEAR(an::Tm010ModeVolume(0.01, f) / (0.366 * 0.01 * lambda * lambda), 1.0, 3e-3);
  // h = 2 delta limit: V_B -> 0.73 delta lambda^2.
  const double delta = 40e-9;
  EXPECT_NEAR(an::Tm010ModeVolume(2 * delta, f) / (0.73 * delta * lambda * lambda), 1.0, 5e-3);
}

TEST(Tm010ModeVolume, ExactlyLinearInHeight)
{
  const double f = 3.3e9;
  const double v1 = an::Tm010ModeVolume(1e-3, f);
  for (double s : {2.0, 7.0, 13.5})
  {
    EXPECT_NEAR(an::Tm010ModeVolume(s * 1e-3, f) / (s * v1), 1.0, 1e-12);
  }
}

TEST(Tm010GeometricFactor, MatchesFieldIntegralOracle)
{
  const double a = 0.02;
  const double h = 0.01;
  const auto mode = an::CylindricalMode::Make(kTM010, a, h, 1.0);
  const int n = 20000;
  double vol = 0.0;
  double caps = 0.0;
  for (int i = 0; i <= n; i++)
  {
    const double r = a * i / n;
    const double b = an::TmModeFields(mode, r, 0.0, 0.0).Bphi;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    vol += w * b * b * r;
    caps += w * b * b * r;
  }
  vol *= (a / n) / 3.0 * 2 * pi * h;
  caps *= (a / n) / 3.0 * 2 * pi * 2;
  const double bwall = an::TmModeFields(mode, a, 0.0, 0.0).Bphi;
  const double side = bwall * bwall * 2 * pi * a * h;
  const double omega = 2 * pi * mode.f;
  const double G = omega * cf::constants::mu0 * vol / (side + caps);
  EXPECT_NEAR(an::Tm010GeometricFactor(a, h) / G, 1.0, 1e-8);
}

TEST(ReentrantScaling, SingleDivergesMonotonically)
{
  const double a = 0.02;
  double prev = 0.0;
  for (double R = 5e-3; R > 1e-5; R *= 0.5)
  {
    const double s = an::ReentrantFieldScaling(R, a, an::ReentrantVariant::Single);
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST(ReentrantScaling, SingleRatioAtTwoCentimetres)
{
  // (0.0005 ln 40)^-1 / (0.001 ln 20)^-1 evaluated directly.
  const double ratio = an::ReentrantFieldScaling(0.5e-3, 0.02, an::ReentrantVariant::Single) /
                       an::ReentrantFieldScaling(1e-3, 0.02, an::ReentrantVariant::Single);
  EXPECT_NEAR(ratio, 1.6241963505817845, 1e-12);
}

TEST(ReentrantScaling, NarrowGapIsPureInverseLaw)
{
  for (double g : {1e-5, 3e-4, 2e-3})
  {
    EXPECT_NEAR(an::ReentrantFieldScaling(5e-3, g, an::ReentrantVariant::DoubleNarrowGap) /
                    an::ReentrantFieldScaling(5e-3, 2 * g, an::ReentrantVariant::DoubleNarrowGap),
                2.0, 1e-12);
  }
  EXPECT_NEAR(an::ReentrantFieldScaling(0.8e-3, 0.0, an::ReentrantVariant::Tapered), 1250.0, 1e-9);
}

TEST(ReentrantScaling, LogVariantsRejectOuterLengthBelowRadius)
{
  EXPECT_THROW(an::ReentrantFieldScaling(3e-3, 2e-3, an::ReentrantVariant::DoubleWideGap), cf::DomainError);
  EXPECT_THROW(an::ReentrantFieldScaling(3e-3, 3e-3, an::ReentrantVariant::Single), cf::DomainError);
}

TEST(TwoWireCapacitance, EqualGapAndRadius)
{
  const double R = 1e-3;
  EXPECT_NEAR(an::TwoWireCapacitance(R, 2 * R) / (pi * cf::constants::eps0 / 1.3169578969248166), 1.0, 1e-12);
}

TEST(TwoWireCapacitance, WideGapLogLimit)
{
  const double R = 1e-5;
  const double exact = an::TwoWireCapacitance(R, 1000 * R);
  const double approx = pi * cf::constants::eps0 / std::log(1000.0);
  EXPECT_LT(std::abs(exact - approx) / exact, 0.05);
}

TEST(TwoWireCapacitance, DecreasesWithGap)
{
  double prev = std::numeric_limits<double>::infinity();
  for (double g = 1e-6; g < 1e-1; g *= 1.7)
  {
    const double C = an::TwoWireCapacitance(1e-3, g);
    EXPECT_LT(C, prev);
    prev = C;
  }
}

TEST(TwoWireCapacitance, NarrowGapFollowsSquareRootTrend)
{
  // pi eps0 sqrt(R/g) for g << R: ratio approaches a constant (1/sqrt 2 prefactor difference).
  const double R = 1e-3;
  const double r1 = an::TwoWireCapacitance(R, 1e-7) / std::sqrt(R / 1e-7);
  const double r2 = an::TwoWireCapacitance(R, 1e-8) / std::sqrt(R / 1e-8);
  EXPECT_NEAR(r1 / r2, 1.0, 1e-3);
}

TEST(Demagnetization, NoDemagnetizationLeavesFieldUnchanged)
{
  EXPECT_DOUBLE_EQ(an::SurfaceField(1.5e-9, 0.0), 1.5e-9);
}

TEST(Demagnetization, OblateLimitUsesEllipticIntegralAtZero)
{
  // a = b: E(0) = pi/2, so N = 1 - (pi/2) c/b.
  for (double ratio : {1e-1, 1e-2, 1e-4})
  {
    const auto shape = an::EllipsoidShape::Make(1.0, 1.0, ratio);
    EXPECT_NEAR(an::DemagnetizationFactor(shape), 1.0 - (pi / 2) * ratio, 1e-14);
  }
}

TEST(Demagnetization, SurfaceFieldGrowsWithoutBoundAsPlateThins)
{
  double prev = 0.0;
  for (double ratio = 0.1; ratio > 1e-7; ratio *= 0.3)
  {
    const auto shape = an::EllipsoidShape::Make(1.0, 1.0, ratio);
    const double b = an::SurfaceField(1.0, an::DemagnetizationFactor(shape));
    EXPECT_GT(b, prev);
    prev = b;
  }
  EXPECT_GT(prev, 1e6);
}

TEST(Demagnetization, FactorInUnitIntervalForThinEllipsoids)
{
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; i++)
  {
    const double a = 1.0;
    const double b = 0.05 + 0.95 * u(rng);
    const double cc = b * (1e-6 + 0.1 * u(rng));
    const auto shape = an::EllipsoidShape::Make(a, b, cc);
    ASSERT_TRUE(an::ThinEllipsoidRegime(shape));
    const double N = an::DemagnetizationFactor(shape);
    EXPECT_GE(N, 0.0);
    EXPECT_LT(N, 1.0);
  }
}

TEST(Demagnetization, DivergentFactorRejected)
{
  EXPECT_THROW(an::SurfaceField(1.0, 1.0), cf::DomainError);
  EXPECT_THROW(an::EllipsoidShape::Make(1.0, 0.0, 1.0), cf::DomainError);
}
