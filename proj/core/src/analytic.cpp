#include "cavityforge/analytic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include "cavityforge/physcore.hpp"
#include "cavityforge/special.hpp"

namespace cavityforge::analytic
{

using constants::pi;

void ModeIndex::Validate() const
{
  if (m < 0 || n < 1 || p < 0)
  {
    throw DomainError("mode index needs m >= 0, n >= 1, p >= 0");
  }
  if (family == ModeFamily::TE && p < 1)
  {
    throw DomainError("TE modes of a closed cylinder need p >= 1");
  }
}

double CutoffZero(const ModeIndex &index)
{
  index.Validate();
  return index.family == ModeFamily::TM ? special::BesselJZero(index.m, index.n)
                                        : special::BesselJPrimeZero(index.m, index.n);
}

double ResonanceFrequency(const ModeIndex &index, double a, double h)
{
  if (!(a > 0.0))
  {
    throw DomainError("cavity radius must be positive");
  }
  if (index.p != 0 && !(h > 0.0))
  {
    throw DomainError("cavity height must be positive");
  }
  const double kc = CutoffZero(index) / a;
  const double kz = index.p == 0 ? 0.0 : index.p * pi / h;
  return constants::c * std::sqrt(kc * kc + kz * kz) / (2.0 * pi);
}

CylindricalMode CylindricalMode::Make(const ModeIndex &index, double a, double h, double E0)
{
  if (!(h > 0.0))
  {
    throw DomainError("cavity height must be positive");
  }
  return {index, a, h, ResonanceFrequency(index, a, h), E0};
}

TmFieldSample TmModeFields(const CylindricalMode &mode, double r, double phi, double z)
{
  if (mode.index.family != ModeFamily::TM)
  {
    throw DomainError("TmModeFields called with a TE mode");
  }
  const double tol = 1e-12 * std::max(mode.a, mode.h);
  if (r < -tol || r > mode.a + tol || z < -tol || z > mode.h + tol)
  {
    throw DomainError("field point lies outside the cavity");
  }
  r = std::clamp(r, 0.0, mode.a);
  const int m = mode.index.m;
  const int p = mode.index.p;
  const double kc = CutoffZero(mode.index) / mode.a;
  const double kz = p * pi / mode.h;
  const double omega = 2.0 * pi * mode.f;
  const double x = kc * r;
  const double Jm = special::BesselJ(m, x);
  const double dJm = special::BesselJPrime(m, x);
  const double cm = std::cos(m * phi);
  const double sm = std::sin(m * phi);
  const double cz = std::cos(kz * z);
  const double sz = std::sin(kz * z);
  // J_m(kc r)/(kc r) is finite on the axis: 1/2 for m = 1, 0 otherwise.
  const double Jm_over_x = x > 1e-12 ? Jm / x : (m == 1 ? 0.5 : 0.0);

  TmFieldSample s;
  s.Ez = mode.E0 * Jm * cm * cz;
  s.Er = -mode.E0 * (kz / kc) * dJm * cm * sz;
  s.Ephi = mode.E0 * (kz / kc) * m * Jm_over_x * sm * sz;
  // B = -(i/omega) curl E; omega eps0 mu0 / kc reduces to kc/omega when p = 0.
  const double scale = omega / (constants::c * constants::c * kc);
  s.Bphi = mode.E0 * scale * dJm * cm * cz;
  s.Br = -mode.E0 * scale * m * Jm_over_x * sm * cz;
  return s;
}

double MaxAbsJ0Prime()
{
  static const double value = std::abs(special::BesselJ(1, special::BesselJPrimeZero(1, 1)));
  return value;
}

double Tm010ModeVolume(double h, double f)
{
  if (!(h > 0.0) || !(f > 0.0))
  {
    throw DomainError("TM010 mode volume needs h > 0 and f > 0");
  }
  const double j01 = special::BesselJZero(0, 1);
  const double k = 2.0 * pi * f / constants::c;
  const double radial_integral = 0.5 * std::pow(special::BesselJ(1, j01), 2);  // int_0^1 x J0^2
  const double jmax = MaxAbsJ0Prime();
  return 2.0 * pi * h * std::pow(j01 / k, 2) * radial_integral / (jmax * jmax);
}

double Tm010GeometricFactor(double a, double h)
{
  if (!(a > 0.0) || !(h > 0.0))
  {
    throw DomainError("geometric factor needs a > 0 and h > 0");
  }
  // Volume: int |B|^2 dV ~ 2 pi h a^2 J1(j01)^2 / 2.
  // Walls: side 2 pi a h J1(j01)^2, two end caps 2 * 2 pi a^2 J1(j01)^2 / 2.
  const double j01 = special::BesselJZero(0, 1);
  const double omega = constants::c * j01 / a;
  const double volume = pi * h * a * a;
  const double surface = 2.0 * pi * a * h + 2.0 * pi * a * a;
  return omega * constants::mu0 * volume / surface;
}

ReentrantVariant ReentrantVariantFromString(std::string_view name)
{
  if (name == "single")
  {
    return ReentrantVariant::Single;
  }
  if (name == "double_wide_gap")
  {
    return ReentrantVariant::DoubleWideGap;
  }
  if (name == "double_narrow_gap")
  {
    return ReentrantVariant::DoubleNarrowGap;
  }
  if (name == "tapered")
  {
    return ReentrantVariant::Tapered;
  }
  throw DomainError("unknown reentrant variant '" + std::string(name) + "'");
}

double ReentrantFieldScaling(double R, double a_or_g, ReentrantVariant variant)
{
  if (!(R > 0.0))
  {
    throw DomainError("reentrance radius must be positive");
  }
  switch (variant)
  {
    case ReentrantVariant::Single:
    case ReentrantVariant::DoubleWideGap:
      if (!(a_or_g > R))
      {
        throw DomainError("logarithmic scaling needs the outer length to exceed R");
      }
      return 1.0 / (R * std::log(a_or_g / R));
    case ReentrantVariant::DoubleNarrowGap:
      if (!(a_or_g > 0.0))
      {
        throw DomainError("gap must be positive");
      }
      return 1.0 / a_or_g;
    case ReentrantVariant::Tapered:
      return 1.0 / R;
  }
  throw DomainError("unhandled reentrant variant");
}

double TwoWireCapacitance(double R, double g)
{
  if (!(R > 0.0) || !(g > 0.0))
  {
    throw DomainError("two-wire capacitance needs R > 0 and g > 0");
  }
  return pi * constants::eps0 / std::acosh((g + 2.0 * R) / (2.0 * R));
}

EllipsoidShape EllipsoidShape::Make(double x, double y, double z)
{
  if (!(x > 0.0) || !(y > 0.0) || !(z > 0.0))
  {
    throw DomainError("ellipsoid half-axes must be positive");
  }
  std::array<double, 3> axes{x, y, z};
  std::sort(axes.begin(), axes.end(), std::greater<>());
  return {axes[0], axes[1], axes[2]};
}

double DemagnetizationFactor(const EllipsoidShape &shape)
{
  if (!(shape.c > 0.0) || shape.a < shape.b || shape.b < shape.c)
  {
    throw DomainError("ellipsoid axes must satisfy a >= b >= c > 0");
  }
  const double k = std::sqrt(1.0 - (shape.b * shape.b) / (shape.a * shape.a));
  return 1.0 - special::EllipticE(k) * shape.c / shape.b;
}

bool ThinEllipsoidRegime(const EllipsoidShape &shape) { return shape.c <= 0.1 * shape.b; }

double SurfaceField(double B0, double N)
{
  if (N >= 1.0)
  {
    throw DomainError("demagnetization factor >= 1: surface field diverges");
  }
  if (N < 0.0)
  {
    throw DomainError("demagnetization factor must be non-negative");
  }
  return B0 / (1.0 - N);
}

}  // namespace cavityforge::analytic
