#pragma once

// Closed-form cylindrical-cavity results. These are the oracles the numerical
// solvers are checked against, so nothing here depends on a grid.

#include <string_view>

namespace cavityforge::analytic
{

enum class ModeFamily
{
  TM,
  TE
};

struct ModeIndex
{
  int m = 0;  // azimuthal
  int n = 1;  // radial
  int p = 0;  // longitudinal
  ModeFamily family = ModeFamily::TM;

  // Throws DomainError: m >= 0, n >= 1, p >= 0 (p >= 1 for TE).
  void Validate() const;
};

// Cutoff wavenumber zero: j_mn for TM, j'_mn for TE.
double CutoffZero(const ModeIndex &index);

// c sqrt((x_mn/a)^2 + (p pi/h)^2) / 2 pi. h is unused when p == 0.
double ResonanceFrequency(const ModeIndex &index, double a, double h);

struct CylindricalMode
{
  ModeIndex index;
  double a = 0.0;
  double h = 0.0;
  double f = 0.0;
  double E0 = 1.0;  // V/m

  static CylindricalMode Make(const ModeIndex &index, double a, double h, double E0 = 1.0);
};

// Peak-phasor amplitudes of a TM_mnp mode. The magnetic field lags the
// electric field by a quarter period; the i is dropped.
struct TmFieldSample
{
  double Er = 0.0;
  double Ephi = 0.0;
  double Ez = 0.0;
  double Br = 0.0;
  double Bphi = 0.0;
};

// Throws DomainError for TE modes or points outside 0 <= r <= a, 0 <= z <= h.
TmFieldSample TmModeFields(const CylindricalMode &mode, double r, double phi, double z);

// max_x |J'_0(x)| on [0, j01), attained at x = j'_11.
double MaxAbsJ0Prime();

// Magnetic mode volume of TM010 with the dipole at the |B| maximum:
// 2 pi h (j01/k)^2 (J1(j01)^2/2) / max|J'_0|^2, approximately 0.366 h lambda^2.
double Tm010ModeVolume(double h, double f);

// Closed-form geometric factor of TM010 (Ohm), from the volume and wall integrals.
double Tm010GeometricFactor(double a, double h);

enum class ReentrantVariant
{
  Single,           // (R ln(a/R))^-1
  DoubleWideGap,    // (R ln(g/R))^-1, g >> R
  DoubleNarrowGap,  // 1/g, R >> g
  Tapered           // 1/R'
};

ReentrantVariant ReentrantVariantFromString(std::string_view name);

// Relative maximum-field scale. The first argument is the reentrance radius R
// (R' for Tapered); the second is a (Single), g (DoubleWideGap, DoubleNarrowGap)
// and is ignored for Tapered.
double ReentrantFieldScaling(double R, double a_or_g, ReentrantVariant variant);

// Two-wire line capacitance per unit length: pi eps0 / arccosh((g + 2R)/(2R)).
double TwoWireCapacitance(double R, double g);

struct EllipsoidShape
{
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  // Sorts the half-axes to a >= b >= c; throws for non-positive axes.
  static EllipsoidShape Make(double x, double y, double z);
};

// N = 1 - E(sqrt(1 - b^2/a^2)) c/b, the thin-ellipsoid (a >= b >> c) form.
// Clamped to [0, 1) is NOT applied; callers get the formula value.
double DemagnetizationFactor(const EllipsoidShape &shape);

// True when the thin-ellipsoid form is in its validity range (c <= b / 10).
bool ThinEllipsoidRegime(const EllipsoidShape &shape);

// B0 / (1 - N). Throws DomainError when N >= 1 or N < 0.
double SurfaceField(double B0, double N);

}  // namespace cavityforge::analytic
