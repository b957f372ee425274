#pragma once

#include <array>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cavityforge/geometry.hpp"

namespace cavityforge
{

using geometry::Vec3;
using CVec3 = std::array<std::complex<double>, 3>;

// Quadrature point of the volume integral. weight already includes the
// measure (2*pi*r dr dz for axisymmetric solutions, dx dy dz for 3-D ones).
struct VolumeSample
{
  Vec3 position;
  double b2 = 0.0;  // |B|^2, T^2
  double weight = 0.0;
};

// Candidate dipole location with its field strength.
struct ProbeCandidate
{
  Vec3 position;
  double b2 = 0.0;
};

struct SurfaceSample
{
  Vec3 position;
  Vec3 normal;  // unit, out of the conductor into vacuum
  double area = 0.0;
  double bt2 = 0.0;  // |B_tangential|^2
  CVec3 J{};         // n x H, A/m
  std::complex<double> rho{};  // n . eps0 E, C/m^2
  int conductor = 0;           // 0 outer can, 1.. posts, -1 plate
};

// Mode data in the form the metrics need, independent of which solver made it.
// Volume samples may cover a symmetry-reduced domain and multiplicity restores
// the full integral. Surface samples always cover every conductor, mirrored
// with the proper parity, so charge and current sums need no correction.
struct ModeField
{
  double f = 0.0;
  std::vector<VolumeSample> volume;
  std::vector<ProbeCandidate> candidates;
  std::vector<SurfaceSample> surface;
  double multiplicity = 1.0;
  // |B|^2 at an arbitrary vacuum point; empty if the solver cannot interpolate.
  std::function<std::optional<double>(const Vec3 &)> b2_at;
  std::string solver;

  double VolumeIntegral() const
  {
    double s = 0.0;
    for (const auto &v : volume)
    {
      s += v.b2 * v.weight;
    }
    return multiplicity * s;
  }
};

}  // namespace cavityforge
