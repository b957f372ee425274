#include "cavityforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace cavityforge::metrics
{

using std::numbers::pi;

ProbeRule ProbeRule::At(const Vec3 &p)
{
  ProbeRule r;
  r.kind = Kind::Explicit;
  r.point = p;
  return r;
}

ProbeRule ProbeRule::Unrestricted()
{
  ProbeRule r;
  r.post_standoff = 0.0;
  r.plate_standoff = 0.0;
  return r;
}

ProbeRule ProbeRule::Standoff(double post, std::optional<double> plate)
{
  ProbeRule r;
  r.post_standoff = post;
  r.plate_standoff = plate;
  return r;
}

std::string ProbeRule::Describe() const
{
  std::ostringstream os;
  if (kind == Kind::Explicit)
  {
    os << "explicit(" << point[0] << "," << point[1] << "," << point[2] << ")";
  }
  else
  {
    os << "max|B| post>=" << post_standoff << " plate>=";
    if (plate_standoff)
    {
      os << *plate_standoff;
    }
    else
    {
      os << "t/2";
    }
    if (wall_standoff > 0.0)
    {
      os << " wall>=" << wall_standoff;
    }
  }
  return os.str();
}

namespace
{

// Move p along the gradient of the post or plate distance until both
// standoffs hold. On the surface the central difference sees half a slope, so
// the gradient is only normalised. Returns nullopt if p is inside a conductor
// or far off.
std::optional<Vec3> ProjectToStandoff(const geometry::CavityGeometry &geo, Vec3 p, double post, double plate)
{
  const double scale = std::max(geo.params().a, geo.params().h);
  const double step = 1e-7 * scale;
  for (int it = 0; it < 60; it++)
  {
    const auto d = geo.Distance(p);
    if (d.min() <= 0.0 && d.wall > 0.0)
    {
      return std::nullopt;
    }
    double need = 0.0;
    double geometry::ConductorDistance::*member = nullptr;
    if (d.post < post)
    {
      need = post - d.post;
      member = &geometry::ConductorDistance::post;
    }
    else if (d.plate < plate)
    {
      need = plate - d.plate;
      member = &geometry::ConductorDistance::plate;
    }
    else
    {
      return p;
    }
    if (need > 4.0 * std::max(post, plate))
    {
      return std::nullopt;
    }
    Vec3 g{};
    double norm = 0.0;
    for (int a = 0; a < 3; a++)
    {
      Vec3 hi = p, lo = p;
      hi[a] += step;
      lo[a] -= step;
      g[a] = (geo.Distance(hi).*member - geo.Distance(lo).*member) / (2.0 * step);
      norm += g[a] * g[a];
    }
    norm = std::sqrt(norm);
    if (!(norm > 0.25))
    {
      return std::nullopt;
    }
    for (int a = 0; a < 3; a++)
    {
      p[a] += need * (1.0 + 1e-9) * g[a] / norm;
    }
    // Stay inside the can; the next pass recovers what the clamp took away.
    p[2] = std::clamp(p[2], 0.0, geo.params().h);
    const double rho = std::hypot(p[0], p[1]);
    if (rho > geo.params().a)
    {
      p[0] *= geo.params().a / rho;
      p[1] *= geo.params().a / rho;
    }
  }
  return std::nullopt;
}

}  // namespace

ModeVolume ComputeModeVolume(const ModeField &field, const ProbeRule &rule, const geometry::CavityGeometry *geometry)
{
  const double integral = field.VolumeIntegral();
  if (!(integral > 0.0))
  {
    throw DomainError("mode field has no stored magnetic energy");
  }
  ModeVolume out;
  if (rule.kind == ProbeRule::Kind::Explicit)
  {
    if (geometry && !geometry->IsVacuum(rule.point))
    {
      throw DomainError("probe point lies in a conductor");
    }
    if (!field.b2_at)
    {
      throw DomainError("mode field cannot be evaluated at an explicit point");
    }
    const auto b2 = field.b2_at(rule.point);
    if (!b2)
    {
      throw DomainError("probe point lies in a conductor or outside the solved domain");
    }
    out.probe = rule.point;
    out.b2_probe = *b2;
  }
  else
  {
    double plate_standoff = 0.0;
    if (geometry && geometry->plate_box())
    {
      const auto &box = *geometry->plate_box();
      plate_standoff = rule.plate_standoff.value_or(0.5 * (box.hi[1] - box.lo[1]));
    }
    const double tol = 1e-12;
    auto allowed = [&](const geometry::ConductorDistance &d)
    {
      return d.post >= rule.post_standoff * (1 - tol) && d.plate >= plate_standoff * (1 - tol) &&
             d.wall >= rule.wall_standoff * (1 - tol);
    };
    bool found = false;
    auto consider = [&](const Vec3 &p, double b2)
    {
      if (!found || b2 > out.b2_probe)
      {
        out.b2_probe = b2;
        out.probe = p;
        found = true;
      }
    };
    for (const auto &c : field.candidates)
    {
      if (!geometry)
      {
        consider(c.position, c.b2);
        continue;
      }
      const auto d = geometry->Distance(c.position);
      if (allowed(d))
      {
        consider(c.position, c.b2);
      }
      else if (field.b2_at)
      {
        // Push a slightly-too-close candidate out onto the standoff surface so
        // the probe does not depend on where mesh nodes happen to fall.
        if (auto moved = ProjectToStandoff(*geometry, c.position, rule.post_standoff, plate_standoff))
        {
          if (allowed(geometry->Distance(*moved)))
          {
            if (const auto b2 = field.b2_at(*moved))
            {
              consider(*moved, *b2);
            }
          }
        }
      }
    }
    if (!found)
    {
      throw DomainError("no candidate point satisfies the probe standoffs");
    }
  }
  if (!(out.b2_probe > 0.0))
  {
    throw DomainError("field vanishes at the probe point");
  }
  out.V_B = integral / out.b2_probe;
  return out;
}

SinglePhotonField SinglePhoton(double f, double V_B)
{
  if (!(f > 0.0) || !(V_B > 0.0))
  {
    throw DomainError("single-photon field needs positive f and V_B");
  }
  SinglePhotonField s;
  s.B_s = std::sqrt(constants::h_planck * f * constants::mu0 / (2.0 * V_B));
  s.B0 = s.B_s / (f * f);
  return s;
}

double GeometricFactor(const ModeField &field)
{
  if (field.surface.empty())
  {
    throw DomainError("geometric factor needs boundary samples");
  }
  double surf = 0.0;
  for (const auto &s : field.surface)
  {
    surf += s.bt2 * s.area;
  }
  if (!(surf > 0.0))
  {
    throw DomainError("no tangential field on the boundary");
  }
  return 2.0 * pi * field.f * constants::mu0 * field.VolumeIntegral() / surf;
}

double QualityFactor(double G, double surface_resistance)
{
  if (!(G > 0.0) || !(surface_resistance > 0.0))
  {
    throw DomainError("quality factor needs positive G and R_s");
  }
  return G / surface_resistance;
}

double QualityFactor(double G, const Material &material) { return QualityFactor(G, material.surface_resistance); }

double PhotonLifetime(double Q, double f)
{
  if (!(Q > 0.0) || !(f > 0.0))
  {
    throw DomainError("photon lifetime needs positive Q and f");
  }
  return Q / (2.0 * pi * f);
}

ModeMetrics Evaluate(const ModeField &field, const ProbeRule &rule, const Material &material,
                     const geometry::CavityGeometry *geometry)
{
  ModeMetrics m;
  m.f = field.f;
  m.lambda = constants::c / field.f;
  const auto vb = ComputeModeVolume(field, rule, geometry);
  m.V_B = vb.V_B;
  m.probe = vb.probe;
  m.V_B_lambda3 = vb.V_B / std::pow(m.lambda, 3);
  const auto sp = SinglePhoton(m.f, m.V_B);
  m.B_s = sp.B_s;
  m.B0 = sp.B0;
  m.G = GeometricFactor(field);
  m.Q = QualityFactor(m.G, material);
  m.tau = PhotonLifetime(m.Q, m.f);
  return m;
}

void CouplerSpec::Validate() const
{
  switch (kind)
  {
    case Kind::ElectronSpin:
      if (!(gamma > 0.0))
      {
        throw DomainError("spin coupler needs a positive gyromagnetic ratio");
      }
      break;
    case Kind::SpinEnsemble:
      if (!(gamma > 0.0) || N < 1)
      {
        throw DomainError("spin ensemble needs positive gamma and N >= 1");
      }
      break;
    case Kind::FluxQubit:
      if (!(loop_area > 0.0) || !(circulating_current > 0.0))
      {
        throw DomainError("flux qubit needs positive loop area and circulating current");
      }
      break;
  }
  if (dephasing < 0.0)
  {
    throw DomainError("dephasing rate must be non-negative");
  }
}

double CouplingRate(double B_s, const CouplerSpec &coupler)
{
  coupler.Validate();
  if (!(B_s >= 0.0))
  {
    throw DomainError("single-photon field must be non-negative");
  }
  switch (coupler.kind)
  {
    case CouplerSpec::Kind::ElectronSpin:
      return coupler.gamma * B_s;
    case CouplerSpec::Kind::SpinEnsemble:
      return std::sqrt(static_cast<double>(coupler.N)) * coupler.gamma * B_s;
    case CouplerSpec::Kind::FluxQubit:
      return B_s * coupler.loop_area * coupler.circulating_current / constants::h_planck;
  }
  return 0.0;
}

double Cooperativity(double g, double kappa, double dephasing, long long N)
{
  if (!(kappa > 0.0) || !(dephasing > 0.0))
  {
    throw DomainError("cooperativity needs positive kappa and dephasing rates");
  }
  if (g < 0.0 || N < 1)
  {
    throw DomainError("cooperativity needs g >= 0 and N >= 1");
  }
  return 4.0 * static_cast<double>(N) * g * g / (kappa * dephasing);
}

CooperativityReport CooperativityConventions(double g, double f, double Q, double T2_star, long long N)
{
  if (!(f > 0.0) || !(Q > 0.0) || !(T2_star > 0.0))
  {
    throw DomainError("cooperativity conventions need positive f, Q and T2*");
  }
  CooperativityReport r;
  r.kappa = f / Q;
  r.C_pi = Cooperativity(g, r.kappa, 1.0 / (pi * T2_star), N);
  r.C_two_pi = Cooperativity(g, r.kappa, 1.0 / (2.0 * pi * T2_star), N);
  r.C_plain = Cooperativity(g, r.kappa, 1.0 / T2_star, N);
  return r;
}

void DriveSpec::Validate() const
{
  if (!(input_power > 0.0))
  {
    throw DomainError("drive power must be positive");
  }
  if (!(coupling_efficiency > 0.0 && coupling_efficiency <= 1.0))
  {
    throw DomainError("coupling efficiency must lie in (0, 1]");
  }
  if (!(projection > 0.0 && projection <= 1.0))
  {
    throw DomainError("projection factor must lie in (0, 1]");
  }
  if (!(gamma > 0.0))
  {
    throw DomainError("gyromagnetic ratio must be positive");
  }
}

double DbmToWatt(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

namespace
{

double StoredEnergy(const DriveSpec &drive, double f, double Q)
{
  drive.Validate();
  if (!(f > 0.0) || !(Q > 0.0))
  {
    throw DomainError("drive conversion needs positive f and Q");
  }
  return drive.coupling_efficiency * drive.input_power * Q / (2.0 * pi * f);
}

}  // namespace

double RabiFrequency(const DriveSpec &drive, double f, double Q, double V_B)
{
  if (!(V_B > 0.0))
  {
    throw DomainError("mode volume must be positive");
  }
  const double U = StoredEnergy(drive, f, Q);
  const double B = std::sqrt(2.0 * constants::mu0 * U / V_B);
  return 0.5 * drive.gamma * drive.projection * B;
}

double ModeVolumeFromRabi(const DriveSpec &drive, double f, double Q, double rabi)
{
  if (!(rabi > 0.0))
  {
    throw DomainError("Rabi frequency must be positive");
  }
  const double U = StoredEnergy(drive, f, Q);
  const double B = 2.0 * rabi / (drive.gamma * drive.projection);
  return 2.0 * constants::mu0 * U / (B * B);
}

SurfaceData SurfaceFields(const ModeField &field)
{
  SurfaceData d;
  d.samples = field.surface;
  for (const auto &s : field.surface)
  {
    d.net_charge += s.rho * s.area;
    d.charge_scale += std::abs(s.rho) * s.area;
    const double J = std::sqrt(std::norm(s.J[0]) + std::norm(s.J[1]) + std::norm(s.J[2]));
    if (s.conductor == 0)
    {
      d.max_J_can = std::max(d.max_J_can, J);
    }
    else
    {
      d.max_J_inner = std::max(d.max_J_inner, J);
    }
  }
  return d;
}

Extrapolation Richardson(const std::vector<double> &h, const std::vector<double> &values, std::optional<double> order)
{
  if (h.size() != values.size() || h.size() < 2)
  {
    throw DomainError("Richardson extrapolation needs matching h and value lists of length >= 2");
  }
  std::vector<std::size_t> idx(h.size());
  for (std::size_t i = 0; i < idx.size(); i++)
  {
    idx[i] = i;
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return h[a] > h[b]; });
  for (std::size_t i = 0; i < idx.size(); i++)
  {
    if (!(h[idx[i]] > 0.0) || (i > 0 && !(h[idx[i]] < h[idx[i - 1]])))
    {
      throw DomainError("Richardson extrapolation needs distinct positive cell sizes");
    }
  }
  const std::size_t n = idx.size();
  double p = order.value_or(1.0);
  if (!order && n >= 3)
  {
    const double h1 = h[idx[n - 3]], h2 = h[idx[n - 2]], h3 = h[idx[n - 1]];
    const double d12 = values[idx[n - 3]] - values[idx[n - 2]];
    const double d23 = values[idx[n - 2]] - values[idx[n - 1]];
    if (d12 != 0.0 && d23 != 0.0 && (d12 > 0) == (d23 > 0))
    {
      const double target = d12 / d23;
      auto ratio = [&](double q) { return (std::pow(h1, q) - std::pow(h2, q)) / (std::pow(h2, q) - std::pow(h3, q)); };
      double lo = 0.05, hi = 8.0;
      if ((ratio(lo) - target) * (ratio(hi) - target) < 0.0)
      {
        for (int it = 0; it < 200; it++)
        {
          const double mid = 0.5 * (lo + hi);
          if ((ratio(lo) - target) * (ratio(mid) - target) <= 0.0)
          {
            hi = mid;
          }
          else
          {
            lo = mid;
          }
        }
        p = 0.5 * (lo + hi);
      }
    }
  }
  const double ha = h[idx[n - 2]], hb = h[idx[n - 1]];
  const double va = values[idx[n - 2]], vb = values[idx[n - 1]];
  // v = v_inf + C h^p through the two finest points.
  const double C = (va - vb) / (std::pow(ha, p) - std::pow(hb, p));
  Extrapolation e;
  e.order = p;
  e.value = vb - C * std::pow(hb, p);
  e.error_estimate = std::abs(e.value - vb);
  return e;
}

}  // namespace cavityforge::metrics
