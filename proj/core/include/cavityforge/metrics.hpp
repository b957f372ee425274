#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "cavityforge/geometry.hpp"
#include "cavityforge/mode_field.hpp"
#include "cavityforge/physcore.hpp"

namespace cavityforge::metrics
{

// Where the dipole sits. MaxWithStandoff searches the solver's candidate
// points for the largest |B| that keeps the stated distances from conductors.
struct ProbeRule
{
  enum class Kind
  {
    Explicit,
    MaxWithStandoff
  };
  Kind kind = Kind::MaxWithStandoff;
  Vec3 point{};
  double post_standoff = 50e-6;
  std::optional<double> plate_standoff;  // default: half the plate thickness
  double wall_standoff = 0.0;

  static ProbeRule At(const Vec3 &p);
  static ProbeRule Unrestricted();
  static ProbeRule Standoff(double post, std::optional<double> plate = std::nullopt);
  std::string Describe() const;
};

struct ModeVolume
{
  double V_B = 0.0;  // m^3
  Vec3 probe{};
  double b2_probe = 0.0;
};

ModeVolume ComputeModeVolume(const ModeField &field, const ProbeRule &rule,
                             const geometry::CavityGeometry *geometry = nullptr);

struct SinglePhotonField
{
  double B_s = 0.0;  // T
  double B0 = 0.0;   // T/Hz^2
};

SinglePhotonField SinglePhoton(double f, double V_B);

double GeometricFactor(const ModeField &field);
double QualityFactor(double G, const Material &material);
double QualityFactor(double G, double surface_resistance);
double PhotonLifetime(double Q, double f);

struct ModeMetrics
{
  double f = 0.0;
  double lambda = 0.0;
  double V_B = 0.0;
  double V_B_lambda3 = 0.0;
  double B_s = 0.0;
  double B0 = 0.0;
  double G = 0.0;
  double Q = 0.0;
  double tau = 0.0;
  Vec3 probe{};
};

ModeMetrics Evaluate(const ModeField &field, const ProbeRule &rule, const Material &material,
                     const geometry::CavityGeometry *geometry = nullptr);

struct CouplerSpec
{
  enum class Kind
  {
    ElectronSpin,
    SpinEnsemble,
    FluxQubit
  };
  Kind kind = Kind::ElectronSpin;
  double gamma = constants::gamma_e;  // Hz/T
  long long N = 1;
  double loop_area = 0.0;          // m^2
  double circulating_current = 0.0;  // A
  double dephasing = 0.0;          // Hz, optional

  void Validate() const;
};

// Coupling rate in Hz.
double CouplingRate(double B_s, const CouplerSpec &coupler);

// C = 4 N g^2 / (kappa * dephasing), all ordinary-frequency Hz.
double Cooperativity(double g, double kappa, double dephasing, long long N = 1);

// The same C under the dephasing conventions in use: gamma* = 1/(pi T2*)
// (primary), 1/(2 pi T2*) and 1/T2*, with kappa = f/Q.
struct CooperativityReport
{
  double kappa = 0.0;
  double C_pi = 0.0;
  double C_two_pi = 0.0;
  double C_plain = 0.0;
};

CooperativityReport CooperativityConventions(double g, double f, double Q, double T2_star, long long N = 1);

struct DriveSpec
{
  double input_power = 0.0;         // W
  double coupling_efficiency = 1.0;  // eta in (0, 1]
  double projection = 1.0;           // p in (0, 1]
  double gamma = constants::gamma_e;

  void Validate() const;
};

double DbmToWatt(double dbm);

// Rabi frequency (Hz) for a steady drive: U = eta P Q / omega,
// B = sqrt(2 mu0 U / V_B), Omega = gamma p B / 2.
double RabiFrequency(const DriveSpec &drive, double f, double Q, double V_B);
double ModeVolumeFromRabi(const DriveSpec &drive, double f, double Q, double rabi);

struct SurfaceData
{
  std::vector<SurfaceSample> samples;
  std::complex<double> net_charge{};  // integral of rho_s over all conductors
  double charge_scale = 0.0;          // integral of |rho_s|
  double max_J_can = 0.0;
  double max_J_inner = 0.0;           // reentrances and plates
};

SurfaceData SurfaceFields(const ModeField &field);

// Richardson extrapolation of values computed at cell sizes h (any order).
// With three or more points the order is fitted from the finest three;
// with two, `order` is used.
struct Extrapolation
{
  double value = 0.0;
  double order = 0.0;
  double error_estimate = 0.0;  // |extrapolated - finest|
};

Extrapolation Richardson(const std::vector<double> &h, const std::vector<double> &values,
                         std::optional<double> order = std::nullopt);

}  // namespace cavityforge::metrics
