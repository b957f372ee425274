#pragma once

#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cavityforge
{

// SI throughout. Frequencies are stored in Hz; angular frequency is derived.
namespace constants
{
inline constexpr double pi = std::numbers::pi;
inline constexpr double c = 299792458.0;                  // m/s (exact)
inline constexpr double mu0 = 1.25663706212e-6;           // H/m (CODATA 2018)
inline constexpr double eps0 = 1.0 / (mu0 * c * c);       // F/m
inline constexpr double h_planck = 6.62607015e-34;        // J s (exact)
inline constexpr double gamma_e = 28.0e9;                 // Hz/T, electron spin
}  // namespace constants

// Raised for non-physical arguments (negative lengths, zero frequency, ...).
class DomainError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

class LookupError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// An iterative solver hit its cap without meeting the requested tolerance.
class ConvergenceError : public std::runtime_error
{
public:
  ConvergenceError(const std::string &message, double residual)
    : std::runtime_error(message), residual_(residual)
  {
  }
  double residual() const { return residual_; }

private:
  double residual_;
};

struct FrequencyPoint
{
  double f = 0.0;       // Hz
  double omega = 0.0;   // rad/s
  double lambda = 0.0;  // m

  static FrequencyPoint FromFrequency(double f);
  static FrequencyPoint FromWavelength(double lambda);
};

enum class Condition
{
  Cryogenic,
  Room
};

std::string_view ToString(Condition condition);
Condition ConditionFromString(std::string_view name);

struct Material
{
  std::string name;
  double surface_resistance = 0.0;  // Ohm
  double conductivity = 0.0;        // S/m, 0 when not meaningful (superconductor)
  double penetration_depth = 0.0;   // m
  std::optional<double> gap_frequency;  // Hz, superconductors only

  // True when a mode at f would sit at or above the superconducting gap.
  bool AboveGap(double f) const { return gap_frequency && f >= *gap_frequency; }
};

// Classical skin depth (pi f sigma mu0)^(-1/2). Returns 0 for infinite conductivity.
double SkinDepth(double f, double conductivity);

// Built-in table: Nb and Cu. Overrides registered with SetMaterialOverride take
// precedence, which is how run configs swap in measured R_s values.
Material LookupMaterial(std::string_view name, Condition condition);
void SetMaterialOverride(const Material &material, Condition condition);
void ClearMaterialOverrides();

}  // namespace cavityforge
