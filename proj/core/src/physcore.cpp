#include "cavityforge/physcore.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <utility>

namespace cavityforge
{

namespace
{

// Annealed OFHC copper at room temperature.
constexpr double kCopperConductivity = 5.8e7;

std::mutex &OverrideMutex()
{
  static std::mutex m;
  return m;
}

std::map<std::pair<std::string, Condition>, Material> &Overrides()
{
  static std::map<std::pair<std::string, Condition>, Material> table;
  return table;
}

}  // namespace

FrequencyPoint FrequencyPoint::FromFrequency(double f)
{
  if (!(f > 0.0) || !std::isfinite(f))
  {
    throw DomainError("frequency must be positive and finite");
  }
  return {f, 2.0 * constants::pi * f, constants::c / f};
}

FrequencyPoint FrequencyPoint::FromWavelength(double lambda)
{
  if (!(lambda > 0.0) || !std::isfinite(lambda))
  {
    throw DomainError("wavelength must be positive and finite");
  }
  return FromFrequency(constants::c / lambda);
}

std::string_view ToString(Condition condition)
{
  return condition == Condition::Cryogenic ? "cryogenic" : "room";
}

Condition ConditionFromString(std::string_view name)
{
  if (name == "cryogenic" || name == "cryo")
  {
    return Condition::Cryogenic;
  }
  if (name == "room")
  {
    return Condition::Room;
  }
  throw LookupError("unknown operating condition '" + std::string(name) + "'");
}

double SkinDepth(double f, double conductivity)
{
  if (!(f > 0.0) || !(conductivity > 0.0))
  {
    throw DomainError("skin depth needs f > 0 and conductivity > 0");
  }
  if (std::isinf(conductivity))
  {
    return 0.0;
  }
  return 1.0 / std::sqrt(constants::pi * f * conductivity * constants::mu0);
}

Material LookupMaterial(std::string_view name, Condition condition)
{
  {
    std::lock_guard lock(OverrideMutex());
    auto it = Overrides().find({std::string(name), condition});
    if (it != Overrides().end())
    {
      return it->second;
    }
  }
  if (name == "Nb")
  {
    if (condition != Condition::Cryogenic)
    {
      throw LookupError("Nb is only tabulated in the superconducting (cryogenic) state");
    }
    // Pessimistic end of the 1-10 nOhm residual-resistance range.
    return {"Nb", 10e-9, 0.0, 40e-9, 725e9};
  }
  if (name == "Cu")
  {
    // Skin depth is tabulated at 1 GHz; callers needing another frequency use SkinDepth.
    const double delta = SkinDepth(1e9, kCopperConductivity);
    if (condition == Condition::Cryogenic)
    {
      // Order-of-magnitude value near 1 K.
      return {"Cu", 1e-3, kCopperConductivity, delta, std::nullopt};
    }
    return {"Cu", 15.1e-3, kCopperConductivity, delta, std::nullopt};
  }
  throw LookupError("unknown material '" + std::string(name) + "'");
}

void SetMaterialOverride(const Material &material, Condition condition)
{
  if (!(material.surface_resistance > 0.0) || !(material.penetration_depth > 0.0))
  {
    throw DomainError("material override needs positive surface resistance and penetration depth");
  }
  std::lock_guard lock(OverrideMutex());
  Overrides()[{material.name, condition}] = material;
}

void ClearMaterialOverrides()
{
  std::lock_guard lock(OverrideMutex());
  Overrides().clear();
}

}  // namespace cavityforge
