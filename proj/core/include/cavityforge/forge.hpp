#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>
#include <nlohmann/json.hpp>

#include "cavityforge/geometry.hpp"
#include "cavityforge/metrics.hpp"

// Run configuration, sweeps, the trade-off table and the result cache.
namespace cavityforge::forge
{

// Schema violation; `key` is the dotted path of the offending entry.
class ConfigError : public std::runtime_error
{
public:
  ConfigError(std::string key, const std::string &message)
    : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key))
  {
  }
  const std::string &key() const { return key_; }

private:
  std::string key_;
};

enum class Solver
{
  Analytic,
  Axisym,
  Fdtd3d,
  Auto
};

std::string_view ToString(Solver solver);
Solver SolverFromString(std::string_view name);

// One swept geometry key (dotted path into the geometry document).
struct SweepAxis
{
  std::string key;
  std::vector<double> values;
};

// Cell sizes fine / r for every refinement r; more than one level turns on
// Richardson extrapolation.
struct Resolution
{
  double fine = 1e-3;
  double coarse = 1e-3;
  double growth = 1.3;
  std::vector<double> refinements{1.0};
};

struct MaterialChoice
{
  std::string name = "Nb";
  Condition condition = Condition::Cryogenic;
  std::optional<double> surface_resistance;  // overrides the table
};

struct FdtdSettings
{
  double f_lo = 0.0;  // search band, Hz
  double f_hi = 0.0;
  std::optional<double> f_target;  // pick the mode nearest this; default the strongest
  double periods = 30.0;           // ring-down length in periods of f_lo
  std::string symmetry = "auto";   // "auto" or "none"
};

struct RunConfig
{
  std::string name;
  nlohmann::json geometry;  // geometry document (see geometry::CavityGeometry::FromJson)
  std::vector<SweepAxis> sweep;
  Solver solver = Solver::Auto;
  Resolution resolution;
  MaterialChoice material;
  metrics::ProbeRule probe = metrics::ProbeRule::Unrestricted();
  FdtdSettings fdtd;
  std::string out;
  std::string format = "csv";
  std::uint64_t seed = 1;

  nlohmann::json ToJson() const;
};

// Validates and fills defaults. Unknown keys are rejected.
RunConfig ParseConfig(const nlohmann::json &document);
RunConfig LoadConfig(const std::filesystem::path &path);

// The concrete geometries of a sweep, in canonical order.
std::vector<nlohmann::json> ExpandSweep(const RunConfig &config);

// Auto picks axisym for bodies of revolution and fdtd3d otherwise.
Solver ResolveSolver(Solver requested, const geometry::CavityGeometry &geometry);

struct Level
{
  double h = 0.0;  // fine cell size
  double f = 0.0;
  double V_B = 0.0;  // m^3
  double V_B_lambda3 = 0.0;
  double G = 0.0;
  Vec3 probe{};
};

struct Row
{
  std::string family;
  nlohmann::json geometry;
  std::string solver;
  std::string resolution;  // "fine/coarse x refinements"
  bool extrapolated = false;
  bool ok = false;
  std::string error;

  double f = 0.0;
  double V_B_lambda3 = 0.0;
  double G = 0.0;
  double Q = 0.0;  // configured material
  double Q_Nb = 0.0;
  double Q_Cu = 0.0;
  double B_s = 0.0;
  double B0 = 0.0;
  double f_error = 0.0;  // Richardson error estimates (0 for one level)
  double V_B_error = 0.0;
  double G_error = 0.0;
  std::vector<Level> levels;

  nlohmann::json ToJson() const;
  static Row FromJson(const nlohmann::json &j);
};

struct SweepResult
{
  std::vector<Row> rows;
  nlohmann::json manifest;  // config, config hash, seed, version

  std::size_t failures() const;
};

class Cache;

struct SweepOptions
{
  int parallel = 1;
  Cache *cache = nullptr;
  std::function<void(const std::string &)> log;
};

// Solves one geometry. Errors are captured in the row.
Row SolvePoint(const RunConfig &config, const nlohmann::json &geometry);

// Mode field at the finest refinement level (axisym or fdtd3d only).
ModeField SolveField(const RunConfig &config, const nlohmann::json &geometry);

// Evaluates every point. Throws std::runtime_error when every point failed.
SweepResult RunSweep(const RunConfig &config, const SweepOptions &options = {});

// Trade-off table. Columns: family, the geometry parameters, then f_Hz,
// VB_over_lambda3, G_ohm, Q_Nb, Q_Cu, Bs_T, B0_T_per_Hz2.
const std::vector<std::string> &TradeoffColumns();
void EmitTradeoff(const SweepResult &result, const std::filesystem::path &path, const std::string &format);
std::vector<Row> LoadTradeoff(const std::filesystem::path &path);

std::uint64_t Fnv1a(std::string_view data);
std::string HexDigest(std::uint64_t h);

// Result store keyed by the hash of the canonical point description.
class Cache
{
public:
  explicit Cache(std::filesystem::path dir);

  static nlohmann::json Key(const RunConfig &config, const nlohmann::json &geometry);
  std::optional<Row> Lookup(const nlohmann::json &key);
  void Store(const nlohmann::json &key, const Row &row);

  std::vector<std::filesystem::path> List() const;
  std::size_t Clear();
  const std::vector<std::string> &warnings() const { return warnings_; }
  const std::filesystem::path &dir() const { return dir_; }

private:
  std::filesystem::path dir_;
  std::vector<std::string> warnings_;
};

// Field dump in the exchange format: a JSON document with the sampled |B|^2
// volume points and the surface samples.
nlohmann::json FieldDump(const ModeField &field, const nlohmann::json &geometry);

}  // namespace cavityforge::forge
