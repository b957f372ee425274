#include "cavityforge/forge.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "cavityforge/analytic.hpp"
#include "cavityforge/axisym.hpp"
#include "cavityforge/fdtd3d.hpp"
#include "cavityforge/physcore.hpp"

namespace cavityforge::forge
{

namespace fs = std::filesystem;
using geometry::BoundaryKind;
using geometry::CavityGeometry;
using geometry::Family;
using nlohmann::json;

namespace
{

constexpr const char *kVersion = "cavityforge 0.1.0";

void RejectUnknown(const json &j, std::initializer_list<const char *> allowed, const std::string &path)
{
  for (auto it = j.begin(); it != j.end(); ++it)
  {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char *k) { return it.key() == k; }) ==
        allowed.end())
    {
      throw ConfigError(path + it.key(), "unknown key");
    }
  }
}

double Number(const json &j, const std::string &key, const std::string &path)
{
  if (!j.at(key).is_number())
  {
    throw ConfigError(path + key, "expected a number");
  }
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v))
  {
    throw ConfigError(path + key, "must be finite");
  }
  return v;
}

double Positive(const json &j, const std::string &key, const std::string &path)
{
  const double v = Number(j, key, path);
  if (!(v > 0.0))
  {
    throw ConfigError(path + key, "must be positive");
  }
  return v;
}

json *Resolve(json &doc, const std::string &dotted)
{
  json *node = &doc;
  std::size_t start = 0;
  while (true)
  {
    const std::size_t dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object())
    {
      return nullptr;
    }
    node = &(*node)[part];
    if (dot == std::string::npos)
    {
      return node;
    }
    start = dot + 1;
  }
}

// True when the dotted key already holds a number in the document.
bool Names(const json &doc, const std::string &dotted)
{
  const json *node = &doc;
  std::size_t start = 0;
  while (true)
  {
    const std::size_t dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part))
    {
      return false;
    }
    node = &node->at(part);
    if (dot == std::string::npos)
    {
      return node->is_number();
    }
    start = dot + 1;
  }
}

CavityGeometry BuildGeometry(const json &doc)
{
  try
  {
    return CavityGeometry::FromJson(doc);
  }
  catch (const geometry::GeometryError &e)
  {
    throw ConfigError("geometry", e.what());
  }
  catch (const json::exception &e)
  {
    throw ConfigError("geometry", e.what());
  }
}

std::string ShortestDouble(double v)
{
  if (!std::isfinite(v))
  {
    return "nan";
  }
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

json ProbeToJson(const metrics::ProbeRule &p)
{
  json j;
  switch (p.kind)
  {
    case metrics::ProbeRule::Kind::Explicit:
      j["rule"] = "point";
      j["point"] = p.point;
      break;
    case metrics::ProbeRule::Kind::MaxWithStandoff:
      if (p.post_standoff == 0.0 && p.plate_standoff.value_or(-1.0) == 0.0 && p.wall_standoff == 0.0)
      {
        j["rule"] = "unrestricted";
        break;
      }
      j["rule"] = "standoff";
      j["post_standoff"] = p.post_standoff;
      if (p.plate_standoff)
      {
        j["plate_standoff"] = *p.plate_standoff;
      }
      j["wall_standoff"] = p.wall_standoff;
      break;
  }
  return j;
}

metrics::ProbeRule ProbeFromJson(const json &j)
{
  const std::string path = "probe.";
  if (!j.is_object())
  {
    throw ConfigError("probe", "expected an object");
  }
  RejectUnknown(j, {"rule", "point", "post_standoff", "plate_standoff", "wall_standoff"}, path);
  const std::string rule = j.value("rule", "unrestricted");
  if (rule == "unrestricted")
  {
    RejectUnknown(j, {"rule"}, path);
    return metrics::ProbeRule::Unrestricted();
  }
  if (rule == "point")
  {
    RejectUnknown(j, {"rule", "point"}, path);
    if (!j.contains("point") || !j.at("point").is_array() || j.at("point").size() != 3)
    {
      throw ConfigError(path + "point", "expected [x, y, z]");
    }
    return metrics::ProbeRule::At(j.at("point").get<Vec3>());
  }
  if (rule == "standoff")
  {
    RejectUnknown(j, {"rule", "post_standoff", "plate_standoff", "wall_standoff"}, path);
    auto p = metrics::ProbeRule::Standoff(j.contains("post_standoff") ? Number(j, "post_standoff", path) : 50e-6);
    if (j.contains("plate_standoff"))
    {
      p.plate_standoff = Number(j, "plate_standoff", path);
    }
    if (j.contains("wall_standoff"))
    {
      p.wall_standoff = Number(j, "wall_standoff", path);
    }
    if (p.post_standoff < 0.0 || p.wall_standoff < 0.0 || (p.plate_standoff && *p.plate_standoff < 0.0))
    {
      throw ConfigError("probe", "standoffs must be non-negative");
    }
    return p;
  }
  throw ConfigError(path + "rule", "expected unrestricted, standoff or point");
}

Material ChosenMaterial(const MaterialChoice &m)
{
  Material mat = LookupMaterial(m.name, m.condition);
  if (m.surface_resistance)
  {
    mat.surface_resistance = *m.surface_resistance;
  }
  return mat;
}

// Mirror planes for the mode each family is studied for: TM010-like modes
// for cylinders, reentrants and plates, the antisymmetric mode for doubly
// reentrant cavities (opposite post currents, so a PEC plane at x = 0).
geometry::ResolutionSpec Symmetrized(const CavityGeometry &g, geometry::ResolutionSpec spec, bool reduce)
{
  if (!reduce)
  {
    return spec;
  }
  const auto &p = g.params();
  geometry::Box box{{-p.a, -p.a, 0.0}, {p.a, p.a, p.h}};
  auto &b = spec.boundary;
  const Family host = g.family() == Family::PlateLoaded ? p.host : g.family();
  switch (host)
  {
    case Family::Cylinder:
      box.lo[1] = 0.0;
      b[1][0] = BoundaryKind::PmcSymmetry;
      if (g.family() == Family::Cylinder)
      {
        box.lo[0] = 0.0;
        b[0][0] = BoundaryKind::PmcSymmetry;
      }
      break;
    case Family::Reentrant:
    case Family::TaperedReentrant:
      box.lo[1] = 0.0;
      b[1][0] = BoundaryKind::PmcSymmetry;
      if (g.family() != Family::PlateLoaded)
      {
        box.lo[0] = 0.0;
        b[0][0] = BoundaryKind::PmcSymmetry;
      }
      break;
    case Family::DoublyReentrant:
    case Family::TaperedDoublyReentrant:
      box.lo[1] = 0.0;
      b[1][0] = BoundaryKind::PmcSymmetry;
      if (g.family() != Family::PlateLoaded)
      {
        box.lo[0] = 0.0;
        b[0][0] = BoundaryKind::PecSymmetry;
      }
      break;
    case Family::PlateLoaded:
      break;
  }
  // Posts break the z mirror; a plate keeps it only when centred.
  const bool z_mirror =
      host == Family::Cylinder &&
      (g.family() == Family::Cylinder || !p.plate->z_center || std::abs(*p.plate->z_center - 0.5 * p.h) < 1e-12);
  if (z_mirror)
  {
    box.hi[2] = 0.5 * p.h;
    b[2][1] = BoundaryKind::PecSymmetry;
  }
  spec.domain = box;
  return spec;
}

Level Measure(const ModeField &field, const RunConfig &config, const CavityGeometry &g, double h)
{
  const auto m = metrics::Evaluate(field, config.probe, ChosenMaterial(config.material), &g);
  Level l;
  l.h = h;
  l.f = m.f;
  l.V_B = m.V_B;
  l.V_B_lambda3 = m.V_B_lambda3;
  l.G = m.G;
  l.probe = m.probe;
  return l;
}

Level SolveAnalytic(const CavityGeometry &g)
{
  if (g.family() != Family::Cylinder)
  {
    throw geometry::UnsupportedGeometry("the analytic solver covers plain cylinders only");
  }
  const auto &p = g.params();
  Level l;
  l.f = analytic::ResonanceFrequency({0, 1, 0, analytic::ModeFamily::TM}, p.a, p.h);
  l.V_B = analytic::Tm010ModeVolume(p.h, l.f);
  l.V_B_lambda3 = l.V_B / std::pow(constants::c / l.f, 3);
  l.G = analytic::Tm010GeometricFactor(p.a, p.h);
  l.probe = {0.0, 0.0, 0.5 * p.h};
  return l;
}

ModeField AxisymField(const RunConfig &config, const CavityGeometry &g, double r)
{
  const auto &res = config.resolution;
  const auto spec = axisym::MeshSpec::Graded(res.fine / r, res.coarse / r, res.growth);
  const auto problem = axisym::Assemble(g.Profile(), spec);
  const auto mode = axisym::SolveModes(problem, 1).at(0);
  return axisym::ToModeField(problem, mode);
}

ModeField FdtdField(const RunConfig &config, const CavityGeometry &g, double r, std::optional<double> guess)
{
  const auto &res = config.resolution;
  const auto &fd = config.fdtd;
  auto spec = res.fine == res.coarse ? geometry::ResolutionSpec::Uniform(res.fine / r)
                                     : geometry::ResolutionSpec::Graded(res.fine / r, res.coarse / r, res.growth);
  spec = Symmetrized(g, spec, fd.symmetry == "auto");

  fdtd::ExcitationSpec ex;
  ex.f_center = 0.5 * (fd.f_lo + fd.f_hi);
  ex.bandwidth = (fd.f_hi - fd.f_lo) / (2.0 * 0.7071);
  ex.seed = config.seed;
  const double dt = fdtd::StableTimeStep(geometry::BuildGrid(g, spec));
  const auto steps =
      static_cast<std::size_t>(std::ceil((fdtd::SourceDuration(ex) + fd.periods / fd.f_lo) / dt));
  const auto series = fdtd::RunBroadband(g, spec, ex, steps);
  fdtd::InversionOptions inv;
  inv.f_min = fd.f_lo;
  inv.f_max = fd.f_hi;
  const auto set = fdtd::ExtractResonances(series, inv);
  const fdtd::Resonance *pick = nullptr;
  const auto target = guess ? guess : fd.f_target;
  for (const auto &m : set.modes)
  {
    if (m.f < fd.f_lo || m.f > fd.f_hi)
    {
      continue;
    }
    const bool better = !pick || (target ? std::abs(m.f - *target) < std::abs(pick->f - *target)
                                         : m.amplitude > pick->amplitude);
    if (better)
    {
      pick = &m;
    }
  }
  if (!pick)
  {
    throw ConvergenceError("no resonance found in the fdtd band: " + set.diagnostic, 0.0);
  }
  fdtd::PatternOptions po;
  po.seed = config.seed;
  const auto pattern = fdtd::ExtractModePattern(g, spec, pick->f, 0, po);
  return fdtd::ToModeField(pattern, g);
}

ModeField FieldAt(const RunConfig &config, const CavityGeometry &g, Solver solver, double r, std::optional<double> guess)
{
  return solver == Solver::Axisym ? AxisymField(config, g, r) : FdtdField(config, g, r, guess);
}

std::string ResolutionLabel(const Resolution &r)
{
  std::ostringstream s;
  s << ShortestDouble(r.fine) << "/" << ShortestDouble(r.coarse) << " x";
  for (std::size_t i = 0; i < r.refinements.size(); i++)
  {
    s << (i ? "," : "") << ShortestDouble(r.refinements[i]);
  }
  return s.str();
}

// Tradeoff parameter columns and where they come from in the geometry document.
struct ParamColumn
{
  const char *column;
  const char *key;
  bool host;  // read from the host post block of a plate-loaded geometry
};

const std::vector<ParamColumn> &ParamColumns()
{
  static const std::vector<ParamColumn> cols{
      {"a_m", "a", false},       {"h_m", "h", false},    {"R_m", "R", true},   {"R_base_m", "R_base", true},
      {"h_r_m", "h_r", true},    {"post_gap_m", "g", true}, {"plate_d_m", "d", false},
      {"plate_t_m", "t", false}, {"plate_gap_m", "g", false}};
  return cols;
}

std::optional<double> ParamValue(const json &geo, const ParamColumn &c)
{
  const bool plate = geo.value("family", "") == "plate_loaded";
  const std::string key = c.key;
  const bool plate_only = key == "d" || key == "t" || (key == "g" && !c.host);
  if (plate_only && !plate)
  {
    return std::nullopt;
  }
  const json *src = &geo;
  if (c.host && plate)
  {
    if (!geo.contains("host"))
    {
      return std::nullopt;
    }
    src = &geo.at("host");
  }
  if (c.host && key == "g" && !plate && geo.contains("g"))
  {
    return geo.at("g").get<double>();
  }
  if (src->contains(key) && src->at(key).is_number())
  {
    return src->at(key).get<double>();
  }
  return std::nullopt;
}

json GeometryFromParams(const std::string &family, const std::map<std::string, double> &v)
{
  json g;
  g["family"] = family;
  auto put = [&](json &dst, const char *col, const char *key)
  {
    if (auto it = v.find(col); it != v.end())
    {
      dst[key] = it->second;
    }
  };
  put(g, "a_m", "a");
  put(g, "h_m", "h");
  json *posts = &g;
  json host;
  if (family == "plate_loaded")
  {
    put(g, "plate_d_m", "d");
    put(g, "plate_t_m", "t");
    put(g, "plate_gap_m", "g");
    posts = &host;
  }
  put(*posts, "R_m", "R");
  put(*posts, "R_base_m", "R_base");
  put(*posts, "h_r_m", "h_r");
  put(*posts, "post_gap_m", "g");
  if (family == "plate_loaded" && !host.empty())
  {
    host["family"] = host.contains("R_base") ? (host.contains("g") ? "tapered_doubly_reentrant" : "tapered_reentrant")
                                             : (host.contains("g") ? "doubly_reentrant" : "reentrant");
    g["host"] = host;
  }
  return g;
}

std::vector<std::string> SplitCsv(const std::string &line)
{
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); i++)
  {
    const char c = line[i];
    if (quoted)
    {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"')
      {
        cur += '"';
        i++;
      }
      else if (c == '"')
      {
        quoted = false;
      }
      else
      {
        cur += c;
      }
    }
    else if (c == '"')
    {
      quoted = true;
    }
    else if (c == ',')
    {
      out.push_back(cur);
      cur.clear();
    }
    else
    {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

void AtomicWrite(const fs::path &path, const std::string &text)
{
  static std::atomic<unsigned> counter{0};
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
    {
      throw std::runtime_error("cannot write " + tmp.string());
    }
    out << text;
    out.flush();
    if (!out)
    {
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

}  // namespace

std::string_view ToString(Solver solver)
{
  switch (solver)
  {
    case Solver::Analytic:
      return "analytic";
    case Solver::Axisym:
      return "axisym";
    case Solver::Fdtd3d:
      return "fdtd3d";
    case Solver::Auto:
      return "auto";
  }
  return "auto";
}

Solver SolverFromString(std::string_view name)
{
  for (Solver s : {Solver::Analytic, Solver::Axisym, Solver::Fdtd3d, Solver::Auto})
  {
    if (ToString(s) == name)
    {
      return s;
    }
  }
  throw ConfigError("solver", "unknown solver '" + std::string(name) + "'");
}

Solver ResolveSolver(Solver requested, const CavityGeometry &geometry)
{
  if (requested == Solver::Auto)
  {
    return geometry.axisymmetric() ? Solver::Axisym : Solver::Fdtd3d;
  }
  if (requested == Solver::Axisym && !geometry.axisymmetric())
  {
    throw ConfigError("solver", std::string(ToString(geometry.family())) +
                                    " is not axisymmetric; axisym cannot solve it");
  }
  if (requested == Solver::Analytic && geometry.family() != Family::Cylinder)
  {
    throw ConfigError("solver", "the analytic solver covers plain cylinders only");
  }
  return requested;
}

json RunConfig::ToJson() const
{
  json j;
  j["name"] = name;
  j["geometry"] = geometry;
  json sw = json::object();
  for (const auto &a : sweep)
  {
    sw[a.key] = a.values;
  }
  j["sweep"] = sw;
  j["solver"] = ToString(solver);
  j["resolution"] = {{"fine", resolution.fine},
                     {"coarse", resolution.coarse},
                     {"growth", resolution.growth},
                     {"refinements", resolution.refinements}};
  j["material"] = {{"name", material.name}, {"condition", ToString(material.condition)}};
  if (material.surface_resistance)
  {
    j["material"]["surface_resistance"] = *material.surface_resistance;
  }
  j["probe"] = ProbeToJson(probe);
  json fd = {{"periods", fdtd.periods}, {"symmetry", fdtd.symmetry}};
  if (fdtd.f_hi > 0.0)
  {
    fd["band"] = {fdtd.f_lo, fdtd.f_hi};
  }
  if (fdtd.f_target)
  {
    fd["target"] = *fdtd.f_target;
  }
  j["fdtd"] = fd;
  j["output"] = {{"path", out}, {"format", format}};
  j["seed"] = seed;
  return j;
}

RunConfig ParseConfig(const json &doc)
{
  if (!doc.is_object())
  {
    throw ConfigError("", "config must be an object");
  }
  RejectUnknown(doc, {"name", "geometry", "sweep", "solver", "resolution", "material", "probe", "fdtd", "output", "seed"},
                "");
  RunConfig c;
  if (doc.contains("name"))
  {
    if (!doc.at("name").is_string())
    {
      throw ConfigError("name", "expected a string");
    }
    c.name = doc.at("name").get<std::string>();
  }
  if (!doc.contains("geometry"))
  {
    throw ConfigError("geometry", "missing");
  }
  c.geometry = doc.at("geometry");

  if (doc.contains("sweep"))
  {
    const auto &sw = doc.at("sweep");
    if (!sw.is_object())
    {
      throw ConfigError("sweep", "expected an object of key: [values]");
    }
    for (auto it = sw.begin(); it != sw.end(); ++it)
    {
      const std::string path = "sweep." + it.key();
      if (!it->is_array() || it->empty())
      {
        throw ConfigError(path, "expected a non-empty array");
      }
      SweepAxis axis{it.key(), {}};
      for (const auto &v : *it)
      {
        if (!v.is_number() || !std::isfinite(v.get<double>()))
        {
          throw ConfigError(path, "values must be finite numbers");
        }
        axis.values.push_back(v.get<double>());
      }
      if (!Names(c.geometry, it.key()))
      {
        throw ConfigError(path, "does not name a numeric geometry entry");
      }
      c.sweep.push_back(std::move(axis));
    }
  }

  if (doc.contains("solver"))
  {
    if (!doc.at("solver").is_string())
    {
      throw ConfigError("solver", "expected a string");
    }
    c.solver = SolverFromString(doc.at("solver").get<std::string>());
  }

  if (doc.contains("resolution"))
  {
    const auto &r = doc.at("resolution");
    const std::string path = "resolution.";
    if (r.is_number())
    {
      c.resolution.fine = c.resolution.coarse = Positive(doc, "resolution", "");
    }
    else
    {
      if (!r.is_object())
      {
        throw ConfigError("resolution", "expected a number or an object");
      }
      RejectUnknown(r, {"fine", "coarse", "growth", "refinements"}, path);
      if (!r.contains("fine"))
      {
        throw ConfigError(path + "fine", "missing");
      }
      c.resolution.fine = Positive(r, "fine", path);
      c.resolution.coarse = r.contains("coarse") ? Positive(r, "coarse", path) : c.resolution.fine;
      c.resolution.growth = r.contains("growth") ? Number(r, "growth", path) : 1.3;
      if (c.resolution.coarse < c.resolution.fine || c.resolution.growth < 1.0)
      {
        throw ConfigError("resolution", "needs coarse >= fine and growth >= 1");
      }
      if (r.contains("refinements"))
      {
        const auto &ref = r.at("refinements");
        if (!ref.is_array() || ref.empty())
        {
          throw ConfigError(path + "refinements", "expected a non-empty array");
        }
        c.resolution.refinements.clear();
        for (const auto &v : ref)
        {
          if (!v.is_number() || !(v.get<double>() > 0.0))
          {
            throw ConfigError(path + "refinements", "values must be positive");
          }
          c.resolution.refinements.push_back(v.get<double>());
        }
        auto sorted = c.resolution.refinements;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        {
          throw ConfigError(path + "refinements", "values must be distinct");
        }
        c.resolution.refinements = sorted;
      }
    }
  }

  if (doc.contains("material"))
  {
    const auto &m = doc.at("material");
    const std::string path = "material.";
    if (!m.is_object())
    {
      throw ConfigError("material", "expected an object");
    }
    RejectUnknown(m, {"name", "condition", "surface_resistance"}, path);
    c.material.name = m.value("name", "Nb");
    try
    {
      c.material.condition = ConditionFromString(m.value("condition", "cryogenic"));
      (void)LookupMaterial(c.material.name, c.material.condition);
    }
    catch (const std::exception &e)
    {
      throw ConfigError("material", e.what());
    }
    if (m.contains("surface_resistance"))
    {
      c.material.surface_resistance = Positive(m, "surface_resistance", path);
    }
  }

  if (doc.contains("probe"))
  {
    c.probe = ProbeFromJson(doc.at("probe"));
  }

  if (doc.contains("fdtd"))
  {
    const auto &f = doc.at("fdtd");
    const std::string path = "fdtd.";
    if (!f.is_object())
    {
      throw ConfigError("fdtd", "expected an object");
    }
    RejectUnknown(f, {"band", "target", "periods", "symmetry"}, path);
    if (f.contains("band"))
    {
      const auto &b = f.at("band");
      if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number())
      {
        throw ConfigError(path + "band", "expected [f_lo, f_hi]");
      }
      c.fdtd.f_lo = b[0].get<double>();
      c.fdtd.f_hi = b[1].get<double>();
      if (!(c.fdtd.f_lo > 0.0) || !(c.fdtd.f_hi > c.fdtd.f_lo) || !std::isfinite(c.fdtd.f_hi))
      {
        throw ConfigError(path + "band", "needs 0 < f_lo < f_hi");
      }
    }
    if (f.contains("target"))
    {
      c.fdtd.f_target = Positive(f, "target", path);
    }
    if (f.contains("periods"))
    {
      c.fdtd.periods = Positive(f, "periods", path);
    }
    if (f.contains("symmetry"))
    {
      c.fdtd.symmetry = f.at("symmetry").get<std::string>();
      if (c.fdtd.symmetry != "auto" && c.fdtd.symmetry != "none")
      {
        throw ConfigError(path + "symmetry", "expected auto or none");
      }
    }
  }

  if (doc.contains("output"))
  {
    const auto &o = doc.at("output");
    if (!o.is_object())
    {
      throw ConfigError("output", "expected an object");
    }
    RejectUnknown(o, {"path", "format"}, "output.");
    c.out = o.value("path", "");
    c.format = o.value("format", "csv");
    if (c.format != "csv" && c.format != "json")
    {
      throw ConfigError("output.format", "expected csv or json");
    }
  }

  if (doc.contains("seed"))
  {
    if (!doc.at("seed").is_number_integer() || doc.at("seed").get<long long>() < 0)
    {
      throw ConfigError("seed", "expected a non-negative integer");
    }
    c.seed = doc.at("seed").get<std::uint64_t>();
  }

  // Every design point must build and suit the chosen solver.
  for (const auto &g : ExpandSweep(c))
  {
    const auto geo = BuildGeometry(g);
    const Solver s = ResolveSolver(c.solver, geo);
    if (s == Solver::Fdtd3d && !(c.fdtd.f_hi > 0.0))
    {
      throw ConfigError("fdtd.band", "required for the fdtd3d solver");
    }
  }
  return c;
}

RunConfig LoadConfig(const fs::path &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError("", "cannot open config " + path.string());
  }
  json doc;
  try
  {
    doc = json::parse(in, nullptr, true, true);
  }
  catch (const json::parse_error &e)
  {
    throw ConfigError("", path.string() + ": " + e.what());
  }
  return ParseConfig(doc);
}

std::vector<json> ExpandSweep(const RunConfig &config)
{
  std::vector<json> out{config.geometry};
  for (const auto &axis : config.sweep)
  {
    std::vector<json> next;
    for (const auto &g : out)
    {
      for (double v : axis.values)
      {
        json copy = g;
        *Resolve(copy, axis.key) = v;
        next.push_back(std::move(copy));
      }
    }
    out = std::move(next);
  }
  return out;
}

json Row::ToJson() const
{
  json j;
  j["family"] = family;
  j["geometry"] = geometry;
  j["solver"] = solver;
  j["resolution"] = resolution;
  j["extrapolated"] = extrapolated;
  j["ok"] = ok;
  if (!ok)
  {
    j["error"] = error;
    return j;
  }
  j["f_Hz"] = f;
  j["VB_over_lambda3"] = V_B_lambda3;
  j["G_ohm"] = G;
  j["Q"] = Q;
  j["Q_Nb"] = Q_Nb;
  j["Q_Cu"] = Q_Cu;
  j["Bs_T"] = B_s;
  j["B0_T_per_Hz2"] = B0;
  j["f_error"] = f_error;
  j["VB_error"] = V_B_error;
  j["G_error"] = G_error;
  json lv = json::array();
  for (const auto &l : levels)
  {
    lv.push_back({{"h", l.h}, {"f", l.f}, {"V_B", l.V_B}, {"VB_over_lambda3", l.V_B_lambda3}, {"G", l.G},
                  {"probe", l.probe}});
  }
  j["levels"] = lv;
  return j;
}

Row Row::FromJson(const json &j)
{
  Row r;
  r.family = j.at("family").get<std::string>();
  r.geometry = j.value("geometry", json::object());
  r.solver = j.value("solver", "");
  r.resolution = j.value("resolution", "");
  r.extrapolated = j.value("extrapolated", false);
  r.ok = j.value("ok", true);
  if (!r.ok)
  {
    r.error = j.value("error", "");
    return r;
  }
  r.f = j.at("f_Hz").get<double>();
  r.V_B_lambda3 = j.at("VB_over_lambda3").get<double>();
  r.G = j.at("G_ohm").get<double>();
  r.Q = j.value("Q", 0.0);
  r.Q_Nb = j.at("Q_Nb").get<double>();
  r.Q_Cu = j.at("Q_Cu").get<double>();
  r.B_s = j.at("Bs_T").get<double>();
  r.B0 = j.at("B0_T_per_Hz2").get<double>();
  r.f_error = j.value("f_error", 0.0);
  r.V_B_error = j.value("VB_error", 0.0);
  r.G_error = j.value("G_error", 0.0);
  if (j.contains("levels"))
  {
    for (const auto &l : j.at("levels"))
    {
      r.levels.push_back({l.at("h").get<double>(), l.at("f").get<double>(), l.at("V_B").get<double>(),
                          l.at("VB_over_lambda3").get<double>(), l.at("G").get<double>(),
                          l.at("probe").get<Vec3>()});
    }
  }
  return r;
}

std::size_t SweepResult::failures() const
{
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const Row &r) { return !r.ok; }));
}

Row SolvePoint(const RunConfig &config, const json &geometry_doc)
{
  Row row;
  row.geometry = geometry_doc;
  row.family = geometry_doc.value("family", "");
  row.resolution = ResolutionLabel(config.resolution);
  try
  {
    const auto g = BuildGeometry(geometry_doc);
    row.geometry = g.ToJson();
    const Solver solver = ResolveSolver(config.solver, g);
    row.solver = ToString(solver);
    // Coarsest level first, so each finer run can lock onto the same mode.
    std::vector<double> refinements = config.resolution.refinements;
    std::sort(refinements.begin(), refinements.end());
    if (solver == Solver::Analytic)
    {
      row.levels.push_back(SolveAnalytic(g));
      row.resolution = "exact";
    }
    else
    {
      std::optional<double> guess;
      for (double r : refinements)
      {
        row.levels.push_back(Measure(FieldAt(config, g, solver, r, guess), config, g, config.resolution.fine / r));
        guess = row.levels.back().f;
      }
    }
    const auto &fin = row.levels.back();
    double f = fin.f, V = fin.V_B, G = fin.G;
    if (row.levels.size() >= 2)
    {
      std::vector<double> h, fs_, vs, gs;
      for (const auto &l : row.levels)
      {
        h.push_back(l.h);
        fs_.push_back(l.f);
        vs.push_back(l.V_B);
        gs.push_back(l.G);
      }
      // Staircased boundaries converge at first order, the mapped finite
      // elements at second; three or more levels fit the order instead, unless
      // the fit lands outside [nominal/2, 2 nominal] (pre-asymptotic levels).
      const double nominal = solver == Solver::Fdtd3d ? 1.0 : 2.0;
      auto extrapolate = [&](const std::vector<double> &v)
      {
        if (row.levels.size() == 2)
        {
          return metrics::Richardson(h, v, nominal);
        }
        const auto fit = metrics::Richardson(h, v);
        if (fit.order < 0.5 * nominal || fit.order > 2.0 * nominal)
        {
          return metrics::Richardson(h, v, nominal);
        }
        return fit;
      };
      const auto ef = extrapolate(fs_);
      const auto ev = extrapolate(vs);
      const auto eg = extrapolate(gs);
      f = ef.value;
      V = ev.value;
      G = eg.value;
      row.f_error = ef.error_estimate;
      row.V_B_error = ev.error_estimate;
      row.G_error = eg.error_estimate;
      row.extrapolated = true;
    }
    if (!(f > 0.0) || !(V > 0.0) || !(G > 0.0))
    {
      throw ConvergenceError("extrapolation left a non-positive f, V_B or G", 0.0);
    }
    row.f = f;
    row.V_B_lambda3 = V / std::pow(constants::c / f, 3);
    row.G = G;
    row.Q = metrics::QualityFactor(G, ChosenMaterial(config.material));
    row.Q_Nb = metrics::QualityFactor(G, LookupMaterial("Nb", Condition::Cryogenic));
    row.Q_Cu = metrics::QualityFactor(G, LookupMaterial("Cu", Condition::Cryogenic));
    const auto sp = metrics::SinglePhoton(f, V);
    row.B_s = sp.B_s;
    row.B0 = sp.B0;
    row.ok = true;
  }
  catch (const std::exception &e)
  {
    row.ok = false;
    row.error = e.what();
    row.levels.clear();
  }
  return row;
}

ModeField SolveField(const RunConfig &config, const json &geometry_doc)
{
  const auto g = BuildGeometry(geometry_doc);
  const Solver solver = ResolveSolver(config.solver, g);
  if (solver == Solver::Analytic)
  {
    throw DomainError("the analytic solver has no sampled field; pick axisym or fdtd3d");
  }
  const double r = *std::max_element(config.resolution.refinements.begin(), config.resolution.refinements.end());
  return FieldAt(config, g, solver, r, config.fdtd.f_target);
}

SweepResult RunSweep(const RunConfig &config, const SweepOptions &options)
{
  const auto points = ExpandSweep(config);
  std::vector<Row> rows(points.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto log = [&](const std::string &msg)
  {
    if (options.log)
    {
      std::lock_guard<std::mutex> lock(log_mutex);
      options.log(msg);
    }
  };
  auto worker = [&]
  {
    for (std::size_t i = next++; i < points.size(); i = next++)
    {
      std::optional<Row> hit;
      json key;
      if (options.cache)
      {
        key = Cache::Key(config, points[i]);
        std::lock_guard<std::mutex> lock(log_mutex);
        hit = options.cache->Lookup(key);
      }
      if (hit)
      {
        rows[i] = *hit;
        log("point " + std::to_string(i + 1) + "/" + std::to_string(points.size()) + " from cache");
        continue;
      }
      rows[i] = SolvePoint(config, points[i]);
      log("point " + std::to_string(i + 1) + "/" + std::to_string(points.size()) +
          (rows[i].ok ? " solved" : " failed: " + rows[i].error));
      if (options.cache && rows[i].ok)
      {
        std::lock_guard<std::mutex> lock(log_mutex);
        options.cache->Store(key, rows[i]);
      }
    }
  };
  const int n = std::max(1, std::min<int>(options.parallel, static_cast<int>(points.size())));
  if (n == 1)
  {
    worker();
  }
  else
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n; t++)
    {
      pool.emplace_back(worker);
    }
  }

  SweepResult result;
  result.rows = std::move(rows);
  const json cfg = config.ToJson();
  result.manifest = {{"config", cfg},
                     {"config_hash", HexDigest(Fnv1a(cfg.dump()))},
                     {"seed", config.seed},
                     {"version", kVersion},
                     {"points", points.size()},
                     {"failed", result.failures()}};
  if (!result.rows.empty() && result.failures() == result.rows.size())
  {
    throw ConvergenceError("every sweep point failed; first error: " + result.rows.front().error, 0.0);
  }
  return result;
}

const std::vector<std::string> &TradeoffColumns()
{
  static const std::vector<std::string> cols = []
  {
    std::vector<std::string> c{"family"};
    for (const auto &p : ParamColumns())
    {
      c.push_back(p.column);
    }
    for (const char *m : {"f_Hz", "VB_over_lambda3", "G_ohm", "Q_Nb", "Q_Cu", "Bs_T", "B0_T_per_Hz2"})
    {
      c.push_back(m);
    }
    return c;
  }();
  return cols;
}

void EmitTradeoff(const SweepResult &result, const fs::path &path, const std::string &format)
{
  if (result.rows.empty())
  {
    throw DomainError("refusing to emit an empty trade-off table");
  }
  if (format != "csv" && format != "json")
  {
    throw DomainError("unknown trade-off format '" + format + "'");
  }
  auto metrics_of = [](const Row &r)
  {
    return std::array<double, 7>{r.f, r.V_B_lambda3, r.G, r.Q_Nb, r.Q_Cu, r.B_s, r.B0};
  };
  std::ostringstream out;
  if (format == "csv")
  {
    const auto &cols = TradeoffColumns();
    for (std::size_t i = 0; i < cols.size(); i++)
    {
      out << (i ? "," : "") << cols[i];
    }
    out << "\n";
    for (const auto &r : result.rows)
    {
      out << r.family;
      for (const auto &p : ParamColumns())
      {
        const auto v = ParamValue(r.geometry, p);
        out << "," << (v ? ShortestDouble(*v) : "");
      }
      for (double v : metrics_of(r))
      {
        out << "," << (r.ok ? ShortestDouble(v) : "");
      }
      out << "\n";
    }
  }
  else
  {
    json rows = json::array();
    for (const auto &r : result.rows)
    {
      json row;
      row["family"] = r.family;
      for (const auto &p : ParamColumns())
      {
        const auto v = ParamValue(r.geometry, p);
        row[p.column] = v ? json(*v) : json(nullptr);
      }
      const auto m = metrics_of(r);
      const auto &cols = TradeoffColumns();
      for (std::size_t i = 0; i < m.size(); i++)
      {
        row[cols[cols.size() - m.size() + i]] = r.ok ? json(m[i]) : json(nullptr);
      }
      if (!r.ok)
      {
        row["error"] = r.error;
      }
      rows.push_back(row);
    }
    out << json{{"columns", TradeoffColumns()}, {"rows", rows}, {"manifest", result.manifest}}.dump(2) << "\n";
  }
  try
  {
    if (path.has_parent_path())
    {
      fs::create_directories(path.parent_path());
    }
    AtomicWrite(path, out.str());
  }
  catch (const std::exception &e)
  {
    throw std::runtime_error("cannot write trade-off table " + path.string() + ": " + e.what());
  }
}

std::vector<Row> LoadTradeoff(const fs::path &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw std::runtime_error("cannot open trade-off table " + path.string());
  }
  const auto &cols = TradeoffColumns();
  const std::size_t nparams = ParamColumns().size();
  auto fill = [&](Row &r, const std::map<std::string, double> &params, const std::vector<std::optional<double>> &m)
  {
    r.geometry = GeometryFromParams(r.family, params);
    r.ok = std::all_of(m.begin(), m.end(), [](const auto &v) { return v.has_value(); });
    if (r.ok)
    {
      r.f = *m[0];
      r.V_B_lambda3 = *m[1];
      r.G = *m[2];
      r.Q_Nb = *m[3];
      r.Q_Cu = *m[4];
      r.B_s = *m[5];
      r.B0 = *m[6];
    }
  };
  std::vector<Row> rows;
  if (path.extension() == ".json")
  {
    const json doc = json::parse(in);
    for (const auto &j : doc.at("rows"))
    {
      Row r;
      r.family = j.at("family").get<std::string>();
      std::map<std::string, double> params;
      for (const auto &p : ParamColumns())
      {
        if (j.contains(p.column) && j.at(p.column).is_number())
        {
          params[p.column] = j.at(p.column).get<double>();
        }
      }
      std::vector<std::optional<double>> m;
      for (std::size_t i = 1 + nparams; i < cols.size(); i++)
      {
        m.push_back(j.contains(cols[i]) && j.at(cols[i]).is_number() ? std::optional(j.at(cols[i]).get<double>())
                                                                      : std::nullopt);
      }
      fill(r, params, m);
      r.error = j.value("error", "");
      rows.push_back(r);
    }
    return rows;
  }
  std::string line;
  if (!std::getline(in, line) || SplitCsv(line) != cols)
  {
    throw std::runtime_error(path.string() + ": header does not match the trade-off columns");
  }
  while (std::getline(in, line))
  {
    if (line.empty())
    {
      continue;
    }
    const auto cells = SplitCsv(line);
    if (cells.size() != cols.size())
    {
      throw std::runtime_error(path.string() + ": row with " + std::to_string(cells.size()) + " cells");
    }
    Row r;
    r.family = cells[0];
    auto num = [](const std::string &s) -> std::optional<double>
    {
      if (s.empty())
      {
        return std::nullopt;
      }
      double v = 0.0;
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      {
        throw std::runtime_error("bad number '" + s + "' in trade-off table");
      }
      return v;
    };
    std::map<std::string, double> params;
    for (std::size_t i = 0; i < nparams; i++)
    {
      if (auto v = num(cells[1 + i]))
      {
        params[cols[1 + i]] = *v;
      }
    }
    std::vector<std::optional<double>> m;
    for (std::size_t i = 1 + nparams; i < cols.size(); i++)
    {
      m.push_back(num(cells[i]));
    }
    fill(r, params, m);
    rows.push_back(r);
  }
  return rows;
}

std::uint64_t Fnv1a(std::string_view data)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data)
  {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string HexDigest(std::uint64_t h)
{
  static const char *digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; i--)
  {
    s[i] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

Cache::Cache(fs::path dir) : dir_(std::move(dir))
{
  fs::create_directories(dir_);
}

json Cache::Key(const RunConfig &config, const json &geometry)
{
  json cfg = config.ToJson();
  json key;
  key["geometry"] = geometry;
  for (const char *k : {"solver", "resolution", "material", "probe", "fdtd", "seed"})
  {
    key[k] = cfg[k];
  }
  key["version"] = kVersion;
  return key;
}

std::optional<Row> Cache::Lookup(const json &key)
{
  const fs::path file = dir_ / (HexDigest(Fnv1a(key.dump())) + ".json");
  if (!fs::exists(file))
  {
    return std::nullopt;
  }
  try
  {
    std::ifstream in(file);
    const json doc = json::parse(in);
    if (doc.at("key") != key)
    {
      warnings_.push_back("cache entry " + file.string() + " belongs to a different run; invalidated");
      fs::remove(file);
      return std::nullopt;
    }
    return Row::FromJson(doc.at("row"));
  }
  catch (const std::exception &e)
  {
    warnings_.push_back("cache entry " + file.string() + " is unreadable (" + e.what() + "); invalidated");
    std::error_code ec;
    fs::remove(file, ec);
    return std::nullopt;
  }
}

void Cache::Store(const json &key, const Row &row)
{
  const fs::path file = dir_ / (HexDigest(Fnv1a(key.dump())) + ".json");
  AtomicWrite(file, json{{"key", key}, {"row", row.ToJson()}}.dump() + "\n");
}

std::vector<fs::path> Cache::List() const
{
  std::vector<fs::path> out;
  for (const auto &e : fs::directory_iterator(dir_))
  {
    if (e.is_regular_file() && e.path().extension() == ".json")
    {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t Cache::Clear()
{
  std::size_t n = 0;
  for (const auto &p : List())
  {
    n += fs::remove(p) ? 1 : 0;
  }
  return n;
}

json FieldDump(const ModeField &field, const json &geometry)
{
  json j;
  j["format"] = "cavityforge-field";
  j["format_version"] = 1;
  j["solver"] = field.solver;
  j["f_Hz"] = field.f;
  j["multiplicity"] = field.multiplicity;
  j["geometry"] = geometry;
  json v = {{"x", json::array()}, {"y", json::array()}, {"z", json::array()}, {"b2", json::array()},
            {"weight", json::array()}};
  for (const auto &s : field.volume)
  {
    v["x"].push_back(s.position[0]);
    v["y"].push_back(s.position[1]);
    v["z"].push_back(s.position[2]);
    v["b2"].push_back(s.b2);
    v["weight"].push_back(s.weight);
  }
  j["volume"] = v;
  json s = json::array();
  for (const auto &p : field.surface)
  {
    s.push_back({{"position", p.position},
                 {"normal", p.normal},
                 {"area", p.area},
                 {"bt2", p.bt2},
                 {"conductor", p.conductor},
                 {"J_re", {p.J[0].real(), p.J[1].real(), p.J[2].real()}},
                 {"J_im", {p.J[0].imag(), p.J[1].imag(), p.J[2].imag()}},
                 {"rho", {p.rho.real(), p.rho.imag()}}});
  }
  j["surface"] = s;
  return j;
}

}  // namespace cavityforge::forge
