#include "cavityforge/forge.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <gtest/gtest.h>

#include "cavityforge/analytic.hpp"
#include "cavityforge/physcore.hpp"

using namespace cavityforge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace
{

json CylinderDoc(double a = 0.02, double h = 0.02)
{
  return {{"family", "cylinder"}, {"a", a}, {"h", h}};
}

json PlateDoc(double t)
{
  return {{"family", "plate_loaded"}, {"a", 0.02}, {"h", 0.02}, {"d", 0.01}, {"t", t}, {"g", 0.005}};
}

// A 10 um plate cannot be voxelized on a uniform 2 mm grid; an 8 mm one can
// (4 mm in the half domain).
json PlateSweep(std::vector<double> t)
{
  return {{"geometry", PlateDoc(t.front())},
          {"sweep", {{"t", t}}},
          {"resolution", {{"fine", 2e-3}}},
          {"fdtd", {{"band", {4e9, 7e9}}}}};
}

json ReentrantDoc()
{
  return {{"family", "reentrant"}, {"a", 0.02}, {"h", 0.02}, {"R", 0.003}, {"h_r", 0.018}};
}

fs::path Scratch(const std::string &name)
{
  const fs::path p = fs::temp_directory_path() / ("cavityforge_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string ErrorKey(const json &doc)
{
  try
  {
    forge::ParseConfig(doc);
  }
  catch (const forge::ConfigError &e)
  {
    return e.key();
  }
  return "<accepted>";
}

// Pearson R^2 of y against x.
double RSquared(const std::vector<double> &x, const std::vector<double> &y)
{
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); i++)
  {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  const double cov = sxy - sx * sy / n;
  return cov * cov / ((sxx - sx * sx / n) * (syy - sy * sy / n));
}

}  // namespace

TEST(ForgeConfig, DefaultsFillIn)
{
  const auto c = forge::ParseConfig({{"geometry", CylinderDoc()}});
  EXPECT_EQ(c.solver, forge::Solver::Auto);
  EXPECT_EQ(c.material.name, "Nb");
  EXPECT_EQ(c.material.condition, Condition::Cryogenic);
  EXPECT_FALSE(c.material.surface_resistance.has_value());
  EXPECT_EQ(c.probe.kind, metrics::ProbeRule::Kind::MaxWithStandoff);
  EXPECT_EQ(c.probe.post_standoff, 0.0);
  EXPECT_EQ(c.resolution.refinements, std::vector<double>{1.0});
  EXPECT_EQ(c.format, "csv");
  EXPECT_EQ(c.seed, 1u);
  EXPECT_TRUE(c.sweep.empty());
}

TEST(ForgeConfig, RoundTripsThroughJson)
{
  json doc = {{"name", "rt"},
              {"geometry", ReentrantDoc()},
              {"sweep", {{"R", {0.002, 0.003}}}},
              {"solver", "axisym"},
              {"resolution", {{"fine", 2e-4}, {"coarse", 1e-3}, {"growth", 1.2}, {"refinements", {2.0, 1.0}}}},
              {"material", {{"name", "Cu"}, {"condition", "room"}, {"surface_resistance", 0.02}}},
              {"probe", {{"rule", "standoff"}, {"post_standoff", 1e-4}, {"wall_standoff", 2e-4}}},
              {"output", {{"path", "out.csv"}, {"format", "json"}}},
              {"seed", 7}};
  const auto c = forge::ParseConfig(doc);
  const auto again = forge::ParseConfig(c.ToJson());
  EXPECT_EQ(c.ToJson(), again.ToJson());
  EXPECT_EQ(again.resolution.refinements, (std::vector<double>{1.0, 2.0}));
  EXPECT_DOUBLE_EQ(*again.material.surface_resistance, 0.02);
  EXPECT_DOUBLE_EQ(again.probe.wall_standoff, 2e-4);
  EXPECT_EQ(again.seed, 7u);
}

TEST(ForgeConfig, RejectsUnknownKeysWithTheirPath)
{
  EXPECT_EQ(ErrorKey({{"geometry", CylinderDoc()}, {"colour", "red"}}), "colour");
  EXPECT_EQ(ErrorKey({{"geometry", CylinderDoc()}, {"resolution", {{"fine", 1e-3}, {"finer", 1e-4}}}}),
            "resolution.finer");
  EXPECT_EQ(ErrorKey({{"geometry", CylinderDoc()}, {"probe", {{"rule", "point"}, {"point", {0, 0}}}}}),
            "probe.point");
  EXPECT_EQ(ErrorKey({{"geometry", CylinderDoc()}, {"sweep", {{"radius", {0.01}}}}}), "sweep.radius");
}

TEST(ForgeConfig, RejectsMismatchedSolvers)
{
  json doubly = {{"family", "doubly_reentrant"}, {"a", 0.02}, {"h", 0.02}, {"R", 0.003}, {"h_r", 0.018},
                 {"g", 0.004}};
  EXPECT_EQ(ErrorKey({{"geometry", doubly}, {"solver", "axisym"}}), "solver");
  EXPECT_EQ(ErrorKey({{"geometry", ReentrantDoc()}, {"solver", "analytic"}}), "solver");
  EXPECT_EQ(ErrorKey({{"geometry", doubly}}), "fdtd.band");
  EXPECT_EQ(ErrorKey({{"geometry", CylinderDoc()}, {"solver", "magic"}}), "solver");
  EXPECT_EQ(ErrorKey({{"geometry", doubly}, {"fdtd", {{"band", {3e9, 2e9}}}}}), "fdtd.band");
}

TEST(ForgeConfig, GeometryErrorsNameTheGeometry)
{
  EXPECT_EQ(ErrorKey({{"geometry", CylinderDoc(-0.01)}}), "geometry");
  // A swept value can break a geometry that is fine at its base point.
  EXPECT_EQ(ErrorKey({{"geometry", ReentrantDoc()}, {"sweep", {{"h_r", {0.01, 0.03}}}}}), "geometry");
  EXPECT_EQ(ErrorKey({{"name", "x"}}), "geometry");
}

TEST(ForgeConfig, AutoPicksTheSolverByShape)
{
  const auto cyl = geometry::CavityGeometry::FromJson(CylinderDoc());
  EXPECT_EQ(forge::ResolveSolver(forge::Solver::Auto, cyl), forge::Solver::Axisym);
  json plate = {{"family", "plate_loaded"}, {"a", 0.02}, {"h", 0.02}, {"d", 0.01}, {"t", 0.001}, {"g", 0.001}};
  const auto pl = geometry::CavityGeometry::FromJson(plate);
  EXPECT_EQ(forge::ResolveSolver(forge::Solver::Auto, pl), forge::Solver::Fdtd3d);
}

TEST(ForgeConfig, ShippedConfigsParse)
{
  const fs::path dir = fs::path(CAVITYFORGE_SOURCE_DIR) / "configs";
  int n = 0;
  for (const auto &e : fs::directory_iterator(dir))
  {
    if (e.path().extension() != ".json" || e.path().filename() == "schema.json")
    {
      continue;
    }
    SCOPED_TRACE(e.path().string());
    EXPECT_NO_THROW(forge::LoadConfig(e.path()));
    n++;
  }
  EXPECT_GE(n, 8);
}

TEST(ForgeConfig, DoublyReentrantConfigHasTheStatedDimensions)
{
  const auto c = forge::LoadConfig(fs::path(CAVITYFORGE_SOURCE_DIR) / "configs" / "fig3d.json");
  const auto g = geometry::CavityGeometry::FromJson(c.geometry);
  EXPECT_EQ(g.family(), geometry::Family::DoublyReentrant);
  EXPECT_DOUBLE_EQ(g.params().a, 0.02);
  EXPECT_DOUBLE_EQ(g.params().h, 0.02);
  EXPECT_DOUBLE_EQ(g.params().post->R, 0.003);
  EXPECT_DOUBLE_EQ(g.params().post->h_r, 0.018);
  EXPECT_DOUBLE_EQ(g.params().post_gap, 0.004);
  EXPECT_EQ(forge::ResolveSolver(c.solver, g), forge::Solver::Fdtd3d);
}

TEST(ForgeSweep, ExpandsAsACartesianProductInOrder)
{
  const auto c = forge::ParseConfig(
      {{"geometry", ReentrantDoc()}, {"sweep", {{"R", {0.002, 0.003}}, {"h_r", {0.016, 0.017, 0.018}}}}});
  const auto pts = forge::ExpandSweep(c);
  ASSERT_EQ(pts.size(), 6u);
  EXPECT_DOUBLE_EQ(pts[0]["R"].get<double>(), 0.002);
  EXPECT_DOUBLE_EQ(pts[0]["h_r"].get<double>(), 0.016);
  EXPECT_DOUBLE_EQ(pts[1]["h_r"].get<double>(), 0.017);
  EXPECT_DOUBLE_EQ(pts[3]["R"].get<double>(), 0.003);
  EXPECT_DOUBLE_EQ(pts[5]["h_r"].get<double>(), 0.018);
}

TEST(ForgeSweep, AnalyticRowMatchesClosedForm)
{
  const auto c = forge::ParseConfig({{"geometry", CylinderDoc(0.02, 0.03)}, {"solver", "analytic"}});
  const auto row = forge::SolvePoint(c, c.geometry);
  ASSERT_TRUE(row.ok) << row.error;
  const double f = analytic::ResonanceFrequency({0, 1, 0, analytic::ModeFamily::TM}, 0.02, 0.03);
  EXPECT_DOUBLE_EQ(row.f, f);
  EXPECT_NEAR(row.G, analytic::Tm010GeometricFactor(0.02, 0.03), 1e-12);
  EXPECT_NEAR(row.Q_Cu, row.G / 1e-3, 1e-6 * row.Q_Cu);
  EXPECT_NEAR(row.Q_Nb, row.G / 10e-9, 1e-6 * row.Q_Nb);
  EXPECT_DOUBLE_EQ(row.Q, row.Q_Nb);
}

TEST(ForgeSweep, CylinderModeVolumeIsLinearInHeight)
{
  const auto c = forge::ParseConfig({{"geometry", CylinderDoc()},
                                     {"solver", "axisym"},
                                     {"resolution", {{"fine", 5e-4}}},
                                     {"sweep", {{"h", {0.005, 0.01, 0.015, 0.02, 0.025, 0.03}}}}});
  const auto res = forge::RunSweep(c);
  ASSERT_EQ(res.failures(), 0u);
  std::vector<double> h, vb;
  for (const auto &r : res.rows)
  {
    h.push_back(r.geometry["h"].get<double>());
    vb.push_back(r.V_B_lambda3);
    // TM010 does not depend on the height.
    EXPECT_NEAR(r.f, res.rows.front().f, 1e-3 * r.f);
  }
  EXPECT_GT(RSquared(h, vb), 0.999);
}

TEST(ForgeSweep, RichardsonLevelsAreRecorded)
{
  const auto c = forge::ParseConfig({{"geometry", ReentrantDoc()},
                                     {"resolution", {{"fine", 4e-4}, {"refinements", {1, 2, 4}}}}});
  const auto row = forge::SolvePoint(c, c.geometry);
  ASSERT_TRUE(row.ok) << row.error;
  ASSERT_EQ(row.levels.size(), 3u);
  EXPECT_TRUE(row.extrapolated);
  EXPECT_GT(row.levels[0].h, row.levels[2].h);
  EXPECT_NEAR(row.f, row.levels[2].f, 5e-3 * row.f);
  EXPECT_LE(row.f_error, 5e-3 * row.f);
}

TEST(ForgeSweep, IsDeterministic)
{
  const auto c = forge::ParseConfig({{"geometry", ReentrantDoc()}, {"resolution", {{"fine", 5e-4}}}, {"seed", 3}});
  const auto a = forge::RunSweep(c);
  const auto b = forge::RunSweep(c);
  ASSERT_EQ(a.rows.size(), 1u);
  EXPECT_EQ(a.rows[0].ToJson().dump(), b.rows[0].ToJson().dump());
  EXPECT_EQ(a.manifest, b.manifest);
  EXPECT_EQ(a.manifest["seed"], 3);
  EXPECT_EQ(a.manifest["config_hash"].get<std::string>().size(), 16u);
}

TEST(ForgeSweep, FdtdPointAgreesWithAnalytic)
{
  const auto c = forge::ParseConfig({{"geometry", CylinderDoc()},
                                     {"solver", "fdtd3d"},
                                     {"resolution", {{"fine", 1e-3}, {"refinements", {1, 2}}}},
                                     {"fdtd", {{"band", {4e9, 7e9}}, {"target", 5.7e9}}}});
  const auto row = forge::SolvePoint(c, c.geometry);
  ASSERT_TRUE(row.ok) << row.error;
  EXPECT_NEAR(row.f, analytic::ResonanceFrequency({0, 1, 0, analytic::ModeFamily::TM}, 0.02, 0.02), 0.005 * row.f);
  EXPECT_NEAR(row.G, analytic::Tm010GeometricFactor(0.02, 0.02), 0.05 * row.G);
}

TEST(ForgeSweep, PartialFailureKeepsTheOtherRows)
{
  const auto res = forge::RunSweep(forge::ParseConfig(PlateSweep({0.008, 1e-5})));
  ASSERT_EQ(res.rows.size(), 2u);
  EXPECT_TRUE(res.rows[0].ok) << res.rows[0].error;
  EXPECT_FALSE(res.rows[1].ok);
  EXPECT_NE(res.rows[1].error.find("plate thickness"), std::string::npos) << res.rows[1].error;
  EXPECT_EQ(res.failures(), 1u);
  EXPECT_EQ(res.manifest["failed"], 1);
}

TEST(ForgeSweep, EveryPointFailingIsAnError)
{
  EXPECT_THROW(forge::RunSweep(forge::ParseConfig(PlateSweep({1e-5, 2e-5}))), std::runtime_error);
}

TEST(ForgeTradeoff, CsvAndJsonRoundTripBitwise)
{
  const auto res = forge::RunSweep(forge::ParseConfig(PlateSweep({0.008, 1e-5})));
  const auto dir = Scratch("tradeoff");
  for (const std::string fmt : {"csv", "json"})
  {
    SCOPED_TRACE(fmt);
    const auto path = dir / ("table." + fmt);
    forge::EmitTradeoff(res, path, fmt);
    const auto rows = forge::LoadTradeoff(path);
    ASSERT_EQ(rows.size(), res.rows.size());
    for (std::size_t i = 0; i < rows.size(); i++)
    {
      EXPECT_EQ(rows[i].family, res.rows[i].family);
      EXPECT_EQ(rows[i].ok, res.rows[i].ok);
      EXPECT_EQ(rows[i].f, res.rows[i].f);
      EXPECT_EQ(rows[i].V_B_lambda3, res.rows[i].V_B_lambda3);
      EXPECT_EQ(rows[i].G, res.rows[i].G);
      EXPECT_EQ(rows[i].Q_Nb, res.rows[i].Q_Nb);
      EXPECT_EQ(rows[i].Q_Cu, res.rows[i].Q_Cu);
      EXPECT_EQ(rows[i].B_s, res.rows[i].B_s);
      EXPECT_EQ(rows[i].B0, res.rows[i].B0);
      EXPECT_EQ(rows[i].geometry["t"], res.rows[i].geometry["t"]);
      EXPECT_EQ(rows[i].geometry["d"], res.rows[i].geometry["d"]);
    }
  }
  std::ifstream in(dir / "table.csv");
  std::string header, ok_line, bad_line;
  std::getline(in, header);
  std::getline(in, ok_line);
  std::getline(in, bad_line);
  EXPECT_EQ(header.rfind("family,a_m,h_m,", 0), 0u);
  // Failed rows keep their parameters and leave the metrics blank.
  EXPECT_NE(bad_line.find("1e-05"), std::string::npos);
  EXPECT_EQ(bad_line.substr(bad_line.size() - 7), ",,,,,,,");
  fs::remove_all(dir);
}

TEST(ForgeTradeoff, RefusesAnEmptyTable)
{
  const auto dir = Scratch("empty");
  forge::SweepResult empty;
  EXPECT_THROW(forge::EmitTradeoff(empty, dir / "t.csv", "csv"), DomainError);
  EXPECT_FALSE(fs::exists(dir / "t.csv"));
  fs::remove_all(dir);
}

TEST(ForgeCache, HitMissAndCorruption)
{
  const auto dir = Scratch("cache");
  forge::Cache cache(dir);
  const auto c = forge::ParseConfig({{"geometry", ReentrantDoc()}, {"resolution", {{"fine", 5e-4}}}});
  std::vector<std::string> log;
  forge::SweepOptions opt;
  opt.cache = &cache;
  opt.log = [&](const std::string &m) { log.push_back(m); };

  const auto first = forge::RunSweep(c, opt);
  ASSERT_EQ(cache.List().size(), 1u);
  EXPECT_EQ(log.back().find("from cache"), std::string::npos);

  const auto second = forge::RunSweep(c, opt);
  EXPECT_NE(log.back().find("from cache"), std::string::npos);
  EXPECT_EQ(first.rows[0].ToJson().dump(), second.rows[0].ToJson().dump());

  // A different seed is a different key.
  auto other = c;
  other.seed = 2;
  EXPECT_FALSE(cache.Lookup(forge::Cache::Key(other, c.geometry)).has_value());

  {
    std::ofstream out(cache.List().front(), std::ios::trunc);
    out << "{ not json";
  }
  const auto third = forge::RunSweep(c, opt);
  EXPECT_EQ(log.back().find("from cache"), std::string::npos);
  ASSERT_EQ(cache.warnings().size(), 1u);
  EXPECT_NE(cache.warnings()[0].find("invalidated"), std::string::npos);
  EXPECT_EQ(third.rows[0].ToJson().dump(), first.rows[0].ToJson().dump());

  // An entry whose stored key disagrees is discarded too.
  const auto file = cache.List().front();
  json doc = json::parse(std::ifstream(file));
  doc["key"]["seed"] = 99;
  std::ofstream(file, std::ios::trunc) << doc.dump();
  EXPECT_FALSE(cache.Lookup(forge::Cache::Key(c, c.geometry)).has_value());
  EXPECT_EQ(cache.warnings().size(), 2u);
  EXPECT_TRUE(cache.List().empty());

  forge::RunSweep(c, opt);
  EXPECT_EQ(cache.Clear(), 1u);
  EXPECT_TRUE(cache.List().empty());
  fs::remove_all(dir);
}

TEST(ForgeCache, KeyIgnoresNameAndOutput)
{
  auto c = forge::ParseConfig({{"geometry", CylinderDoc()}});
  const auto k1 = forge::Cache::Key(c, c.geometry);
  c.name = "other";
  c.out = "elsewhere.csv";
  EXPECT_EQ(forge::Cache::Key(c, c.geometry), k1);
  c.resolution.fine = 2e-4;
  EXPECT_NE(forge::Cache::Key(c, c.geometry), k1);
}

TEST(ForgeDump, FieldDumpCarriesSamples)
{
  const auto c = forge::ParseConfig({{"geometry", CylinderDoc()}});
  const auto g = geometry::CavityGeometry::FromJson(c.geometry);
  ModeField field;
  field.f = 5.7e9;
  field.solver = "test";
  field.volume.push_back({{0.001, 0.0, 0.01}, 2.0, 1e-9});
  SurfaceSample s;
  s.position = {0.02, 0.0, 0.01};
  s.normal = {-1.0, 0.0, 0.0};
  s.area = 1e-6;
  s.J = {std::complex<double>(0, 0), std::complex<double>(0, 0), std::complex<double>(1.5, -0.5)};
  field.surface.push_back(s);
  const auto doc = forge::FieldDump(field, g.ToJson());
  EXPECT_EQ(doc["format"], "cavityforge-field");
  EXPECT_EQ(doc["volume"]["b2"][0], 2.0);
  EXPECT_EQ(doc["surface"][0]["J_re"][2], 1.5);
  EXPECT_EQ(doc["surface"][0]["J_im"][2], -0.5);
  EXPECT_EQ(doc["geometry"]["family"], "cylinder");
}
