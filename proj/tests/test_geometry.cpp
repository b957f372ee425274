#include "cavityforge/geometry.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

using namespace cavityforge::geometry;
using std::numbers::pi;

namespace
{

CavityGeometry Cylinder(double a = 0.02, double h = 0.02)
{
  CavityParams p;
  p.a = a;
  p.h = h;
  return CavityGeometry::Make(Family::Cylinder, p);
}

CavityGeometry Reentrant()
{
  CavityParams p;
  p.a = 0.02;
  p.h = 0.02;
  p.post = PostSpec{0.005, 0.005, 0.018};
  return CavityGeometry::Make(Family::Reentrant, p);
}

CavityGeometry Tapered()
{
  CavityParams p;
  p.a = 0.02;
  p.h = 0.02;
  p.post = PostSpec{0.008, 0.0008, 0.018};
  return CavityGeometry::Make(Family::TaperedReentrant, p);
}

CavityGeometry Doubly()
{
  CavityParams p;
  p.a = 0.02;
  p.h = 0.02;
  p.post = PostSpec{0.003, 0.003, 0.018};
  p.post_gap = 0.004;
  return CavityGeometry::Make(Family::DoublyReentrant, p);
}

CavityGeometry Plate(double t, double d = 0.01, double g = 0.002)
{
  CavityParams p;
  p.a = 0.02;
  p.h = 0.02;
  p.plate = PlateSpec{d, t, g, {}, {}, {}};
  return CavityGeometry::Make(Family::PlateLoaded, p);
}

}  // namespace

TEST(Geometry, FigureDimensionsConstruct)
{
  EXPECT_TRUE(Cylinder().axisymmetric());
  EXPECT_TRUE(Reentrant().axisymmetric());
  EXPECT_TRUE(Tapered().axisymmetric());
  EXPECT_FALSE(Doubly().axisymmetric());
  EXPECT_FALSE(Plate(200e-6).axisymmetric());
  EXPECT_EQ(Doubly().posts().size(), 2u);
}

TEST(Geometry, InvariantViolationsAreDescriptive)
{
  EXPECT_THROW(Plate(200e-6, 0.03, 0.006), GeometryError);
  try
  {
    Plate(200e-6, 0.03, 0.006);
  }
  catch (const GeometryError &e)
  {
    EXPECT_NE(std::string(e.what()).find("d + 2g"), std::string::npos);
  }
  CavityParams p;
  p.a = 0.02;
  p.h = 0.02;
  p.post = PostSpec{0.005, 0.005, 0.021};
  EXPECT_THROW(CavityGeometry::Make(Family::Reentrant, p), GeometryError);
  p.post = PostSpec{0.005, 0.005, 0.018};
  p.post_gap = 0.0;
  EXPECT_THROW(CavityGeometry::Make(Family::DoublyReentrant, p), GeometryError);
  p.a = -1.0;
  EXPECT_THROW(CavityGeometry::Make(Family::Cylinder, p), GeometryError);
  EXPECT_THROW(FamilyFromString("sphere"), GeometryError);
}

TEST(Geometry, MembershipExamples)
{
  EXPECT_TRUE(Cylinder().IsVacuum({0.0, 0.0, 0.01}));
  EXPECT_FALSE(Cylinder().IsVacuum({0.0, 0.0, 0.0}));
  EXPECT_FALSE(Cylinder().IsVacuum({0.03, 0.0, 0.01}));
  EXPECT_FALSE(Reentrant().IsVacuum({0.001, 0.001, 0.01}));
  EXPECT_TRUE(Reentrant().IsVacuum({0.0, 0.0, 0.019}));
  // Linear taper: radius at height z is R' + (R - R') z / h_r.
  const auto tap = Tapered();
  const double z = 0.001;
  const double r_at_z = 0.0008 + (0.008 - 0.0008) * z / 0.018;
  EXPECT_TRUE(tap.IsVacuum({0.5 * (r_at_z + 0.008), 0.0, z}));
  EXPECT_FALSE(tap.IsVacuum({0.9 * r_at_z, 0.0, z}));
  EXPECT_TRUE(tap.Profile().Contains(0.5 * (r_at_z + 0.008), z));
}

TEST(Geometry, ProfileShapes)
{
  const auto c = Cylinder(0.02, 0.01).Profile();
  ASSERT_EQ(c.polyline.size(), 4u);
  EXPECT_EQ(c.polyline[1][0], 0.02);
  EXPECT_EQ(c.polyline[2][1], 0.01);
  EXPECT_THROW(Doubly().Profile(), UnsupportedGeometry);
  EXPECT_THROW(Plate(200e-6).Profile(), UnsupportedGeometry);
}

TEST(Geometry, ProfileVolumeMatchesVacuumVolume)
{
  for (const auto &g : {Cylinder(), Reentrant(), Tapered()})
  {
    EXPECT_NEAR(g.Profile().RevolvedVolume() / g.VacuumVolume(), 1.0, 1e-9);
  }
  // Independent oracle for the straight post: can minus post cylinder.
  const double v = pi * 0.02 * 0.02 * 0.02 - pi * 0.005 * 0.005 * 0.018;
  EXPECT_NEAR(Reentrant().Profile().RevolvedVolume() / v, 1.0, 1e-12);
}

TEST(Geometry, ProfileAgreesWithMembership)
{
  std::mt19937_64 rng(7);
  for (const auto &g : {Cylinder(), Reentrant(), Tapered()})
  {
    const auto prof = g.Profile();
    std::uniform_real_distribution<double> u(-0.021, 0.021);
    std::uniform_real_distribution<double> uz(-0.001, 0.021);
    int disagree = 0;
    for (int i = 0; i < 10000; i++)
    {
      const Vec3 p{u(rng), u(rng), uz(rng)};
      const bool via_profile = prof.Contains(std::hypot(p[0], p[1]), p[2]);
      disagree += via_profile != g.IsVacuum(p);
    }
    EXPECT_EQ(disagree, 0) << ToString(g.family());
  }
}

TEST(Geometry, DistanceAndNormals)
{
  const auto g = Reentrant();
  const auto d = g.Distance({0.006, 0.0, 0.01});
  EXPECT_NEAR(d.post, 0.001, 1e-15);
  EXPECT_NEAR(d.wall, 0.01, 1e-15);
  const auto n = g.SurfaceNormal({0.0051, 0.0, 0.01});
  EXPECT_NEAR(n[0], 1.0, 1e-12);
  const auto top = g.SurfaceNormal({0.001, 0.0, 0.0181});
  EXPECT_NEAR(top[2], 1.0, 1e-12);
  const auto wall = Cylinder().SurfaceNormal({0.0, 0.0199, 0.01});
  EXPECT_NEAR(wall[1], -1.0, 1e-12);
  const auto plate = Plate(200e-6);
  const auto pn = plate.SurfaceNormal({0.012, 0.0002, 0.01});
  EXPECT_NEAR(pn[1], 1.0, 1e-12);
}

TEST(Geometry, JsonRoundTripAndUnknownKeys)
{
  for (const auto &g : {Cylinder(), Reentrant(), Tapered(), Doubly(), Plate(200e-6)})
  {
    const auto back = CavityGeometry::FromJson(g.ToJson());
    EXPECT_EQ(back.ToJson(), g.ToJson());
  }
  auto j = Reentrant().ToJson();
  j["Rr"] = 1.0;
  try
  {
    CavityGeometry::FromJson(j);
    FAIL();
  }
  catch (const GeometryError &e)
  {
    EXPECT_NE(std::string(e.what()).find("geometry.Rr"), std::string::npos);
  }
}

TEST(Grid, GradedAxisHonoursSizes)
{
  const auto x = GradedAxis(0.0, 0.01, {0.004, 0.0042}, 50e-6, 1e-3, 1.3);
  EXPECT_EQ(x.front(), 0.0);
  EXPECT_EQ(x.back(), 0.01);
  double dmax = 0.0;
  for (std::size_t i = 1; i < x.size(); i++)
  {
    ASSERT_GT(x[i], x[i - 1]);
    dmax = std::max(dmax, x[i] - x[i - 1]);
    // Neighbouring cells never grow by much more than the growth factor.
    if (i > 1)
    {
      const double r = (x[i] - x[i - 1]) / (x[i - 1] - x[i - 2]);
      EXPECT_LT(r, 1.45);
      EXPECT_GT(r, 1.0 / 1.45);
    }
  }
  EXPECT_LE(dmax, 1e-3 * (1 + 1e-9));
  int inside = 0;
  for (std::size_t i = 0; i + 1 < x.size(); i++)
  {
    const double c = 0.5 * (x[i] + x[i + 1]);
    inside += c > 0.004 && c < 0.0042;
  }
  EXPECT_GE(inside, 4);
  const auto u = UniformAxis(0.0, 1.0, 0.1);
  EXPECT_EQ(u.size(), 11u);
}

TEST(Voxel, CylinderVolumeAtA64)
{
  const auto g = Cylinder();
  const auto mask = Voxelize(g, ResolutionSpec::Uniform(0.02 / 64));
  EXPECT_NEAR(mask.VacuumVolume() / (pi * 0.02 * 0.02 * 0.02), 1.0, 0.03);
  const double bound = 2.0 * mask.grid.MaxSpacing() / 0.02;
  EXPECT_NEAR(mask.VacuumVolume() / g.VacuumVolume(), 1.0, bound);
}

TEST(Voxel, VolumeWithinBoundForAllFamilies)
{
  for (const auto &g : {Reentrant(), Tapered(), Doubly()})
  {
    const auto mask = Voxelize(g, ResolutionSpec::Uniform(0.02 / 80));
    EXPECT_NEAR(mask.VacuumVolume() / g.VacuumVolume(), 1.0, 2.0 * mask.grid.MaxSpacing() / 0.02)
        << ToString(g.family());
  }
}

TEST(Voxel, ThinPlateGradingAndGuard)
{
  const auto mask = Voxelize(Plate(200e-6), ResolutionSpec::Graded(50e-6, 1e-3, 1.3));
  int across = 0;
  const auto &y = mask.grid.nodes[1];
  for (std::size_t j = 0; j + 1 < y.size(); j++)
  {
    const double c = 0.5 * (y[j] + y[j + 1]);
    across += std::abs(c) < 100e-6;
  }
  EXPECT_GE(across, 4);
  try
  {
    Voxelize(Plate(10e-6), ResolutionSpec::Uniform(300e-6));
    FAIL();
  }
  catch (const RefinementRequired &e)
  {
    EXPECT_EQ(e.feature(), "plate thickness");
  }
}

TEST(Voxel, SurfaceCellsComplete)
{
  const auto g = Reentrant();
  const auto mask = Voxelize(g, ResolutionSpec::Uniform(0.02 / 32));
  // Brute force: every vacuum cell face that touches conductor or the outer wall.
  std::size_t expected = 0;
  const std::size_t n[3] = {mask.grid.cells(0), mask.grid.cells(1), mask.grid.cells(2)};
  for (std::size_t i = 0; i < n[0]; i++)
    for (std::size_t j = 0; j < n[1]; j++)
      for (std::size_t k = 0; k < n[2]; k++)
      {
        if (!mask.IsVacuumCell(i, j, k))
          continue;
        const long c[3] = {long(i), long(j), long(k)};
        for (int a = 0; a < 3; a++)
          for (int s : {-1, 1})
          {
            long m[3] = {c[0], c[1], c[2]};
            m[a] += s;
            if (m[a] < 0 || m[a] >= long(n[a]) || !mask.IsVacuumCell(m[0], m[1], m[2]))
              expected++;
          }
      }
  EXPECT_EQ(mask.surface_cells.size(), expected);
  EXPECT_GT(expected, 0u);
}

TEST(Voxel, ScalingGivesIdenticalOccupancy)
{
  for (const auto &g : {Tapered(), Doubly(), Plate(200e-6)})
  {
    const auto spec = ResolutionSpec::Graded(100e-6, 1e-3, 1.3);
    const auto grid = BuildGrid(g, spec);
    const auto base = Voxelize(g, grid);
    for (double s : {2.0, 0.5, 3.0, 1e-3})
    {
      const auto scaled = Voxelize(g.Scaled(s), grid.Scaled(s));
      EXPECT_EQ(scaled.vacuum, base.vacuum) << ToString(g.family()) << " s=" << s;
    }
  }
}

TEST(Voxel, DoublyReentrantMirrorSymmetry)
{
  const auto g = Doubly();
  const auto mask = Voxelize(g, ResolutionSpec::Graded(100e-6, 1e-3, 1.3));
  const auto &x = mask.grid.nodes[0];
  const std::size_t nx = mask.grid.cells(0);
  // Grid must itself be symmetric for the check to be meaningful.
  for (std::size_t i = 0; i < x.size(); i++)
  {
    ASSERT_NEAR(x[i], -x[x.size() - 1 - i], 1e-15);
  }
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < nx; i++)
    for (std::size_t j = 0; j < mask.grid.cells(1); j++)
      for (std::size_t k = 0; k < mask.grid.cells(2); k++)
        mismatches += mask.IsVacuumCell(i, j, k) != mask.IsVacuumCell(nx - 1 - i, j, k);
  EXPECT_EQ(mismatches, 0u);
}
