#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>
#include <nlohmann/json_fwd.hpp>

namespace cavityforge::geometry
{

using Vec3 = std::array<double, 3>;

class GeometryError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedGeometry : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when a grid puts fewer than two cells across a declared feature.
class RefinementRequired : public std::runtime_error
{
public:
  RefinementRequired(std::string feature, const std::string &message)
    : std::runtime_error(message), feature_(std::move(feature))
  {
  }
  const std::string &feature() const { return feature_; }

private:
  std::string feature_;
};

enum class Family
{
  Cylinder,
  Reentrant,
  TaperedReentrant,
  DoublyReentrant,
  TaperedDoublyReentrant,
  PlateLoaded
};

std::string_view ToString(Family family);
Family FamilyFromString(std::string_view name);

// Post standing on the floor (z = 0). The free end at z = h_r has radius R; the
// base where it meets the floor has radius R_base (== R for straight posts).
struct PostSpec
{
  double R = 0.0;
  double R_base = 0.0;
  double h_r = 0.0;
};

// Thin rectangular plate in the xz-plane, thickness t along y, centred on y = 0.
// By default it spans x in [a - g - d, a - g] and is centred in z.
struct PlateSpec
{
  double d = 0.0;       // side length (x and z extent unless height is set)
  double t = 0.0;       // thickness
  double g = 0.0;       // gap to the cavity wall
  std::optional<double> x_center;
  std::optional<double> z_center;
  std::optional<double> height;  // z extent
};

struct CavityParams
{
  double a = 0.0;  // cavity radius
  double h = 0.0;  // cavity height
  std::optional<PostSpec> post;
  double post_gap = 0.0;  // surface-to-surface gap between the two posts (doubly reentrant)
  std::optional<PlateSpec> plate;
  // Family of the cavity the plate is inserted into (plate_loaded only).
  Family host = Family::Cylinder;
};

// Axis-aligned solid primitives making up the conductors inside the outer can.
struct Frustum
{
  double cx = 0.0;
  double cy = 0.0;
  double z0 = 0.0;  // base, on the floor
  double z1 = 0.0;  // free end
  double r0 = 0.0;  // radius at z0
  double r1 = 0.0;  // radius at z1
};

struct Box
{
  Vec3 lo{};
  Vec3 hi{};
};

struct ConductorDistance
{
  double post = 0.0;   // to the nearest reentrance surface (inf when none)
  double plate = 0.0;  // to the plate (inf when none)
  double wall = 0.0;   // to the outer can
  double min() const;
};

// Named extent along one axis that the grid must resolve with >= 2 cells.
struct Feature
{
  std::string name;
  int axis = 0;
  double lo = 0.0;
  double hi = 0.0;
};

// Closed (r, z) polyline of the vacuum region of a body of revolution.
struct BorProfile
{
  std::vector<std::array<double, 2>> polyline;

  // Point-in-polygon (crossing number) in the (r, z) half plane.
  bool Contains(double r, double z) const;
  double Area() const;
  // 2 pi * integral of r over the enclosed area (Pappus).
  double RevolvedVolume() const;
};

class CavityGeometry
{
public:
  // Validates the family invariants and throws GeometryError naming the failed one.
  static CavityGeometry Make(Family family, const CavityParams &params);

  Family family() const { return family_; }
  const CavityParams &params() const { return params_; }
  bool axisymmetric() const;

  const std::vector<Frustum> &posts() const { return posts_; }
  const std::optional<Box> &plate_box() const { return plate_; }

  bool IsVacuum(const Vec3 &p) const;
  ConductorDistance Distance(const Vec3 &p) const;
  // Unit normal of the nearest conductor surface, pointing into the vacuum.
  Vec3 SurfaceNormal(const Vec3 &p) const;

  // Exact vacuum volume (can minus posts minus plate).
  double VacuumVolume() const;

  BorProfile Profile() const;  // throws UnsupportedGeometry when not axisymmetric
  std::vector<Feature> Features() const;
  // Coordinates along `axis` that grids should place nodes on.
  std::vector<double> Breakpoints(int axis) const;

  CavityGeometry Scaled(double s) const;

  nlohmann::json ToJson() const;
  static CavityGeometry FromJson(const nlohmann::json &j);

private:
  CavityGeometry(Family family, CavityParams params);

  Family family_;
  CavityParams params_;
  std::vector<Frustum> posts_;
  std::optional<Box> plate_;
};

enum class BoundaryKind : std::uint8_t
{
  Wall,         // conductor outside the domain
  PecSymmetry,  // mirror plane, tangential E = 0
  PmcSymmetry   // mirror plane, tangential H = 0
};

// Tensor-product grid: node coordinates per axis, strictly increasing.
struct Grid3
{
  std::array<std::vector<double>, 3> nodes;
  // Boundary condition on the low and high face of each axis.
  std::array<std::array<BoundaryKind, 2>, 3> boundary{{{BoundaryKind::Wall, BoundaryKind::Wall},
                                                       {BoundaryKind::Wall, BoundaryKind::Wall},
                                                       {BoundaryKind::Wall, BoundaryKind::Wall}}};

  std::size_t cells(int axis) const { return nodes[axis].size() - 1; }
  std::size_t CellCount() const { return cells(0) * cells(1) * cells(2); }
  double MaxSpacing() const;
  double MinSpacing(int axis) const;
  Grid3 Scaled(double s) const;
};

// Uniform axis with the smallest node count giving spacing <= cell.
std::vector<double> UniformAxis(double lo, double hi, double cell);

// Axis whose spacing is `fine` at every breakpoint and grows linearly with
// distance (geometric progression of ratio ~growth) up to `coarse`.
// Breakpoints inside (lo, hi) become nodes.
std::vector<double> GradedAxis(double lo, double hi, std::vector<double> breakpoints, double fine,
                               double coarse, double growth);

// Resolution recipe for a geometry: used by voxelize and the solvers.
struct ResolutionSpec
{
  // Uniform when fine == coarse.
  double fine = 0.0;
  double coarse = 0.0;
  double growth = 1.3;
  // Domain box; defaults to the can's bounding box when unset.
  std::optional<Box> domain;
  std::array<std::array<BoundaryKind, 2>, 3> boundary{{{BoundaryKind::Wall, BoundaryKind::Wall},
                                                       {BoundaryKind::Wall, BoundaryKind::Wall},
                                                       {BoundaryKind::Wall, BoundaryKind::Wall}}};
  // Extra breakpoints per axis (e.g. probe planes).
  std::array<std::vector<double>, 3> extra_breakpoints;

  static ResolutionSpec Uniform(double cell);
  static ResolutionSpec Graded(double fine, double coarse, double growth = 1.3);
  ResolutionSpec Scaled(double s) const;

  nlohmann::json ToJson() const;
  static ResolutionSpec FromJson(const nlohmann::json &j);
};

Grid3 BuildGrid(const CavityGeometry &geometry, const ResolutionSpec &spec);

enum class Face : std::uint8_t
{
  XLo,
  XHi,
  YLo,
  YHi,
  ZLo,
  ZHi
};

struct SurfaceCell
{
  std::array<std::uint32_t, 3> cell;
  Face face;  // which face of the cell touches conductor
};

struct VoxelMask
{
  Grid3 grid;
  std::vector<std::uint8_t> vacuum;  // per cell, 1 = vacuum
  std::vector<SurfaceCell> surface_cells;

  std::size_t Index(std::size_t i, std::size_t j, std::size_t k) const
  {
    return (i * grid.cells(1) + j) * grid.cells(2) + k;
  }
  bool IsVacuumCell(std::size_t i, std::size_t j, std::size_t k) const { return vacuum[Index(i, j, k)] != 0; }
  double VacuumVolume() const;
};

// Cell-centre membership. Throws RefinementRequired when a feature inside the
// domain gets fewer than two cells.
VoxelMask Voxelize(const CavityGeometry &geometry, const Grid3 &grid);
VoxelMask Voxelize(const CavityGeometry &geometry, const ResolutionSpec &spec);

}  // namespace cavityforge::geometry
