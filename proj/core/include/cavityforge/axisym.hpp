#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Sparse>

#include "cavityforge/geometry.hpp"
#include "cavityforge/mode_field.hpp"

// m = 0 TM modes of bodies of revolution. The unknown is H_phi on a
// quadrilateral mesh of the (r, z) half-plane whose boundary follows the
// profile exactly (slanted reentrance walls included).
namespace cavityforge::axisym
{

// Either explicit cell counts (cylinder only) or graded sizing.
struct MeshSpec
{
  double fine = 0.5e-3;
  double coarse = 1e-3;
  double growth = 1.3;
  std::optional<std::array<int, 2>> cells;  // (n_r, n_z), uniform

  static MeshSpec Cells(int nr, int nz);
  static MeshSpec Graded(double fine, double coarse, double growth = 1.3);
  MeshSpec Refined(double factor) const;  // cell sizes divided by factor
};

struct BoundaryEdge
{
  std::array<std::uint32_t, 2> nodes;  // vacuum on the left going n0 -> n1
  int conductor = 0;                   // 0 can, 1 reentrance
};

struct Mesh
{
  std::vector<std::array<double, 2>> nodes;    // (r, z)
  std::vector<std::array<std::uint32_t, 4>> quads;  // counter-clockwise
  std::vector<BoundaryEdge> boundary;          // PEC edges only, axis excluded
  double a = 0.0;
  double h = 0.0;
};

Mesh BuildMesh(const geometry::BorProfile &profile, const MeshSpec &spec);

struct AxisymProblem
{
  std::shared_ptr<const Mesh> mesh;
  Eigen::SparseMatrix<double> K;  // curl-curl form, without the 2*pi
  Eigen::SparseMatrix<double> M;  // mass form, without the 2*pi
  std::vector<int> dof;           // node -> dof, -1 on the axis
  std::vector<std::uint32_t> node_of_dof;
};

AxisymProblem Assemble(const geometry::BorProfile &profile, const MeshSpec &spec);
AxisymProblem Assemble(std::shared_ptr<const Mesh> mesh);

struct AxisymMode
{
  double k = 0.0;
  double f = 0.0;
  std::vector<double> H_phi;  // per node, A/m, unit stored energy
  // Phasors E = curl H / (i omega eps0) at element centres.
  std::vector<std::complex<double>> E_r;
  std::vector<std::complex<double>> E_z;
  double residual = 0.0;
};

struct SolveOptions
{
  double tolerance = 1e-9;
  int max_iterations = 400;
  std::uint64_t seed = 1;
};

// The `count` lowest modes with k^2 >= shift, ascending in f.
std::vector<AxisymMode> SolveModes(const AxisymProblem &problem, int count, double shift = 0.0,
                                   const SolveOptions &options = {});

// Mode field in the solver-neutral form used by the metrics.
ModeField ToModeField(const AxisymProblem &problem, const AxisymMode &mode);

// H_phi at (r, z) by interpolation; nullopt outside the mesh.
std::optional<double> InterpolateH(const Mesh &mesh, const std::vector<double> &H, double r, double z);

// Quasistatic field expulsion by an infinitely long conducting strip with
// cross-section d (along x) by t (along y) in a uniform field B_ext along y,
// normal to the strip face. Perfect screening: the flux function is constant
// on the strip. t = d = 0 means no conductor.
struct ExpulsionOptions
{
  double domain = 0.0;  // side of the square domain; default 20 d, at least 5 d
  double fine = 0.0;    // cell size at the strip; default t / 8
  double growth = 1.15;
};

struct ExpulsionSolution
{
  std::vector<double> x, y;  // node coordinates
  std::vector<double> Bx, By;  // cell-centred field, row-major over (x, y) cells
  // max |B| over B_ext, sampled at least t/2 from the strip (corners are singular)
  double enhancement = 1.0;
  double N_eff = 0.0;         // 1 - B_ext / B_surf
  double boundary_deviation = 0.0;  // max | |B| - B_ext | / B_ext on the outer cells
};

ExpulsionSolution QuasistaticExpulsion(double t, double d, double B_ext, const ExpulsionOptions &options = {});

}  // namespace cavityforge::axisym
