#include "cavityforge/axisym.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "cavityforge/physcore.hpp"

namespace cavityforge::axisym
{

using std::numbers::pi;

namespace
{

struct ProfileShape
{
  double a = 0.0;
  double h = 0.0;
  bool post = false;
  double R = 0.0;       // free end
  double R_base = 0.0;  // at z = 0
  double h_r = 0.0;
};

bool Near(double x, double y, double scale) { return std::abs(x - y) <= 1e-12 * scale; }

// Recognise the two profile shapes the geometry module emits.
ProfileShape ParseProfile(const geometry::BorProfile &profile)
{
  if (profile.polyline.size() < 3 || !(profile.Area() > 0.0))
  {
    throw geometry::GeometryError("degenerate profile: zero enclosed area");
  }
  const auto &p = profile.polyline;
  ProfileShape s;
  if (p.size() == 4)
  {
    s.a = p[1][0];
    s.h = p[2][1];
    const double sc = std::max(s.a, s.h);
    if (Near(p[0][0], 0, sc) && Near(p[0][1], 0, sc) && Near(p[1][1], 0, sc) && Near(p[2][0], s.a, sc) &&
        Near(p[3][0], 0, sc) && Near(p[3][1], s.h, sc))
    {
      return s;
    }
  }
  if (p.size() == 6)
  {
    s.post = true;
    s.h_r = p[0][1];
    s.R = p[1][0];
    s.R_base = p[2][0];
    s.a = p[3][0];
    s.h = p[4][1];
    const double sc = std::max(s.a, s.h);
    if (Near(p[0][0], 0, sc) && Near(p[1][1], s.h_r, sc) && Near(p[2][1], 0, sc) && Near(p[3][1], 0, sc) &&
        Near(p[4][0], s.a, sc) && Near(p[5][0], 0, sc) && Near(p[5][1], s.h, sc) && s.h_r < s.h &&
        std::max(s.R, s.R_base) < s.a)
    {
      return s;
    }
  }
  throw geometry::UnsupportedGeometry("profile is neither a plain cylinder nor an on-axis reentrance");
}

constexpr double kG3[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
constexpr double kW3[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

struct ShapeEval
{
  double N[4];
  double dN[4][2];  // d/dr, d/dz
  double r, z, detJ;
};

ShapeEval EvalShape(const Mesh &mesh, const std::array<std::uint32_t, 4> &q, double xi, double eta)
{
  ShapeEval s;
  const double Nxi[4] = {-(1 - eta) / 4, (1 - eta) / 4, (1 + eta) / 4, -(1 + eta) / 4};
  const double Neta[4] = {-(1 - xi) / 4, -(1 + xi) / 4, (1 + xi) / 4, (1 - xi) / 4};
  s.N[0] = (1 - xi) * (1 - eta) / 4;
  s.N[1] = (1 + xi) * (1 - eta) / 4;
  s.N[2] = (1 + xi) * (1 + eta) / 4;
  s.N[3] = (1 - xi) * (1 + eta) / 4;
  double J[2][2] = {{0, 0}, {0, 0}};
  s.r = s.z = 0.0;
  for (int a = 0; a < 4; a++)
  {
    const auto &X = mesh.nodes[q[a]];
    s.r += s.N[a] * X[0];
    s.z += s.N[a] * X[1];
    J[0][0] += Nxi[a] * X[0];
    J[0][1] += Neta[a] * X[0];
    J[1][0] += Nxi[a] * X[1];
    J[1][1] += Neta[a] * X[1];
  }
  s.detJ = J[0][0] * J[1][1] - J[0][1] * J[1][0];
  for (int a = 0; a < 4; a++)
  {
    // grad = J^{-T} (dN/dxi, dN/deta)
    s.dN[a][0] = (J[1][1] * Nxi[a] - J[1][0] * Neta[a]) / s.detJ;
    s.dN[a][1] = (-J[0][1] * Nxi[a] + J[0][0] * Neta[a]) / s.detJ;
  }
  return s;
}

}  // namespace

MeshSpec MeshSpec::Cells(int nr, int nz)
{
  MeshSpec s;
  s.cells = std::array<int, 2>{nr, nz};
  return s;
}

MeshSpec MeshSpec::Graded(double fine, double coarse, double growth)
{
  MeshSpec s;
  s.fine = fine;
  s.coarse = coarse;
  s.growth = growth;
  return s;
}

MeshSpec MeshSpec::Refined(double factor) const
{
  MeshSpec s = *this;
  if (s.cells)
  {
    s.cells = std::array<int, 2>{static_cast<int>(std::lround((*cells)[0] * factor)),
                                 static_cast<int>(std::lround((*cells)[1] * factor))};
  }
  s.fine /= factor;
  s.coarse /= factor;
  return s;
}

Mesh BuildMesh(const geometry::BorProfile &profile, const MeshSpec &spec)
{
  const ProfileShape shape = ParseProfile(profile);
  std::vector<double> rho, zs;
  if (spec.cells)
  {
    if (shape.post)
    {
      throw geometry::GeometryError("explicit cell counts are only supported for the plain cylinder");
    }
    const auto [nr, nz] = *spec.cells;
    if (nr < 1 || nz < 1)
    {
      throw geometry::GeometryError("cell counts must be positive");
    }
    for (int i = 0; i <= nr; i++)
    {
      rho.push_back(shape.a * i / nr);
    }
    for (int k = 0; k <= nz; k++)
    {
      zs.push_back(shape.h * k / nz);
    }
  }
  else
  {
    std::vector<double> rb, zb;
    if (shape.post)
    {
      rb.push_back(shape.R);
      zb.push_back(shape.h_r);
    }
    rho = geometry::GradedAxis(0.0, shape.a, rb, spec.fine, spec.coarse, spec.growth);
    zs = geometry::GradedAxis(0.0, shape.h, zb, spec.fine, spec.coarse, spec.growth);
  }

  std::size_t iR = 0, kR = 0;
  if (shape.post)
  {
    iR = static_cast<std::size_t>(std::min_element(rho.begin(), rho.end(),
                                                   [&](double x, double y)
                                                   { return std::abs(x - shape.R) < std::abs(y - shape.R); }) -
                                  rho.begin());
    kR = static_cast<std::size_t>(std::min_element(zs.begin(), zs.end(),
                                                   [&](double x, double y)
                                                   { return std::abs(x - shape.h_r) < std::abs(y - shape.h_r); }) -
                                  zs.begin());
    rho[iR] = shape.R;
    zs[kR] = shape.h_r;
    if (iR == 0 || kR == 0 || kR + 1 == zs.size())
    {
      throw geometry::RefinementRequired("reentrance", "mesh too coarse to resolve the reentrance");
    }
  }

  const std::size_t nr = rho.size();
  const std::size_t nz = zs.size();
  auto below = [&](std::size_t i, std::size_t k) { return shape.post && k < kR && i < iR; };

  Mesh mesh;
  mesh.a = shape.a;
  mesh.h = shape.h;
  std::vector<std::int64_t> id(nr * nz, -1);
  std::vector<std::array<std::size_t, 2>> ij;
  for (std::size_t k = 0; k < nz; k++)
  {
    for (std::size_t i = 0; i < nr; i++)
    {
      if (below(i, k))
      {
        continue;
      }
      double r = rho[i];
      if (shape.post && k < kR)
      {
        // Logarithmic map from the post surface to the wall: matches the upper
        // block at z = h_r and keeps cells proportional to the local radius,
        // which resolves the 1/r field around a narrow neck.
        const double rp = shape.R_base + (shape.R - shape.R_base) * zs[k] / shape.h_r;
        const double sigma = std::log(rho[i] / shape.R) / std::log(shape.a / shape.R);
        r = i + 1 == nr ? shape.a : rp * std::pow(shape.a / rp, sigma);
      }
      id[k * nr + i] = static_cast<std::int64_t>(mesh.nodes.size());
      mesh.nodes.push_back({r, zs[k]});
      ij.push_back({i, k});
    }
  }
  for (std::size_t k = 0; k + 1 < nz; k++)
  {
    for (std::size_t i = 0; i + 1 < nr; i++)
    {
      if (shape.post && k < kR && i < iR)
      {
        continue;
      }
      const std::int64_t n[4] = {id[k * nr + i], id[k * nr + i + 1], id[(k + 1) * nr + i + 1],
                                 id[(k + 1) * nr + i]};
      if (std::any_of(std::begin(n), std::end(n), [](std::int64_t x) { return x < 0; }))
      {
        continue;
      }
      mesh.quads.push_back({static_cast<std::uint32_t>(n[0]), static_cast<std::uint32_t>(n[1]),
                            static_cast<std::uint32_t>(n[2]), static_cast<std::uint32_t>(n[3])});
    }
  }

  // Boundary edges: directed quad edges whose reverse does not occur.
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> seen;
  for (const auto &q : mesh.quads)
  {
    for (int e = 0; e < 4; e++)
    {
      seen[{q[e], q[(e + 1) % 4]}]++;
    }
  }
  auto on_post = [&](std::uint32_t node)
  {
    const auto [i, k] = ij[node];
    return shape.post && ((i == iR && k <= kR) || (k == kR && i <= iR));
  };
  for (const auto &q : mesh.quads)
  {
    for (int e = 0; e < 4; e++)
    {
      const std::uint32_t n0 = q[e];
      const std::uint32_t n1 = q[(e + 1) % 4];
      if (seen.count({n1, n0}))
      {
        continue;
      }
      if (mesh.nodes[n0][0] == 0.0 && mesh.nodes[n1][0] == 0.0)
      {
        continue;  // symmetry axis
      }
      mesh.boundary.push_back({{n0, n1}, on_post(n0) && on_post(n1) ? 1 : 0});
    }
  }
  return mesh;
}

AxisymProblem Assemble(const geometry::BorProfile &profile, const MeshSpec &spec)
{
  return Assemble(std::make_shared<const Mesh>(BuildMesh(profile, spec)));
}

AxisymProblem Assemble(std::shared_ptr<const Mesh> mesh)
{
  if (!mesh || mesh->quads.empty())
  {
    throw geometry::GeometryError("empty mesh");
  }
  AxisymProblem prob;
  prob.mesh = mesh;
  prob.dof.assign(mesh->nodes.size(), -1);
  for (std::size_t n = 0; n < mesh->nodes.size(); n++)
  {
    if (mesh->nodes[n][0] > 0.0)
    {
      prob.dof[n] = static_cast<int>(prob.node_of_dof.size());
      prob.node_of_dof.push_back(static_cast<std::uint32_t>(n));
    }
  }
  const auto ndof = static_cast<Eigen::Index>(prob.node_of_dof.size());
  std::vector<Eigen::Triplet<double>> kt, mt;
  kt.reserve(mesh->quads.size() * 16);
  mt.reserve(mesh->quads.size() * 16);
  for (const auto &q : mesh->quads)
  {
    double ke[4][4] = {};
    double me[4][4] = {};
    for (int gi = 0; gi < 3; gi++)
    {
      for (int gj = 0; gj < 3; gj++)
      {
        const ShapeEval s = EvalShape(*mesh, q, kG3[gi], kG3[gj]);
        if (!(s.detJ > 0.0))
        {
          throw geometry::GeometryError("inverted mesh element");
        }
        const double w = kW3[gi] * kW3[gj] * s.detJ * s.r;
        for (int a = 0; a < 4; a++)
        {
          const double ca = s.dN[a][0] + s.N[a] / s.r;
          for (int b = 0; b < 4; b++)
          {
            const double cb = s.dN[b][0] + s.N[b] / s.r;
            ke[a][b] += w * (ca * cb + s.dN[a][1] * s.dN[b][1]);
            me[a][b] += w * s.N[a] * s.N[b];
          }
        }
      }
    }
    for (int a = 0; a < 4; a++)
    {
      const int da = prob.dof[q[a]];
      if (da < 0)
      {
        continue;
      }
      for (int b = 0; b < 4; b++)
      {
        const int db = prob.dof[q[b]];
        if (db < 0)
        {
          continue;
        }
        kt.emplace_back(da, db, ke[a][b]);
        mt.emplace_back(da, db, me[a][b]);
      }
    }
  }
  prob.K.resize(ndof, ndof);
  prob.M.resize(ndof, ndof);
  prob.K.setFromTriplets(kt.begin(), kt.end());
  prob.M.setFromTriplets(mt.begin(), mt.end());
  return prob;
}

namespace
{

// Factorisation of K - shift M; LDL^T first, LU if that breaks down.
class ShiftedSolver
{
public:
  ShiftedSolver(const Eigen::SparseMatrix<double> &A)
  {
    ldlt_.compute(A);
    if (ldlt_.info() != Eigen::Success || (ldlt_.vectorD().array().abs() == 0.0).any())
    {
      use_lu_ = true;
      lu_.analyzePattern(A);
      lu_.factorize(A);
      if (lu_.info() != Eigen::Success)
      {
        throw ConvergenceError("shifted operator is singular; move the shift off an eigenvalue", 0.0);
      }
    }
  }

  Eigen::MatrixXd Solve(const Eigen::MatrixXd &B) const
  {
    if (use_lu_)
    {
      return lu_.solve(B);
    }
    return ldlt_.solve(B);
  }

private:
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  bool use_lu_ = false;
};

}  // namespace

std::vector<AxisymMode> SolveModes(const AxisymProblem &problem, int count, double shift, const SolveOptions &options)
{
  if (count < 1)
  {
    throw DomainError("mode count must be at least 1");
  }
  if (shift < 0.0)
  {
    throw DomainError("shift must be non-negative");
  }
  const Eigen::Index n = problem.K.rows();
  const Eigen::Index p = std::min<Eigen::Index>(n, count + std::max(count, 6));
  if (count > n)
  {
    throw DomainError("more modes requested than degrees of freedom");
  }
  const Eigen::SparseMatrix<double> A = problem.K - shift * problem.M;
  const ShiftedSolver solver(A);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index j = 0; j < p; j++)
  {
    for (Eigen::Index i = 0; i < n; i++)
    {
      X(i, j) = normal(rng);
    }
  }

  Eigen::VectorXd lambda;
  std::vector<Eigen::Index> wanted;
  std::vector<double> residuals;
  double worst = 0.0;
  double floor_best = std::numeric_limits<double>::infinity();
  int floor_since = 0;
  for (int it = 0; it < options.max_iterations; it++)
  {
    const Eigen::MatrixXd Y = solver.Solve(problem.M * X);
    const Eigen::MatrixXd Q = Y.householderQr().householderQ() * Eigen::MatrixXd::Identity(n, p);
    Eigen::MatrixXd Kr = Q.transpose() * (problem.K * Q);
    Eigen::MatrixXd Mr = Q.transpose() * (problem.M * Q);
    Kr = 0.5 * (Kr + Kr.transpose()).eval();
    Mr = 0.5 * (Mr + Mr.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Kr, Mr);
    lambda = ges.eigenvalues();
    X = Q * ges.eigenvectors();

    wanted.clear();
    for (Eigen::Index j = 0; j < p && static_cast<int>(wanted.size()) < count; j++)
    {
      if (lambda(j) >= shift)
      {
        wanted.push_back(j);
      }
    }
    residuals.clear();
    worst = 0.0;
    for (Eigen::Index j : wanted)
    {
      const Eigen::VectorXd kx = problem.K * X.col(j);
      const Eigen::VectorXd mx = problem.M * X.col(j);
      const double res = (kx - lambda(j) * mx).norm() / (kx.norm() + std::abs(lambda(j)) * mx.norm());
      residuals.push_back(res);
      worst = std::max(worst, res);
    }
    if (static_cast<int>(wanted.size()) == count && worst < options.tolerance)
    {
      break;
    }
    // Strongly graded meshes hit a roundoff floor just above the tolerance;
    // accept it once the residual has stopped improving.
    if (static_cast<int>(wanted.size()) == count && worst < 100.0 * options.tolerance)
    {
      if (worst < 0.99 * floor_best)
      {
        floor_best = worst;
        floor_since = it;
      }
      else if (it - floor_since >= 20)
      {
        break;
      }
    }
    if (it + 1 == options.max_iterations)
    {
      std::ostringstream os;
      os << "axisymmetric eigensolver did not converge after " << options.max_iterations
         << " iterations; worst residual " << worst;
      throw ConvergenceError(os.str(), worst);
    }
  }

  const Mesh &mesh = *problem.mesh;
  std::vector<AxisymMode> modes;
  for (std::size_t w = 0; w < wanted.size(); w++)
  {
    const Eigen::Index j = wanted[w];
    Eigen::VectorXd x = X.col(j);
    // Unit stored energy: U = (mu0 / 2) * 2 pi * x^T M x.
    const double u = pi * constants::mu0 * x.dot(problem.M * x);
    x /= std::sqrt(u);
    Eigen::Index imax;
    x.cwiseAbs().maxCoeff(&imax);
    if (x(imax) < 0.0)
    {
      x = -x;
    }
    AxisymMode mode;
    mode.k = std::sqrt(lambda(j));
    mode.f = constants::c * mode.k / (2.0 * pi);
    mode.residual = residuals[w];
    mode.H_phi.assign(mesh.nodes.size(), 0.0);
    for (std::size_t d = 0; d < problem.node_of_dof.size(); d++)
    {
      mode.H_phi[problem.node_of_dof[d]] = x(static_cast<Eigen::Index>(d));
    }
    const double omega = 2.0 * pi * mode.f;
    const std::complex<double> scale = 1.0 / (std::complex<double>(0.0, 1.0) * omega * constants::eps0);
    for (const auto &q : mesh.quads)
    {
      const ShapeEval s = EvalShape(mesh, q, 0.0, 0.0);
      double H = 0, dHr = 0, dHz = 0;
      for (int a = 0; a < 4; a++)
      {
        H += s.N[a] * mode.H_phi[q[a]];
        dHr += s.dN[a][0] * mode.H_phi[q[a]];
        dHz += s.dN[a][1] * mode.H_phi[q[a]];
      }
      mode.E_r.push_back(scale * (-dHz));
      mode.E_z.push_back(scale * (dHr + H / s.r));
    }
    modes.push_back(std::move(mode));
  }
  return modes;
}

std::optional<double> InterpolateH(const Mesh &mesh, const std::vector<double> &H, double r, double z)
{
  const double tol = 1e-12 * std::max(mesh.a, mesh.h);
  for (const auto &q : mesh.quads)
  {
    double rlo = mesh.nodes[q[0]][0], rhi = rlo, zlo = mesh.nodes[q[0]][1], zhi = zlo;
    for (int a = 1; a < 4; a++)
    {
      rlo = std::min(rlo, mesh.nodes[q[a]][0]);
      rhi = std::max(rhi, mesh.nodes[q[a]][0]);
      zlo = std::min(zlo, mesh.nodes[q[a]][1]);
      zhi = std::max(zhi, mesh.nodes[q[a]][1]);
    }
    if (r < rlo - tol || r > rhi + tol || z < zlo - tol || z > zhi + tol)
    {
      continue;
    }
    // Invert the bilinear map by Newton iteration.
    double xi = 0.0, eta = 0.0;
    for (int it = 0; it < 30; it++)
    {
      const ShapeEval s = EvalShape(mesh, q, xi, eta);
      const double fr = s.r - r;
      const double fz = s.z - z;
      // Jacobian of (r, z) w.r.t. (xi, eta), rebuilt from the shape derivatives.
      const double Nxi[4] = {-(1 - eta) / 4, (1 - eta) / 4, (1 + eta) / 4, -(1 + eta) / 4};
      const double Neta[4] = {-(1 - xi) / 4, -(1 + xi) / 4, (1 + xi) / 4, (1 - xi) / 4};
      double J00 = 0, J01 = 0, J10 = 0, J11 = 0;
      for (int a = 0; a < 4; a++)
      {
        J00 += Nxi[a] * mesh.nodes[q[a]][0];
        J01 += Neta[a] * mesh.nodes[q[a]][0];
        J10 += Nxi[a] * mesh.nodes[q[a]][1];
        J11 += Neta[a] * mesh.nodes[q[a]][1];
      }
      const double det = J00 * J11 - J01 * J10;
      const double dxi = (J11 * fr - J01 * fz) / det;
      const double deta = (-J10 * fr + J00 * fz) / det;
      xi -= dxi;
      eta -= deta;
      if (std::abs(dxi) + std::abs(deta) < 1e-14)
      {
        break;
      }
    }
    if (std::abs(xi) <= 1.0 + 1e-9 && std::abs(eta) <= 1.0 + 1e-9)
    {
      const ShapeEval s = EvalShape(mesh, q, std::clamp(xi, -1.0, 1.0), std::clamp(eta, -1.0, 1.0));
      double v = 0.0;
      for (int a = 0; a < 4; a++)
      {
        v += s.N[a] * H[q[a]];
      }
      return v;
    }
  }
  return std::nullopt;
}

ModeField ToModeField(const AxisymProblem &problem, const AxisymMode &mode)
{
  const Mesh &mesh = *problem.mesh;
  const double mu0 = constants::mu0;
  const double omega = 2.0 * pi * mode.f;
  ModeField field;
  field.f = mode.f;
  field.solver = "axisym";
  field.volume.reserve(mesh.quads.size() * 9);
  for (const auto &q : mesh.quads)
  {
    for (int gi = 0; gi < 3; gi++)
    {
      for (int gj = 0; gj < 3; gj++)
      {
        const ShapeEval s = EvalShape(mesh, q, kG3[gi], kG3[gj]);
        double H = 0.0;
        for (int a = 0; a < 4; a++)
        {
          H += s.N[a] * mode.H_phi[q[a]];
        }
        field.volume.push_back({{s.r, 0.0, s.z}, mu0 * mu0 * H * H, 2.0 * pi * s.r * s.detJ * kW3[gi] * kW3[gj]});
      }
    }
  }
  for (std::size_t n = 0; n < mesh.nodes.size(); n++)
  {
    const double H = mode.H_phi[n];
    field.candidates.push_back({{mesh.nodes[n][0], 0.0, mesh.nodes[n][1]}, mu0 * mu0 * H * H});
  }
  constexpr double kS[3] = {0.5 - 0.3872983346207417, 0.5, 0.5 + 0.3872983346207417};
  constexpr double kWs[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  const std::complex<double> i_omega(0.0, omega);
  for (const auto &e : mesh.boundary)
  {
    const auto &X0 = mesh.nodes[e.nodes[0]];
    const auto &X1 = mesh.nodes[e.nodes[1]];
    const double dr = X1[0] - X0[0];
    const double dz = X1[1] - X0[1];
    const double L = std::hypot(dr, dz);
    const double nr = -dz / L;
    const double nz = dr / L;
    const double H0 = mode.H_phi[e.nodes[0]];
    const double H1 = mode.H_phi[e.nodes[1]];
    // Discrete Gauss law on the edge: telescopes to exact neutrality.
    const double edge_area = pi * (X0[0] + X1[0]) * L;
    const std::complex<double> rho = 2.0 * pi * (X1[0] * H1 - X0[0] * H0) / (i_omega * edge_area);
    for (int g = 0; g < 3; g++)
    {
      const double s = kS[g];
      const double r = X0[0] + s * dr;
      const double H = (1 - s) * H0 + s * H1;
      SurfaceSample sample;
      sample.position = {r, 0.0, X0[1] + s * dz};
      sample.normal = {nr, 0.0, nz};
      sample.area = kWs[g] * L * 2.0 * pi * r;
      sample.bt2 = mu0 * mu0 * H * H;
      sample.J = {-nz * H, 0.0, nr * H};
      sample.rho = rho;
      sample.conductor = e.conductor;
      field.surface.push_back(sample);
    }
  }
  auto mesh_ptr = problem.mesh;
  auto H = std::make_shared<const std::vector<double>>(mode.H_phi);
  field.b2_at = [mesh_ptr, H](const Vec3 &p) -> std::optional<double>
  {
    const auto v = InterpolateH(*mesh_ptr, *H, std::hypot(p[0], p[1]), p[2]);
    if (!v)
    {
      return std::nullopt;
    }
    return constants::mu0 * constants::mu0 * (*v) * (*v);
  };
  return field;
}

}  // namespace cavityforge::axisym
