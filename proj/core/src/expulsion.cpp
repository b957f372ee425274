#include <algorithm>
#include <cmath>

#include <Eigen/SparseCholesky>

#include "cavityforge/axisym.hpp"
#include "cavityforge/physcore.hpp"

namespace cavityforge::axisym
{

ExpulsionSolution QuasistaticExpulsion(double t, double d, double B_ext, const ExpulsionOptions &options)
{
  const bool empty = t == 0.0 && d == 0.0;
  if (!empty && !(t > 0.0 && d > 0.0))
  {
    throw DomainError("strip thickness and width must both be positive");
  }
  if (!(B_ext > 0.0))
  {
    throw DomainError("applied field must be positive");
  }
  const double scale = empty ? 1.0 : d;
  const double L = options.domain > 0.0 ? options.domain : 20.0 * scale;
  if (!empty && L < 5.0 * d)
  {
    throw DomainError("domain must be at least 5 d across");
  }
  if (!empty && (0.5 * d >= 0.5 * L || 0.5 * t >= 0.5 * L))
  {
    throw DomainError("strip touches the domain boundary");
  }
  const double fine = options.fine > 0.0 ? options.fine : (empty ? L / 64 : t / 8.0);
  const double coarse = std::max(fine, L / 40.0);
  const std::vector<double> bx = empty ? std::vector<double>{} : std::vector<double>{-0.5 * d, 0.0, 0.5 * d};
  const std::vector<double> by = empty ? std::vector<double>{} : std::vector<double>{-0.5 * t, 0.5 * t};

  ExpulsionSolution sol;
  sol.x = geometry::GradedAxis(-0.5 * L, 0.5 * L, bx, fine, coarse, options.growth);
  sol.y = geometry::GradedAxis(-0.5 * L, 0.5 * L, by, fine, coarse, options.growth);
  const auto &x = sol.x;
  const auto &y = sol.y;
  const std::size_t nx = x.size();
  const std::size_t ny = y.size();
  const double tol = 1e-12 * L;
  auto in_strip = [&](std::size_t i, std::size_t j)
  { return !empty && std::abs(x[i]) <= 0.5 * d + tol && std::abs(y[j]) <= 0.5 * t + tol; };
  auto node = [&](std::size_t i, std::size_t j) { return i * ny + j; };

  // Dirichlet values: uniform-field flux function outside, zero on the strip.
  std::vector<double> A(nx * ny, 0.0);
  std::vector<int> dof(nx * ny, -1);
  int ndof = 0;
  for (std::size_t i = 0; i < nx; i++)
  {
    for (std::size_t j = 0; j < ny; j++)
    {
      const bool outer = i == 0 || j == 0 || i + 1 == nx || j + 1 == ny;
      if (outer)
      {
        A[node(i, j)] = -B_ext * x[i];
      }
      else if (!in_strip(i, j))
      {
        dof[node(i, j)] = ndof++;
      }
    }
  }

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ndof);
  for (std::size_t i = 1; i + 1 < nx; i++)
  {
    for (std::size_t j = 1; j + 1 < ny; j++)
    {
      const int p = dof[node(i, j)];
      if (p < 0)
      {
        continue;
      }
      const double hx = 0.5 * (x[i + 1] - x[i - 1]);
      const double hy = 0.5 * (y[j + 1] - y[j - 1]);
      const std::size_t nb[4] = {node(i + 1, j), node(i - 1, j), node(i, j + 1), node(i, j - 1)};
      const double c[4] = {hy / (x[i + 1] - x[i]), hy / (x[i] - x[i - 1]), hx / (y[j + 1] - y[j]),
                           hx / (y[j] - y[j - 1])};
      double diag = 0.0;
      for (int k = 0; k < 4; k++)
      {
        diag += c[k];
        const int q = dof[nb[k]];
        if (q >= 0)
        {
          trip.emplace_back(p, q, -c[k]);
        }
        else
        {
          rhs(p) += c[k] * A[nb[k]];
        }
      }
      trip.emplace_back(p, p, diag);
    }
  }
  Eigen::SparseMatrix<double> K(ndof, ndof);
  K.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
  if (ldlt.info() != Eigen::Success)
  {
    throw ConvergenceError("expulsion system factorisation failed", 0.0);
  }
  const Eigen::VectorXd sol_a = ldlt.solve(rhs);
  for (std::size_t n = 0; n < A.size(); n++)
  {
    if (dof[n] >= 0)
    {
      A[n] = sol_a(dof[n]);
    }
  }

  // Cell fields: B = (dA/dy, -dA/dx).
  const std::size_t cx = nx - 1;
  const std::size_t cy = ny - 1;
  sol.Bx.assign(cx * cy, 0.0);
  sol.By.assign(cx * cy, 0.0);
  for (std::size_t i = 0; i < cx; i++)
  {
    for (std::size_t j = 0; j < cy; j++)
    {
      const double dx = x[i + 1] - x[i];
      const double dy = y[j + 1] - y[j];
      const double a00 = A[node(i, j)], a10 = A[node(i + 1, j)];
      const double a01 = A[node(i, j + 1)], a11 = A[node(i + 1, j + 1)];
      sol.Bx[i * cy + j] = 0.5 * ((a01 - a00) + (a11 - a10)) / dy;
      sol.By[i * cy + j] = -0.5 * ((a10 - a00) + (a11 - a01)) / dx;
    }
  }

  double dev = 0.0;
  for (std::size_t i = 0; i < cx; i++)
  {
    for (std::size_t j = 0; j < cy; j++)
    {
      if (i == 0 || j == 0 || i + 1 == cx || j + 1 == cy)
      {
        const double b = std::hypot(sol.Bx[i * cy + j], sol.By[i * cy + j]);
        dev = std::max(dev, std::abs(b - B_ext) / B_ext);
      }
    }
  }
  sol.boundary_deviation = dev;

  if (empty)
  {
    sol.enhancement = 1.0;
    sol.N_eff = 0.0;
    return sol;
  }
  // Surface field: mean |B| over the cells lining the two end faces, where the
  // field wraps around the strip. The corner singularity is integrable, so the
  // face average converges under refinement while a pointwise maximum would not.
  double sum = 0.0;
  double len = 0.0;
  for (std::size_t i = 0; i < cx; i++)
  {
    const bool right = std::abs(x[i] - 0.5 * d) <= tol;
    const bool left = std::abs(x[i + 1] + 0.5 * d) <= tol;
    if (!right && !left)
    {
      continue;
    }
    for (std::size_t j = 0; j < cy; j++)
    {
      const double yc = 0.5 * (y[j] + y[j + 1]);
      if (std::abs(yc) < 0.5 * t)
      {
        const double dy = y[j + 1] - y[j];
        sum += std::hypot(sol.Bx[i * cy + j], sol.By[i * cy + j]) * dy;
        len += dy;
      }
    }
  }
  sol.enhancement = sum / len / B_ext;
  sol.N_eff = 1.0 - 1.0 / sol.enhancement;
  return sol;
}

}  // namespace cavityforge::axisym
