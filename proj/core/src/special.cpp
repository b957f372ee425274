#include "cavityforge/special.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>
#include "cavityforge/physcore.hpp"

namespace cavityforge::special
{

namespace
{

double SeriesJ(int m, double x)
{
  // sum_k (-1)^k (x/2)^(2k+m) / (k! (k+m)!)
  const double half = 0.5 * x;
  double term = 1.0;
  for (int i = 1; i <= m; i++)
  {
    term *= half / i;
  }
  double sum = term;
  const double q = -half * half;
  for (int k = 1; k < 200; k++)
  {
    term *= q / (static_cast<double>(k) * (k + m));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum))
    {
      break;
    }
  }
  return sum;
}

// Miller's algorithm normalised with J_0 + 2 sum J_2k = 1.
double MillerJ(int m, double x)
{
  const int start =
      2 * ((std::max(m, static_cast<int>(x)) + 15 + static_cast<int>(std::sqrt(40.0 * std::max(m, static_cast<int>(x))))) / 2);
  double jp1 = 0.0;
  double j = 1e-300;
  double norm = 0.0;
  double result = 0.0;
  for (int k = start; k > 0; k--)
  {
    const double jm1 = 2.0 * k / x * j - jp1;
    jp1 = j;
    j = jm1;
    // Rescale to avoid overflow.
    if (std::abs(j) > 1e250)
    {
      j *= 1e-250;
      jp1 *= 1e-250;
      result *= 1e-250;
      norm *= 1e-250;
    }
    if (k - 1 == m)
    {
      result = j;
    }
    if ((k - 1) % 2 == 0 && k - 1 > 0)
    {
      norm += 2.0 * j;
    }
  }
  norm += j;  // J_0 term
  return result / norm;
}

}  // namespace

double BesselJ(int m, double x)
{
  if (m < 0)
  {
    throw DomainError("Bessel order must be non-negative");
  }
  if (x < 0.0)
  {
    // Integer order parity.
    return (m % 2 == 0 ? 1.0 : -1.0) * BesselJ(m, -x);
  }
  if (x == 0.0)
  {
    return m == 0 ? 1.0 : 0.0;
  }
  if (x < 2.0 + 0.5 * m)
  {
    return SeriesJ(m, x);
  }
  return MillerJ(m, x);
}

double BesselJPrime(int m, double x)
{
  if (m == 0)
  {
    return -BesselJ(1, x);
  }
  return 0.5 * (BesselJ(m - 1, x) - BesselJ(m + 1, x));
}

namespace
{

template <class F, class DF>
double NthRoot(F f, DF df, double start, int n, double skip_below)
{
  // Bracket sign changes on a fine scan, then bisect/Newton.
  const double step = 0.05;
  int found = 0;
  double a = start;
  double fa = f(a);
  for (int iter = 0; iter < 2000000; iter++)
  {
    const double b = a + step;
    const double fb = f(b);
    if (fa == 0.0 || fa * fb < 0.0)
    {
      double lo = a;
      double hi = b;
      double flo = fa;
      for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; k++)
      {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0))
        {
          lo = mid;
          flo = fm;
        }
        else
        {
          hi = mid;
        }
        if (hi - lo < 1e-6)
        {
          break;
        }
      }
      double x = 0.5 * (lo + hi);
      for (int k = 0; k < 50; k++)
      {
        const double dx = f(x) / df(x);
        x -= dx;
        if (std::abs(dx) < 1e-15 * std::abs(x))
        {
          break;
        }
      }
      if (x > skip_below)
      {
        found++;
        if (found == n)
        {
          return x;
        }
      }
    }
    a = b;
    fa = fb;
  }
  throw DomainError("Bessel zero search did not converge");
}

}  // namespace

double BesselJZero(int m, int n)
{
  if (m < 0 || n < 1)
  {
    throw DomainError("Bessel zero needs m >= 0 and n >= 1");
  }
  return NthRoot([m](double x) { return BesselJ(m, x); },
                 [m](double x) { return BesselJPrime(m, x); }, 1e-3, n, 1e-6);
}

double BesselJPrimeZero(int m, int n)
{
  if (m < 0 || n < 1)
  {
    throw DomainError("Bessel zero needs m >= 0 and n >= 1");
  }
  // J''_m(x) = -J'_m/x - (1 - m^2/x^2) J_m
  auto d2 = [m](double x)
  {
    return -BesselJPrime(m, x) / x - (1.0 - static_cast<double>(m * m) / (x * x)) * BesselJ(m, x);
  };
  return NthRoot([m](double x) { return BesselJPrime(m, x); }, d2, 1e-3, n, 1e-6);
}

namespace
{

// Carlson symmetric integrals by the duplication theorem.
double CarlsonRF(double x, double y, double z)
{
  for (int i = 0; i < 100; i++)
  {
    const double mu = (x + y + z) / 3.0;
    const double dx = 1.0 - x / mu;
    const double dy = 1.0 - y / mu;
    const double dz = 1.0 - z / mu;
    if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) < 1e-4)
    {
      const double e2 = dx * dy - dz * dz;
      const double e3 = dx * dy * dz;
      return (1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / std::sqrt(mu);
    }
    const double sx = std::sqrt(x);
    const double sy = std::sqrt(y);
    const double sz = std::sqrt(z);
    const double lambda = sx * (sy + sz) + sy * sz;
    x = 0.25 * (x + lambda);
    y = 0.25 * (y + lambda);
    z = 0.25 * (z + lambda);
  }
  throw DomainError("Carlson RF did not converge");
}

double CarlsonRD(double x, double y, double z)
{
  double sum = 0.0;
  double fac = 1.0;
  for (int i = 0; i < 100; i++)
  {
    const double mu = (x + y + 3.0 * z) / 5.0;
    const double dx = 1.0 - x / mu;
    const double dy = 1.0 - y / mu;
    const double dz = 1.0 - z / mu;
    if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) < 1e-4)
    {
      const double ea = dx * dy;
      const double eb = dz * dz;
      const double ec = ea - eb;
      const double ed = ea - 6.0 * eb;
      const double ee = ed + ec + ec;
      const double s = 1.0 + ed * (-3.0 / 14.0 + 9.0 / 88.0 * ed - 4.5 / 26.0 * dz * ee) +
                       dz * (ee / 6.0 + dz * (-9.0 / 22.0 * ec + dz * 3.0 / 26.0 * ea));
      return 3.0 * sum + fac * s / (mu * std::sqrt(mu));
    }
    const double sx = std::sqrt(x);
    const double sy = std::sqrt(y);
    const double sz = std::sqrt(z);
    const double lambda = sx * (sy + sz) + sy * sz;
    sum += fac / (sz * (z + lambda));
    fac *= 0.25;
    x = 0.25 * (x + lambda);
    y = 0.25 * (y + lambda);
    z = 0.25 * (z + lambda);
  }
  throw DomainError("Carlson RD did not converge");
}

}  // namespace

double EllipticE(double k)
{
  if (k < 0.0 || k > 1.0)
  {
    throw DomainError("elliptic modulus must lie in [0, 1]");
  }
  if (k == 1.0)
  {
    return 1.0;
  }
  const double y = (1.0 - k) * (1.0 + k);
  return CarlsonRF(0.0, y, 1.0) - k * k / 3.0 * CarlsonRD(0.0, y, 1.0);
}

}  // namespace cavityforge::special
