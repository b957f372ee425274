#pragma once

namespace cavityforge::special
{

// Bessel function of the first kind J_m(x), integer order m >= 0, x >= 0.
// Power series for small x, Miller backward recurrence otherwise; ~1e-14 absolute.
double BesselJ(int m, double x);

// dJ_m/dx.
double BesselJPrime(int m, double x);

// n-th positive zero of J_m (n >= 1), refined by Newton to 1e-13.
double BesselJZero(int m, int n);

// n-th positive zero of J'_m (n >= 1). For m = 0 the trivial zero at x = 0 is skipped.
double BesselJPrimeZero(int m, int n);

// Complete elliptic integral of the second kind E(k), modulus convention, 0 <= k <= 1.
double EllipticE(double k);

}  // namespace cavityforge::special
