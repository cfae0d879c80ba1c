#pragma once

// Test-only adaptive quadrature, independent of the closed-form integrals in
// the library.

#include <cmath>
#include <functional>

namespace testsupport {

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-12, int depth = 40) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

/// Integral of g(x, y) over [x0,x1] x [y0,y1] by nested adaptive Simpson.
inline double integrate2d(const std::function<double(double, double)>& g, double x0, double x1,
                          double y0, double y1, double tol = 1e-11) {
  auto inner = [&](double x) {
    return adaptive_simpson([&](double y) { return g(x, y); }, y0, y1, tol);
  };
  return adaptive_simpson(inner, x0, x1, tol);
}

}  // namespace testsupport
