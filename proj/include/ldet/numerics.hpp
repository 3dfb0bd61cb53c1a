#pragma once

// Shared numeric kernels: normal CDF/quantile, adaptive quadrature,
// monotone cubic interpolation, incomplete beta.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ldet {

// P[N(0,1) <= x], accurate in both tails.
double normal_cdf(double x);

// Inverse of normal_cdf; rational approximation polished by one Halley
// step, absolute error near machine precision for p in (0,1).
double normal_quantile(double p);

// Adaptive Simpson quadrature with absolute tolerance.
template <class F>
double integrate_adaptive(F f, double a, double b, double abs_tol);

// Cubic Hermite interpolant on an increasing grid with node slopes.
// When built with limit_slopes, slopes are capped Fritsch-Carlson style
// so monotone node values yield a monotone interpolant.
class CubicHermite {
 public:
  CubicHermite() = default;
  CubicHermite(std::span<const double> x, std::span<const double> y,
               std::span<const double> slope, bool limit_slopes);

  double operator()(double t) const;
  double derivative(double t) const;

 private:
  std::vector<double> x_, y_, m_;
  std::size_t locate(double t) const;
};

// Regularized incomplete beta function I_x(a,b).
double incomplete_beta(double a, double b, double x);

// Quantile of the Beta(a,b) distribution by bisection.
double beta_quantile(double p, double a, double b);

// log(sum(exp(v))) with max subtraction.
double log_sum_exp(std::span<const double> v);

// ---- implementation of the templated quadrature ----

namespace detail {
template <class F>
double simpson_step(F& f, double a, double fa, double b, double fb, double c,
                    double fc, double whole, double tol, int depth) {
  const double m1 = 0.5 * (a + c), m2 = 0.5 * (c + b);
  const double fm1 = f(m1), fm2 = f(m2);
  const double left = (c - a) / 6.0 * (fa + 4.0 * fm1 + fc);
  const double right = (b - c) / 6.0 * (fc + 4.0 * fm2 + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_step(f, a, fa, c, fc, m1, fm1, left, 0.5 * tol, depth - 1) +
         simpson_step(f, c, fc, b, fb, m2, fm2, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

template <class F>
double integrate_adaptive(F f, double a, double b, double abs_tol) {
  const double c = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fc = f(c);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
  return detail::simpson_step(f, a, fa, b, fb, c, fc, whole, abs_tol, 48);
}

}  // namespace ldet
