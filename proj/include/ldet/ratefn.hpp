#pragma once

// Rate functions by convex duality: I(g) = sup_t [ g t - phi(t) ],
// computed on tabulated LMGF estimates via monotone interpolation of
// phi' and bisection for the dual point.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldet/lmgf.hpp"
#include "ldet/numerics.hpp"

namespace ldet {

struct GammaOutOfRange : std::runtime_error {
  explicit GammaOutOfRange(const std::string& what) : std::runtime_error(what) {}
};

struct LegendrePoint {
  double rate = 0.0;   // I(gamma), clamped to 0 against roundoff
  double t = 0.0;      // dual point with phi'(t) = gamma
};

// Shared interpolation state for repeated transforms of one estimate.
class RateSolver {
 public:
  explicit RateSolver(const LmgfEstimate& est);

  // Requires gamma strictly inside the open range of phi' over the grid;
  // boundary values are rejected. Bisection tolerance 1e-8 in t.
  LegendrePoint solve(double gamma) const;

  double phi_at(double t) const { return phi_interp_(t); }
  double dphi_at(double t) const { return dphi_interp_(t); }
  // phi'' by linear interpolation of the tabulated curvature.
  double curvature_at(double t) const;

  double mu() const { return mu_; }          // phi'(0)
  double dphi_min() const { return lo_; }
  double dphi_max() const { return hi_; }

 private:
  std::vector<double> t_grid_, dphi_, d2phi_;
  CubicHermite phi_interp_, dphi_interp_;
  double lo_ = 0.0, hi_ = 0.0, mu_ = 0.0;
};

struct RateFunction {
  std::vector<double> gamma_grid;  // points where the transform succeeded
  std::vector<double> rate;        // nonnegative
  std::vector<double> t_gamma;
  double mu = 0.0;                 // phi'(0)
  std::vector<double> skipped;     // out-of-range gammas, left out with a note
  std::string note;
};

LegendrePoint fenchel_legendre(const LmgfEstimate& est, double gamma);

RateFunction rate_curve(const LmgfEstimate& est, std::span<const double> gamma_grid);

// exp(-n I(gamma)) for the upper tail; requires gamma > phi'(0).
double chernoff_upper_bound(const LmgfEstimate& est, double gamma, std::size_t n);

void write_rate_csv(const std::string& path, const RateFunction& rf);

}  // namespace ldet
