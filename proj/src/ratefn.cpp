#include "ldet/ratefn.hpp"

#include <algorithm>
#include <cmath>

#include "ldet/csv.hpp"

namespace ldet {

RateSolver::RateSolver(const LmgfEstimate& est)
    : t_grid_(est.t_grid), dphi_(est.dphi), d2phi_(est.d2phi) {
  est.validate();
  // Monotonize against roundoff so bracketing never sees inversions.
  for (std::size_t i = 1; i < dphi_.size(); ++i) {
    dphi_[i] = std::max(dphi_[i], dphi_[i - 1]);
  }
  phi_interp_ = CubicHermite(t_grid_, est.phi, dphi_, false);
  dphi_interp_ = CubicHermite(t_grid_, dphi_, d2phi_, true);
  lo_ = dphi_.front();
  hi_ = dphi_.back();
  mu_ = dphi_interp_(0.0);
}

double RateSolver::curvature_at(double t) const {
  if (t <= t_grid_.front()) return d2phi_.front();
  if (t >= t_grid_.back()) return d2phi_.back();
  const auto it = std::upper_bound(t_grid_.begin(), t_grid_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - t_grid_.begin()) - 1;
  const double w = (t - t_grid_[i]) / (t_grid_[i + 1] - t_grid_[i]);
  return (1.0 - w) * d2phi_[i] + w * d2phi_[i + 1];
}

LegendrePoint RateSolver::solve(double gamma) const {
  if (!(gamma > lo_ && gamma < hi_)) {
    throw GammaOutOfRange("gamma " + std::to_string(gamma) + " outside phi' range (" +
                          std::to_string(lo_) + ", " + std::to_string(hi_) + ")");
  }
  // Bracket on grid nodes, then bisect on the monotone interpolant.
  std::size_t j = 1;
  while (dphi_[j] < gamma) ++j;
  double a = t_grid_[j - 1], b = t_grid_[j];
  while (b - a > 1e-8) {
    const double mid = 0.5 * (a + b);
    if (dphi_interp_(mid) < gamma) {
      a = mid;
    } else {
      b = mid;
    }
  }
  LegendrePoint p;
  p.t = 0.5 * (a + b);
  p.rate = p.t * gamma - phi_interp_(p.t);
  if (p.rate < 0.0 && p.rate > -1e-12) p.rate = 0.0;
  if (p.rate < 0.0) {
    throw std::runtime_error("fenchel_legendre: negative rate beyond roundoff");
  }
  return p;
}

LegendrePoint fenchel_legendre(const LmgfEstimate& est, double gamma) {
  return RateSolver(est).solve(gamma);
}

RateFunction rate_curve(const LmgfEstimate& est, std::span<const double> gamma_grid) {
  const RateSolver solver(est);
  RateFunction rf;
  rf.mu = solver.mu();
  for (double g : gamma_grid) {
    if (!(g > solver.dphi_min() && g < solver.dphi_max())) {
      rf.skipped.push_back(g);
      continue;
    }
    const LegendrePoint p = solver.solve(g);
    rf.gamma_grid.push_back(g);
    rf.rate.push_back(p.rate);
    rf.t_gamma.push_back(p.t);
  }
  if (!rf.skipped.empty()) {
    rf.note = std::to_string(rf.skipped.size()) + " gamma value(s) outside phi' range skipped";
  }
  if (rf.gamma_grid.empty()) {
    throw GammaOutOfRange("rate_curve: no gamma value inside phi' range");
  }
  return rf;
}

double chernoff_upper_bound(const LmgfEstimate& est, double gamma, std::size_t n) {
  const RateSolver solver(est);
  if (!(gamma > solver.mu())) {
    throw GammaOutOfRange("chernoff_upper_bound: gamma must exceed phi'(0)");
  }
  const LegendrePoint p = solver.solve(gamma);
  return std::exp(-static_cast<double>(n) * p.rate);
}

void write_rate_csv(const std::string& path, const RateFunction& rf) {
  CsvTable table;
  table.header = {"gamma", "rate", "t_gamma"};
  for (std::size_t i = 0; i < rf.gamma_grid.size(); ++i) {
    table.rows.push_back({rf.gamma_grid[i], rf.rate[i], rf.t_gamma[i]});
  }
  write_csv(path, table);
}

}  // namespace ldet
