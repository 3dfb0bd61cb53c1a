#pragma once

// Direct estimation of log moment generating functions from scored
// samples. The estimate carries first and second derivatives in t and a
// per-point effective sample size so downstream consumers can judge how
// far into the tilt range the data actually reach.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ldet {

struct LmgfEstimate {
  std::vector<double> t_grid;    // strictly increasing
  std::vector<double> phi;       // phi(0) = 0 whenever 0 is a grid point
  std::vector<double> dphi;      // nondecreasing (convexity)
  std::vector<double> d2phi;     // nonnegative
  std::vector<double> ess;       // effective sample size per tilt
  std::vector<bool> dominated;   // largest tilt weight above half the total
  std::size_t n = 1;             // block length of the underlying statistic
  std::size_t m = 0;             // number of scored samples

  // Points with ESS below this are considered unreliable.
  static constexpr double kMinEss = 30.0;

  bool reliable_at(std::size_t i) const { return ess[i] >= kMinEss && !dominated[i]; }
  void validate() const;
};

std::vector<double> default_t_grid();  // 201 points on [-3, 3]

// 201 points on [-3/s, 3/s] with s the sample standard deviation of the
// summed statistic n*T, so the tilted mean sweeps about three standard
// deviations of T either way. Falls back to [-3, 3] for constant data.
std::vector<double> default_scaled_t_grid(std::span<const double> stats, std::size_t n);

// Empirical LMGF of elementwise scores: phi(t) = log mean exp(t tau_j),
// with tilted-moment derivatives. Weights are max-subtracted.
LmgfEstimate lmgf_direct(std::span<const double> scores, std::span<const double> t_grid);

// Scaled LMGF of a length-n statistic: phi_n(t) = (1/n) log mean exp(n t T_j).
// dphi is the tilted mean of T, d2phi is n times the tilted variance.
LmgfEstimate scaled_lmgf_direct(std::span<const double> stats, std::size_t n,
                                std::span<const double> t_grid);

// Gaussian LMGF value mu t + var t^2 / 2.
double lmgf_closed_form_gaussian(double mean, double var, double t);

// Gaussian closed form fitted to sample moments: mu t + sigma^2 t^2 / 2
// with the unbiased variance estimate.
LmgfEstimate lmgf_closed_form_gaussian_samples(std::span<const double> samples,
                                               std::span<const double> t_grid);

// Tabulate analytic phi and phi' on a grid; phi'' by centered differences.
LmgfEstimate lmgf_from_functions(const std::function<double(double)>& phi,
                                 const std::function<double(double)>& dphi,
                                 std::span<const double> t_grid, std::size_t n = 1);

// LMGF of the mirrored statistic -T: phi_neg(t) = phi(-t) on the negated grid.
LmgfEstimate negate_statistic(const LmgfEstimate& est);

void write_lmgf_csv(const std::string& path, const LmgfEstimate& est);
LmgfEstimate read_lmgf_csv(const std::string& path, std::size_t n = 1);

}  // namespace ldet
