#include "ldet/lmgf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ldet/csv.hpp"

namespace ldet {

void LmgfEstimate::validate() const {
  const std::size_t k = t_grid.size();
  if (k < 2) throw std::invalid_argument("LmgfEstimate: grid too small");
  if (phi.size() != k || dphi.size() != k || d2phi.size() != k || ess.size() != k ||
      dominated.size() != k) {
    throw std::invalid_argument("LmgfEstimate: field sizes differ");
  }
  for (std::size_t i = 0; i + 1 < k; ++i) {
    if (!(t_grid[i] < t_grid[i + 1])) {
      throw std::invalid_argument("LmgfEstimate: t grid not increasing");
    }
    if (dphi[i + 1] < dphi[i] - 1e-9 * (1.0 + std::abs(dphi[i]))) {
      throw std::invalid_argument("LmgfEstimate: dphi not nondecreasing");
    }
  }
  for (double v : d2phi) {
    if (v < 0.0) throw std::invalid_argument("LmgfEstimate: negative d2phi");
  }
}

std::vector<double> default_t_grid() {
  std::vector<double> g(201);
  for (int i = 0; i < 201; ++i) g[i] = -3.0 + 6.0 * i / 200.0;
  return g;
}

std::vector<double> default_scaled_t_grid(std::span<const double> stats, std::size_t n) {
  if (n == 0) throw std::invalid_argument("default_scaled_t_grid: n must be positive");
  double mean = 0.0;
  for (double T : stats) mean += T;
  mean /= static_cast<double>(stats.empty() ? 1 : stats.size());
  double ss = 0.0;
  for (double T : stats) ss += (T - mean) * (T - mean);
  const double sd = stats.size() > 1 ? std::sqrt(ss / static_cast<double>(stats.size() - 1)) : 0.0;
  const double sum_sd = sd * static_cast<double>(n);
  if (!(sum_sd > 0.0)) return default_t_grid();
  const double hi = 3.0 / sum_sd;
  std::vector<double> g(201);
  for (int i = 0; i < 201; ++i) g[i] = hi * (-1.0 + 2.0 * i / 200.0);
  return g;
}

namespace {

void check_inputs(std::size_t m, std::span<const double> t_grid) {
  if (m == 0) throw std::invalid_argument("lmgf: no samples");
  if (t_grid.size() < 2) throw std::invalid_argument("lmgf: grid too small");
  for (std::size_t i = 0; i + 1 < t_grid.size(); ++i) {
    if (!(t_grid[i] < t_grid[i + 1])) throw std::invalid_argument("lmgf: grid not increasing");
  }
}

// Core tilted-moment sweep over y_j = n * T_j at exponent t (already
// scaled). Yields log mean exp(t y), tilted mean/variance of T, ESS and
// the dominated-weight flag.
struct TiltPoint {
  double log_mean_exp = 0.0;
  double mean_t = 0.0;
  double var_t = 0.0;
  double ess = 0.0;
  bool dominated = false;
};

TiltPoint tilt_sweep(std::span<const double> stats, double n, double t) {
  double c = -1e308;
  for (double T : stats) c = std::max(c, t * n * T);
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, ssq = 0.0, wmax = 0.0;
  for (double T : stats) {
    const double w = std::exp(t * n * T - c);
    s0 += w;
    s1 += w * T;
    s2 += w * T * T;
    ssq += w * w;
    wmax = std::max(wmax, w);
  }
  TiltPoint p;
  const double m = static_cast<double>(stats.size());
  p.log_mean_exp = c + std::log(s0 / m);
  p.mean_t = s1 / s0;
  p.var_t = std::max(0.0, s2 / s0 - p.mean_t * p.mean_t);
  p.ess = s0 * s0 / ssq;
  p.dominated = wmax > 0.5 * s0;
  return p;
}

}  // namespace

LmgfEstimate lmgf_direct(std::span<const double> scores, std::span<const double> t_grid) {
  return scaled_lmgf_direct(scores, 1, t_grid);
}

LmgfEstimate scaled_lmgf_direct(std::span<const double> stats, std::size_t n,
                                std::span<const double> t_grid) {
  check_inputs(stats.size(), t_grid);
  if (n == 0) throw std::invalid_argument("scaled_lmgf_direct: n must be positive");
  LmgfEstimate est;
  est.n = n;
  est.m = stats.size();
  est.t_grid.assign(t_grid.begin(), t_grid.end());
  const double nd = static_cast<double>(n);
  const std::size_t k = t_grid.size();
  est.phi.resize(k);
  est.dphi.resize(k);
  est.d2phi.resize(k);
  est.ess.resize(k);
  est.dominated.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const TiltPoint p = tilt_sweep(stats, nd, t_grid[i]);
    est.phi[i] = p.log_mean_exp / nd;
    est.dphi[i] = p.mean_t;
    est.d2phi[i] = nd * p.var_t;
    est.ess[i] = p.ess;
    est.dominated[i] = p.dominated;
  }
  return est;
}

double lmgf_closed_form_gaussian(double mean, double var, double t) {
  if (!(var >= 0.0)) throw std::invalid_argument("lmgf_closed_form_gaussian: negative variance");
  return mean * t + 0.5 * var * t * t;
}

LmgfEstimate lmgf_closed_form_gaussian_samples(std::span<const double> samples,
                                               std::span<const double> t_grid) {
  check_inputs(samples.size(), t_grid);
  if (samples.size() < 2) {
    throw std::invalid_argument("lmgf_closed_form_gaussian_samples: need at least two samples");
  }
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(samples.size());
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double var = ss / static_cast<double>(samples.size() - 1);
  LmgfEstimate est;
  est.n = 1;
  est.m = samples.size();
  est.t_grid.assign(t_grid.begin(), t_grid.end());
  const std::size_t k = t_grid.size();
  est.phi.resize(k);
  est.dphi.resize(k);
  est.d2phi.assign(k, var);
  est.ess.assign(k, static_cast<double>(samples.size()));
  est.dominated.assign(k, false);
  for (std::size_t i = 0; i < k; ++i) {
    const double t = t_grid[i];
    est.phi[i] = mean * t + 0.5 * var * t * t;
    est.dphi[i] = mean + var * t;
  }
  return est;
}

LmgfEstimate lmgf_from_functions(const std::function<double(double)>& phi,
                                 const std::function<double(double)>& dphi,
                                 std::span<const double> t_grid, std::size_t n) {
  check_inputs(1, t_grid);
  LmgfEstimate est;
  est.n = n;
  est.m = 0;
  est.t_grid.assign(t_grid.begin(), t_grid.end());
  const std::size_t k = t_grid.size();
  est.phi.resize(k);
  est.dphi.resize(k);
  est.d2phi.resize(k);
  est.ess.assign(k, 1e18);
  est.dominated.assign(k, false);
  const double h = 1e-5;
  for (std::size_t i = 0; i < k; ++i) {
    const double t = t_grid[i];
    est.phi[i] = phi(t);
    est.dphi[i] = dphi(t);
    est.d2phi[i] = std::max(0.0, (dphi(t + h) - dphi(t - h)) / (2.0 * h));
  }
  return est;
}

LmgfEstimate negate_statistic(const LmgfEstimate& est) {
  LmgfEstimate out;
  out.n = est.n;
  out.m = est.m;
  const std::size_t k = est.t_grid.size();
  out.t_grid.resize(k);
  out.phi.resize(k);
  out.dphi.resize(k);
  out.d2phi.resize(k);
  out.ess.resize(k);
  out.dominated.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = k - 1 - i;
    out.t_grid[i] = -est.t_grid[j];
    out.phi[i] = est.phi[j];
    out.dphi[i] = -est.dphi[j];
    out.d2phi[i] = est.d2phi[j];
    out.ess[i] = est.ess[j];
    out.dominated[i] = est.dominated[j];
  }
  return out;
}

void write_lmgf_csv(const std::string& path, const LmgfEstimate& est) {
  CsvTable table;
  table.header = {"t", "phi", "dphi", "d2phi", "ess"};
  for (std::size_t i = 0; i < est.t_grid.size(); ++i) {
    table.rows.push_back({est.t_grid[i], est.phi[i], est.dphi[i], est.d2phi[i], est.ess[i]});
  }
  write_csv(path, table);
}

LmgfEstimate read_lmgf_csv(const std::string& path, std::size_t n) {
  const CsvTable table = read_csv(path);
  if (table.header.size() != 5) throw std::runtime_error("read_lmgf_csv: unexpected columns");
  LmgfEstimate est;
  est.n = n;
  est.m = 0;
  for (const auto& row : table.rows) {
    est.t_grid.push_back(row[0]);
    est.phi.push_back(row[1]);
    est.dphi.push_back(row[2]);
    est.d2phi.push_back(row[3]);
    est.ess.push_back(row[4]);
    est.dominated.push_back(false);
  }
  est.validate();
  return est;
}

}  // namespace ldet
