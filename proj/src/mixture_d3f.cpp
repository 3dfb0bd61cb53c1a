#include <cmath>
#include <stdexcept>

#include "ldet/d3f.hpp"
#include "ldet/numerics.hpp"

namespace ldet {

void MixtureD3F::check() const {
  if (thetas.empty()) throw std::invalid_argument("MixtureD3F: empty alternative set");
  if (weights.size() != thetas.size() || members.size() != thetas.size()) {
    throw std::invalid_argument("MixtureD3F: thetas, weights, members must align");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("MixtureD3F: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("MixtureD3F: weights must sum to 1");
  }
}

double d3f_statistic_mixture(const MixtureD3F& mix, std::span<const double> xs) {
  mix.check();
  if (xs.empty()) throw std::invalid_argument("d3f_statistic_mixture: empty observation set");
  std::vector<double> terms(mix.members.size());
  for (std::size_t k = 0; k < mix.members.size(); ++k) {
    double sum = 0.0;
    for (double x : xs) sum += mix.members[k].score(x);
    terms[k] = std::log(mix.weights[k]) + sum;
  }
  return log_sum_exp(terms) / static_cast<double>(xs.size());
}

RnConditionReport rn_condition_check(const MixtureD3F& mix, const CompositeModel& model,
                                     std::size_t star_index, std::size_t probes,
                                     RngStream& rng) {
  mix.check();
  model.check();
  if (star_index >= mix.thetas.size()) {
    throw std::invalid_argument("rn_condition_check: star index out of range");
  }
  if (probes < 2) throw std::invalid_argument("rn_condition_check: need at least 2 probes");

  const std::size_t k = mix.thetas.size();
  const double theta_star = mix.thetas[star_index];
  std::vector<double> sum(k, 0.0), sumsq(k, 0.0);
  for (std::size_t i = 0; i < probes; ++i) {
    const double x = sample_scalar(model.family, theta_star, model.scale, rng);
    for (std::size_t j = 0; j < k; ++j) {
      const double s = mix.members[j].score(x);
      sum[j] += s;
      sumsq[j] += s * s;
    }
  }

  RnConditionReport report;
  report.star_index = star_index;
  report.mu.resize(k);
  report.se.resize(k);
  const double m = static_cast<double>(probes);
  for (std::size_t j = 0; j < k; ++j) {
    report.mu[j] = sum[j] / m;
    const double var = std::max(0.0, sumsq[j] / m - report.mu[j] * report.mu[j]);
    report.se[j] = std::sqrt(var / m);
  }
  report.holds = true;
  for (std::size_t j = 0; j < k; ++j) {
    if (j != star_index && !(report.mu[star_index] > report.mu[j])) report.holds = false;
  }
  return report;
}

}  // namespace ldet
