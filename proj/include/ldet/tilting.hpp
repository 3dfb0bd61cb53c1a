#pragma once

// Rare-event rate estimation by exponential tilting: a Metropolis chain
// whose proposal redraws one block of coordinates from the base law, so
// the acceptance ratio reduces to exp(n t (T_new - T_old)). Chains at a
// grid of tilts give phi'(t); integration and duality recover the rate.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "ldet/lmgf.hpp"
#include "ldet/models.hpp"
#include "ldet/rng.hpp"

namespace ldet {

// Sampling problem seen by the chain: a state of `block_count` blocks
// with a scalar statistic. propose() draws a candidate refresh of one
// block from the base law and returns the statistic it would produce;
// accept() commits the last proposal, anything else discards it.
class TiltTarget {
 public:
  virtual ~TiltTarget() = default;
  virtual std::size_t horizon() const = 0;  // the n in exp(n t T)
  virtual std::size_t block_count() const = 0;
  virtual void init(RngStream& rng) = 0;
  virtual double statistic() const = 0;
  virtual double propose(std::size_t block, RngStream& rng) = 0;
  virtual void accept() = 0;
};

// IID scalar coordinates with a mean-of-scores statistic. Blocks are
// single coordinates; the statistic updates incrementally.
class ScalarMeanTarget : public TiltTarget {
 public:
  ScalarMeanTarget(Family family, double theta, double scale, std::size_t n,
                   std::function<double(double)> score);

  std::size_t horizon() const override { return n_; }
  std::size_t block_count() const override { return n_; }
  void init(RngStream& rng) override;
  double statistic() const override { return sum_ / static_cast<double>(n_); }
  double propose(std::size_t block, RngStream& rng) override;
  void accept() override;

 private:
  void refresh_sum();

  Family family_;
  double theta_, scale_;
  std::size_t n_;
  std::function<double(double)> score_;
  std::vector<double> scores_;
  double sum_ = 0.0;
  std::size_t cand_block_ = 0;
  double cand_score_ = 0.0;
  std::size_t accepts_ = 0;
};

// IID coordinates scored by every member of a mixture; the statistic is
// the normalized log-sum-exp over member score sums plus log weights.
class MixtureMeanTarget : public TiltTarget {
 public:
  MixtureMeanTarget(std::vector<std::function<double(double)>> member_scores,
                    std::vector<double> weights, Family family, double theta,
                    double scale, std::size_t n);

  std::size_t horizon() const override { return n_; }
  std::size_t block_count() const override { return n_; }
  void init(RngStream& rng) override;
  double statistic() const override;
  double propose(std::size_t block, RngStream& rng) override;
  void accept() override;

 private:
  std::vector<std::function<double(double)>> scores_;
  std::vector<double> log_w_;
  Family family_;
  double theta_, scale_;
  std::size_t n_;
  std::vector<std::vector<double>> member_scores_;  // [member][coordinate]
  std::vector<double> sums_;                        // per-member score sums
  std::size_t cand_block_ = 0;
  std::vector<double> cand_scores_;
  std::size_t accepts_ = 0;
};

// Independent Bernoulli(p) coordinates with the sum/n statistic.
class BernoulliSumTarget : public TiltTarget {
 public:
  BernoulliSumTarget(double p, std::size_t n);

  std::size_t horizon() const override { return n_; }
  std::size_t block_count() const override { return n_; }
  void init(RngStream& rng) override;
  double statistic() const override;
  double propose(std::size_t block, RngStream& rng) override;
  void accept() override;

 private:
  double p_;
  std::size_t n_;
  std::vector<std::uint8_t> bits_;
  std::size_t ones_ = 0;
  std::size_t cand_block_ = 0;
  std::uint8_t cand_bit_ = 0;
};

// Bernoulli image with per-pixel probabilities; blocks are image rows
// and the statistic is an arbitrary image functional divided by n.
class ImageRowTarget : public TiltTarget {
 public:
  ImageRowTarget(std::vector<double> pixel_probs, int width, int height, std::size_t n,
                 std::function<double(const BinaryImage&)> statistic);

  std::size_t horizon() const override { return n_; }
  std::size_t block_count() const override { return static_cast<std::size_t>(image_.height); }
  void init(RngStream& rng) override;
  double statistic() const override { return value_; }
  double propose(std::size_t block, RngStream& rng) override;
  void accept() override;

 private:
  std::vector<double> probs_;
  std::size_t n_;
  std::function<double(const BinaryImage&)> stat_;
  BinaryImage image_;
  double value_ = 0.0;
  std::size_t cand_row_ = 0;
  std::vector<std::uint8_t> cand_bits_;
  double cand_value_ = 0.0;
};

struct TiltConfig {
  std::size_t kept = 10000;     // post-burn-in, post-thinning chain length
  std::size_t burn_in = 1000;   // discarded leading steps
  std::size_t thinning = 10;    // keep every thinning-th step
  std::size_t grid_points = 41; // tilt grid size for rate estimation
  std::uint64_t seed = 1;

  void check() const;
};

struct ChainResult {
  std::vector<double> values;      // kept statistic values
  double acceptance_rate = 0.0;    // post-burn-in
  bool degenerate = false;         // some monitoring window fell below 1e-3
};

ChainResult mh_tilted_chain(TiltTarget& target, double t, const TiltConfig& cfg,
                            RngStream& rng);

// Chain mean with a batch-means standard error.
struct PhiPrimeEstimate {
  double value = 0.0;
  double se = 0.0;
};
PhiPrimeEstimate estimate_phi_prime_tilted(std::span<const double> values);

// Trapezoidal antiderivative of phi' anchored at phi(0) = 0; phi' is
// first made nondecreasing by pool-adjacent-violators so the output is
// a valid convex estimate. The grid must contain or bracket 0.
LmgfEstimate integrate_phi_prime(std::span<const double> t_grid,
                                 std::span<const double> phi_prime,
                                 std::size_t horizon, std::size_t kept);

struct TiltedRate {
  double rate = 0.0;
  double t_gamma = 0.0;
  LmgfEstimate lmgf;               // integrated estimate on the final grid
  std::vector<double> raw_dphi;    // chain means before monotonization
  std::vector<double> se;
  std::vector<double> acceptance;
  bool degenerate = false;
};

// Chains on a tilt grid spanning [t_lo, t_hi] (widened to include 0),
// one refinement pass around the duality root phi'(t) = gamma.
TiltedRate rate_from_tilting(TiltTarget& target, double gamma, double t_lo, double t_hi,
                             const TiltConfig& cfg);

}  // namespace ldet
