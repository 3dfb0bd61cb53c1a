#include "ldet/tilting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ldet/numerics.hpp"
#include "ldet/ratefn.hpp"

namespace ldet {

// ---- targets ----

ScalarMeanTarget::ScalarMeanTarget(Family family, double theta, double scale,
                                   std::size_t n, std::function<double(double)> score)
    : family_(family), theta_(theta), scale_(scale), n_(n), score_(std::move(score)) {
  if (n_ == 0) throw std::invalid_argument("ScalarMeanTarget: n must be positive");
  if (!(scale_ > 0.0)) throw std::invalid_argument("ScalarMeanTarget: scale must be positive");
}

void ScalarMeanTarget::init(RngStream& rng) {
  scores_.resize(n_);
  for (double& s : scores_) s = score_(sample_scalar(family_, theta_, scale_, rng));
  refresh_sum();
  accepts_ = 0;
}

void ScalarMeanTarget::refresh_sum() {
  sum_ = 0.0;
  for (double s : scores_) sum_ += s;
}

double ScalarMeanTarget::propose(std::size_t block, RngStream& rng) {
  cand_block_ = block;
  cand_score_ = score_(sample_scalar(family_, theta_, scale_, rng));
  return (sum_ - scores_[block] + cand_score_) / static_cast<double>(n_);
}

void ScalarMeanTarget::accept() {
  sum_ += cand_score_ - scores_[cand_block_];
  scores_[cand_block_] = cand_score_;
  // Incremental updates drift; rebuild the sum periodically.
  if (++accepts_ % 8192 == 0) refresh_sum();
}

MixtureMeanTarget::MixtureMeanTarget(std::vector<std::function<double(double)>> member_scores,
                                     std::vector<double> weights, Family family,
                                     double theta, double scale, std::size_t n)
    : scores_(std::move(member_scores)), family_(family), theta_(theta), scale_(scale),
      n_(n) {
  if (scores_.empty() || scores_.size() != weights.size()) {
    throw std::invalid_argument("MixtureMeanTarget: members and weights must align");
  }
  if (n_ == 0) throw std::invalid_argument("MixtureMeanTarget: n must be positive");
  log_w_.reserve(weights.size());
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("MixtureMeanTarget: weights must be positive");
    log_w_.push_back(std::log(w));
  }
}

void MixtureMeanTarget::init(RngStream& rng) {
  const std::size_t k = scores_.size();
  member_scores_.assign(k, std::vector<double>(n_));
  sums_.assign(k, 0.0);
  cand_scores_.assign(k, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    const double x = sample_scalar(family_, theta_, scale_, rng);
    for (std::size_t j = 0; j < k; ++j) {
      const double s = scores_[j](x);
      member_scores_[j][i] = s;
      sums_[j] += s;
    }
  }
  accepts_ = 0;
}

double MixtureMeanTarget::statistic() const {
  std::vector<double> terms(sums_.size());
  for (std::size_t j = 0; j < sums_.size(); ++j) terms[j] = log_w_[j] + sums_[j];
  return log_sum_exp(terms) / static_cast<double>(n_);
}

double MixtureMeanTarget::propose(std::size_t block, RngStream& rng) {
  cand_block_ = block;
  const double x = sample_scalar(family_, theta_, scale_, rng);
  std::vector<double> terms(sums_.size());
  for (std::size_t j = 0; j < sums_.size(); ++j) {
    cand_scores_[j] = scores_[j](x);
    terms[j] = log_w_[j] + sums_[j] - member_scores_[j][block] + cand_scores_[j];
  }
  return log_sum_exp(terms) / static_cast<double>(n_);
}

void MixtureMeanTarget::accept() {
  for (std::size_t j = 0; j < sums_.size(); ++j) {
    sums_[j] += cand_scores_[j] - member_scores_[j][cand_block_];
    member_scores_[j][cand_block_] = cand_scores_[j];
  }
  if (++accepts_ % 8192 == 0) {
    for (std::size_t j = 0; j < sums_.size(); ++j) {
      double s = 0.0;
      for (double v : member_scores_[j]) s += v;
      sums_[j] = s;
    }
  }
}

BernoulliSumTarget::BernoulliSumTarget(double p, std::size_t n) : p_(p), n_(n) {
  if (!(p_ > 0.0 && p_ < 1.0)) throw std::invalid_argument("BernoulliSumTarget: p in (0,1)");
  if (n_ == 0) throw std::invalid_argument("BernoulliSumTarget: n must be positive");
}

void BernoulliSumTarget::init(RngStream& rng) {
  bits_.resize(n_);
  ones_ = 0;
  for (auto& b : bits_) {
    b = rng.bernoulli(p_) ? 1 : 0;
    ones_ += b;
  }
}

double BernoulliSumTarget::statistic() const {
  return static_cast<double>(ones_) / static_cast<double>(n_);
}

double BernoulliSumTarget::propose(std::size_t block, RngStream& rng) {
  cand_block_ = block;
  cand_bit_ = rng.bernoulli(p_) ? 1 : 0;
  const std::size_t ones = ones_ - bits_[block] + cand_bit_;
  return static_cast<double>(ones) / static_cast<double>(n_);
}

void BernoulliSumTarget::accept() {
  ones_ += cand_bit_;
  ones_ -= bits_[cand_block_];
  bits_[cand_block_] = cand_bit_;
}

ImageRowTarget::ImageRowTarget(std::vector<double> pixel_probs, int width, int height,
                               std::size_t n,
                               std::function<double(const BinaryImage&)> statistic)
    : probs_(std::move(pixel_probs)), n_(n), stat_(std::move(statistic)) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("ImageRowTarget: bad size");
  if (probs_.size() != static_cast<std::size_t>(width) * height) {
    throw std::invalid_argument("ImageRowTarget: probability map size mismatch");
  }
  if (n_ == 0) throw std::invalid_argument("ImageRowTarget: n must be positive");
  image_.width = width;
  image_.height = height;
  image_.pixels.assign(probs_.size(), 0);
}

void ImageRowTarget::init(RngStream& rng) {
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    image_.pixels[i] = rng.bernoulli(probs_[i]) ? 1 : 0;
  }
  value_ = stat_(image_) / static_cast<double>(n_);
}

double ImageRowTarget::propose(std::size_t block, RngStream& rng) {
  cand_row_ = block;
  const std::size_t w = image_.width;
  cand_bits_.resize(w);
  const std::size_t off = block * w;
  for (std::size_t i = 0; i < w; ++i) {
    cand_bits_[i] = rng.bernoulli(probs_[off + i]) ? 1 : 0;
  }
  // Evaluate on the candidate image, then restore.
  BinaryImage& img = image_;
  std::vector<std::uint8_t> old(img.pixels.begin() + off, img.pixels.begin() + off + w);
  std::copy(cand_bits_.begin(), cand_bits_.end(), img.pixels.begin() + off);
  cand_value_ = stat_(img) / static_cast<double>(n_);
  std::copy(old.begin(), old.end(), img.pixels.begin() + off);
  return cand_value_;
}

void ImageRowTarget::accept() {
  const std::size_t off = cand_row_ * static_cast<std::size_t>(image_.width);
  std::copy(cand_bits_.begin(), cand_bits_.end(), image_.pixels.begin() + off);
  value_ = cand_value_;
}

// ---- chain ----

void TiltConfig::check() const {
  if (kept == 0 || thinning == 0) throw std::invalid_argument("TiltConfig: kept and thinning must be positive");
  if (grid_points < 5) throw std::invalid_argument("TiltConfig: grid too small");
}

ChainResult mh_tilted_chain(TiltTarget& target, double t, const TiltConfig& cfg,
                            RngStream& rng) {
  cfg.check();
  target.init(rng);
  const double nt = static_cast<double>(target.horizon()) * t;
  const std::size_t blocks = target.block_count();
  const std::size_t total = cfg.burn_in + cfg.kept * cfg.thinning;
  constexpr std::size_t kWindow = 1000;
  constexpr double kDegenerate = 1e-3;

  ChainResult out;
  out.values.reserve(cfg.kept);
  std::size_t accepted_total = 0, counted = 0;
  std::size_t window_accepts = 0, window_steps = 0;
  double current = target.statistic();
  for (std::size_t step = 0; step < total; ++step) {
    const std::size_t block = blocks == 1 ? 0 : rng.below(blocks);
    const double cand = target.propose(block, rng);
    const double log_ratio = nt * (cand - current);
    bool take = log_ratio >= 0.0;
    if (!take) take = rng.uniform() < std::exp(log_ratio);
    if (take) {
      target.accept();
      current = cand;
    }
    if (step >= cfg.burn_in) {
      accepted_total += take;
      ++counted;
      if ((step - cfg.burn_in + 1) % cfg.thinning == 0) out.values.push_back(current);
    }
    window_accepts += take;
    if (++window_steps == kWindow) {
      if (static_cast<double>(window_accepts) / kWindow < kDegenerate) out.degenerate = true;
      window_accepts = 0;
      window_steps = 0;
    }
  }
  out.acceptance_rate = counted ? static_cast<double>(accepted_total) / counted : 0.0;
  return out;
}

PhiPrimeEstimate estimate_phi_prime_tilted(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("estimate_phi_prime_tilted: empty chain");
  PhiPrimeEstimate est;
  double sum = 0.0;
  for (double v : values) sum += v;
  est.value = sum / static_cast<double>(values.size());
  // Batch means absorb autocorrelation left after thinning.
  const std::size_t b = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::sqrt(static_cast<double>(values.size()))));
  const std::size_t batches = values.size() / b;
  if (batches >= 2) {
    double m2 = 0.0;
    for (std::size_t k = 0; k < batches; ++k) {
      double bm = 0.0;
      for (std::size_t i = k * b; i < (k + 1) * b; ++i) bm += values[i];
      bm /= static_cast<double>(b);
      const double d = bm - est.value;
      m2 += d * d;
    }
    est.se = std::sqrt(m2 / (static_cast<double>(batches) * (batches - 1.0)));
  }
  return est;
}

LmgfEstimate integrate_phi_prime(std::span<const double> t_grid,
                                 std::span<const double> phi_prime,
                                 std::size_t horizon, std::size_t kept) {
  const std::size_t k = t_grid.size();
  if (k < 2 || phi_prime.size() != k) {
    throw std::invalid_argument("integrate_phi_prime: need matching grids of size >= 2");
  }
  for (std::size_t i = 0; i + 1 < k; ++i) {
    if (!(t_grid[i] < t_grid[i + 1])) {
      throw std::invalid_argument("integrate_phi_prime: grid not increasing");
    }
  }
  if (t_grid.front() > 0.0 || t_grid.back() < 0.0) {
    throw std::invalid_argument("integrate_phi_prime: grid must contain or bracket 0");
  }

  LmgfEstimate est;
  est.t_grid.assign(t_grid.begin(), t_grid.end());
  est.n = horizon;
  est.m = kept;

  // Pool adjacent violators: least-squares nondecreasing fit of phi'.
  std::vector<double> iso(phi_prime.begin(), phi_prime.end());
  {
    std::vector<double> value, weight;
    std::vector<std::size_t> count;
    for (double v : iso) {
      value.push_back(v);
      weight.push_back(1.0);
      count.push_back(1);
      while (value.size() > 1 && value[value.size() - 2] > value.back()) {
        const double w = weight[weight.size() - 2] + weight.back();
        const double v2 = (value[value.size() - 2] * weight[weight.size() - 2] +
                           value.back() * weight.back()) / w;
        value.pop_back();
        weight.pop_back();
        const std::size_t c = count.back();
        count.pop_back();
        value.back() = v2;
        weight.back() = w;
        count.back() += c;
      }
    }
    std::size_t i = 0;
    for (std::size_t blockk = 0; blockk < value.size(); ++blockk) {
      for (std::size_t c = 0; c < count[blockk]; ++c) iso[i++] = value[blockk];
    }
  }
  est.dphi = iso;

  // Trapezoid antiderivative, then shift so phi(0) = 0.
  est.phi.assign(k, 0.0);
  for (std::size_t i = 1; i < k; ++i) {
    est.phi[i] = est.phi[i - 1] +
                 0.5 * (iso[i] + iso[i - 1]) * (t_grid[i] - t_grid[i - 1]);
  }
  double at_zero = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    if (t_grid[i] <= 0.0 && 0.0 <= t_grid[i + 1]) {
      const double h = t_grid[i + 1] - t_grid[i];
      const double w = (0.0 - t_grid[i]) / h;
      const double dphi0 = (1.0 - w) * iso[i] + w * iso[i + 1];
      at_zero = est.phi[i] + 0.5 * (iso[i] + dphi0) * (0.0 - t_grid[i]);
      break;
    }
  }
  for (double& v : est.phi) v -= at_zero;

  // Curvature by centered differences, clamped against noise.
  est.d2phi.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == k ? i : i + 1;
    est.d2phi[i] = std::max(0.0, (iso[hi] - iso[lo]) / (t_grid[hi] - t_grid[lo]));
  }
  est.ess.assign(k, static_cast<double>(kept));
  est.dominated.assign(k, false);
  est.validate();
  return est;
}

namespace {

std::vector<double> linspace_with_zero(double lo, double hi, std::size_t points) {
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  if (!(hi > lo)) throw std::invalid_argument("rate_from_tilting: empty tilt span");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  // Snap the nearest point to 0 so the anchor is exact.
  std::size_t best = 0;
  for (std::size_t i = 1; i < points; ++i) {
    if (std::abs(g[i]) < std::abs(g[best])) best = i;
  }
  g[best] = 0.0;
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

struct SweepResult {
  std::vector<double> grid, dphi, se, acceptance;
  bool degenerate = false;
};

SweepResult sweep(TiltTarget& target, const std::vector<double>& grid,
                  const TiltConfig& cfg, std::uint64_t pass_salt) {
  SweepResult r;
  r.grid = grid;
  RngStream base(cfg.seed);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    RngStream chain_rng = base.derive(pass_salt * 1000003ULL + i);
    const ChainResult chain = mh_tilted_chain(target, grid[i], cfg, chain_rng);
    const PhiPrimeEstimate est = estimate_phi_prime_tilted(chain.values);
    r.dphi.push_back(est.value);
    r.se.push_back(est.se);
    r.acceptance.push_back(chain.acceptance_rate);
    r.degenerate = r.degenerate || chain.degenerate;
  }
  return r;
}

}  // namespace

TiltedRate rate_from_tilting(TiltTarget& target, double gamma, double t_lo, double t_hi,
                             const TiltConfig& cfg) {
  cfg.check();
  const std::vector<double> grid = linspace_with_zero(t_lo, t_hi, cfg.grid_points);
  const SweepResult pass1 = sweep(target, grid, cfg, 1);
  LmgfEstimate est1 = integrate_phi_prime(pass1.grid, pass1.dphi, target.horizon(), cfg.kept);
  const LegendrePoint coarse = fenchel_legendre(est1, gamma);

  // Refine around the duality root, keeping 0 for the anchor.
  const double span = (grid.back() - grid.front()) / 4.0;
  const std::vector<double> grid2 =
      linspace_with_zero(coarse.t - span, coarse.t + span, cfg.grid_points);
  const SweepResult pass2 = sweep(target, grid2, cfg, 2);

  TiltedRate out;
  out.lmgf = integrate_phi_prime(pass2.grid, pass2.dphi, target.horizon(), cfg.kept);
  out.raw_dphi = pass2.dphi;
  out.se = pass2.se;
  out.acceptance = pass2.acceptance;
  out.degenerate = pass1.degenerate || pass2.degenerate;
  const LegendrePoint fine = fenchel_legendre(out.lmgf, gamma);
  out.rate = fine.rate;
  out.t_gamma = fine.t;
  return out;
}

}  // namespace ldet
