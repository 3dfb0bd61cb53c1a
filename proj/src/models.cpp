#include "ldet/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ldet/numerics.hpp"

namespace ldet {

void ShiftModel::check() const {
  if (!(scale > 0.0)) throw std::invalid_argument("ShiftModel: scale must be positive");
  if (theta0 == theta1) throw std::invalid_argument("ShiftModel: theta0 equals theta1");
}

void CompositeModel::check() const {
  if (!(scale > 0.0)) throw std::invalid_argument("CompositeModel: scale must be positive");
  if (thetas.empty()) throw std::invalid_argument("CompositeModel: empty alternative set");
  if (thetas.size() != prior.size()) {
    throw std::invalid_argument("CompositeModel: prior size mismatch");
  }
  double s = 0.0;
  for (double w : prior) {
    if (!(w > 0.0)) throw std::invalid_argument("CompositeModel: prior weights must be positive");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-12) {
    throw std::invalid_argument("CompositeModel: prior weights must sum to one");
  }
  for (double th : thetas) {
    if (th == theta0) throw std::invalid_argument("CompositeModel: theta0 belongs to thetas");
  }
}

void ImageModel::check() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("ImageModel: empty image");
  if (!(p0 > 0.0 && p0 < 1.0 && p1 > 0.0 && p1 < 1.0)) {
    throw std::invalid_argument("ImageModel: probabilities must lie in (0,1)");
  }
  if (!(p1 > p0)) throw std::invalid_argument("ImageModel: requires p1 > p0");
}

bool TargetShape::contains(double px, double py) const {
  const double dx = px - cx, dy = py - cy;
  const double c = std::cos(rotation), s = std::sin(rotation);
  const double u = dx * c + dy * s;
  const double v = -dx * s + dy * c;
  switch (kind) {
    case Kind::Circle: {
      const double r = axis_a;
      return dx * dx + dy * dy <= r * r;
    }
    case Kind::Ellipse: {
      const double ua = u / axis_a, vb = v / axis_b;
      return ua * ua + vb * vb <= 1.0;
    }
    case Kind::Rectangle:
      return std::abs(u) <= axis_a && std::abs(v) <= axis_b;
  }
  return false;
}

double log_density(Family family, double theta, double scale, double x) {
  if (family == Family::Gaussian) {
    const double z = (x - theta) / scale;
    return -0.5 * std::log(2.0 * M_PI * scale * scale) - 0.5 * z * z;
  }
  return -std::log(2.0 * scale) - std::abs(x - theta) / scale;
}

double llr_elementwise(const ShiftModel& m, double x) {
  m.check();
  if (m.family == Family::Gaussian) {
    const double s2 = m.scale * m.scale;
    return (m.theta1 - m.theta0) / s2 * x + (m.theta0 * m.theta0 - m.theta1 * m.theta1) / (2.0 * s2);
  }
  return (std::abs(x - m.theta0) - std::abs(x - m.theta1)) / m.scale;
}

double llr_mixture(const CompositeModel& m, std::span<const double> xs) {
  m.check();
  if (xs.empty()) throw std::invalid_argument("llr_mixture: empty observation set");
  // Accumulate per-alternative sums of elementwise log ratios; a single
  // max-subtracted log-sum-exp at the end keeps everything finite.
  std::vector<double> acc(m.thetas.size(), 0.0);
  for (double x : xs) {
    const double l0 = log_density(m.family, m.theta0, m.scale, x);
    for (std::size_t j = 0; j < m.thetas.size(); ++j) {
      acc[j] += log_density(m.family, m.thetas[j], m.scale, x) - l0;
    }
  }
  for (std::size_t j = 0; j < m.thetas.size(); ++j) acc[j] += std::log(m.prior[j]);
  return log_sum_exp(acc) / static_cast<double>(xs.size());
}

double kl_gaussian(double theta_a, double theta_b, double sigma) {
  const double d = theta_a - theta_b;
  return d * d / (2.0 * sigma * sigma);
}

double kl_laplace(double theta_a, double theta_b, double b) {
  const double d = std::abs(theta_a - theta_b) / b;
  return d + std::exp(-d) - 1.0;
}

double kl_bernoulli(double p, double q) {
  return p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
}

double kl_divergence(Family family, double scale, double theta_a, double theta_b) {
  if (family == Family::Gaussian) return kl_gaussian(theta_a, theta_b, scale);
  return kl_laplace(theta_a, theta_b, scale);
}

std::size_t theta_min_kl(const CompositeModel& m) {
  m.check();
  std::size_t best = 0;
  double best_kl = kl_divergence(m.family, m.scale, m.theta0, m.thetas[0]);
  for (std::size_t j = 1; j < m.thetas.size(); ++j) {
    const double kl = kl_divergence(m.family, m.scale, m.theta0, m.thetas[j]);
    if (kl < best_kl) {
      best_kl = kl;
      best = j;
    }
  }
  return best;
}

double sample_scalar(Family family, double theta, double scale, RngStream& rng) {
  if (family == Family::Gaussian) return theta + scale * rng.gaussian();
  return theta + scale * rng.laplace();
}

std::vector<double> sample_iid(const ShiftModel& m, Hypothesis hyp, std::size_t n,
                               RngStream& rng) {
  m.check();
  const double theta = (hyp == Hypothesis::H0) ? m.theta0 : m.theta1;
  std::vector<double> out(n);
  for (double& x : out) x = sample_scalar(m.family, theta, m.scale, rng);
  return out;
}

std::vector<std::uint8_t> rasterize(const TargetShape& shape, int width, int height) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height, 0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (shape.contains(x + 0.5, y + 0.5)) {
        mask[static_cast<std::size_t>(y) * width + x] = 1;
      }
    }
  }
  return mask;
}

GeneratedImage generate_image(const ImageModel& m, const std::optional<TargetShape>& shape,
                              RngStream& rng) {
  m.check();
  GeneratedImage out;
  out.image.width = m.width;
  out.image.height = m.height;
  out.image.pixels.resize(static_cast<std::size_t>(m.width) * m.height);
  std::vector<std::uint8_t> mask;
  if (shape) {
    mask = rasterize(*shape, m.width, m.height);
    for (std::uint8_t v : mask) out.target_pixels += v;
  }
  for (std::size_t i = 0; i < out.image.pixels.size(); ++i) {
    const double p = (shape && mask[i]) ? m.p1 : m.p0;
    out.image.pixels[i] = rng.bernoulli(p) ? 1 : 0;
  }
  return out;
}

// ---- closed-form references ----

namespace {

double shift_magnitude(const ShiftModel& m) {
  return std::abs(m.theta1 - m.theta0) / m.scale;
}

// (u e^u - expm1(u)) / u^2; series for small u avoids cancellation.
double expm1_kernel_over_u2(double u) {
  if (std::abs(u) < 0.05) {
    return 0.5 + u * (1.0 / 3.0 + u * (1.0 / 8.0 + u * (1.0 / 30.0 + u * (1.0 / 144.0))));
  }
  return (u * std::exp(u) - std::expm1(u)) / (u * u);
}

// LMGF of the Laplace LLR under H0. With d the normalized shift and
// s = 2t - 1, the generating integral reduces to
//   e^{-t d} [ (1 + e^{s d}) / 2 + expm1(s d) / (2 s) ].
double laplace_phi0(double d, double t) {
  const double s = 2.0 * t - 1.0;
  const double u = s * d;
  const double ratio = (s == 0.0) ? 0.5 * d : std::expm1(u) / (2.0 * s);
  const double inner = 0.5 * (1.0 + std::exp(u)) + ratio;
  return -t * d + std::log(inner);
}

double laplace_phi0_prime(double d, double t) {
  const double s = 2.0 * t - 1.0;
  const double u = s * d;
  // phi0 = -t d + log(inner); inner' = d e^u + d^2 (u e^u - expm1(u)) / u^2.
  const double ratio = (s == 0.0) ? 0.5 * d : std::expm1(u) / (2.0 * s);
  const double inner = 0.5 * (1.0 + std::exp(u)) + ratio;
  const double inner_prime = d * std::exp(u) + d * d * expm1_kernel_over_u2(u);
  return -d + inner_prime / inner;
}

}  // namespace

double gaussian_llr_lmgf_oracle(const ShiftModel& m, Hypothesis hyp, double t) {
  m.check();
  if (m.family != Family::Gaussian) {
    throw std::invalid_argument("gaussian_llr_lmgf_oracle: model is not Gaussian");
  }
  const double d2 = shift_magnitude(m) * shift_magnitude(m);
  return (hyp == Hypothesis::H0) ? 0.5 * d2 * t * (t - 1.0) : 0.5 * d2 * t * (t + 1.0);
}

RatePoint gaussian_llr_rate_oracle(const ShiftModel& m, Hypothesis hyp, double gamma) {
  m.check();
  if (m.family != Family::Gaussian) {
    throw std::invalid_argument("gaussian_llr_rate_oracle: model is not Gaussian");
  }
  const double d2 = shift_magnitude(m) * shift_magnitude(m);
  RatePoint p;
  if (hyp == Hypothesis::H0) {
    p.rate = (gamma + 0.5 * d2) * (gamma + 0.5 * d2) / (2.0 * d2);
    p.t = gamma / d2 + 0.5;
  } else {
    p.rate = (gamma + 0.5 * d2) * (gamma + 0.5 * d2) / (2.0 * d2) - gamma;
    p.t = gamma / d2 - 0.5;
  }
  return p;
}

double laplace_llr_lmgf_oracle(const ShiftModel& m, Hypothesis hyp, double t) {
  m.check();
  if (m.family != Family::Laplace) {
    throw std::invalid_argument("laplace_llr_lmgf_oracle: model is not Laplace");
  }
  const double d = shift_magnitude(m);
  // Under H1 the generating function satisfies phi1(t) = phi0(t+1).
  return (hyp == Hypothesis::H0) ? laplace_phi0(d, t) : laplace_phi0(d, t + 1.0);
}

double laplace_llr_lmgf_prime_oracle(const ShiftModel& m, Hypothesis hyp, double t) {
  m.check();
  if (m.family != Family::Laplace) {
    throw std::invalid_argument("laplace_llr_lmgf_prime_oracle: model is not Laplace");
  }
  const double d = shift_magnitude(m);
  return (hyp == Hypothesis::H0) ? laplace_phi0_prime(d, t) : laplace_phi0_prime(d, t + 1.0);
}

// ---- image serialization ----

void write_pbm(const std::string& path, const BinaryImage& img) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_pbm: cannot open " + path);
  out << "P1\n" << img.width << " " << img.height << "\n";
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      out << static_cast<int>(img.at(x, y));
      out << (x + 1 == img.width ? '\n' : ' ');
    }
  }
  if (!out) throw std::runtime_error("write_pbm: write failed for " + path);
}

BinaryImage read_pbm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_pbm: cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P1") throw std::runtime_error("read_pbm: not a plain PBM file: " + path);
  BinaryImage img;
  in >> img.width >> img.height;
  if (!in || img.width <= 0 || img.height <= 0) {
    throw std::runtime_error("read_pbm: bad header in " + path);
  }
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (auto& px : img.pixels) {
    int v = 0;
    in >> v;
    if (!in || (v != 0 && v != 1)) throw std::runtime_error("read_pbm: bad pixel in " + path);
    px = static_cast<std::uint8_t>(v);
  }
  return img;
}

}  // namespace ldet
