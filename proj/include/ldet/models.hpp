#pragma once

// Observation models for binary hypothesis testing: two-point shift
// families (Laplace/Gaussian), composite alternatives with a discrete
// parameter set, and Bernoulli images with an extended target.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ldet/rng.hpp"

namespace ldet {

enum class Hypothesis { H0, H1 };
enum class Family { Laplace, Gaussian };

// Scalar IID family f(x|theta); H0 uses theta0, H1 uses theta1.
// scale is the Laplace diversity b or the Gaussian standard deviation.
struct ShiftModel {
  Family family = Family::Laplace;
  double theta0 = 0.0;
  double theta1 = 1.0;
  double scale = 1.0;

  void check() const;
};

// Simple H0 against a finite set of alternatives with prior weights.
// theta0 must not belong to thetas; prior weights are positive and sum
// to one.
struct CompositeModel {
  Family family = Family::Laplace;
  double scale = 1.0;
  double theta0 = 0.0;
  std::vector<double> thetas;
  std::vector<double> prior;

  void check() const;
};

// Bernoulli pixel field: success probability p1 on the target support,
// p0 elsewhere; requires 0 < p0 < p1 < 1.
struct ImageModel {
  int width = 64;
  int height = 64;
  double p0 = 0.1;
  double p1 = 0.9;

  void check() const;
};

// Target support on the pixel grid. axis_a/axis_b are the semi-axes
// (circle: radius twice, rectangle: half side lengths); rotation in
// radians about the center.
struct TargetShape {
  enum class Kind { Circle, Ellipse, Rectangle };
  Kind kind = Kind::Circle;
  double cx = 0.0;
  double cy = 0.0;
  double axis_a = 1.0;
  double axis_b = 1.0;
  double rotation = 0.0;

  bool contains(double px, double py) const;
};

struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, values 0/1

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// ---- densities and likelihood ratios ----

double log_density(Family family, double theta, double scale, double x);

// Elementwise log-likelihood ratio log f(x|theta1) - log f(x|theta0).
double llr_elementwise(const ShiftModel& m, double x);

// Normalized mixture log-likelihood ratio
//   (1/n) log sum_theta w_theta prod_i f(x_i|theta) / prod_i f(x_i|theta0),
// evaluated in log space so it stays finite for n up to 1e6.
double llr_mixture(const CompositeModel& m, std::span<const double> xs);

// ---- divergences ----

double kl_gaussian(double theta_a, double theta_b, double sigma);
double kl_laplace(double theta_a, double theta_b, double b);
double kl_bernoulli(double p, double q);

// KL between two members of the model's family at theta_a and theta_b.
double kl_divergence(Family family, double scale, double theta_a, double theta_b);

// Alternative closest to H0 in KL: argmin over thetas of D(theta0 || theta).
// Ties resolve to the smallest index.
std::size_t theta_min_kl(const CompositeModel& m);

// ---- sampling ----

// n IID draws under the given hypothesis; consumes exactly n stream draws.
std::vector<double> sample_iid(const ShiftModel& m, Hypothesis hyp, std::size_t n,
                               RngStream& rng);

// One draw from f(.|theta) of the composite family; consumes one stream draw.
double sample_scalar(Family family, double theta, double scale, RngStream& rng);

// Bernoulli image, optionally with a target shape; returns the image and
// the number of target-support pixels (0 without a shape). Pixel (x,y) is
// on the support when the pixel center (x+0.5, y+0.5) lies inside the
// shape; shapes are clipped at the image border. Consumes width*height
// stream draws.
struct GeneratedImage {
  BinaryImage image;
  std::size_t target_pixels = 0;
};
GeneratedImage generate_image(const ImageModel& m, const std::optional<TargetShape>& shape,
                              RngStream& rng);

std::vector<std::uint8_t> rasterize(const TargetShape& shape, int width, int height);

// ---- closed-form references ----

// LMGF of the elementwise Gaussian LLR under either hypothesis:
// phi0(t) = (d^2/2) t (t-1), phi1(t) = (d^2/2) t (t+1), d = |theta1-theta0|/sigma.
double gaussian_llr_lmgf_oracle(const ShiftModel& m, Hypothesis hyp, double t);

// Rate function of the Gaussian LLR: I0(g) = (g + d^2/2)^2 / (2 d^2),
// I1(g) = I0(g) - g; also returns the dual point t(g).
struct RatePoint {
  double rate = 0.0;
  double t = 0.0;
};
RatePoint gaussian_llr_rate_oracle(const ShiftModel& m, Hypothesis hyp, double gamma);

// LMGF of the elementwise Laplace LLR (exact piecewise-exponential
// integral) and its derivative in t.
double laplace_llr_lmgf_oracle(const ShiftModel& m, Hypothesis hyp, double t);
double laplace_llr_lmgf_prime_oracle(const ShiftModel& m, Hypothesis hyp, double t);

// ---- image serialization ----

void write_pbm(const std::string& path, const BinaryImage& img);
BinaryImage read_pbm(const std::string& path);

}  // namespace ldet
