#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <optional>
#include <vector>

#include "ldet/models.hpp"
#include "ldet/numerics.hpp"
#include "ldet/rng.hpp"

using namespace ldet;

TEST_CASE("model validation rejects degenerate parameters") {
  ShiftModel bad_scale{Family::Laplace, 0.0, 1.0, 0.0};
  CHECK_THROWS(bad_scale.check());
  ShiftModel equal_thetas{Family::Gaussian, 0.5, 0.5, 1.0};
  CHECK_THROWS(equal_thetas.check());

  CompositeModel overlap{Family::Laplace, 1.0, 0.25, {0.25, 0.35}, {0.5, 0.5}};
  CHECK_THROWS(overlap.check());
  CompositeModel bad_prior{Family::Laplace, 1.0, 0.0, {0.25, 0.35}, {0.5, 0.4}};
  CHECK_THROWS(bad_prior.check());
  CompositeModel ok{Family::Laplace, 1.0, 0.0, {0.25, 0.35}, {0.5, 0.5}};
  CHECK_NOTHROW(ok.check());

  ImageModel inverted{8, 8, 0.9, 0.1};
  CHECK_THROWS(inverted.check());
  ImageModel ok_img{8, 8, 0.1, 0.9};
  CHECK_NOTHROW(ok_img.check());
}

TEST_CASE("likelihood ratio has unit mean under the null") {
  const int m = 200000;
  for (const ShiftModel model : {ShiftModel{Family::Laplace, 0.0, 1.0, 1.0},
                                 ShiftModel{Family::Gaussian, 0.0, 0.5, 1.0}}) {
    RngStream rng(101);
    double sum = 0.0;
    for (int i = 0; i < m; ++i) {
      sum += std::exp(llr_elementwise(model, sample_scalar(model.family, model.theta0,
                                                           model.scale, rng)));
    }
    CHECK(std::abs(sum / m - 1.0) < 0.01);
  }
}

TEST_CASE("singleton mixture equals the elementwise average exactly") {
  for (Family family : {Family::Laplace, Family::Gaussian}) {
    const ShiftModel simple{family, 0.0, 0.35, 1.0};
    const CompositeModel mixture{family, 1.0, 0.0, {0.35}, {1.0}};
    RngStream rng(17);
    const std::vector<double> xs = sample_iid(simple, Hypothesis::H1, 257, rng);
    double mean = 0.0;
    for (double x : xs) mean += llr_elementwise(simple, x);
    mean /= static_cast<double>(xs.size());
    CHECK(llr_mixture(mixture, xs) == doctest::Approx(mean).epsilon(1e-13));
  }
}

TEST_CASE("kl divergences are nonnegative and vanish only at equality") {
  CHECK(kl_gaussian(0.7, 0.7, 2.0) == 0.0);
  CHECK(kl_gaussian(1.0, 0.0, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(kl_laplace(0.3, 0.3, 1.0) == 0.0);
  CHECK(kl_laplace(1.0, 0.0, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(kl_laplace(2.0, 0.0, 2.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(kl_bernoulli(0.4, 0.4) == 0.0);
  CHECK(kl_bernoulli(0.9, 0.1) == doctest::Approx(0.8 * std::log(9.0)).epsilon(1e-12));
  for (double a : {-0.6, 0.01, 0.4}) {
    CHECK(kl_gaussian(a, 0.0, 1.0) > 0.0);
    CHECK(kl_laplace(a, 0.0, 1.0) > 0.0);
  }
  CHECK(kl_bernoulli(0.2, 0.4) > 0.0);
  CHECK(kl_divergence(Family::Gaussian, 2.0, 1.0, 0.0) ==
        doctest::Approx(kl_gaussian(1.0, 0.0, 2.0)).epsilon(1e-15));
  CHECK(kl_divergence(Family::Laplace, 2.0, 1.0, 0.0) ==
        doctest::Approx(kl_laplace(1.0, 0.0, 2.0)).epsilon(1e-15));
}

TEST_CASE("nearest alternative minimizes kl with ties to the smallest index") {
  const CompositeModel m{Family::Laplace, 1.0, 0.0, {0.25, 0.35}, {0.5, 0.5}};
  CHECK(theta_min_kl(m) == 0);
  const CompositeModel far_first{Family::Gaussian, 1.0, 0.0, {0.8, 0.1}, {0.5, 0.5}};
  CHECK(theta_min_kl(far_first) == 1);
  const CompositeModel tie{Family::Gaussian, 1.0, 0.0, {0.3, -0.3}, {0.5, 0.5}};
  CHECK(theta_min_kl(tie) == 0);
}

TEST_CASE("normalized mixture statistic concentrates on the divergence from the null") {
  const CompositeModel m{Family::Gaussian, 1.0, 0.0, {0.25, 0.35}, {2.0 / 3.0, 1.0 / 3.0}};
  const double theta_star = 0.35;
  RngStream rng(23);
  std::vector<double> xs(100000);
  for (double& x : xs) x = sample_scalar(m.family, theta_star, m.scale, rng);
  const double target = kl_gaussian(theta_star, m.theta0, m.scale);
  CHECK(std::abs(llr_mixture(m, xs) - target) < 0.005);
}

TEST_CASE("gaussian llr references satisfy the closed forms") {
  const ShiftModel m{Family::Gaussian, 0.0, 1.0, 1.0};
  CHECK(gaussian_llr_lmgf_oracle(m, Hypothesis::H0, 0.0) == doctest::Approx(0.0));
  CHECK(gaussian_llr_lmgf_oracle(m, Hypothesis::H0, 1.0) == doctest::Approx(0.0));
  CHECK(gaussian_llr_lmgf_oracle(m, Hypothesis::H0, 0.3) == doctest::Approx(-0.105).epsilon(1e-13));
  for (double t : {-0.5, 0.2, 0.8, 1.6}) {
    CHECK(gaussian_llr_lmgf_oracle(m, Hypothesis::H1, t) ==
          doctest::Approx(gaussian_llr_lmgf_oracle(m, Hypothesis::H0, t + 1.0)).epsilon(1e-13));
  }
  const RatePoint at_zero = gaussian_llr_rate_oracle(m, Hypothesis::H0, 0.0);
  CHECK(at_zero.rate == doctest::Approx(0.125).epsilon(1e-13));
  CHECK(at_zero.t == doctest::Approx(0.5).epsilon(1e-13));
  const double g = 0.2;
  const RatePoint i0 = gaussian_llr_rate_oracle(m, Hypothesis::H0, g);
  const RatePoint i1 = gaussian_llr_rate_oracle(m, Hypothesis::H1, g);
  CHECK(i0.rate == doctest::Approx(0.245).epsilon(1e-13));
  CHECK(i1.rate == doctest::Approx(i0.rate - g).epsilon(1e-12));
}

TEST_CASE("laplace llr reference matches direct integration") {
  const ShiftModel m{Family::Laplace, 0.0, 2.0, 1.0};
  CHECK(laplace_llr_lmgf_oracle(m, Hypothesis::H0, 0.0) == doctest::Approx(0.0));
  CHECK(std::abs(laplace_llr_lmgf_oracle(m, Hypothesis::H0, 1.0)) < 1e-12);
  for (double t : {0.2, 0.35, 0.7}) {
    // Symmetry of the null LMGF about t = 1/2 for symmetric shifts.
    CHECK(laplace_llr_lmgf_oracle(m, Hypothesis::H0, t) ==
          doctest::Approx(laplace_llr_lmgf_oracle(m, Hypothesis::H0, 1.0 - t)).epsilon(1e-12));
    CHECK(laplace_llr_lmgf_oracle(m, Hypothesis::H1, t) ==
          doctest::Approx(laplace_llr_lmgf_oracle(m, Hypothesis::H0, t + 1.0)).epsilon(1e-12));
    // E_0[exp(t l)] = int f0(x)^(1-t) f1(x)^t dx, integrated numerically.
    const double direct = integrate_adaptive(
        [&](double x) {
          return std::exp((1.0 - t) * log_density(Family::Laplace, 0.0, 1.0, x) +
                          t * log_density(Family::Laplace, 2.0, 1.0, x));
        },
        -40.0, 42.0, 1e-12);
    CHECK(laplace_llr_lmgf_oracle(m, Hypothesis::H0, t) ==
          doctest::Approx(std::log(direct)).epsilon(1e-9));
  }
  for (double t : {0.2, 0.5, 0.8}) {
    const double h = 1e-6;
    const double fd = (laplace_llr_lmgf_oracle(m, Hypothesis::H0, t + h) -
                       laplace_llr_lmgf_oracle(m, Hypothesis::H0, t - h)) /
                      (2.0 * h);
    CHECK(laplace_llr_lmgf_prime_oracle(m, Hypothesis::H0, t) ==
          doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("target shapes classify points and rotate correctly") {
  TargetShape circle{TargetShape::Kind::Circle, 8.0, 8.0, 5.0, 5.0, 0.0};
  CHECK(circle.contains(8.0, 8.0));
  CHECK(circle.contains(12.9, 8.0));
  CHECK_FALSE(circle.contains(13.1, 8.0));

  TargetShape rect{TargetShape::Kind::Rectangle, 8.0, 8.0, 4.0, 1.0, 0.0};
  CHECK(rect.contains(11.5, 8.0));
  CHECK_FALSE(rect.contains(8.0, 11.5));
  rect.rotation = M_PI / 2.0;
  CHECK(rect.contains(8.0, 11.5));
  CHECK_FALSE(rect.contains(11.5, 8.0));

  TargetShape ellipse{TargetShape::Kind::Ellipse, 0.0, 0.0, 3.0, 1.0, 0.0};
  CHECK(ellipse.contains(2.9, 0.0));
  CHECK_FALSE(ellipse.contains(0.0, 2.9));
  ellipse.rotation = M_PI / 2.0;
  CHECK(ellipse.contains(0.0, 2.9));
}

TEST_CASE("rasterized support counts match generated target pixels") {
  const TargetShape circle{TargetShape::Kind::Circle, 32.0, 32.0, 10.0, 10.0, 0.0};
  const ImageModel m{64, 64, 0.1, 0.9};
  const auto mask = rasterize(circle, 64, 64);
  std::size_t mask_count = 0;
  for (auto v : mask) mask_count += v;
  CHECK(mask_count > 0);
  RngStream rng(31);
  const GeneratedImage gen = generate_image(m, circle, rng);
  CHECK(gen.target_pixels == mask_count);
  RngStream rng2(31);
  const GeneratedImage plain = generate_image(m, std::nullopt, rng2);
  CHECK(plain.target_pixels == 0);
}

TEST_CASE("image generation consumes one draw per pixel and repeats with the seed") {
  const ImageModel m{16, 16, 0.1, 0.9};
  const TargetShape circle{TargetShape::Kind::Circle, 8.0, 8.0, 4.0, 4.0, 0.0};
  RngStream used(42), parallel(42);
  (void)generate_image(m, circle, used);
  for (int i = 0; i < 16 * 16; ++i) (void)parallel.uniform();
  CHECK(used.uniform() == parallel.uniform());

  RngStream a(42), b(42);
  const GeneratedImage ga = generate_image(m, circle, a);
  const GeneratedImage gb = generate_image(m, circle, b);
  CHECK(ga.image.pixels == gb.image.pixels);
}

TEST_CASE("pixel marginals stay within binomial bounds") {
  const ImageModel m{64, 64, 0.1, 0.9};
  const TargetShape circle{TargetShape::Kind::Circle, 32.0, 32.0, 10.0, 10.0, 0.0};
  const auto mask = rasterize(circle, m.width, m.height);
  const int reps = 10000;
  std::vector<int> counts(mask.size(), 0);
  RngStream rng(57);
  for (int r = 0; r < reps; ++r) {
    const GeneratedImage gen = generate_image(m, circle, rng);
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += gen.image.pixels[i];
  }
  bool ok = true;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double p = mask[i] ? m.p1 : m.p0;
    const double se = std::sqrt(p * (1.0 - p) / reps);
    ok = ok && std::abs(counts[i] / static_cast<double>(reps) - p) < 5.0 * se;
  }
  CHECK(ok);
}

TEST_CASE("pbm files round trip") {
  const ImageModel m{20, 12, 0.1, 0.9};
  RngStream rng(71);
  const GeneratedImage gen = generate_image(m, std::nullopt, rng);
  write_pbm("models_roundtrip.pbm", gen.image);
  const BinaryImage back = read_pbm("models_roundtrip.pbm");
  CHECK(back.width == gen.image.width);
  CHECK(back.height == gen.image.height);
  CHECK(back.pixels == gen.image.pixels);
  std::remove("models_roundtrip.pbm");
}
