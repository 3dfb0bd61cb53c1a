#pragma once

// Error-probability approximations: CLT threshold placement, Gaussian
// tail values, refined exponential asymptotics with the saddlepoint
// prefactor, and per-n error curves combining them.

#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldet/lmgf.hpp"
#include "ldet/ratefn.hpp"

namespace ldet {

struct NoSaddlepoint : std::runtime_error {
  explicit NoSaddlepoint(const std::string& what) : std::runtime_error(what) {}
};

enum class Tail { Upper, Lower };

// Upper tail of the standard normal and its inverse;
// |q_function(q_inverse(a)) - a| stays below 1e-10 across (0,1).
double q_function(double x);
double q_inverse(double alpha);

// log Q(x), finite far beyond where Q(x) underflows.
double log_q_function(double x);

struct Moments {
  double mean = 0.0;
  double sd = 0.0;      // unbiased estimate
  std::size_t count = 0;
};
Moments estimate_moments(std::span<const double> samples);

// Threshold achieving false-alarm level alpha under the normal
// approximation: mu0 + sigma0 / sqrt(n) * Q^{-1}(alpha). Pass n = 1 when
// mu0/sigma0 already describe the statistic at its final length.
double set_threshold_clt(double mu0, double sigma0, std::size_t n, double alpha);

// Decision threshold policy for error curves.
struct ThresholdRule {
  enum class Kind { FixedGamma, CltLevel };
  Kind kind = Kind::CltLevel;
  double value = 0.1;  // gamma for FixedGamma, alpha for CltLevel

  static ThresholdRule fixed_gamma(double g) { return {Kind::FixedGamma, g}; }
  static ThresholdRule clt_level(double a) { return {Kind::CltLevel, a}; }
};

// Normal tail approximation of P[T >= gamma] (Upper) or P[T < gamma]
// (Lower) for T ~ N(mu, sigma^2).
double gaussian_error_approx(double mu, double sigma, double gamma, Tail tail);
double gaussian_error_log(double mu, double sigma, double gamma, Tail tail);

// Refined exponential tail approximation zeta_n exp(-n I(gamma)).
// Upper tail requires gamma above phi'(0); the lower tail reuses the
// same path on the mirrored statistic. Throws NoSaddlepoint when gamma
// sits on the wrong side of the mean, GammaOutOfRange when outside the
// estimate's reach.
struct TailApprox {
  double prob = 0.0;       // clamped to [0,1]; 0 when it underflows
  double log_prob = 0.0;   // always finite
  double zeta = 0.0;       // saddlepoint prefactor
  double t = 0.0;          // saddlepoint
  double rate = 0.0;       // I(gamma)
  double curvature = 0.0;  // phi''(t)
};
TailApprox exact_asymptotic_tail(const LmgfEstimate& est, double gamma, std::size_t n,
                                 Tail tail);

// Finite-n prefactor correction
//   c_n = int_0^inf e^{-s} [ Q(0) - Q(sqrt(2 pi) zeta_n s) ] ds,
// evaluated by adaptive quadrature to 1e-10 absolute. c_n / zeta_n -> 1
// as zeta_n -> 0 and c_n -> 1/2 as zeta_n -> inf.
double cn_refinement(double zeta_n);

// ---- error curves ----

struct ScoreSet {
  std::vector<double> h0;
  std::vector<double> h1;
};

struct ErrorCurveRequest {
  ThresholdRule rule;
  std::vector<std::size_t> n_list;
  // Elementwise mode: scores of single observations; one LMGF per
  // hypothesis reused for every n. PerN mode: samples of the full
  // statistic for each n; scaled LMGFs estimated per n.
  enum class Mode { Elementwise, PerN };
  Mode mode = Mode::Elementwise;
  ScoreSet elementwise;
  std::map<std::size_t, ScoreSet> per_n;
  // When empty, Elementwise mode uses default_t_grid() and PerN mode a
  // per-side default_scaled_t_grid.
  std::vector<double> t_grid;
};

// Method flags for each side of a curve point.
enum class CurveMethod { Saddlepoint = 0, GaussianFallback = 1, Failed = 2 };

struct CurvePoint {
  std::size_t n = 0;
  double gamma_n = 0.0;
  TailApprox alpha_sp, beta_sp;  // valid when the method is Saddlepoint
  double alpha_exact = std::numeric_limits<double>::quiet_NaN();
  double beta_exact = std::numeric_limits<double>::quiet_NaN();
  double alpha_exact_log = std::numeric_limits<double>::quiet_NaN();
  double beta_exact_log = std::numeric_limits<double>::quiet_NaN();
  double alpha_gauss = std::numeric_limits<double>::quiet_NaN();
  double beta_gauss = std::numeric_limits<double>::quiet_NaN();
  double alpha_gauss_log = std::numeric_limits<double>::quiet_NaN();
  double beta_gauss_log = std::numeric_limits<double>::quiet_NaN();
  double alpha_mc = std::numeric_limits<double>::quiet_NaN();
  double beta_mc = std::numeric_limits<double>::quiet_NaN();
  double zeta_n = std::numeric_limits<double>::quiet_NaN();
  double c_n = std::numeric_limits<double>::quiet_NaN();
  CurveMethod method_alpha = CurveMethod::Failed;
  CurveMethod method_beta = CurveMethod::Failed;
  std::string note;
};

struct ErrorCurve {
  std::vector<CurvePoint> points;
};

// Exact-asymptotic and Gaussian error estimates per n; Monte Carlo
// columns are left for the simulation layer to fill. Per-n failures are
// recorded in the point's method flags and note, not thrown.
ErrorCurve error_curve(const ErrorCurveRequest& req);

// Curve CSV with one row per n. Probability cells below 1e-300 hold the
// base-10 log of the probability instead (always negative and below
// -300, so the two encodings cannot collide). Method cells hold the
// CurveMethod integer.
void write_curve_csv(const std::string& path, const ErrorCurve& curve);

}  // namespace ldet
