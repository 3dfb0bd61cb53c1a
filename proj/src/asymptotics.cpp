#include "ldet/asymptotics.hpp"

#include <algorithm>
#include <cmath>

#include "ldet/csv.hpp"
#include "ldet/numerics.hpp"

namespace ldet {

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double q_inverse(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("q_inverse: alpha outside (0,1)");
  }
  double x = -normal_quantile(alpha);
  // Newton polish against q_function keeps the round trip below 1e-10.
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  if (pdf > 0.0) x += (q_function(x) - alpha) / pdf;
  return x;
}

double log_q_function(double x) {
  if (x < 10.0) return std::log(q_function(x));
  // Asymptotic series Q(x) = pdf(x)/x (1 - 1/x^2 + 3/x^4 - 15/x^6 + ...).
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - 0.5 * std::log(2.0 * M_PI) - std::log(x) + std::log(series);
}

Moments estimate_moments(std::span<const double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("estimate_moments: need two samples");
  Moments mo;
  mo.count = samples.size();
  for (double x : samples) mo.mean += x;
  mo.mean /= static_cast<double>(mo.count);
  double ss = 0.0;
  for (double x : samples) ss += (x - mo.mean) * (x - mo.mean);
  mo.sd = std::sqrt(ss / static_cast<double>(mo.count - 1));
  return mo;
}

double set_threshold_clt(double mu0, double sigma0, std::size_t n, double alpha) {
  if (n == 0) throw std::invalid_argument("set_threshold_clt: n must be positive");
  if (!(sigma0 >= 0.0)) throw std::invalid_argument("set_threshold_clt: negative sigma");
  return mu0 + sigma0 / std::sqrt(static_cast<double>(n)) * q_inverse(alpha);
}

double gaussian_error_approx(double mu, double sigma, double gamma, Tail tail) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_error_approx: sigma must be positive");
  const double z = (gamma - mu) / sigma;
  return q_function(tail == Tail::Upper ? z : -z);
}

double gaussian_error_log(double mu, double sigma, double gamma, Tail tail) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_error_log: sigma must be positive");
  const double z = (gamma - mu) / sigma;
  return log_q_function(tail == Tail::Upper ? z : -z);
}

TailApprox exact_asymptotic_tail(const LmgfEstimate& est, double gamma, std::size_t n,
                                 Tail tail) {
  if (n == 0) throw std::invalid_argument("exact_asymptotic_tail: n must be positive");
  if (tail == Tail::Lower) {
    // One code path: the lower tail of T is the upper tail of -T.
    return exact_asymptotic_tail(negate_statistic(est), -gamma, n, Tail::Upper);
  }
  const RateSolver solver(est);
  if (!(gamma > solver.mu())) {
    throw NoSaddlepoint("exact_asymptotic_tail: gamma not above phi'(0)");
  }
  const LegendrePoint p = solver.solve(gamma);
  TailApprox out;
  out.t = p.t;
  out.rate = p.rate;
  out.curvature = solver.curvature_at(p.t);
  if (!(out.curvature > 0.0) || !(p.t > 0.0)) {
    throw NoSaddlepoint("exact_asymptotic_tail: degenerate curvature at the saddlepoint");
  }
  const double nd = static_cast<double>(n);
  out.zeta = 1.0 / (p.t * std::sqrt(2.0 * M_PI * nd * out.curvature));
  out.log_prob = std::log(out.zeta) - nd * p.rate;
  out.prob = (out.log_prob > 0.0) ? 1.0 : std::exp(out.log_prob);
  return out;
}

double cn_refinement(double zeta_n) {
  if (!(zeta_n > 0.0)) throw std::invalid_argument("cn_refinement: zeta must be positive");
  const double a = std::sqrt(2.0 * M_PI) * zeta_n;
  const auto integrand = [a](double s) {
    return std::exp(-s) * (0.5 - q_function(a * s));
  };
  // The e^{-s} factor bounds the truncated remainder by 0.5 e^{-40}.
  return integrate_adaptive(integrand, 0.0, 40.0, 1e-10);
}

namespace {

struct SideInputs {
  LmgfEstimate lmgf;     // for the exact route
  Moments moments;       // statistic-level moments at this n
};

void fill_side(CurvePoint& pt, Tail tail, const SideInputs& in, std::size_t n) {
  const bool upper = tail == Tail::Upper;
  double& exact = upper ? pt.alpha_exact : pt.beta_exact;
  double& exact_log = upper ? pt.alpha_exact_log : pt.beta_exact_log;
  double& gauss = upper ? pt.alpha_gauss : pt.beta_gauss;
  double& gauss_log = upper ? pt.alpha_gauss_log : pt.beta_gauss_log;
  CurveMethod& method = upper ? pt.method_alpha : pt.method_beta;
  TailApprox& sp = upper ? pt.alpha_sp : pt.beta_sp;

  gauss = gaussian_error_approx(in.moments.mean, in.moments.sd, pt.gamma_n, tail);
  gauss_log = gaussian_error_log(in.moments.mean, in.moments.sd, pt.gamma_n, tail);
  try {
    sp = exact_asymptotic_tail(in.lmgf, pt.gamma_n, n, tail);
    exact = sp.prob;
    exact_log = sp.log_prob;
    method = CurveMethod::Saddlepoint;
  } catch (const NoSaddlepoint& e) {
    exact = gauss;
    exact_log = gauss_log;
    method = CurveMethod::GaussianFallback;
    pt.note += std::string(pt.note.empty() ? "" : "; ") + e.what();
  } catch (const GammaOutOfRange& e) {
    exact = gauss;
    exact_log = gauss_log;
    method = CurveMethod::GaussianFallback;
    pt.note += std::string(pt.note.empty() ? "" : "; ") + e.what();
  }
}

}  // namespace

ErrorCurve error_curve(const ErrorCurveRequest& req) {
  if (req.n_list.empty()) throw std::invalid_argument("error_curve: empty n list");
  const std::vector<double> grid = req.t_grid.empty() ? default_t_grid() : req.t_grid;

  // Elementwise mode shares one LMGF and one set of moments across n.
  LmgfEstimate elem_h0, elem_h1;
  Moments elem_mo0, elem_mo1;
  if (req.mode == ErrorCurveRequest::Mode::Elementwise) {
    elem_h0 = lmgf_direct(req.elementwise.h0, grid);
    elem_h1 = lmgf_direct(req.elementwise.h1, grid);
    elem_mo0 = estimate_moments(req.elementwise.h0);
    elem_mo1 = estimate_moments(req.elementwise.h1);
  }

  ErrorCurve curve;
  for (std::size_t n : req.n_list) {
    CurvePoint pt;
    pt.n = n;
    try {
      SideInputs h0, h1;
      if (req.mode == ErrorCurveRequest::Mode::Elementwise) {
        const double root = std::sqrt(static_cast<double>(n));
        h0.lmgf = elem_h0;
        h1.lmgf = elem_h1;
        h0.moments = {elem_mo0.mean, elem_mo0.sd / root, elem_mo0.count};
        h1.moments = {elem_mo1.mean, elem_mo1.sd / root, elem_mo1.count};
        // The shared elementwise LMGF equals the scaled LMGF of the
        // mean statistic for every n; only the block length changes.
      } else {
        const auto it = req.per_n.find(n);
        if (it == req.per_n.end()) {
          throw std::invalid_argument("error_curve: no samples for n=" + std::to_string(n));
        }
        // Scaled estimates get per-side grids matched to the sample scale
        // unless the caller pinned one.
        h0.lmgf = scaled_lmgf_direct(
            it->second.h0, n,
            req.t_grid.empty() ? default_scaled_t_grid(it->second.h0, n) : grid);
        h1.lmgf = scaled_lmgf_direct(
            it->second.h1, n,
            req.t_grid.empty() ? default_scaled_t_grid(it->second.h1, n) : grid);
        h0.moments = estimate_moments(it->second.h0);
        h1.moments = estimate_moments(it->second.h1);
      }
      pt.gamma_n = (req.rule.kind == ThresholdRule::Kind::FixedGamma)
                       ? req.rule.value
                       : set_threshold_clt(h0.moments.mean, h0.moments.sd, 1, req.rule.value);
      fill_side(pt, Tail::Upper, h0, n);
      fill_side(pt, Tail::Lower, h1, n);
      // The CSV carries one zeta/c_n pair; prefer the miss side when the
      // saddlepoint route succeeded there.
      if (pt.method_beta == CurveMethod::Saddlepoint) {
        pt.zeta_n = pt.beta_sp.zeta;
        pt.c_n = cn_refinement(pt.zeta_n);
      } else if (pt.method_alpha == CurveMethod::Saddlepoint) {
        pt.zeta_n = pt.alpha_sp.zeta;
        pt.c_n = cn_refinement(pt.zeta_n);
      }
    } catch (const std::exception& e) {
      pt.method_alpha = CurveMethod::Failed;
      pt.method_beta = CurveMethod::Failed;
      pt.note += std::string(pt.note.empty() ? "" : "; ") + e.what();
    }
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

namespace {

// Probability cell encoding: plain value, or its base-10 log when the
// value itself would underflow the CSV (below 1e-300).
double prob_cell(double prob, double log_prob) {
  if (std::isnan(prob)) return prob;
  if (prob >= 1e-300) return prob;
  return log_prob / std::log(10.0);
}

}  // namespace

void write_curve_csv(const std::string& path, const ErrorCurve& curve) {
  CsvTable table;
  table.header = {"n",          "gamma_n",    "alpha_exact", "alpha_gauss",
                  "alpha_mc",   "beta_exact", "beta_gauss",  "beta_mc",
                  "zeta_n",     "c_n",        "method_alpha", "method_beta"};
  for (const CurvePoint& pt : curve.points) {
    table.rows.push_back({static_cast<double>(pt.n), pt.gamma_n,
                          prob_cell(pt.alpha_exact, pt.alpha_exact_log),
                          prob_cell(pt.alpha_gauss, pt.alpha_gauss_log), pt.alpha_mc,
                          prob_cell(pt.beta_exact, pt.beta_exact_log),
                          prob_cell(pt.beta_gauss, pt.beta_gauss_log), pt.beta_mc, pt.zeta_n,
                          pt.c_n, static_cast<double>(pt.method_alpha),
                          static_cast<double>(pt.method_beta)});
  }
  write_csv(path, table);
}

}  // namespace ldet
