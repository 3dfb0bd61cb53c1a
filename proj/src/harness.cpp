#include "ldet/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>

#include "json.hpp"

#include "ldet/asymptotics.hpp"
#include "ldet/csv.hpp"
#include "ldet/d3f.hpp"
#include "ldet/models.hpp"
#include "ldet/numerics.hpp"
#include "ldet/ratefn.hpp"

namespace ldet {

McBinomial binomial_estimate(std::size_t successes, std::size_t runs) {
  if (runs == 0) throw std::invalid_argument("binomial_estimate: no runs");
  if (successes > runs) throw std::invalid_argument("binomial_estimate: successes > runs");
  McBinomial b;
  b.successes = successes;
  b.runs = runs;
  const double s = static_cast<double>(successes);
  const double r = static_cast<double>(runs);
  b.estimate = s / r;
  b.lo = successes == 0 ? 0.0 : beta_quantile(0.025, s, r - s + 1.0);
  b.hi = successes == runs ? 1.0 : beta_quantile(0.975, s + 1.0, r - s);
  return b;
}

McResult monte_carlo_errors(const McSpec& spec, std::span<const std::size_t> n_list,
                            const std::function<double(std::size_t)>& gamma_for_n,
                            std::size_t runs, std::uint64_t seed) {
  if (!spec.h0 || !spec.h1) throw std::invalid_argument("monte_carlo_errors: missing samplers");
  if (runs == 0) throw std::invalid_argument("monte_carlo_errors: runs must be positive");
  if (n_list.empty()) throw std::invalid_argument("monte_carlo_errors: empty n list");
  for (std::size_t i = 0; i + 1 < n_list.size(); ++i) {
    if (n_list[i] >= n_list[i + 1]) {
      throw std::invalid_argument("monte_carlo_errors: n list must increase");
    }
  }
  McResult out;
  out.seed = seed;
  const RngStream root(seed);
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    const std::size_t n = n_list[i];
    const double gamma = gamma_for_n(n);
    RngStream r0 = root.derive(2 * i);
    RngStream r1 = root.derive(2 * i + 1);
    std::size_t a = 0, b = 0;
    for (std::size_t run = 0; run < runs; ++run) a += spec.h0(n, r0) >= gamma;
    for (std::size_t run = 0; run < runs; ++run) b += spec.h1(n, r1) < gamma;
    out.n_list.push_back(n);
    out.gamma.push_back(gamma);
    out.alpha.push_back(binomial_estimate(a, runs));
    out.beta.push_back(binomial_estimate(b, runs));
  }
  return out;
}

void write_mc_csv(const std::string& path, const McResult& result) {
  CsvTable table;
  table.header = {"n",        "gamma_n", "alpha_hat", "alpha_lo", "alpha_hi",
                  "beta_hat", "beta_lo", "beta_hi",   "runs"};
  for (std::size_t i = 0; i < result.n_list.size(); ++i) {
    table.rows.push_back({static_cast<double>(result.n_list[i]), result.gamma[i],
                          result.alpha[i].estimate, result.alpha[i].lo, result.alpha[i].hi,
                          result.beta[i].estimate, result.beta[i].lo, result.beta[i].hi,
                          static_cast<double>(result.alpha[i].runs)});
  }
  write_csv(path, table);
}

void write_curve_summary_json(const std::string& path, const ErrorCurve& curve,
                              const ThresholdRule& rule) {
  using nlohmann::json;
  const auto method_name = [](CurveMethod m) {
    switch (m) {
      case CurveMethod::Saddlepoint:
        return "saddlepoint";
      case CurveMethod::GaussianFallback:
        return "gaussian_fallback";
      default:
        return "failed";
    }
  };
  // Least-squares slope of -log p against n over the saddlepoint points.
  const auto slope = [&curve](bool upper) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t m = 0;
    for (const CurvePoint& pt : curve.points) {
      if ((upper ? pt.method_alpha : pt.method_beta) != CurveMethod::Saddlepoint) continue;
      const double y = -(upper ? pt.alpha_exact_log : pt.beta_exact_log);
      if (!std::isfinite(y)) continue;
      const double x = static_cast<double>(pt.n);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++m;
    }
    const double md = static_cast<double>(m);
    const double denom = md * sxx - sx * sx;
    if (m < 2 || !(std::abs(denom) > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return (md * sxy - sx * sy) / denom;
  };

  json doc;
  doc["format_version"] = 1;
  doc["rule"] = {
      {"kind", rule.kind == ThresholdRule::Kind::FixedGamma ? "fixed_gamma" : "clt_level"},
      {"value", rule.value}};
  json pts = json::array();
  for (const CurvePoint& pt : curve.points) {
    json p;
    p["n"] = pt.n;
    p["gamma_n"] = pt.gamma_n;
    p["method_alpha"] = method_name(pt.method_alpha);
    p["method_beta"] = method_name(pt.method_beta);
    if (pt.method_alpha == CurveMethod::Saddlepoint) {
      p["rate_alpha"] = pt.alpha_sp.rate;
      p["t_alpha"] = pt.alpha_sp.t;
    }
    if (pt.method_beta == CurveMethod::Saddlepoint) {
      p["rate_beta"] = pt.beta_sp.rate;
      p["t_beta"] = pt.beta_sp.t;
    }
    if (std::isfinite(pt.zeta_n)) {
      p["zeta_n"] = pt.zeta_n;
      p["c_n"] = pt.c_n;
    }
    if (!pt.note.empty()) p["note"] = pt.note;
    pts.push_back(std::move(p));
  }
  doc["points"] = std::move(pts);
  doc["slopes"] = json::object();
  const double slope_alpha = slope(true);
  const double slope_beta = slope(false);
  if (std::isfinite(slope_alpha)) doc["slopes"]["alpha_exact"] = slope_alpha;
  if (std::isfinite(slope_beta)) doc["slopes"]["beta_exact"] = slope_beta;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write curve summary " + path);
  out << doc.dump(1) << '\n';
}

GaussianityReport gaussianity_report(std::span<const double> values) {
  if (values.size() < 1000) {
    throw std::invalid_argument("gaussianity_report: need at least 1000 values");
  }
  const double m = static_cast<double>(values.size());
  GaussianityReport rep;
  for (double v : values) rep.mean += v;
  rep.mean /= m;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - rep.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= m;
  m3 /= m;
  m4 /= m;
  rep.sd = std::sqrt(m2);
  rep.se_skewness = std::sqrt(6.0 / m);
  rep.se_kurtosis = std::sqrt(24.0 / m);
  if (!(rep.sd > 1e-12 * (1.0 + std::abs(rep.mean)))) {
    rep.degenerate = true;
    return rep;
  }
  rep.skewness = m3 / (m2 * rep.sd);
  rep.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  rep.pass = std::abs(rep.skewness) < 0.2 && std::abs(rep.excess_kurtosis) < 0.5;

  constexpr int kBins = 24;
  rep.edges.resize(kBins + 1);
  rep.counts.assign(kBins, 0);
  rep.expected.assign(kBins, 0.0);
  const double lo = rep.mean - 4.0 * rep.sd;
  const double width = 8.0 * rep.sd / kBins;
  for (int i = 0; i <= kBins; ++i) rep.edges[i] = lo + width * i;
  for (double v : values) {
    int bin = static_cast<int>(std::floor((v - lo) / width));
    bin = std::clamp(bin, 0, kBins - 1);
    ++rep.counts[static_cast<std::size_t>(bin)];
  }
  for (int i = 0; i < kBins; ++i) {
    // Clamping sends the tails into the edge bins; match that here.
    const double zlo = (rep.edges[i] - rep.mean) / rep.sd;
    const double zhi = (rep.edges[i + 1] - rep.mean) / rep.sd;
    double p = normal_cdf(zhi) - normal_cdf(zlo);
    if (i == 0) p += normal_cdf(zlo);
    if (i == kBins - 1) p += 1.0 - normal_cdf(zhi);
    rep.expected[static_cast<std::size_t>(i)] = m * p;
  }
  return rep;
}

std::uint64_t SeedPlan::train_seed() const {
  return splitmix64(root ^ 0x545241494e5f5344ULL);
}
std::uint64_t SeedPlan::characterize_seed() const {
  return overlap ? train_seed() : splitmix64(root ^ 0x434841525f534544ULL);
}
std::uint64_t SeedPlan::test_seed() const {
  return splitmix64(root ^ 0x544553545f534544ULL);
}
std::uint64_t SeedPlan::tilt_seed() const {
  return splitmix64(root ^ 0x54494c545f534544ULL);
}

ShiftModel shift_model_from_config(const Config& cfg) {
  ShiftModel m;
  const std::string family = cfg.get("model.family", "laplace");
  if (family == "laplace") {
    m.family = Family::Laplace;
  } else if (family == "gaussian") {
    m.family = Family::Gaussian;
  } else {
    throw std::runtime_error("unknown model.family '" + family + "'");
  }
  m.theta0 = cfg.get_double("model.theta0", 0.0);
  m.theta1 = cfg.get_double("model.theta1", 2.0);
  m.scale = cfg.get_double("model.scale", 1.0);
  m.check();
  return m;
}

CompositeModel composite_model_from_config(const Config& cfg) {
  CompositeModel m;
  const std::string family = cfg.get("model.family", "gaussian");
  if (family == "laplace") {
    m.family = Family::Laplace;
  } else if (family == "gaussian") {
    m.family = Family::Gaussian;
  } else {
    throw std::runtime_error("unknown model.family '" + family + "'");
  }
  m.scale = cfg.get_double("model.scale", 1.0);
  m.theta0 = cfg.get_double("model.theta0", 0.0);
  m.thetas = cfg.get_double_list("model.thetas", {0.25, 0.35});
  m.prior = cfg.get_double_list("model.prior",
                                std::vector<double>(m.thetas.size(), 1.0 / m.thetas.size()));
  m.check();
  return m;
}

ImageModel image_model_from_config(const Config& cfg) {
  ImageModel m;
  m.width = static_cast<int>(cfg.get_count("model.width", 64));
  m.height = static_cast<int>(cfg.get_count("model.height", 64));
  m.p0 = cfg.get_double("model.p0", 0.1);
  m.p1 = cfg.get_double("model.p1", 0.9);
  m.check();
  return m;
}

ThresholdRule threshold_rule_from_config(const Config& cfg) {
  const std::string rule = cfg.get("threshold.rule", "clt");
  if (rule == "clt") return ThresholdRule::clt_level(cfg.get_double("threshold.alpha", 0.25));
  if (rule == "fixed") return ThresholdRule::fixed_gamma(cfg.get_double("threshold.gamma", 0.1));
  throw std::runtime_error("unknown threshold.rule '" + rule + "'");
}

TrainConfig train_config_from_config(const Config& cfg, const SeedPlan& plan, bool cnn) {
  TrainConfig tc;
  tc.learning_rate = cfg.get_double("train.learning_rate", cnn ? 0.01 : 0.05);
  tc.epochs = cfg.get_count("train.epochs", cnn ? 10 : 200);
  tc.batch_size = cfg.get_count("train.batch_size", 32);
  tc.init_half_width = cfg.get_double("train.init_half_width", 0.1);
  tc.seed = plan.train_seed();
  return tc;
}

// ---- experiment orchestration ----

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct StageRunner {
  ExperimentResult& res;

  bool run(const std::string& name, const std::function<void()>& body) {
    StageStatus st;
    st.name = name;
    try {
      body();
    } catch (const std::exception& e) {
      st.ok = false;
      st.detail = e.what();
    }
    res.stages.push_back(st);
    res.ok = res.ok && st.ok;
    return st.ok;
  }

  void skip(const std::string& name, const std::string& why) {
    res.stages.push_back({name, false, "skipped: " + why});
    res.ok = false;
  }
};



std::vector<double> middle_gamma_grid(const LmgfEstimate& est, std::size_t points) {
  const RateSolver solver(est);
  const double lo = solver.dphi_min();
  const double hi = solver.dphi_max();
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(points);
  }
  return g;
}

void merge_mc_into_curve(ErrorCurve& curve, const McResult& mc) {
  for (std::size_t i = 0; i < curve.points.size() && i < mc.n_list.size(); ++i) {
    curve.points[i].alpha_mc = mc.alpha[i].estimate;
    curve.points[i].beta_mc = mc.beta[i].estimate;
  }
}

json stages_json(const ExperimentResult& res) {
  json arr = json::array();
  for (const StageStatus& st : res.stages) {
    arr.push_back({{"name", st.name}, {"ok", st.ok}, {"detail", st.detail}});
  }
  return arr;
}

void write_manifest(const std::string& path, const Config& cfg, const SeedPlan& plan,
                    const ExperimentResult& res, const json& substitutions) {
  json doc;
  doc["artifact_version"] = kArtifactVersion;
  doc["format_version"] = 1;
  doc["config_hash"] = cfg.hash();
  doc["config"] = json(cfg.entries());
  doc["seeds"] = {{"root", plan.root},
                  {"train", plan.train_seed()},
                  {"characterize", plan.characterize_seed()},
                  {"test", plan.test_seed()},
                  {"tilt", plan.tilt_seed()},
                  {"overlap", plan.overlap}};
  doc["stages"] = stages_json(res);
  doc["outputs"] = res.outputs;
  doc["substitutions"] = substitutions;
  doc["ok"] = res.ok;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  out << doc.dump(1) << '\n';
}

// Per-observation scorer for the simple scenario.
std::function<double(double)> elementwise_scorer(const Config& cfg, const ShiftModel& model,
                                                 const std::optional<MlpD3F>& net) {
  const std::string stat = cfg.get("experiment.statistic", "llr");
  if (stat == "llr") {
    return [model](double x) { return llr_elementwise(model, x); };
  }
  if (stat == "d3f") {
    if (!net) throw std::runtime_error("d3f statistic requested but no trained network");
    const MlpD3F copy = *net;
    return [copy](double x) { return copy.score(x); };
  }
  throw std::runtime_error("unknown experiment.statistic '" + stat + "'");
}

void run_iid_simple(const Config& cfg, const std::string& out_dir, const SeedPlan& plan,
                    StageRunner& runner, ExperimentResult& res) {
  const ShiftModel model = shift_model_from_config(cfg);
  const bool learned = cfg.get("experiment.statistic", "llr") == "d3f";
  const std::size_t m_y = cfg.get_count("train.m_y", 1000);
  const std::size_t m_z = cfg.get_count("characterize.m_z", 100000);
  const std::size_t runs = cfg.get_count("mc.runs", 100000);
  const std::vector<std::size_t> n_list =
      cfg.get_count_list("curves.n_list", {10, 20, 50, 100, 200});
  const ThresholdRule rule = threshold_rule_from_config(cfg);

  std::optional<MlpD3F> net;
  if (learned) {
    if (!runner.run("train", [&] {
          RngStream rng = plan.train();
          const auto y0 = sample_iid(model, Hypothesis::H0, m_y / 2, rng);
          const auto y1 = sample_iid(model, Hypothesis::H1, m_y - m_y / 2, rng);
          TrainReport report;
          net = train_mlp(y0, y1, train_config_from_config(cfg, plan, false), &report);
          save_mlp(out_dir + "/weights_mlp.json", *net);
          res.outputs.push_back("weights_mlp.json");
        })) {
      runner.skip("characterize", "training failed");
      return;
    }
  }

  ScoreSet scores;
  LmgfEstimate est0, est1;
  if (!runner.run("characterize", [&] {
        const auto score = elementwise_scorer(cfg, model, net);
        RngStream rng = plan.characterize();
        const auto x0 = sample_iid(model, Hypothesis::H0, m_z, rng);
        const auto x1 = sample_iid(model, Hypothesis::H1, m_z, rng);
        scores.h0.reserve(m_z);
        scores.h1.reserve(m_z);
        for (double x : x0) scores.h0.push_back(score(x));
        for (double x : x1) scores.h1.push_back(score(x));
        const auto grid = default_t_grid();
        est0 = lmgf_direct(scores.h0, grid);
        est1 = lmgf_direct(scores.h1, grid);
        write_lmgf_csv(out_dir + "/lmgf_h0.csv", est0);
        write_lmgf_csv(out_dir + "/lmgf_h1.csv", est1);
        res.outputs.push_back("lmgf_h0.csv");
        res.outputs.push_back("lmgf_h1.csv");
      })) {
    runner.skip("rate", "characterization failed");
    runner.skip("curves", "characterization failed");
    runner.skip("simulate", "characterization failed");
    return;
  }

  runner.run("rate", [&] {
    write_rate_csv(out_dir + "/rate_h0.csv", rate_curve(est0, middle_gamma_grid(est0, 41)));
    write_rate_csv(out_dir + "/rate_h1.csv", rate_curve(est1, middle_gamma_grid(est1, 41)));
    res.outputs.push_back("rate_h0.csv");
    res.outputs.push_back("rate_h1.csv");
  });

  ErrorCurve curve;
  const bool curves_ok = runner.run("curves", [&] {
    ErrorCurveRequest req;
    req.rule = rule;
    req.n_list = n_list;
    req.mode = ErrorCurveRequest::Mode::Elementwise;
    req.elementwise = scores;
    curve = error_curve(req);
    write_curve_summary_json(out_dir + "/curves_summary.json", curve, rule);
    res.outputs.push_back("curves_summary.json");
  });

  if (!curves_ok) {
    runner.skip("simulate", "curves failed");
    return;
  }

  runner.run("simulate", [&] {
    const auto score = elementwise_scorer(cfg, model, net);
    McSpec spec;
    spec.h0 = [&model, score](std::size_t n, RngStream& rng) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += score(sample_scalar(model.family, model.theta0, model.scale, rng));
      }
      return s / static_cast<double>(n);
    };
    spec.h1 = [&model, score](std::size_t n, RngStream& rng) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += score(sample_scalar(model.family, model.theta1, model.scale, rng));
      }
      return s / static_cast<double>(n);
    };
    const auto gamma_for_n = [&curve, &n_list](std::size_t n) {
      for (std::size_t i = 0; i < n_list.size(); ++i) {
        if (n_list[i] == n) return curve.points[i].gamma_n;
      }
      throw std::runtime_error("no threshold for n");
    };
    const McResult mc = monte_carlo_errors(spec, n_list, gamma_for_n, runs, plan.test_seed());
    merge_mc_into_curve(curve, mc);
    write_mc_csv(out_dir + "/mc.csv", mc);
    write_curve_csv(out_dir + "/curves.csv", curve);
    res.outputs.push_back("mc.csv");
    res.outputs.push_back("curves.csv");
  });
}

void run_composite(const Config& cfg, const std::string& out_dir, const SeedPlan& plan,
                   StageRunner& runner, ExperimentResult& res) {
  const CompositeModel model = composite_model_from_config(cfg);
  const bool learned = cfg.get("experiment.statistic", "llr") == "d3f";
  const std::size_t m_y = cfg.get_count("train.m_y", 1000);
  const std::size_t m_z = cfg.get_count("characterize.m_z", 10000);
  const std::size_t runs = cfg.get_count("mc.runs", 10000);
  const std::vector<std::size_t> n_list =
      cfg.get_count_list("curves.n_list", {10, 20, 50, 100, 200});
  const ThresholdRule rule = threshold_rule_from_config(cfg);
  const std::size_t k = model.thetas.size();

  // Statistic draws share one code path whether the members are learned
  // networks or exact per-theta likelihood ratios.
  MixtureD3F mix;
  std::function<double(std::span<const double>)> statistic;

  if (learned) {
    if (!runner.run("train", [&] {
          RngStream rng = plan.train();
          mix.thetas = model.thetas;
          mix.weights = model.prior;
          const TrainConfig base = train_config_from_config(cfg, plan, false);
          for (std::size_t j = 0; j < k; ++j) {
            std::vector<double> y0(m_y / 2), y1(m_y - m_y / 2);
            for (double& v : y0) v = sample_scalar(model.family, model.theta0, model.scale, rng);
            for (double& v : y1) {
              v = sample_scalar(model.family, model.thetas[j], model.scale, rng);
            }
            TrainConfig tc = base;
            tc.seed = splitmix64(base.seed + j);
            mix.members.push_back(train_mlp(y0, y1, tc));
          }
          save_mixture(out_dir + "/weights_mixture.json", mix);
          res.outputs.push_back("weights_mixture.json");
          statistic = [&mix](std::span<const double> xs) {
            return d3f_statistic_mixture(mix, xs);
          };
        })) {
      runner.skip("rn_condition", "training failed");
      runner.skip("curves", "training failed");
      return;
    }
    runner.run("rn_condition", [&] {
      CsvTable table;
      table.header = {"star_theta", "theta", "mu", "se", "holds"};
      RngStream rng = plan.characterize().derive(0x52);
      for (std::size_t star = 0; star < k; ++star) {
        const RnConditionReport rep =
            rn_condition_check(mix, model, star, cfg.get_count("rn.probes", 10000), rng);
        for (std::size_t j = 0; j < k; ++j) {
          table.rows.push_back({model.thetas[star], model.thetas[j], rep.mu[j], rep.se[j],
                                rep.holds ? 1.0 : 0.0});
        }
      }
      write_csv(out_dir + "/rn_condition.csv", table);
      res.outputs.push_back("rn_condition.csv");
    });
  } else {
    statistic = [&model](std::span<const double> xs) { return llr_mixture(model, xs); };
  }

  // One curve and simulation per assumed true alternative.
  for (std::size_t star = 0; star < k; ++star) {
    const std::string tag = "_theta" + std::to_string(star);
    ErrorCurve curve;
    const bool ok = runner.run("curves" + tag, [&] {
      ErrorCurveRequest req;
      req.rule = rule;
      req.n_list = n_list;
      req.mode = ErrorCurveRequest::Mode::PerN;
      RngStream rng = plan.characterize().derive(100 + star);
      for (const std::size_t n : n_list) {
        ScoreSet set;
        set.h0.resize(m_z);
        set.h1.resize(m_z);
        std::vector<double> xs(n);
        for (double& T : set.h0) {
          for (double& x : xs) x = sample_scalar(model.family, model.theta0, model.scale, rng);
          T = statistic(xs);
        }
        for (double& T : set.h1) {
          for (double& x : xs) {
            x = sample_scalar(model.family, model.thetas[star], model.scale, rng);
          }
          T = statistic(xs);
        }
        req.per_n[n] = std::move(set);
      }
      curve = error_curve(req);
      write_curve_summary_json(out_dir + "/curves_summary" + tag + ".json", curve, rule);
      res.outputs.push_back("curves_summary" + tag + ".json");
      if (star == 0) {
        const std::size_t n_ref = n_list.back();
        write_lmgf_csv(out_dir + "/lmgf_h0_nref.csv",
                       scaled_lmgf_direct(req.per_n[n_ref].h0, n_ref,
                                          default_scaled_t_grid(req.per_n[n_ref].h0, n_ref)));
        res.outputs.push_back("lmgf_h0_nref.csv");
      }
    });
    if (!ok) {
      runner.skip("simulate" + tag, "curves failed");
      continue;
    }
    runner.run("simulate" + tag, [&] {
      McSpec spec;
      spec.h0 = [&model, &statistic](std::size_t n, RngStream& rng) {
        std::vector<double> xs(n);
        for (double& x : xs) x = sample_scalar(model.family, model.theta0, model.scale, rng);
        return statistic(xs);
      };
      const double theta_star = model.thetas[star];
      spec.h1 = [&model, &statistic, theta_star](std::size_t n, RngStream& rng) {
        std::vector<double> xs(n);
        for (double& x : xs) x = sample_scalar(model.family, theta_star, model.scale, rng);
        return statistic(xs);
      };
      const auto gamma_for_n = [&curve, &n_list](std::size_t n) {
        for (std::size_t i = 0; i < n_list.size(); ++i) {
          if (n_list[i] == n) return curve.points[i].gamma_n;
        }
        throw std::runtime_error("no threshold for n");
      };
      const McResult mc =
          monte_carlo_errors(spec, n_list, gamma_for_n, runs, plan.test_seed() + star);
      merge_mc_into_curve(curve, mc);
      write_mc_csv(out_dir + "/mc" + tag + ".csv", mc);
      write_curve_csv(out_dir + "/curves" + tag + ".csv", curve);
      res.outputs.push_back("mc" + tag + ".csv");
      res.outputs.push_back("curves" + tag + ".csv");
    });
  }
}

TargetShape circle_at_center(const ImageModel& model, double radius) {
  TargetShape shape;
  shape.kind = TargetShape::Kind::Circle;
  shape.cx = model.width / 2.0;
  shape.cy = model.height / 2.0;
  shape.axis_a = radius;
  shape.axis_b = radius;
  return shape;
}

void run_extended_target(const Config& cfg, const std::string& out_dir, const SeedPlan& plan,
                         StageRunner& runner, ExperimentResult& res) {
  const ImageModel model = image_model_from_config(cfg);
  const std::size_t m_y = cfg.get_count("train.m_y", 2000);
  const std::size_t m_c = cfg.get_count("characterize.m_images", 2000);
  const std::size_t runs = cfg.get_count("mc.runs", 10000);
  const std::vector<double> radius_list =
      cfg.get_double_list("image.radius_list", {3, 4, 6, 8, 10, 12});
  const std::vector<double> alpha_list = cfg.get_double_list("image.alpha_list", {0.3, 0.075});

  std::optional<CnnD3F> net;
  if (!runner.run("train", [&] {
        RngStream rng = plan.train();
        std::vector<BinaryImage> y0, y1;
        const std::size_t half = m_y / 2;
        for (std::size_t i = 0; i < half; ++i) {
          y0.push_back(generate_image(model, std::nullopt, rng).image);
        }
        for (std::size_t i = 0; i < m_y - half; ++i) {
          // Alternate ellipses and rectangles with random geometry.
          TargetShape shape;
          shape.kind = i % 2 == 0 ? TargetShape::Kind::Ellipse : TargetShape::Kind::Rectangle;
          shape.cx = model.width * (0.25 + 0.5 * rng.uniform());
          shape.cy = model.height * (0.25 + 0.5 * rng.uniform());
          shape.axis_a = 4.0 + 8.0 * rng.uniform();
          shape.axis_b = 4.0 + 8.0 * rng.uniform();
          shape.rotation = 3.14159265358979323846 * rng.uniform();
          y1.push_back(generate_image(model, shape, rng).image);
        }
        TrainReport report;
        net = train_cnn(y0, y1, train_config_from_config(cfg, plan, true), &report);
        save_cnn(out_dir + "/weights_cnn.json", *net);
        res.outputs.push_back("weights_cnn.json");
      })) {
    runner.skip("characterize", "training failed");
    runner.skip("simulate", "training failed");
    return;
  }

  std::vector<double> h0_scores;
  Moments h0_moments;
  if (!runner.run("characterize", [&] {
        RngStream rng = plan.characterize();
        h0_scores.resize(m_c);
        for (double& s : h0_scores) {
          s = net->score(generate_image(model, std::nullopt, rng).image);
        }
        const GaussianityReport rep = gaussianity_report(h0_scores);
        json doc;
        doc["mean"] = rep.mean;
        doc["sd"] = rep.sd;
        doc["skewness"] = rep.skewness;
        doc["excess_kurtosis"] = rep.excess_kurtosis;
        doc["se_skewness"] = rep.se_skewness;
        doc["se_kurtosis"] = rep.se_kurtosis;
        doc["degenerate"] = rep.degenerate;
        doc["pass"] = rep.pass;
        std::ofstream out(out_dir + "/gaussianity.json");
        out << doc.dump(1) << '\n';
        res.outputs.push_back("gaussianity.json");

        CsvTable hist;
        hist.header = {"bin_lo", "bin_hi", "count", "expected"};
        for (std::size_t i = 0; i < rep.counts.size(); ++i) {
          hist.rows.push_back({rep.edges[i], rep.edges[i + 1],
                               static_cast<double>(rep.counts[i]), rep.expected[i]});
        }
        write_csv(out_dir + "/gaussianity_hist.csv", hist);
        res.outputs.push_back("gaussianity_hist.csv");

        h0_moments = estimate_moments(h0_scores);
        CsvTable th;
        th.header = {"alpha", "gamma_raw"};
        for (double a : alpha_list) {
          th.rows.push_back({a, set_threshold_clt(h0_moments.mean, h0_moments.sd, 1, a)});
        }
        write_csv(out_dir + "/thresholds.csv", th);
        res.outputs.push_back("thresholds.csv");
      })) {
    runner.skip("simulate", "characterization failed");
    return;
  }

  runner.run("simulate", [&] {
    CsvTable table;
    table.header = {"alpha",    "radius",  "n",       "gamma_raw", "alpha_hat", "alpha_lo",
                    "alpha_hi", "beta_hat", "beta_lo", "beta_hi",  "runs"};
    RngStream rng = plan.test();
    // Score pools are shared across alpha levels; only the threshold moves.
    std::vector<double> test_h0(runs);
    for (double& s : test_h0) s = net->score(generate_image(model, std::nullopt, rng).image);
    for (double r : radius_list) {
      const TargetShape shape = circle_at_center(model, r);
      const auto mask = rasterize(shape, model.width, model.height);
      std::size_t n = 0;
      for (auto v : mask) n += v;
      RngStream rr = rng.derive(static_cast<std::uint64_t>(r * 8.0) + 1000);
      std::vector<double> test_h1(runs);
      for (double& s : test_h1) s = net->score(generate_image(model, shape, rr).image);
      for (double a : alpha_list) {
        const double gamma = set_threshold_clt(h0_moments.mean, h0_moments.sd, 1, a);
        std::size_t fa = 0, miss = 0;
        for (double s : test_h0) fa += s >= gamma;
        for (double s : test_h1) miss += s < gamma;
        const McBinomial alpha_hat = binomial_estimate(fa, runs);
        const McBinomial beta_hat = binomial_estimate(miss, runs);
        table.rows.push_back({a, r, static_cast<double>(n), gamma, alpha_hat.estimate,
                              alpha_hat.lo, alpha_hat.hi, beta_hat.estimate, beta_hat.lo,
                              beta_hat.hi, static_cast<double>(runs)});
      }
    }
    write_csv(out_dir + "/mc_image.csv", table);
    res.outputs.push_back("mc_image.csv");
  });
}

}  // namespace

ExperimentResult run_experiment(const Config& cfg_in, const std::string& out_dir) {
  Config cfg = cfg_in;
  ExperimentResult res;
  fs::create_directories(out_dir);
  StageRunner runner{res};

  SeedPlan plan;
  std::string scenario;
  if (!runner.run("config", [&] {
        scenario = cfg.get("experiment.scenario", "iid_simple");
        plan.root = cfg.get_seed("experiment.seed", 1);
        plan.overlap = cfg.get_bool("characterize.overlap", false);
        cfg.set_default("experiment.scenario", scenario);
        cfg.set_default("experiment.statistic", "llr");
        cfg.set_default("experiment.seed", std::to_string(plan.root));
      })) {
    res.manifest_path = out_dir + "/manifest.json";
    write_manifest(res.manifest_path, cfg, plan, res, json::object());
    return res;
  }

  json subs = json::object();
  if (scenario == "iid_simple") {
    run_iid_simple(cfg, out_dir, plan, runner, res);
  } else if (scenario == "composite") {
    run_composite(cfg, out_dir, plan, runner, res);
  } else if (scenario == "extended_target") {
    subs["image_size"] = "64x64 instead of 500x500";
    subs["training_images"] = "2x1000 instead of 76800";
    subs["mc_runs"] = "1e4 instead of 1e7";
    run_extended_target(cfg, out_dir, plan, runner, res);
  } else {
    runner.skip("dispatch", "unknown scenario '" + scenario + "'");
  }

  runner.run("manifest", [&] {
    res.manifest_path = out_dir + "/manifest.json";
    write_manifest(res.manifest_path, cfg, plan, res, subs);
  });
  return res;
}

}  // namespace ldet
