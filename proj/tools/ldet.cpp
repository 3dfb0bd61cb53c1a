// Command line front end: each subcommand runs one slice of the
// pipeline against a config file, writing CSV/JSON artifacts into the
// output directory. Exit status is 0 on success; failures name the
// stage on stderr.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ldet/asymptotics.hpp"
#include "ldet/csv.hpp"
#include "ldet/d3f.hpp"
#include "ldet/harness.hpp"
#include "ldet/lmgf.hpp"
#include "ldet/models.hpp"
#include "ldet/ratefn.hpp"
#include "ldet/tilting.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ldet;

struct CliState {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;

  Config config() const {
    Config cfg = config_path.empty() ? Config{} : Config::parse_file(config_path);
    if (seed_given) cfg.set("experiment.seed", std::to_string(seed));
    return cfg;
  }

  SeedPlan plan(const Config& cfg) const {
    SeedPlan p;
    p.root = cfg.get_seed("experiment.seed", 1);
    p.overlap = cfg.get_bool("characterize.overlap", false);
    return p;
  }

  std::string path(const std::string& name) const { return out_dir + "/" + name; }
};

void add_common(CLI::App* sub, CliState& st) {
  sub->add_option("--config", st.config_path, "config file (flat key=value with [sections])");
  sub->add_option("--out-dir", st.out_dir, "output directory")->capture_default_str();
  sub->add_option("--seed", st.seed, "root seed, overrides experiment.seed")
      ->each([&st](const std::string&) { st.seed_given = true; });
}

std::string scenario_of(const Config& cfg) {
  return cfg.get("experiment.scenario", "iid_simple");
}

bool uses_learned_statistic(const Config& cfg) {
  const std::string s = cfg.get("experiment.statistic", "llr");
  if (s != "llr" && s != "d3f") {
    throw std::runtime_error("unknown experiment.statistic '" + s + "'");
  }
  return s == "d3f";
}

// Per-observation scorer for the simple scenario, loading weights when
// the statistic is learned.
std::function<double(double)> scalar_scorer(const Config& cfg, const ShiftModel& model,
                                            const CliState& st) {
  if (!uses_learned_statistic(cfg)) {
    return [model](double x) { return llr_elementwise(model, x); };
  }
  const std::string path = cfg.get("weights.mlp", st.path("weights_mlp.json"));
  const MlpD3F net = load_mlp(path);
  return [net](double x) { return net.score(x); };
}

std::function<double(std::span<const double>)> composite_statistic(const Config& cfg,
                                                                   const CompositeModel& model,
                                                                   const CliState& st) {
  if (!uses_learned_statistic(cfg)) {
    return [model](std::span<const double> xs) { return llr_mixture(model, xs); };
  }
  const std::string path = cfg.get("weights.mixture", st.path("weights_mixture.json"));
  const auto mix = std::make_shared<MixtureD3F>(load_mixture(path));
  return [mix](std::span<const double> xs) { return d3f_statistic_mixture(*mix, xs); };
}

// ---- train ----

int cmd_train(const CliState& st) {
  const Config cfg = st.config();
  const SeedPlan plan = st.plan(cfg);
  fs::create_directories(st.out_dir);
  const std::string scenario = scenario_of(cfg);
  TrainReport report;

  if (scenario == "iid_simple") {
    const ShiftModel model = shift_model_from_config(cfg);
    const std::size_t m_y = cfg.get_count("train.m_y", 1000);
    RngStream rng = plan.train();
    const auto y0 = sample_iid(model, Hypothesis::H0, m_y / 2, rng);
    const auto y1 = sample_iid(model, Hypothesis::H1, m_y - m_y / 2, rng);
    const MlpD3F net = train_mlp(y0, y1, train_config_from_config(cfg, plan, false), &report);
    save_mlp(st.path("weights_mlp.json"), net);
    std::cout << "wrote " << st.path("weights_mlp.json") << "\n";
  } else if (scenario == "composite") {
    const CompositeModel model = composite_model_from_config(cfg);
    const std::size_t m_y = cfg.get_count("train.m_y", 1000);
    RngStream rng = plan.train();
    MixtureD3F mix;
    mix.thetas = model.thetas;
    mix.weights = model.prior;
    const TrainConfig base = train_config_from_config(cfg, plan, false);
    for (std::size_t j = 0; j < model.thetas.size(); ++j) {
      std::vector<double> y0(m_y / 2), y1(m_y - m_y / 2);
      for (double& v : y0) v = sample_scalar(model.family, model.theta0, model.scale, rng);
      for (double& v : y1) v = sample_scalar(model.family, model.thetas[j], model.scale, rng);
      TrainConfig tc = base;
      tc.seed = splitmix64(base.seed + j);
      mix.members.push_back(train_mlp(y0, y1, tc, &report));
    }
    save_mixture(st.path("weights_mixture.json"), mix);
    std::cout << "wrote " << st.path("weights_mixture.json") << "\n";
  } else if (scenario == "extended_target") {
    const ImageModel model = image_model_from_config(cfg);
    const std::size_t m_y = cfg.get_count("train.m_y", 2000);
    RngStream rng = plan.train();
    std::vector<BinaryImage> y0, y1;
    for (std::size_t i = 0; i < m_y / 2; ++i) {
      y0.push_back(generate_image(model, std::nullopt, rng).image);
    }
    for (std::size_t i = 0; i < m_y - m_y / 2; ++i) {
      TargetShape shape;
      shape.kind = i % 2 == 0 ? TargetShape::Kind::Ellipse : TargetShape::Kind::Rectangle;
      shape.cx = model.width * (0.25 + 0.5 * rng.uniform());
      shape.cy = model.height * (0.25 + 0.5 * rng.uniform());
      shape.axis_a = 4.0 + 8.0 * rng.uniform();
      shape.axis_b = 4.0 + 8.0 * rng.uniform();
      shape.rotation = 3.14159265358979323846 * rng.uniform();
      y1.push_back(generate_image(model, shape, rng).image);
    }
    const CnnD3F net = train_cnn(y0, y1, train_config_from_config(cfg, plan, true), &report);
    save_cnn(st.path("weights_cnn.json"), net);
    std::cout << "wrote " << st.path("weights_cnn.json") << "\n";
  } else {
    throw std::runtime_error("unknown scenario '" + scenario + "'");
  }
  if (!report.epoch_loss.empty()) {
    std::cout << "final epoch loss " << report.epoch_loss.back() << ", training accuracy "
              << report.final_accuracy << "\n";
  }
  return 0;
}

// ---- characterize ----

// One statistic value per line; an optional single-column header is
// tolerated.
std::vector<double> read_value_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<double> values;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(line, &used);
      while (used < line.size() && std::isspace(static_cast<unsigned char>(line[used]))) ++used;
      if (used != line.size()) throw std::invalid_argument(line);
      values.push_back(v);
    } catch (const std::exception&) {
      if (!first) throw std::runtime_error("bad value line in " + path + ": " + line);
    }
    first = false;
  }
  if (values.empty()) throw std::runtime_error("no values in " + path);
  return values;
}

int cmd_characterize(const CliState& st) {
  const Config cfg = st.config();
  const SeedPlan plan = st.plan(cfg);
  fs::create_directories(st.out_dir);
  const std::string scenario = scenario_of(cfg);

  if (cfg.has("characterize.input")) {
    const auto values = read_value_column(cfg.get("characterize.input"));
    const std::size_t n = cfg.get_count("characterize.n", 1);
    const LmgfEstimate est =
        n == 1 ? lmgf_direct(values, default_t_grid())
               : scaled_lmgf_direct(values, n, default_scaled_t_grid(values, n));
    write_lmgf_csv(st.path("lmgf.csv"), est);
    std::cout << "wrote " << st.path("lmgf.csv") << " from " << values.size() << " values\n";
    return 0;
  }

  if (scenario == "iid_simple") {
    const ShiftModel model = shift_model_from_config(cfg);
    const std::size_t m_z = cfg.get_count("characterize.m_z", 100000);
    const auto score = scalar_scorer(cfg, model, st);
    RngStream rng = plan.characterize();
    std::vector<double> s0(m_z), s1(m_z);
    for (double& v : s0) {
      v = score(sample_scalar(model.family, model.theta0, model.scale, rng));
    }
    for (double& v : s1) {
      v = score(sample_scalar(model.family, model.theta1, model.scale, rng));
    }
    const auto grid = default_t_grid();
    write_lmgf_csv(st.path("lmgf_h0.csv"), lmgf_direct(s0, grid));
    write_lmgf_csv(st.path("lmgf_h1.csv"), lmgf_direct(s1, grid));
    std::cout << "wrote " << st.path("lmgf_h0.csv") << " and " << st.path("lmgf_h1.csv")
              << "\n";
  } else if (scenario == "composite") {
    const CompositeModel model = composite_model_from_config(cfg);
    const std::size_t m_z = cfg.get_count("characterize.m_z", 10000);
    const std::size_t n_ref = cfg.get_count("characterize.n_ref", 100);
    const std::size_t star = cfg.get_count("experiment.theta_star_index",
                                           model.thetas.size() - 1);
    if (star >= model.thetas.size()) {
      throw std::runtime_error("experiment.theta_star_index out of range");
    }
    const auto statistic = composite_statistic(cfg, model, st);
    RngStream rng = plan.characterize();
    std::vector<double> T0(m_z), T1(m_z), xs(n_ref);
    for (double& T : T0) {
      for (double& x : xs) x = sample_scalar(model.family, model.theta0, model.scale, rng);
      T = statistic(xs);
    }
    for (double& T : T1) {
      for (double& x : xs) {
        x = sample_scalar(model.family, model.thetas[star], model.scale, rng);
      }
      T = statistic(xs);
    }
    write_lmgf_csv(st.path("lmgf_h0.csv"),
                   scaled_lmgf_direct(T0, n_ref, default_scaled_t_grid(T0, n_ref)));
    write_lmgf_csv(st.path("lmgf_h1.csv"),
                   scaled_lmgf_direct(T1, n_ref, default_scaled_t_grid(T1, n_ref)));
    std::cout << "wrote scaled LMGFs at n=" << n_ref << "\n";
  } else if (scenario == "extended_target") {
    const ImageModel model = image_model_from_config(cfg);
    const std::size_t m_c = cfg.get_count("characterize.m_images", 2000);
    const CnnD3F net = load_cnn(cfg.get("weights.cnn", st.path("weights_cnn.json")));
    RngStream rng = plan.characterize();
    std::vector<double> scores(m_c);
    for (double& s : scores) s = net.score(generate_image(model, std::nullopt, rng).image);
    const GaussianityReport rep = gaussianity_report(scores);
    CsvTable hist;
    hist.header = {"bin_lo", "bin_hi", "count", "expected"};
    for (std::size_t i = 0; i < rep.counts.size(); ++i) {
      hist.rows.push_back({rep.edges[i], rep.edges[i + 1], static_cast<double>(rep.counts[i]),
                           rep.expected[i]});
    }
    write_csv(st.path("gaussianity_hist.csv"), hist);
    const Moments mom = estimate_moments(scores);
    CsvTable mcsv;
    mcsv.header = {"mean", "sd", "skewness", "excess_kurtosis", "pass"};
    mcsv.rows.push_back({mom.mean, mom.sd, rep.skewness, rep.excess_kurtosis,
                         rep.pass ? 1.0 : 0.0});
    write_csv(st.path("gaussianity.csv"), mcsv);
    std::cout << "gaussianity pass=" << (rep.pass ? "yes" : "no") << " skew=" << rep.skewness
              << " ex_kurtosis=" << rep.excess_kurtosis << "\n";
  } else {
    throw std::runtime_error("unknown scenario '" + scenario + "'");
  }
  return 0;
}

// ---- rate ----

int cmd_rate(const CliState& st) {
  const Config cfg = st.config();
  fs::create_directories(st.out_dir);
  const std::string input = cfg.get("rate.input", st.path("lmgf_h0.csv"));
  const std::size_t n = cfg.get_count("rate.n", 1);
  const LmgfEstimate est = read_lmgf_csv(input, n);
  const RateSolver solver(est);
  const double span = solver.dphi_max() - solver.dphi_min();
  const double lo = cfg.get_double("rate.gamma_min", solver.dphi_min() + 0.05 * span);
  const double hi = cfg.get_double("rate.gamma_max", solver.dphi_max() - 0.05 * span);
  const std::size_t points = cfg.get_count("rate.points", 41);
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  const RateFunction rf = rate_curve(est, grid);
  write_rate_csv(st.path("rate.csv"), rf);
  std::cout << "wrote " << st.path("rate.csv") << " (" << rf.gamma_grid.size()
            << " points, " << rf.skipped.size() << " out of range)\n";
  return 0;
}

// ---- tilt ----

int cmd_tilt(const CliState& st) {
  const Config cfg = st.config();
  const SeedPlan plan = st.plan(cfg);
  fs::create_directories(st.out_dir);
  const ShiftModel model = shift_model_from_config(cfg);
  const auto score = scalar_scorer(cfg, model, st);
  const bool under_h1 = cfg.get("tilt.hypothesis", "h0") == "h1";
  const double theta = under_h1 ? model.theta1 : model.theta0;
  const double gamma = cfg.get_double("tilt.gamma", 0.0);
  const std::size_t horizon = cfg.get_count("tilt.n", 10000);

  TiltConfig tc;
  tc.kept = cfg.get_count("tilt.kept", 10000);
  tc.burn_in = cfg.get_count("tilt.burn_in", 1000);
  tc.thinning = cfg.get_count("tilt.thinning", 10);
  tc.grid_points = cfg.get_count("tilt.grid_points", 41);
  tc.seed = plan.tilt_seed();

  ScalarMeanTarget target(model.family, theta, model.scale, horizon, score);
  const double t_lo = cfg.get_double("tilt.t_min", -1.0);
  const double t_hi = cfg.get_double("tilt.t_max", 2.0);
  const TiltedRate result = rate_from_tilting(target, gamma, t_lo, t_hi, tc);

  CsvTable table;
  table.header = {"t", "phi_prime", "se", "acceptance_rate"};
  for (std::size_t i = 0; i < result.lmgf.t_grid.size(); ++i) {
    table.rows.push_back({result.lmgf.t_grid[i], result.raw_dphi[i], result.se[i],
                          result.acceptance[i]});
  }
  write_csv(st.path("tilt.csv"), table);
  write_lmgf_csv(st.path("tilt_lmgf.csv"), result.lmgf);
  std::cout << "I(" << gamma << ") = " << result.rate << ", t_gamma = " << result.t_gamma
            << (result.degenerate ? " (degenerate chain)" : "") << "\n";
  return 0;
}

// ---- curves ----

int cmd_curves(const CliState& st) {
  const Config cfg = st.config();
  const SeedPlan plan = st.plan(cfg);
  fs::create_directories(st.out_dir);
  const std::string scenario = scenario_of(cfg);
  const ThresholdRule rule = threshold_rule_from_config(cfg);
  ErrorCurveRequest req;
  req.rule = rule;
  req.n_list = cfg.get_count_list("curves.n_list", {10, 20, 50, 100, 200});

  if (scenario == "iid_simple") {
    const ShiftModel model = shift_model_from_config(cfg);
    const std::size_t m_z = cfg.get_count("characterize.m_z", 100000);
    const auto score = scalar_scorer(cfg, model, st);
    RngStream rng = plan.characterize();
    req.mode = ErrorCurveRequest::Mode::Elementwise;
    req.elementwise.h0.resize(m_z);
    req.elementwise.h1.resize(m_z);
    for (double& v : req.elementwise.h0) {
      v = score(sample_scalar(model.family, model.theta0, model.scale, rng));
    }
    for (double& v : req.elementwise.h1) {
      v = score(sample_scalar(model.family, model.theta1, model.scale, rng));
    }
  } else if (scenario == "composite") {
    const CompositeModel model = composite_model_from_config(cfg);
    const std::size_t m_z = cfg.get_count("characterize.m_z", 10000);
    const std::size_t star = cfg.get_count("experiment.theta_star_index",
                                           model.thetas.size() - 1);
    if (star >= model.thetas.size()) {
      throw std::runtime_error("experiment.theta_star_index out of range");
    }
    const auto statistic = composite_statistic(cfg, model, st);
    RngStream rng = plan.characterize();
    req.mode = ErrorCurveRequest::Mode::PerN;
    for (const std::size_t n : req.n_list) {
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
  } else {
    throw std::runtime_error("curves supports iid_simple and composite; use run for images");
  }

  const ErrorCurve curve = error_curve(req);
  write_curve_csv(st.path("curves.csv"), curve);
  write_curve_summary_json(st.path("curves_summary.json"), curve, rule);
  std::cout << "wrote " << st.path("curves.csv") << " and " << st.path("curves_summary.json")
            << "\n";
  return 0;
}

// ---- threshold ----

int cmd_threshold(const CliState& st) {
  const Config cfg = st.config();
  const SeedPlan plan = st.plan(cfg);
  fs::create_directories(st.out_dir);
  const std::string scenario = scenario_of(cfg);

  if (scenario == "extended_target") {
    const ImageModel model = image_model_from_config(cfg);
    const std::size_t m_c = cfg.get_count("characterize.m_images", 2000);
    const CnnD3F net = load_cnn(cfg.get("weights.cnn", st.path("weights_cnn.json")));
    RngStream rng = plan.characterize();
    std::vector<double> scores(m_c);
    for (double& s : scores) s = net.score(generate_image(model, std::nullopt, rng).image);
    const Moments mom = estimate_moments(scores);
    CsvTable table;
    table.header = {"alpha", "gamma_raw"};
    for (double a : cfg.get_double_list("image.alpha_list", {0.3, 0.075})) {
      table.rows.push_back({a, set_threshold_clt(mom.mean, mom.sd, 1, a)});
    }
    write_csv(st.path("thresholds.csv"), table);
    std::cout << "wrote " << st.path("thresholds.csv") << "\n";
    return 0;
  }

  const ShiftModel model = shift_model_from_config(cfg);
  const std::size_t m_z = cfg.get_count("characterize.m_z", 100000);
  const auto score = scalar_scorer(cfg, model, st);
  RngStream rng = plan.characterize();
  std::vector<double> s0(m_z);
  for (double& v : s0) v = score(sample_scalar(model.family, model.theta0, model.scale, rng));
  const Moments mom = estimate_moments(s0);
  const double alpha = cfg.get_double("threshold.alpha", 0.25);
  CsvTable table;
  table.header = {"n", "alpha", "gamma_n"};
  for (const std::size_t n : cfg.get_count_list("curves.n_list", {10, 20, 50, 100, 200})) {
    table.rows.push_back({static_cast<double>(n), alpha,
                          set_threshold_clt(mom.mean, mom.sd, n, alpha)});
  }
  write_csv(st.path("thresholds.csv"), table);
  std::cout << "wrote " << st.path("thresholds.csv") << "\n";
  return 0;
}

// ---- simulate ----

int cmd_simulate(const CliState& st) {
  const Config cfg = st.config();
  const SeedPlan plan = st.plan(cfg);
  fs::create_directories(st.out_dir);
  const std::string scenario = scenario_of(cfg);
  const ThresholdRule rule = threshold_rule_from_config(cfg);
  const std::vector<std::size_t> n_list =
      cfg.get_count_list("curves.n_list", {10, 20, 50, 100, 200});

  McSpec spec;
  std::function<double(std::size_t)> gamma_for_n;
  std::size_t runs = 0;

  if (scenario == "iid_simple") {
    const ShiftModel model = shift_model_from_config(cfg);
    runs = cfg.get_count("mc.runs", 100000);
    const std::size_t m_z = cfg.get_count("characterize.m_z", 100000);
    const auto score = scalar_scorer(cfg, model, st);
    double gamma_fixed = 0.0;
    Moments mom;
    if (rule.kind == ThresholdRule::Kind::FixedGamma) {
      gamma_fixed = rule.value;
    } else {
      RngStream rng = plan.characterize();
      std::vector<double> s0(m_z);
      for (double& v : s0) {
        v = score(sample_scalar(model.family, model.theta0, model.scale, rng));
      }
      mom = estimate_moments(s0);
    }
    gamma_for_n = [rule, gamma_fixed, mom](std::size_t n) {
      if (rule.kind == ThresholdRule::Kind::FixedGamma) return gamma_fixed;
      return set_threshold_clt(mom.mean, mom.sd, n, rule.value);
    };
    spec.h0 = [model, score](std::size_t n, RngStream& rng) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += score(sample_scalar(model.family, model.theta0, model.scale, rng));
      }
      return s / static_cast<double>(n);
    };
    spec.h1 = [model, score](std::size_t n, RngStream& rng) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += score(sample_scalar(model.family, model.theta1, model.scale, rng));
      }
      return s / static_cast<double>(n);
    };
  } else if (scenario == "composite") {
    const CompositeModel model = composite_model_from_config(cfg);
    runs = cfg.get_count("mc.runs", 10000);
    const std::size_t star = cfg.get_count("experiment.theta_star_index",
                                           model.thetas.size() - 1);
    if (star >= model.thetas.size()) {
      throw std::runtime_error("experiment.theta_star_index out of range");
    }
    const auto statistic = composite_statistic(cfg, model, st);
    if (rule.kind == ThresholdRule::Kind::FixedGamma) {
      const double g = rule.value;
      gamma_for_n = [g](std::size_t) { return g; };
    } else {
      // Per-n thresholds need per-n H0 moments of the statistic.
      const std::size_t m_z = cfg.get_count("characterize.m_z", 10000);
      RngStream rng = plan.characterize();
      auto gammas = std::make_shared<std::map<std::size_t, double>>();
      for (const std::size_t n : n_list) {
        std::vector<double> T(m_z), xs(n);
        for (double& v : T) {
          for (double& x : xs) x = sample_scalar(model.family, model.theta0, model.scale, rng);
          v = statistic(xs);
        }
        const Moments mom = estimate_moments(T);
        (*gammas)[n] = set_threshold_clt(mom.mean, mom.sd, 1, rule.value);
      }
      gamma_for_n = [gammas](std::size_t n) { return gammas->at(n); };
    }
    const double theta_star = model.thetas[star];
    spec.h0 = [model, statistic](std::size_t n, RngStream& rng) {
      std::vector<double> xs(n);
      for (double& x : xs) x = sample_scalar(model.family, model.theta0, model.scale, rng);
      return statistic(xs);
    };
    spec.h1 = [model, statistic, theta_star](std::size_t n, RngStream& rng) {
      std::vector<double> xs(n);
      for (double& x : xs) x = sample_scalar(model.family, theta_star, model.scale, rng);
      return statistic(xs);
    };
  } else {
    throw std::runtime_error("simulate supports iid_simple and composite; use run for images");
  }

  const McResult mc = monte_carlo_errors(spec, n_list, gamma_for_n, runs, plan.test_seed());
  write_mc_csv(st.path("mc.csv"), mc);
  std::cout << "wrote " << st.path("mc.csv") << "\n";
  return 0;
}

// ---- image demo ----

int cmd_image_demo(const CliState& st) {
  const Config cfg = st.config();
  const SeedPlan plan = st.plan(cfg);
  fs::create_directories(st.out_dir);
  const ImageModel model = image_model_from_config(cfg);
  RngStream rng = plan.test().derive(0xDE);

  std::optional<CnnD3F> net;
  const std::string weights = cfg.get("weights.cnn", st.path("weights_cnn.json"));
  if (fs::exists(weights)) net = load_cnn(weights);

  struct Demo {
    std::string name;
    std::optional<TargetShape> shape;
  };
  TargetShape circle{TargetShape::Kind::Circle, model.width / 2.0, model.height / 2.0,
                     8.0, 8.0, 0.0};
  TargetShape ellipse{TargetShape::Kind::Ellipse, model.width / 2.0, model.height / 2.0,
                      12.0, 6.0, 0.5};
  TargetShape rect{TargetShape::Kind::Rectangle, model.width / 2.0, model.height / 2.0,
                   10.0, 5.0, 0.3};
  const std::vector<Demo> demos = {{"sample_h0", std::nullopt},
                                   {"sample_circle", circle},
                                   {"sample_ellipse", ellipse},
                                   {"sample_rectangle", rect}};

  CsvTable table;
  table.header = net ? std::vector<std::string>{"index", "target_pixels", "score"}
                     : std::vector<std::string>{"index", "target_pixels"};
  for (std::size_t i = 0; i < demos.size(); ++i) {
    const GeneratedImage gen = generate_image(model, demos[i].shape, rng);
    write_pbm(st.path(demos[i].name + ".pbm"), gen.image);
    std::vector<double> row{static_cast<double>(i), static_cast<double>(gen.target_pixels)};
    if (net) row.push_back(net->score(gen.image));
    table.rows.push_back(std::move(row));
    std::cout << demos[i].name << ": target pixels " << gen.target_pixels;
    if (net) std::cout << ", score " << table.rows.back().back();
    std::cout << "\n";
  }
  write_csv(st.path("image_demo.csv"), table);
  return 0;
}

// ---- run ----

int cmd_run(const CliState& st) {
  const Config cfg = st.config();
  const ExperimentResult res = run_experiment(cfg, st.out_dir);
  for (const StageStatus& stage : res.stages) {
    std::cout << "stage " << stage.name << ": " << (stage.ok ? "ok" : "FAILED");
    if (!stage.detail.empty()) std::cout << " (" << stage.detail << ")";
    std::cout << "\n";
  }
  std::cout << "manifest: " << res.manifest_path << "\n";
  if (!res.ok) {
    for (const StageStatus& stage : res.stages) {
      if (!stage.ok) {
        std::cerr << "stage " << stage.name << " failed: " << stage.detail << "\n";
        return 1;
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"error-probability prediction for binary classifiers"};
  app.require_subcommand(1);
  CliState st;

  struct Entry {
    const char* name;
    const char* help;
    std::function<int(const CliState&)> fn;
  };
  const std::vector<Entry> entries = {
      {"train", "train the decision statistic and save weights", cmd_train},
      {"characterize", "estimate LMGFs (or Gaussianity) from fresh draws", cmd_characterize},
      {"rate", "Fenchel-Legendre transform of a saved LMGF estimate", cmd_rate},
      {"tilt", "rate estimation by tilted Metropolis sampling", cmd_tilt},
      {"curves", "exact-asymptotic and Gaussian error curves per n", cmd_curves},
      {"threshold", "CLT threshold placement for a target level", cmd_threshold},
      {"simulate", "Monte Carlo error estimation with confidence intervals", cmd_simulate},
      {"image-demo", "write sample Bernoulli target images as PBM", cmd_image_demo},
      {"run", "full pipeline for the configured scenario", cmd_run},
  };

  std::function<int(const CliState&)> selected;
  for (const Entry& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, st);
    sub->callback([&selected, &e] { selected = e.fn; });
  }

  CLI11_PARSE(app, argc, argv);
  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    return selected(st);
  } catch (const std::exception& e) {
    std::cerr << "stage " << stage << " failed: " << e.what() << "\n";
    return 1;
  }
}
