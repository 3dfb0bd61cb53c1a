#pragma once

// Monte Carlo validation and experiment orchestration: error-rate
// estimation with Clopper-Pearson intervals, normality diagnostics for
// learned statistics, seed bookkeeping that keeps training,
// characterization and test draws on disjoint substreams, and the
// config-driven pipeline behind the command line tool.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ldet/asymptotics.hpp"
#include "ldet/config.hpp"
#include "ldet/d3f.hpp"
#include "ldet/models.hpp"
#include "ldet/rng.hpp"

namespace ldet {

inline constexpr const char* kArtifactVersion = "1.0.0";

// 95% Clopper-Pearson interval around a binomial proportion.
struct McBinomial {
  std::size_t successes = 0;
  std::size_t runs = 0;
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 1.0;
};
McBinomial binomial_estimate(std::size_t successes, std::size_t runs);

// Statistic draws per hypothesis: each call produces one fresh T value
// for the given block length.
struct McSpec {
  std::function<double(std::size_t n, RngStream&)> h0;
  std::function<double(std::size_t n, RngStream&)> h1;
};

struct McResult {
  std::vector<std::size_t> n_list;
  std::vector<double> gamma;       // threshold used at each n
  std::vector<McBinomial> alpha;   // P[T >= gamma | H0], ties decide H1
  std::vector<McBinomial> beta;    // P[T < gamma | H1]
  std::uint64_t seed = 0;
};

McResult monte_carlo_errors(const McSpec& spec, std::span<const std::size_t> n_list,
                            const std::function<double(std::size_t)>& gamma_for_n,
                            std::size_t runs, std::uint64_t seed);

void write_mc_csv(const std::string& path, const McResult& result);

// JSON companion to the curve CSV: threshold rule, per-point rates and
// saddlepoints, and least-squares decay slopes of the exact columns.
void write_curve_summary_json(const std::string& path, const ErrorCurve& curve,
                              const ThresholdRule& rule);

// Moment-based normality check with a histogram against the fitted
// normal. Requires at least 1000 values.
struct GaussianityReport {
  double mean = 0.0;
  double sd = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double se_skewness = 0.0;        // sqrt(6/m)
  double se_kurtosis = 0.0;        // sqrt(24/m)
  std::vector<double> edges;       // histogram bin edges
  std::vector<std::size_t> counts;
  std::vector<double> expected;    // fitted-normal expected counts
  bool degenerate = false;         // vanishing variance
  bool pass = false;               // |skew| < 0.2 and |ex. kurtosis| < 0.5
};
GaussianityReport gaussianity_report(std::span<const double> values);

// Seed substreams for the data roles. Overlap mode reuses the training
// stream for characterization; everything else stays disjoint.
struct SeedPlan {
  std::uint64_t root = 1;
  bool overlap = false;

  std::uint64_t train_seed() const;
  std::uint64_t characterize_seed() const;
  std::uint64_t test_seed() const;
  std::uint64_t tilt_seed() const;

  RngStream train() const { return RngStream(train_seed()); }
  RngStream characterize() const { return RngStream(characterize_seed()); }
  RngStream test() const { return RngStream(test_seed()); }
  RngStream tilt() const { return RngStream(tilt_seed()); }
};

// Config-driven builders shared by the pipeline and the CLI.
ShiftModel shift_model_from_config(const Config& cfg);
CompositeModel composite_model_from_config(const Config& cfg);
ImageModel image_model_from_config(const Config& cfg);
ThresholdRule threshold_rule_from_config(const Config& cfg);
TrainConfig train_config_from_config(const Config& cfg, const SeedPlan& plan, bool cnn);

struct StageStatus {
  std::string name;
  bool ok = true;
  std::string detail;
};

struct ExperimentResult {
  std::vector<StageStatus> stages;
  std::vector<std::string> outputs;  // paths written, relative to out_dir
  bool ok = true;
  std::string manifest_path;
};

// Full pipeline for one scenario preset: train (when the statistic is
// learned), characterize, rate curve, error curves, Monte Carlo, and a
// JSON manifest. Reruns with the same config write identical numeric
// content. A failing stage is recorded and later stages that depend on
// it are skipped; the manifest always lands.
ExperimentResult run_experiment(const Config& cfg, const std::string& out_dir);

}  // namespace ldet
