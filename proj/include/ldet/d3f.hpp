#pragma once

// Learned decision functions: a small scalar MLP scorer, a mixture of
// per-alternative scorers for composite problems, and a convolutional
// scorer for images. All parameters live in flat vectors so gradients
// can be checked against finite differences entry by entry.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ldet/models.hpp"
#include "ldet/rng.hpp"

namespace ldet {

// Scalar scorer with layer sizes 1-5-5-2: tanh after the first hidden
// layer, identity after the second, softmax over the two outputs. The
// score is log softmax_1 - log softmax_0, i.e. the logit difference,
// finite for every finite input.
struct MlpD3F {
  static constexpr std::size_t kParamCount = 5 + 5 + 25 + 5 + 10 + 2;
  std::vector<double> params;

  MlpD3F() : params(kParamCount, 0.0) {}
  double score(double x) const;
};

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double init_half_width = 0.1;  // uniform initialization range
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
  double final_accuracy = 0.0;     // on the training set
};

// Cross-entropy loss of one example (label 0 or 1) and its parameter
// gradient, accumulated into grad.
double mlp_loss_grad(const MlpD3F& net, double x, int label, std::span<double> grad);

// Minibatch SGD on the two training sets. Deterministic for a fixed
// config; throws when the loss turns non-finite.
MlpD3F train_mlp(std::span<const double> train0, std::span<const double> train1,
                 const TrainConfig& cfg, TrainReport* report = nullptr);

// Mean score over an observation set.
double d3f_statistic_iid(const MlpD3F& net, std::span<const double> xs);

// One scorer per alternative with prior weights; the statistic is
//   (1/n) log sum_j w_j exp( sum_i score_j(x_i) ),
// evaluated with max subtraction.
struct MixtureD3F {
  std::vector<double> thetas;
  std::vector<double> weights;
  std::vector<MlpD3F> members;

  void check() const;
};

double d3f_statistic_mixture(const MixtureD3F& mix, std::span<const double> xs);

// Mean-score matrix check: estimates mu(theta | theta_star), the mean of
// scorer theta under data drawn from theta_star, and reports whether the
// diagonal entry dominates its column. Reported, never asserted.
struct RnConditionReport {
  std::vector<double> mu;       // indexed like mix.thetas
  std::vector<double> se;
  std::size_t star_index = 0;
  bool holds = true;
};
RnConditionReport rn_condition_check(const MixtureD3F& mix, const CompositeModel& model,
                                     std::size_t star_index, std::size_t probes,
                                     RngStream& rng);

// Convolutional scorer: 20 5x5 filters (stride 1, valid) with ReLU, 2x2
// max pooling, then a dense layer to two softmax outputs. Input images
// must be at least 6x6 and match the constructed size.
struct CnnD3F {
  int width = 0;
  int height = 0;
  static constexpr int kFilters = 20;
  static constexpr int kKernel = 5;
  std::vector<double> params;

  CnnD3F() = default;
  CnnD3F(int width, int height);

  int conv_w() const { return width - kKernel + 1; }
  int conv_h() const { return height - kKernel + 1; }
  int pool_w() const { return conv_w() / 2; }
  int pool_h() const { return conv_h() / 2; }
  std::size_t feature_count() const {
    return static_cast<std::size_t>(kFilters) * pool_w() * pool_h();
  }
  std::size_t param_count() const {
    return static_cast<std::size_t>(kFilters) * kKernel * kKernel + kFilters +
           2 * feature_count() + 2;
  }

  // Logit difference log softmax_1 - log softmax_0.
  double score(const BinaryImage& img) const;
};

double cnn_loss_grad(const CnnD3F& net, const BinaryImage& img, int label,
                     std::span<double> grad);

CnnD3F train_cnn(std::span<const BinaryImage> train0, std::span<const BinaryImage> train1,
                 const TrainConfig& cfg, TrainReport* report = nullptr);

// ---- weight persistence (versioned JSON) ----

void save_mlp(const std::string& path, const MlpD3F& net);
MlpD3F load_mlp(const std::string& path);
void save_mixture(const std::string& path, const MixtureD3F& mix);
MixtureD3F load_mixture(const std::string& path);
void save_cnn(const std::string& path, const CnnD3F& net);
CnnD3F load_cnn(const std::string& path);

}  // namespace ldet
