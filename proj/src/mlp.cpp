#include "ldet/d3f.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ldet {

namespace {

// Flat parameter layout: W1[5], b1[5], W2[5x5], b2[5], W3[2x5], b3[2].
constexpr std::size_t kW1 = 0, kB1 = 5, kW2 = 10, kB2 = 35, kW3 = 40, kB3 = 50;

struct Activations {
  double x = 0.0;
  double a1[5];  // tanh layer
  double a2[5];  // linear layer
  double z3[2];  // logits
};

void forward(const std::vector<double>& p, double x, Activations& act) {
  act.x = x;
  for (int i = 0; i < 5; ++i) act.a1[i] = std::tanh(p[kW1 + i] * x + p[kB1 + i]);
  for (int i = 0; i < 5; ++i) {
    double z = p[kB2 + i];
    for (int j = 0; j < 5; ++j) z += p[kW2 + 5 * i + j] * act.a1[j];
    act.a2[i] = z;
  }
  for (int k = 0; k < 2; ++k) {
    double z = p[kB3 + k];
    for (int j = 0; j < 5; ++j) z += p[kW3 + 5 * k + j] * act.a2[j];
    act.z3[k] = z;
  }
}

// Stable -log softmax_label given the logit difference s = z1 - z0.
double cross_entropy(double s, int label) {
  const double m = label == 1 ? -s : s;
  return m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
}

}  // namespace

double MlpD3F::score(double x) const {
  Activations act;
  forward(params, x, act);
  return act.z3[1] - act.z3[0];
}

double mlp_loss_grad(const MlpD3F& net, double x, int label, std::span<double> grad) {
  if (grad.size() != MlpD3F::kParamCount) {
    throw std::invalid_argument("mlp_loss_grad: gradient size mismatch");
  }
  const std::vector<double>& p = net.params;
  Activations act;
  forward(p, x, act);
  const double s = act.z3[1] - act.z3[0];
  const double p1 = 1.0 / (1.0 + std::exp(-s));
  double dz3[2] = {(1.0 - p1) - (label == 0 ? 1.0 : 0.0), p1 - (label == 1 ? 1.0 : 0.0)};
  double da2[5] = {0, 0, 0, 0, 0};
  for (int k = 0; k < 2; ++k) {
    grad[kB3 + k] += dz3[k];
    for (int j = 0; j < 5; ++j) {
      grad[kW3 + 5 * k + j] += dz3[k] * act.a2[j];
      da2[j] += p[kW3 + 5 * k + j] * dz3[k];
    }
  }
  double da1[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < 5; ++i) {
    grad[kB2 + i] += da2[i];
    for (int j = 0; j < 5; ++j) {
      grad[kW2 + 5 * i + j] += da2[i] * act.a1[j];
      da1[j] += p[kW2 + 5 * i + j] * da2[i];
    }
  }
  for (int i = 0; i < 5; ++i) {
    const double dz1 = da1[i] * (1.0 - act.a1[i] * act.a1[i]);
    grad[kW1 + i] += dz1 * act.x;
    grad[kB1 + i] += dz1;
  }
  return cross_entropy(s, label);
}

MlpD3F train_mlp(std::span<const double> train0, std::span<const double> train1,
                 const TrainConfig& cfg, TrainReport* report) {
  if (train0.empty() || train1.empty()) {
    throw std::invalid_argument("train_mlp: both classes need examples");
  }
  if (cfg.epochs == 0 || cfg.batch_size == 0) {
    throw std::invalid_argument("train_mlp: epochs and batch size must be positive");
  }
  RngStream rng(cfg.seed);
  MlpD3F net;
  for (double& w : net.params) w = (2.0 * rng.uniform() - 1.0) * cfg.init_half_width;

  const std::size_t total = train0.size() + train1.size();
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto example = [&](std::size_t idx, double& x, int& label) {
    if (idx < train0.size()) {
      x = train0[idx];
      label = 0;
    } else {
      x = train1[idx - train0.size()];
      label = 1;
    }
  };

  std::vector<double> grad(MlpD3F::kParamCount);
  if (report) report->epoch_loss.clear();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = total; i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < total; start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, total);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < stop; ++i) {
        double x;
        int label;
        example(order[i], x, label);
        epoch_loss += mlp_loss_grad(net, x, label, grad);
      }
      const double step = cfg.learning_rate / static_cast<double>(stop - start);
      for (std::size_t j = 0; j < grad.size(); ++j) net.params[j] -= step * grad[j];
    }
    epoch_loss /= static_cast<double>(total);
    if (!std::isfinite(epoch_loss)) {
      throw std::runtime_error("train_mlp: loss diverged at epoch " + std::to_string(epoch + 1) +
                               " (loss=" + std::to_string(epoch_loss) + ")");
    }
    if (report) report->epoch_loss.push_back(epoch_loss);
  }
  if (report) {
    std::size_t correct = 0;
    for (double x : train0) correct += net.score(x) < 0.0;
    for (double x : train1) correct += net.score(x) >= 0.0;
    report->final_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  }
  return net;
}

double d3f_statistic_iid(const MlpD3F& net, std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("d3f_statistic_iid: empty observation set");
  double s = 0.0;
  for (double x : xs) s += net.score(x);
  return s / static_cast<double>(xs.size());
}

}  // namespace ldet
