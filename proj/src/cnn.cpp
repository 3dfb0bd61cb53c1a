#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "ldet/d3f.hpp"

namespace ldet {

namespace {

constexpr int kF = CnnD3F::kFilters;
constexpr int kK = CnnD3F::kKernel;

// Parameter offsets: conv weights [f][ky][kx], conv biases [f],
// dense weights [class][feature], dense biases [class].
struct Layout {
  std::size_t conv_w = 0;
  std::size_t conv_b;
  std::size_t fc_w;
  std::size_t fc_b;
  std::size_t features;

  explicit Layout(const CnnD3F& net)
      : conv_b(static_cast<std::size_t>(kF) * kK * kK),
        fc_w(conv_b + kF),
        fc_b(fc_w + 2 * net.feature_count()),
        features(net.feature_count()) {}
};

// Coordinates of pixels equal to 1; convolution of a binary image is a
// sum of kernel taps over these, which is much cheaper than the dense
// product at the occupancy levels the Bernoulli model produces.
std::vector<std::pair<int, int>> set_pixels(const BinaryImage& img) {
  std::vector<std::pair<int, int>> pts;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (img.at(x, y)) pts.emplace_back(x, y);
    }
  }
  return pts;
}

struct Scratch {
  std::vector<double> conv;    // kF * conv_h * conv_w
  std::vector<double> pooled;  // feature vector
  std::vector<int> argmax;     // flat conv index per feature, -1 when inactive
  std::vector<double> dconv;   // zero outside `touched`
  std::vector<int> touched;

  void resize(const CnnD3F& net) {
    const std::size_t plane = static_cast<std::size_t>(net.conv_h()) * net.conv_w();
    conv.assign(kF * plane, 0.0);
    dconv.assign(kF * plane, 0.0);
    pooled.assign(net.feature_count(), 0.0);
    argmax.assign(net.feature_count(), -1);
    touched.clear();
  }
};

void forward(const CnnD3F& net, const Layout& lay,
             const std::vector<std::pair<int, int>>& pts, Scratch& s, double z[2]) {
  const int cw = net.conv_w();
  const int ch = net.conv_h();
  const std::size_t plane = static_cast<std::size_t>(ch) * cw;
  const double* p = net.params.data();

  for (int f = 0; f < kF; ++f) {
    std::fill_n(s.conv.begin() + f * plane, plane, p[lay.conv_b + f]);
  }
  for (const auto& [x, y] : pts) {
    const int kylo = std::max(0, y - ch + 1), kyhi = std::min(kK - 1, y);
    const int kxlo = std::max(0, x - cw + 1), kxhi = std::min(kK - 1, x);
    for (int f = 0; f < kF; ++f) {
      const double* w = p + lay.conv_w + static_cast<std::size_t>(f) * kK * kK;
      double* pl = s.conv.data() + f * plane;
      for (int ky = kylo; ky <= kyhi; ++ky) {
        double* row = pl + static_cast<std::size_t>(y - ky) * cw + x;
        const double* wrow = w + ky * kK;
        for (int kx = kxlo; kx <= kxhi; ++kx) row[-kx] += wrow[kx];
      }
    }
  }

  const int pw = net.pool_w();
  const int ph = net.pool_h();
  std::size_t idx = 0;
  for (int f = 0; f < kF; ++f) {
    const double* pl = s.conv.data() + f * plane;
    for (int py = 0; py < ph; ++py) {
      for (int px = 0; px < pw; ++px, ++idx) {
        const std::size_t base = static_cast<std::size_t>(2 * py) * cw + 2 * px;
        std::size_t best = base;
        double m = pl[base];
        if (pl[base + 1] > m) m = pl[base + 1], best = base + 1;
        if (pl[base + cw] > m) m = pl[base + cw], best = base + cw;
        if (pl[base + cw + 1] > m) m = pl[base + cw + 1], best = base + cw + 1;
        if (m > 0.0) {
          s.pooled[idx] = m;
          s.argmax[idx] = static_cast<int>(f * plane + best);
        } else {
          s.pooled[idx] = 0.0;
          s.argmax[idx] = -1;
        }
      }
    }
  }

  for (int k = 0; k < 2; ++k) {
    const double* w = p + lay.fc_w + static_cast<std::size_t>(k) * lay.features;
    double acc = p[lay.fc_b + k];
    for (std::size_t i = 0; i < lay.features; ++i) acc += w[i] * s.pooled[i];
    z[k] = acc;
  }
}

double loss_of(double score, int label) {
  const double m = label == 1 ? -score : score;
  return m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
}

double backward(const CnnD3F& net, const Layout& lay,
                const std::vector<std::pair<int, int>>& pts, Scratch& s,
                const double z[2], int label, std::span<double> grad) {
  const double score = z[1] - z[0];
  const double p1 = 1.0 / (1.0 + std::exp(-score));
  const double dz[2] = {(1.0 - p1) - (label == 0 ? 1.0 : 0.0),
                        p1 - (label == 1 ? 1.0 : 0.0)};
  const double* p = net.params.data();

  grad[lay.fc_b] += dz[0];
  grad[lay.fc_b + 1] += dz[1];
  const double* w0 = p + lay.fc_w;
  const double* w1 = w0 + lay.features;
  double* g0 = grad.data() + lay.fc_w;
  double* g1 = g0 + lay.features;
  for (std::size_t i = 0; i < lay.features; ++i) {
    g0[i] += dz[0] * s.pooled[i];
    g1[i] += dz[1] * s.pooled[i];
    const int ci = s.argmax[i];
    if (ci >= 0) {
      const double d = w0[i] * dz[0] + w1[i] * dz[1];
      if (s.dconv[ci] == 0.0) s.touched.push_back(ci);
      s.dconv[ci] += d;
    }
  }

  const int cw = net.conv_w();
  const int ch = net.conv_h();
  const std::size_t plane = static_cast<std::size_t>(ch) * cw;
  for (int ci : s.touched) grad[lay.conv_b + ci / plane] += s.dconv[ci];
  for (const auto& [x, y] : pts) {
    const int kylo = std::max(0, y - ch + 1), kyhi = std::min(kK - 1, y);
    const int kxlo = std::max(0, x - cw + 1), kxhi = std::min(kK - 1, x);
    for (int f = 0; f < kF; ++f) {
      double* gw = grad.data() + lay.conv_w + static_cast<std::size_t>(f) * kK * kK;
      const double* dpl = s.dconv.data() + f * plane;
      for (int ky = kylo; ky <= kyhi; ++ky) {
        const double* drow = dpl + static_cast<std::size_t>(y - ky) * cw + x;
        double* gwrow = gw + ky * kK;
        for (int kx = kxlo; kx <= kxhi; ++kx) gwrow[kx] += drow[-kx];
      }
    }
  }
  for (int ci : s.touched) s.dconv[ci] = 0.0;
  s.touched.clear();
  return loss_of(score, label);
}

void check_dims(const CnnD3F& net, const BinaryImage& img) {
  if (img.width != net.width || img.height != net.height) {
    throw std::invalid_argument("cnn: image size " + std::to_string(img.width) + "x" +
                                std::to_string(img.height) + " does not match network " +
                                std::to_string(net.width) + "x" + std::to_string(net.height));
  }
}

}  // namespace

CnnD3F::CnnD3F(int width_, int height_) : width(width_), height(height_) {
  if (width < 6 || height < 6) {
    throw std::invalid_argument("CnnD3F: image must be at least 6x6");
  }
  params.assign(param_count(), 0.0);
}

double CnnD3F::score(const BinaryImage& img) const {
  check_dims(*this, img);
  const Layout lay(*this);
  Scratch s;
  s.resize(*this);
  double z[2];
  forward(*this, lay, set_pixels(img), s, z);
  return z[1] - z[0];
}

double cnn_loss_grad(const CnnD3F& net, const BinaryImage& img, int label,
                     std::span<double> grad) {
  check_dims(net, img);
  if (grad.size() != net.param_count()) {
    throw std::invalid_argument("cnn_loss_grad: gradient size mismatch");
  }
  const Layout lay(net);
  Scratch s;
  s.resize(net);
  double z[2];
  const auto pts = set_pixels(img);
  forward(net, lay, pts, s, z);
  return backward(net, lay, pts, s, z, label, grad);
}

CnnD3F train_cnn(std::span<const BinaryImage> train0, std::span<const BinaryImage> train1,
                 const TrainConfig& cfg, TrainReport* report) {
  if (train0.empty() || train1.empty()) {
    throw std::invalid_argument("train_cnn: both classes need examples");
  }
  if (cfg.epochs == 0 || cfg.batch_size == 0) {
    throw std::invalid_argument("train_cnn: epochs and batch size must be positive");
  }
  const int w = train0[0].width;
  const int h = train0[0].height;
  CnnD3F net(w, h);
  const Layout lay(net);

  const std::size_t total = train0.size() + train1.size();
  std::vector<std::vector<std::pair<int, int>>> pts(total);
  std::vector<int> labels(total);
  for (std::size_t i = 0; i < total; ++i) {
    const BinaryImage& img = i < train0.size() ? train0[i] : train1[i - train0.size()];
    check_dims(net, img);
    pts[i] = set_pixels(img);
    labels[i] = i < train0.size() ? 0 : 1;
  }

  RngStream rng(cfg.seed);
  for (double& v : net.params) v = (2.0 * rng.uniform() - 1.0) * cfg.init_half_width;

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(net.param_count());
  Scratch s;
  s.resize(net);
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
        const std::size_t j = order[i];
        double z[2];
        forward(net, lay, pts[j], s, z);
        epoch_loss += backward(net, lay, pts[j], s, z, labels[j], grad);
      }
      const double step = cfg.learning_rate / static_cast<double>(stop - start);
      for (std::size_t k = 0; k < grad.size(); ++k) net.params[k] -= step * grad[k];
    }
    epoch_loss /= static_cast<double>(total);
    if (!std::isfinite(epoch_loss)) {
      throw std::runtime_error("train_cnn: loss diverged at epoch " + std::to_string(epoch + 1));
    }
    if (report) report->epoch_loss.push_back(epoch_loss);
  }

  if (report) {
    std::size_t correct = 0;
    double z[2];
    for (std::size_t i = 0; i < total; ++i) {
      forward(net, lay, pts[i], s, z);
      const double score = z[1] - z[0];
      correct += (labels[i] == 1) == (score >= 0.0);
    }
    report->final_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  }
  return net;
}

}  // namespace ldet
