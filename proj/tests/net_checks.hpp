#pragma once

// Network checks shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "calfront/net.hpp"

namespace checks {

using namespace calfront;
using namespace calfront::net;

inline NetConfig tiny_config(int frames = 2) {
  NetConfig c;
  c.height = 16;
  c.width = 16;
  c.series_length = frames;
  c.widths = {4, 5, 6, 6, 7};
  c.gru_hidden = {3, 3, 4};
  c.crop_fraction = 0.5;
  return c;
}

inline Tensor random_series(const NetConfig& c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Tensor x(c.series_length, c.in_channels, c.height, c.width);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (Eigen::Index i = 0; i < x.data.size(); ++i) x.data.data()[i] = u(rng);
  return x;
}

inline std::vector<ZoneMap> random_labels(const NetConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ZoneMap> out(static_cast<std::size_t>(c.series_length), ZoneMap(c.height, c.width));
  for (auto& z : out)
    for (auto& v : z.values()) v = static_cast<Zone>(rng() % 4);
  return out;
}

struct GradCheck {
  double max_rel = 0.0;
  int sampled = 0;
};

/// Analytic vs central-difference gradients of the training loss on `count` random parameter entries.
inline GradCheck gradient_check(std::uint64_t seed, int count = 20, double step = 1e-4, int channels = 1) {
  NetConfig c = tiny_config(2);
  c.in_channels = channels;
  Network net(c, seed);
  const Tensor x = random_series(c, seed + 1);
  const auto labels = random_labels(c, seed + 2);
  const std::vector<bool> retain{true, true};
  auto loss = [&] { return cross_entropy(net.forward(x), labels, retain, c.crop_fraction); };

  net.zero_grad();
  const auto base = loss();
  net.backward(base.grad);

  std::mt19937_64 rng(seed + 3);
  auto& params = net.parameters();
  std::size_t total = 0;
  for (const auto& p : params) total += static_cast<std::size_t>(p.value.size());
  GradCheck out;
  for (int k = 0; k < count; ++k) {
    std::size_t flat = std::uniform_int_distribution<std::size_t>(0, total - 1)(rng);
    std::size_t pi = 0;
    while (flat >= static_cast<std::size_t>(params[pi].value.size())) flat -= static_cast<std::size_t>(params[pi++].value.size());
    double& v = params[pi].value.data()[flat];
    const double orig = v;
    v = orig + step;
    const double up = loss().loss;
    v = orig - step;
    const double down = loss().loss;
    v = orig;
    const double fd = (up - down) / (2 * step);
    const double an = params[pi].grad.data()[flat];
    const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-7});
    out.max_rel = std::max(out.max_rel, rel);
    ++out.sampled;
  }
  return out;
}

/// Largest change of frame-1 retained logits when only frame 0 of the input is perturbed.
inline double cross_frame_effect(bool temporal, std::uint64_t seed) {
  NetConfig c = tiny_config(3);
  c.temporal = temporal;
  Network net(c, seed);
  Tensor x = random_series(c, seed + 1);
  const Tensor a = retain_central(net.forward(x), c.crop_fraction);
  for (int r = 0; r < c.height; ++r)
    for (int col = 0; col < c.width; ++col) x.at(0, 0, r, col) += 0.5;
  const Tensor b = retain_central(net.forward(x), c.crop_fraction);
  double worst = 0.0;
  const Eigen::Index n = a.pixels();
  for (int f = 1; f < c.series_length; ++f)
    worst = std::max(worst, (a.data.middleCols(f * n, n) - b.data.middleCols(f * n, n)).cwiseAbs().maxCoeff());
  return worst;
}

}  // namespace checks
