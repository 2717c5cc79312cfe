#include <map>

#include "calfront/errors.hpp"
#include "calfront/net.hpp"
#include "layers.hpp"

namespace calfront::net {

using detail::Conv2d;
using detail::ResBlock;
using detail::TemporalConv;
using detail::TemporalGru;

// Encoder: stem + 4 downsampling stages, temporal GRUs after stages 2..4.
// Decoder: 4 blocks of ResBlock -> temporal conv (first three) -> upsample -> conv -> skip add.
// Auxiliary input channels (rock mask) also go straight into the 1x1 head.
// 0/1 mask values are small next to the decoder features; the gain lets the head weight them
// strongly within a short training budget.
constexpr double kAuxHeadGain = 4.0;

struct Network::Layers {
  Conv2d stem;
  std::array<Conv2d, kStages> down;
  std::array<Conv2d, kStages> conv;
  std::array<TemporalGru, 3> gru;
  std::array<ResBlock, kStages> res;
  std::array<TemporalConv, 3> tconv;
  std::array<Conv2d, kStages> up;
  Conv2d head;
  std::size_t head_weight = 0;
  std::size_t head_bias = 0;

  // forward caches
  Tensor stem_out;
  std::array<Tensor, kStages> down_out;
  std::array<Tensor, kStages> conv_out;  // after relu, before gru
  std::array<Tensor, kStages> up_out;    // after relu, before skip add
};

Network::Network(const NetConfig& config, std::uint64_t seed) : config_(config), layers_(std::make_unique<Layers>()) {
  config_.validate();
  std::mt19937_64 rng(seed);
  auto& L = *layers_;
  const auto& w = config_.widths;
  L.stem = Conv2d(params_, "stem", config_.in_channels, w[0], 3, 1, rng);
  for (int s = 0; s < kStages; ++s) {
    const std::string n = "enc" + std::to_string(s + 1);
    L.down[s] = Conv2d(params_, n + ".down", w[s], w[s + 1], 3, 2, rng);
    L.conv[s] = Conv2d(params_, n + ".conv", w[s + 1], w[s + 1], 3, 1, rng);
    if (s >= 1) L.gru[s - 1] = TemporalGru(params_, n + ".gru", w[s + 1], config_.gru_hidden[s - 1], rng);
  }
  for (int j = 0; j < kStages; ++j) {
    const int hi = kStages - j;
    const std::string n = "dec" + std::to_string(j + 1);
    L.res[j] = ResBlock(params_, n + ".res", w[hi], rng);
    if (j < 3) L.tconv[j] = TemporalConv(params_, n + ".tconv", w[hi], rng);
    L.up[j] = Conv2d(params_, n + ".up", w[hi], w[hi - 1], 3, 1, rng);
  }
  L.head = Conv2d(params_, "head", w[0] + config_.in_channels - 1, config_.classes, 1, 1, rng);
  L.head_weight = L.head.weight_index();
  L.head_bias = L.head.bias_index();
}

Network::Network(const Checkpoint& checkpoint) : Network(checkpoint.config, 0) {
  std::map<std::string, const Eigen::MatrixXd*> by_name;
  for (const auto& [name, value] : checkpoint.tensors) by_name[name] = &value;
  if (by_name.size() != params_.size())
    throw DataError("checkpoint has " + std::to_string(by_name.size()) + " tensors, network expects " +
                    std::to_string(params_.size()));
  for (auto& p : params_) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw DataError("checkpoint is missing tensor '" + p.name + "'");
    if (it->second->rows() != p.value.rows() || it->second->cols() != p.value.cols())
      throw DataError("checkpoint tensor '" + p.name + "' has the wrong shape");
    p.value = *it->second;
  }
}

Network::~Network() = default;
Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;

Tensor Network::forward(const Tensor& series) {
  if (series.frames != config_.series_length)
    throw ValidationError("series has " + std::to_string(series.frames) + " frames, network expects " +
                          std::to_string(config_.series_length));
  if (series.channels != config_.in_channels)
    throw ValidationError("series has " + std::to_string(series.channels) + " channels, network expects " +
                          std::to_string(config_.in_channels));
  if (series.height != config_.height || series.width != config_.width)
    throw ValidationError("series is " + std::to_string(series.height) + "x" + std::to_string(series.width) +
                          ", network expects " + std::to_string(config_.height) + "x" + std::to_string(config_.width));
  if (series.data.rows() != series.channels ||
      series.data.cols() != static_cast<Eigen::Index>(series.frames) * series.pixels())
    throw ValidationError("series storage does not match its declared shape");

  auto& L = *layers_;
  const bool t = config_.temporal;
  L.stem_out = detail::relu(L.stem.forward(series, params_));
  std::array<Tensor, kStages> skip;
  const Tensor* prev = &L.stem_out;
  for (int s = 0; s < kStages; ++s) {
    L.down_out[s] = detail::relu(L.down[s].forward(*prev, params_));
    L.conv_out[s] = detail::relu(L.conv[s].forward(L.down_out[s], params_));
    skip[s] = s >= 1 ? L.gru[s - 1].forward(L.conv_out[s], params_, t) : L.conv_out[s];
    prev = &skip[s];
  }
  Tensor y = skip[kStages - 1];
  for (int j = 0; j < kStages; ++j) {
    Tensor r = L.res[j].forward(y, params_);
    if (j < 3) r = L.tconv[j].forward(r, params_, t);
    L.up_out[j] = detail::relu(L.up[j].forward(detail::upsample2x(r), params_));
    y = L.up_out[j];
    y.data += (j + 1 < kStages ? skip[kStages - 2 - j] : L.stem_out).data;
  }
  if (series.channels > 1) {
    Tensor h(y.frames, y.channels + series.channels - 1, y.height, y.width);
    h.data << y.data, kAuxHeadGain * series.data.bottomRows(series.channels - 1);
    y = std::move(h);
  }
  Tensor logits = L.head.forward(y, params_);
  if (!logits.data.allFinite()) throw NumericalError("network produced non-finite logits");
  return logits;
}

void Network::backward(const Tensor& grad_logits) {
  auto& L = *layers_;
  Tensor dy = L.head.backward(grad_logits, params_);
  if (config_.in_channels > 1) {
    const int w0 = config_.widths[0];
    Tensor cut(dy.frames, w0, dy.height, dy.width);
    cut.data = dy.data.topRows(w0);
    dy = std::move(cut);
  }
  // Gradients flowing into each skip source: index s for encoder stage s, stem separately.
  std::array<Tensor, kStages> d_skip;
  Tensor d_stem;
  for (int j = kStages - 1; j >= 0; --j) {
    if (j + 1 < kStages)
      d_skip[kStages - 2 - j] = dy;
    else
      d_stem = dy;
    Tensor d = detail::relu_backward(dy, L.up_out[j]);
    d = detail::upsample2x_backward(L.up[j].backward(d, params_));
    if (j < 3) d = L.tconv[j].backward(d, params_);
    dy = L.res[j].backward(d, params_);
  }
  Tensor dc = dy;
  for (int s = kStages - 1; s >= 0; --s) {
    if (s < kStages - 1) dc.data += d_skip[s].data;
    if (s >= 1) dc = L.gru[s - 1].backward(dc, params_);
    Tensor d = detail::relu_backward(dc, L.conv_out[s]);
    d = detail::relu_backward(L.conv[s].backward(d, params_), L.down_out[s]);
    dc = L.down[s].backward(d, params_);
  }
  dc.data += d_stem.data;
  L.stem.backward(detail::relu_backward(dc, L.stem_out), params_);
}

void Network::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void Network::zero_classifier() {
  params_[layers_->head_weight].value.setZero();
  params_[layers_->head_bias].value.setZero();
}

Checkpoint Network::to_checkpoint(const TrainingMeta& meta) const {
  Checkpoint c;
  c.config = config_;
  c.meta = meta;
  for (const auto& p : params_) c.tensors.emplace_back(p.name, p.value);
  return c;
}

}  // namespace calfront::net
