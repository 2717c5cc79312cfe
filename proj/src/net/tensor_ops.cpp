#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "calfront/errors.hpp"
#include "calfront/net.hpp"

namespace calfront::net {

void NetConfig::validate() const {
  if (height <= 0 || width <= 0) throw ValidationError("network height and width must be positive");
  constexpr int factor = 1 << kStages;
  if (height % factor != 0 || width % factor != 0)
    throw ValidationError("network height and width must be divisible by " + std::to_string(factor) + ", got " +
                          std::to_string(height) + "x" + std::to_string(width));
  if (series_length < 1) throw ValidationError("series_length must be at least 1");
  if (in_channels != 1 && in_channels != 2) throw ValidationError("in_channels must be 1 or 2");
  for (int w : widths)
    if (w < 1) throw ValidationError("layer widths must be positive");
  for (int h : gru_hidden)
    if (h < 1) throw ValidationError("gru hidden sizes must be positive");
  if (classes != kZoneCount) throw ValidationError("classes must be " + std::to_string(kZoneCount));
  if (!(crop_fraction > 0.0 && crop_fraction <= 1.0)) throw ValidationError("crop_fraction must be in (0, 1]");
}

void to_json(nlohmann::json& j, const NetConfig& c) {
  j = nlohmann::json{{"height", c.height},     {"width", c.width},
                     {"series_length", c.series_length}, {"in_channels", c.in_channels},
                     {"widths", c.widths},     {"gru_hidden", c.gru_hidden},
                     {"classes", c.classes},   {"crop_fraction", c.crop_fraction},
                     {"temporal", c.temporal}};
}

void from_json(const nlohmann::json& j, NetConfig& c) {
  NetConfig d;
  c.height = j.value("height", d.height);
  c.width = j.value("width", d.width);
  c.series_length = j.value("series_length", d.series_length);
  c.in_channels = j.value("in_channels", d.in_channels);
  c.widths = j.value("widths", d.widths);
  c.gru_hidden = j.value("gru_hidden", d.gru_hidden);
  c.classes = j.value("classes", d.classes);
  c.crop_fraction = j.value("crop_fraction", d.crop_fraction);
  c.temporal = j.value("temporal", d.temporal);
}

CropWindow central_crop(int height, int width, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("crop fraction must be in (0, 1]");
  auto axis = [fraction](int extent, int& offset, int& size) {
    size = std::clamp(static_cast<int>(std::ceil(extent * fraction - 1e-9)), 1, extent);
    offset = (extent - size) / 2;
  };
  CropWindow w;
  axis(height, w.row0, w.height);
  axis(width, w.col0, w.width);
  return w;
}

Tensor retain_central(const Tensor& logits, double fraction) {
  const CropWindow w = central_crop(logits.height, logits.width, fraction);
  Tensor out(logits.frames, logits.channels, w.height, w.width);
  for (int f = 0; f < logits.frames; ++f)
    for (int r = 0; r < w.height; ++r)
      for (int c = 0; c < w.width; ++c)
        out.data.col((f * w.height + r) * w.width + c) =
            logits.data.col((f * logits.height + r + w.row0) * logits.width + c + w.col0);
  return out;
}

Tensor attach_rock_channel(const Tensor& series, const Grid<std::uint8_t>& mask) {
  if (series.channels != 1) throw ValidationError("rock channel can only be attached to a 1-channel series");
  if (mask.height() != series.height || mask.width() != series.width)
    throw ValidationError("rock mask is " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                          ", series is " + std::to_string(series.height) + "x" + std::to_string(series.width));
  Tensor out(series.frames, 2, series.height, series.width);
  out.data.row(0) = series.data.row(0);
  for (int f = 0; f < series.frames; ++f)
    for (int r = 0; r < series.height; ++r)
      for (int c = 0; c < series.width; ++c) out.at(f, 1, r, c) = mask(r, c) ? 1.0 : 0.0;
  return out;
}

Tensor strip_rock_channel(const Tensor& series) {
  Tensor out(series.frames, 1, series.height, series.width);
  out.data.row(0) = series.data.row(0);
  return out;
}

LossResult cross_entropy(const Tensor& logits, const std::vector<ZoneMap>& labels, const std::vector<bool>& retain,
                         double crop_fraction) {
  if (static_cast<int>(labels.size()) != logits.frames || static_cast<int>(retain.size()) != logits.frames)
    throw ValidationError("loss needs one label map and one retain flag per frame");
  if (logits.channels != kZoneCount) throw ValidationError("logits must have one channel per zone class");
  const CropWindow w = central_crop(logits.height, logits.width, crop_fraction);
  LossResult res;
  res.grad = Tensor(logits.frames, logits.channels, logits.height, logits.width);
  for (int f = 0; f < logits.frames; ++f) {
    if (!retain[static_cast<std::size_t>(f)]) continue;
    const ZoneMap& lab = labels[static_cast<std::size_t>(f)];
    if (lab.height() != logits.height || lab.width() != logits.width)
      throw ValidationError("label map of frame " + std::to_string(f) + " does not match the logits grid");
    res.pixels += static_cast<std::size_t>(w.height) * static_cast<std::size_t>(w.width);
  }
  if (res.pixels == 0) throw ValidationError("no retained frames contribute to the loss");
  const double scale = 1.0 / static_cast<double>(res.pixels);
  for (int f = 0; f < logits.frames; ++f) {
    if (!retain[static_cast<std::size_t>(f)]) continue;
    const ZoneMap& lab = labels[static_cast<std::size_t>(f)];
    for (int r = w.row0; r < w.row0 + w.height; ++r) {
      for (int c = w.col0; c < w.col0 + w.width; ++c) {
        const Eigen::Index col = (static_cast<Eigen::Index>(f) * logits.height + r) * logits.width + c;
        const auto z = logits.data.col(col);
        const double m = z.maxCoeff();
        Eigen::VectorXd e = (z.array() - m).exp().matrix();
        const double sum = e.sum();
        const int k = static_cast<int>(lab(r, c));
        res.loss += (std::log(sum) + m - z(k)) * scale;
        e /= sum;
        e(k) -= 1.0;
        res.grad.data.col(col) = e * scale;
      }
    }
  }
  if (!std::isfinite(res.loss)) throw NumericalError("cross-entropy loss is not finite");
  return res;
}

ZoneMap argmax_zones(const Tensor& logits, int frame) {
  if (frame < 0 || frame >= logits.frames) throw ValidationError("frame index out of range");
  ZoneMap out(logits.height, logits.width);
  for (int r = 0; r < logits.height; ++r)
    for (int c = 0; c < logits.width; ++c) {
      Eigen::Index k = 0;
      logits.data.col((static_cast<Eigen::Index>(frame) * logits.height + r) * logits.width + c).maxCoeff(&k);
      out(r, c) = static_cast<Zone>(k);
    }
  return out;
}

std::array<double, kZoneCount> softmax_at(const Tensor& logits, int frame, int row, int col) {
  const auto z = logits.data.col((static_cast<Eigen::Index>(frame) * logits.height + row) * logits.width + col);
  const double m = z.maxCoeff();
  std::array<double, kZoneCount> p{};
  double sum = 0.0;
  for (int k = 0; k < kZoneCount; ++k) sum += p[static_cast<std::size_t>(k)] = std::exp(z(k) - m);
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace calfront::net
